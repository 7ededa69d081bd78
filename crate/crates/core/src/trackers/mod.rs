//! Tracker abstraction and built-in trackers.

use std::path::Path;

use crate::error::Result;
use crate::geometry::BoundingBox;

mod external;
mod synthetic;
mod template;

pub use external::{serve, ExternalTracker, Request, Response, DEFAULT_TIMEOUT};
pub use synthetic::{synthetic_track, SyntheticConfig, SyntheticTracker};
pub use template::{
    template_track, FrameSource, GrayImage, ImageFiles, InMemoryFrames, Template, TemplateTracker, DEFAULT_SEARCH_SCALE,
};

/// Frame handed to a tracker: world frame id plus the image file, if any.
#[derive(Debug, Clone, Copy)]
pub struct FrameRef<'a> {
    pub id: usize,
    pub path: Option<&'a Path>,
}

impl<'a> FrameRef<'a> {
    pub fn new(id: usize) -> Self {
        Self { id, path: None }
    }

    pub fn with_path(id: usize, path: &'a Path) -> Self {
        Self { id, path: Some(path) }
    }
}

/// Single-object tracker.
///
/// `prior` is where the caller expects the target; trackers center their
/// search on it or ignore it.
pub trait Tracker {
    fn initialize(&mut self, frame: &FrameRef<'_>, init: &BoundingBox) -> Result<()>;

    fn track(&mut self, frame: &FrameRef<'_>, prior: &BoundingBox) -> Result<BoundingBox>;

    /// Seconds the last call spent inside the tracker, when it measures them itself.
    fn last_elapsed(&self) -> Option<f64> {
        None
    }
}

impl<T: Tracker + ?Sized> Tracker for Box<T> {
    fn initialize(&mut self, frame: &FrameRef<'_>, init: &BoundingBox) -> Result<()> {
        (**self).initialize(frame, init)
    }

    fn track(&mut self, frame: &FrameRef<'_>, prior: &BoundingBox) -> Result<BoundingBox> {
        (**self).track(frame, prior)
    }

    fn last_elapsed(&self) -> Option<f64> {
        (**self).last_elapsed()
    }
}

/// Returns the prior unchanged.
#[derive(Debug, Clone, Default)]
pub struct EchoTracker;

impl Tracker for EchoTracker {
    fn initialize(&mut self, _frame: &FrameRef<'_>, _init: &BoundingBox) -> Result<()> {
        Ok(())
    }

    fn track(&mut self, _frame: &FrameRef<'_>, prior: &BoundingBox) -> Result<BoundingBox> {
        Ok(*prior)
    }
}
