pub mod error;
pub mod geometry;
pub mod model;
pub mod schedule;

pub use error::{Error, Result};
pub use geometry::{center_error, iou, BoundingBox};
pub use model::{GroundTruthSequence, Mode, PairedEntry, PairedResultLog, Pairing, RawEntry, RawResultLog};
pub mod forecaster;
pub mod io;
pub mod metrics;
pub mod runner;
pub mod trackers;
