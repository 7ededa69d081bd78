//! Normalized cross-correlation template tracker.

use std::path::Path;

use super::{FrameRef, Tracker};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Search window side relative to the prior box.
pub const DEFAULT_SEARCH_SCALE: f64 = 2.0;

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, fill: f32) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    /// Loads a PGM or PNG file as luminance.
    pub fn open(path: &Path) -> Result<Self> {
        let img = image::open(path)?.to_luma32f();
        Ok(Self {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.into_raw(),
        })
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Copies `patch` with its top-left corner at `(x, y)`, clipped to the image.
    pub fn paste(&mut self, patch: &GrayImage, x: usize, y: usize) {
        for py in 0..patch.height {
            for px in 0..patch.width {
                if x + px < self.width && y + py < self.height {
                    self.set(x + px, y + py, patch.get(px, py));
                }
            }
        }
    }
}

/// Zero-mean template cut from the initialization frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub width: usize,
    pub height: usize,
    centered: Vec<f64>,
    norm: f64,
}

impl Template {
    /// Cuts the (rounded, clipped) box out of `image`. `None` if nothing remains.
    pub fn capture(image: &GrayImage, b: &BoundingBox) -> Option<Self> {
        let x0 = b.x.round().max(0.0) as usize;
        let y0 = b.y.round().max(0.0) as usize;
        let x1 = ((b.x + b.w).round().max(0.0) as usize).min(image.width);
        let y1 = ((b.y + b.h).round().max(0.0) as usize).min(image.height);
        if x1 <= x0 || y1 <= y0 {
            return None;
        }
        let (width, height) = (x1 - x0, y1 - y0);
        let pixels: Vec<f64> = (y0..y1)
            .flat_map(|y| (x0..x1).map(move |x| (x, y)))
            .map(|(x, y)| image.get(x, y) as f64)
            .collect();
        Some(Self::from_pixels(width, height, pixels))
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        let mean = pixels.iter().sum::<f64>() / pixels.len() as f64;
        let centered: Vec<f64> = pixels.iter().map(|p| p - mean).collect();
        let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self {
            width,
            height,
            centered,
            norm,
        }
    }

    /// NCC of the template against the image patch at `(x, y)`; `None` when either side is flat.
    pub fn correlate(&self, image: &GrayImage, x: usize, y: usize) -> Option<f64> {
        if self.norm == 0.0 {
            return None;
        }
        let n = (self.width * self.height) as f64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut cross = 0.0;
        for ty in 0..self.height {
            for tx in 0..self.width {
                let p = image.get(x + tx, y + ty) as f64;
                sum += p;
                sum_sq += p * p;
                cross += p * self.centered[ty * self.width + tx];
            }
        }
        let var = sum_sq - sum * sum / n;
        if var <= 1e-12 {
            return None;
        }
        // Σ t'·(p − p̄) = Σ t'·p since Σ t' = 0
        Some(cross / (self.norm * var.sqrt()))
    }
}

/// Best NCC placement of `template` inside the search window around `prior`.
///
/// The window is the prior box scaled by `search_scale` about its center and
/// clipped to the image. Ties go to the smallest row, then column. Returns the
/// prior when no placement has a defined score.
pub fn template_track(image: &GrayImage, prior: &BoundingBox, template: &Template, search_scale: f64) -> BoundingBox {
    let (cx, cy) = prior.center();
    let (hw, hh) = (prior.w * search_scale / 2.0, prior.h * search_scale / 2.0);
    let clip = |v: f64, hi: usize| v.round().clamp(0.0, hi as f64) as usize;
    let (x0, x1) = (clip(cx - hw, image.width), clip(cx + hw, image.width));
    let (y0, y1) = (clip(cy - hh, image.height), clip(cy + hh, image.height));
    if x1 < x0 + template.width || y1 < y0 + template.height {
        return *prior;
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for y in y0..=(y1 - template.height) {
        for x in x0..=(x1 - template.width) {
            if let Some(score) = template.correlate(image, x, y) {
                if best.is_none_or(|(s, _, _)| score > s) {
                    best = Some((score, x, y));
                }
            }
        }
    }
    match best {
        Some((_, x, y)) => BoundingBox::new(x as f64, y as f64, template.width as f64, template.height as f64),
        None => *prior,
    }
}

/// Supplies the image for a frame.
pub trait FrameSource {
    fn frame(&self, frame: &FrameRef<'_>) -> Result<GrayImage>;
}

/// Frames held in memory, indexed by frame id.
#[derive(Debug, Clone, Default)]
pub struct InMemoryFrames(pub Vec<GrayImage>);

impl FrameSource for InMemoryFrames {
    fn frame(&self, frame: &FrameRef<'_>) -> Result<GrayImage> {
        self.0.get(frame.id).cloned().ok_or_else(|| Error::Tracker {
            frame: frame.id,
            message: "no image for frame".into(),
        })
    }
}

/// Decodes the image file named by the frame reference.
#[derive(Debug, Clone, Copy, Default)]
pub struct ImageFiles;

impl FrameSource for ImageFiles {
    fn frame(&self, frame: &FrameRef<'_>) -> Result<GrayImage> {
        let path = frame.path.ok_or_else(|| Error::Tracker {
            frame: frame.id,
            message: "sequence has no image files".into(),
        })?;
        GrayImage::open(path)
    }
}

pub struct TemplateTracker {
    source: Box<dyn FrameSource + Send>,
    search_scale: f64,
    template: Option<Template>,
}

impl TemplateTracker {
    pub fn new(source: Box<dyn FrameSource + Send>, search_scale: f64) -> Self {
        Self {
            source,
            search_scale,
            template: None,
        }
    }
}

impl Tracker for TemplateTracker {
    fn initialize(&mut self, frame: &FrameRef<'_>, init: &BoundingBox) -> Result<()> {
        let image = self.source.frame(frame)?;
        self.template = Some(Template::capture(&image, init).ok_or_else(|| Error::Tracker {
            frame: frame.id,
            message: "initial box lies outside the image".into(),
        })?);
        Ok(())
    }

    fn track(&mut self, frame: &FrameRef<'_>, prior: &BoundingBox) -> Result<BoundingBox> {
        let template = self.template.as_ref().ok_or_else(|| Error::Tracker {
            frame: frame.id,
            message: "tracker not initialized".into(),
        })?;
        let image = self.source.frame(frame)?;
        Ok(template_track(&image, prior, template, self.search_scale))
    }
}
