use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::model::{GroundTruthSequence, DEFAULT_FRAME_RATE};

/// Constant velocity (pixels per frame for x, y, w, h) held for `frames` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub frames: usize,
    pub velocity: [f64; 4],
}

/// Piecewise constant-velocity trajectory. Steps past the last segment keep its velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSpec {
    pub name: String,
    pub frames: usize,
    pub initial: [f64; 4],
    #[serde(default)]
    pub segments: Vec<Segment>,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<BTreeMap<String, bool>>,
}

fn default_frame_rate() -> f64 {
    DEFAULT_FRAME_RATE
}

impl MotionSpec {
    /// Single-segment linear motion.
    pub fn linear(name: impl Into<String>, frames: usize, initial: [f64; 4], velocity: [f64; 4]) -> Self {
        Self {
            name: name.into(),
            frames,
            initial,
            segments: vec![Segment { frames, velocity }],
            frame_rate: DEFAULT_FRAME_RATE,
            attributes: None,
        }
    }
}

/// Box at `frame`: the initial box plus velocity times the steps spent in each segment.
fn box_at(spec: &MotionSpec, frame: usize) -> [f64; 4] {
    let mut b = spec.initial;
    let mut start = 0;
    for (n, seg) in spec.segments.iter().enumerate() {
        let last = n + 1 == spec.segments.len();
        let steps = if last {
            frame.saturating_sub(start)
        } else {
            frame.saturating_sub(start).min(seg.frames)
        };
        for (c, v) in b.iter_mut().zip(seg.velocity) {
            *c += v * steps as f64;
        }
        start += seg.frames;
    }
    b
}

pub fn synth_sequence(spec: &MotionSpec) -> Result<GroundTruthSequence> {
    if spec.frames == 0 {
        return Err(Error::InvalidSequence(format!("{}: no frames", spec.name)));
    }
    let boxes: Vec<BoundingBox> = (0..spec.frames).map(|i| BoundingBox::from(box_at(spec, i))).collect();
    if let Some((i, b)) = boxes.iter().enumerate().find(|(_, b)| !(b.w >= 1.0 && b.h >= 1.0)) {
        return Err(Error::InvalidSequence(format!(
            "{}: frame {i} box {:?} is smaller than one pixel",
            spec.name,
            b.to_array()
        )));
    }
    let mut seq = GroundTruthSequence::new(spec.name.clone(), spec.frame_rate, boxes)?;
    seq.attributes = spec.attributes.clone();
    Ok(seq)
}
