//! Ground truth and tracker result logs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

pub const DEFAULT_FRAME_RATE: f64 = 30.0;

/// Fully annotated sequence sampled at a fixed world frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSequence {
    pub name: String,
    pub frame_rate: f64,
    pub boxes: Vec<BoundingBox>,
    pub attributes: Option<BTreeMap<String, bool>>,
    /// Image file per frame, when the sequence has pixels.
    pub frame_paths: Option<Vec<PathBuf>>,
}

impl GroundTruthSequence {
    pub fn new(name: impl Into<String>, frame_rate: f64, boxes: Vec<BoundingBox>) -> Result<Self> {
        let seq = Self {
            name: name.into(),
            frame_rate,
            boxes,
            attributes: None,
            frame_paths: None,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn with_attributes(mut self, attributes: BTreeMap<String, bool>) -> Self {
        self.attributes = Some(attributes);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.boxes.is_empty() {
            return Err(Error::InvalidSequence(format!("{}: no frames", self.name)));
        }
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(Error::InvalidSequence(format!(
                "{}: frame rate must be positive, got {}",
                self.name, self.frame_rate
            )));
        }
        for (i, b) in self.boxes.iter().enumerate() {
            if !b.is_valid() {
                return Err(Error::InvalidSequence(format!(
                    "{}: frame {i} has invalid box {:?}",
                    self.name,
                    b.to_array()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// World timestamp `i / frame_rate` of frame `i`.
    pub fn timestamp(&self, i: usize) -> f64 {
        world_time(i, self.frame_rate)
    }

    pub fn has_attribute(&self, name: &str) -> bool {
        self.attributes
            .as_ref()
            .and_then(|a| a.get(name).copied())
            .unwrap_or(false)
    }
}

/// World timestamp of frame `i` at `frame_rate` frames per second.
pub fn world_time(i: usize, frame_rate: f64) -> f64 {
    i as f64 / frame_rate
}

/// One processed frame: input frame id, output box and the time the output became available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawEntry {
    pub frame: usize,
    pub bbox: BoundingBox,
    pub finished_at: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawResultLog {
    pub entries: Vec<RawEntry>,
}

impl RawResultLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn frames(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.frame).collect()
    }

    pub fn finish_times(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.finished_at).collect()
    }

    /// Checks ordering invariants against a sequence of `total_frames` frames.
    pub fn validate(&self, total_frames: usize) -> Result<()> {
        if self.entries.len() > total_frames {
            return Err(Error::InvalidLog(format!(
                "{} entries for {total_frames} frames",
                self.entries.len()
            )));
        }
        for (k, e) in self.entries.iter().enumerate() {
            if e.frame >= total_frames {
                return Err(Error::InvalidLog(format!("entry {k}: frame {} out of range", e.frame)));
            }
            if !e.finished_at.is_finite() {
                return Err(Error::InvalidLog(format!("entry {k}: non-finite timestamp")));
            }
            if k > 0 {
                let prev = &self.entries[k - 1];
                if e.frame <= prev.frame {
                    return Err(Error::InvalidLog(format!("entry {k}: frame ids not increasing")));
                }
                if e.finished_at <= prev.finished_at {
                    return Err(Error::InvalidLog(format!("entry {k}: timestamps not increasing")));
                }
            }
        }
        Ok(())
    }
}

/// Source of the output evaluated at a world frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pairing {
    /// No output finished yet; the initialization box stands in.
    Init,
    /// Latest finished output, identified by its input frame id.
    Frame(usize),
}

impl Pairing {
    /// World frame id the evaluated output refers to (`Init` counts as frame 0).
    pub fn frame(self) -> usize {
        match self {
            Pairing::Init => 0,
            Pairing::Frame(j) => j,
        }
    }
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pairing::Init => f.write_str("init"),
            Pairing::Frame(j) => write!(f, "{j}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedEntry {
    pub frame: usize,
    pub source: Pairing,
    pub bbox: BoundingBox,
}

/// One evaluated output per world frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairedResultLog {
    pub entries: Vec<PairedEntry>,
}

impl PairedResultLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn boxes(&self) -> Vec<BoundingBox> {
        self.entries.iter().map(|e| e.bbox).collect()
    }

    pub fn sources(&self) -> Vec<Pairing> {
        self.entries.iter().map(|e| e.source).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev: Option<usize> = None;
        for (i, e) in self.entries.iter().enumerate() {
            if e.frame != i {
                return Err(Error::InvalidLog(format!("entry {i} labelled frame {}", e.frame)));
            }
            let src = e.source.frame();
            if src > i {
                return Err(Error::InvalidLog(format!("frame {i} paired with future frame {src}")));
            }
            if prev.is_some_and(|p| src < p) {
                return Err(Error::InvalidLog(format!("pairing decreases at frame {i}")));
            }
            prev = Some(src);
        }
        Ok(())
    }
}

/// Evaluation protocol for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Every frame processed, output `i` scored against ground truth `i`.
    Offline,
    /// Latency-aware, stale outputs scored as-is.
    LaeBare,
    /// Latency-aware with both forecasters.
    LaePvt,
    /// Latency-aware with the search-region forecaster only.
    LaePreOnly,
    /// Latency-aware with the output forecaster only.
    LaePostOnly,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Offline,
        Mode::LaeBare,
        Mode::LaePvt,
        Mode::LaePreOnly,
        Mode::LaePostOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Offline => "offline",
            Mode::LaeBare => "lae_bare",
            Mode::LaePvt => "lae_pvt",
            Mode::LaePreOnly => "lae_pre_only",
            Mode::LaePostOnly => "lae_post_only",
        }
    }

    pub fn uses_pre_forecaster(self) -> bool {
        matches!(self, Mode::LaePvt | Mode::LaePreOnly)
    }

    pub fn uses_post_forecaster(self) -> bool {
        matches!(self, Mode::LaePvt | Mode::LaePostOnly)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode {s:?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps_are_exact_ratios() {
        let seq = GroundTruthSequence::new("s", 30.0, vec![BoundingBox::new(0., 0., 1., 1.); 31]).unwrap();
        assert_eq!(seq.timestamp(0), 0.0);
        assert_eq!(seq.timestamp(30), 1.0);
        assert_eq!(seq.timestamp(3), 3.0 / 30.0);
    }

    #[test]
    fn sequence_rejects_empty_and_invalid() {
        assert!(GroundTruthSequence::new("s", 30.0, vec![]).is_err());
        assert!(GroundTruthSequence::new("s", 0.0, vec![BoundingBox::default()]).is_err());
        assert!(GroundTruthSequence::new("s", 30.0, vec![BoundingBox::new(f64::NAN, 0., 1., 1.)]).is_err());
    }

    #[test]
    fn raw_log_ordering() {
        let b = BoundingBox::default();
        let mk = |frame, finished_at| RawEntry {
            frame,
            bbox: b,
            finished_at,
        };
        let ok = RawResultLog {
            entries: vec![mk(0, 0.1), mk(3, 0.2)],
        };
        assert!(ok.validate(4).is_ok());
        assert!(ok.validate(3).is_err());
        let dup = RawResultLog {
            entries: vec![mk(0, 0.1), mk(0, 0.2)],
        };
        assert!(dup.validate(4).is_err());
        let late = RawResultLog {
            entries: vec![mk(0, 0.2), mk(1, 0.2)],
        };
        assert!(late.validate(4).is_err());
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.as_str()));
        }
        assert!("pvt".parse::<Mode>().is_err());
    }
}
