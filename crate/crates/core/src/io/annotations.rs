use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::geometry::BoundingBox;
use crate::model::{GroundTruthSequence, DEFAULT_FRAME_RATE};

/// Index file listing the sequences of a dataset directory.
pub const DATASET_FILE: &str = "dataset.json";

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// One `x,y,w,h` box per line; commas, tabs or spaces separate fields.
pub fn parse_annotations(text: &str, path: &Path) -> Result<Vec<BoundingBox>> {
    let lines: Vec<&str> = text.trim_end().lines().collect();
    let mut boxes = Vec::with_capacity(lines.len());
    for (n, line) in lines.iter().enumerate() {
        let line_no = n + 1;
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.is_empty() {
            return Err(parse_error(
                path,
                line_no,
                "empty annotation (absent target frames are not supported)",
            ));
        }
        if fields.len() != 4 {
            return Err(parse_error(
                path,
                line_no,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let mut v = [0.0; 4];
        for (slot, field) in v.iter_mut().zip(&fields) {
            *slot = field
                .parse::<f64>()
                .map_err(|_| parse_error(path, line_no, format!("not a number: {field:?}")))?;
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(parse_error(
                path,
                line_no,
                "missing annotation (NaN); absent target frames are not supported",
            ));
        }
        let b = BoundingBox::from(v);
        if b.w < 0.0 || b.h < 0.0 {
            return Err(parse_error(path, line_no, "negative box size"));
        }
        boxes.push(b);
    }
    if boxes.is_empty() {
        return Err(parse_error(path, 1, "no annotations"));
    }
    Ok(boxes)
}

fn default_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".to_string())
}

/// Reads an annotation file as a sequence at the default frame rate.
pub fn load_annotations(path: &Path) -> Result<GroundTruthSequence> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    GroundTruthSequence::new(default_name(path), DEFAULT_FRAME_RATE, parse_annotations(&text, path)?)
}

pub fn format_annotations(boxes: &[BoundingBox]) -> String {
    boxes
        .iter()
        .map(|b| format!("{},{},{},{}\n", b.x, b.y, b.w, b.h))
        .collect()
}

pub fn write_annotations(path: &Path, boxes: &[BoundingBox]) -> Result<()> {
    std::fs::write(path, format_annotations(boxes)).map_err(io_err(path))
}

/// Reads a row of 0/1 flags in `vocabulary` order (one file per sequence).
pub fn load_attribute_flags(path: &Path, vocabulary: &[String]) -> Result<BTreeMap<String, bool>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let fields: Vec<&str> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty())
        .collect();
    if fields.len() != vocabulary.len() {
        return Err(parse_error(
            path,
            1,
            format!("expected {} attribute flags, found {}", vocabulary.len(), fields.len()),
        ));
    }
    vocabulary
        .iter()
        .zip(fields)
        .map(|(name, f)| match f {
            "0" => Ok((name.clone(), false)),
            "1" => Ok((name.clone(), true)),
            other => Err(parse_error(
                path,
                1,
                format!("attribute flag must be 0 or 1, got {other:?}"),
            )),
        })
        .collect()
}

fn default_frame_rate() -> f64 {
    DEFAULT_FRAME_RATE
}

/// Where a sequence's files live. Relative paths resolve against the dataset root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceManifest {
    pub name: String,
    pub annotation: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<BTreeMap<String, bool>>,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
}

impl SequenceManifest {
    pub fn load(&self, root: &Path) -> Result<GroundTruthSequence> {
        let path = root.join(&self.annotation);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let mut seq = GroundTruthSequence::new(self.name.clone(), self.frame_rate, parse_annotations(&text, &path)?)?;
        seq.attributes = self.attributes.clone();
        if let Some(dir) = &self.images {
            let dir = root.join(dir);
            let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
                .map_err(io_err(&dir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm" | "jpg" | "jpeg"))
                })
                .collect();
            files.sort();
            if files.len() < seq.len() {
                return Err(Error::InvalidSequence(format!(
                    "{}: {} images for {} annotated frames",
                    self.name,
                    files.len(),
                    seq.len()
                )));
            }
            files.truncate(seq.len());
            seq.frame_paths = Some(files);
        }
        Ok(seq)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetIndex {
    sequences: Vec<SequenceManifest>,
}

/// Reads `dataset.json` from `root`.
pub fn read_dataset(root: &Path) -> Result<Vec<SequenceManifest>> {
    let path = root.join(DATASET_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let index: DatasetIndex = serde_json::from_str(&text).map_err(|e| parse_error(&path, e.line(), e.to_string()))?;
    Ok(index.sequences)
}

pub fn write_dataset(root: &Path, sequences: &[SequenceManifest]) -> Result<()> {
    let path = root.join(DATASET_FILE);
    let index = DatasetIndex {
        sequences: sequences.to_vec(),
    };
    let text = serde_json::to_string_pretty(&index).expect("manifests serialize") + "\n";
    std::fs::write(&path, text).map_err(io_err(&path))
}
