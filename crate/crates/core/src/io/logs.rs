use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::fixed;
use crate::error::{io_err, Error, Result};
use crate::geometry::BoundingBox;
use crate::model::{PairedEntry, PairedResultLog, Pairing, RawEntry, RawResultLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogKind {
    Raw,
    Paired,
}

/// First line of every log file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHeader {
    pub log: LogKind,
    pub sequence: String,
    pub mode: String,
    /// Length of the world frame sequence.
    pub frames: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    k: usize,
    j: usize,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    t_r: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairedLine {
    i: usize,
    psi: Value,
    #[serde(rename = "box")]
    bbox: [f64; 4],
}

fn box_json(b: &BoundingBox) -> String {
    format!("[{},{},{},{}]", fixed(b.x), fixed(b.y), fixed(b.w), fixed(b.h))
}

fn header_line(h: &LogHeader) -> String {
    serde_json::to_string(h).expect("header serializes") + "\n"
}

pub fn format_raw_log(header: &LogHeader, log: &RawResultLog) -> String {
    let mut out = header_line(header);
    for (k, e) in log.entries.iter().enumerate() {
        out += &format!(
            "{{\"k\":{k},\"j\":{},\"box\":{},\"t_r\":{}}}\n",
            e.frame,
            box_json(&e.bbox),
            fixed(e.finished_at)
        );
    }
    out
}

pub fn format_paired_log(header: &LogHeader, log: &PairedResultLog) -> String {
    let mut out = header_line(header);
    for e in &log.entries {
        let psi = match e.source {
            Pairing::Init => "\"init\"".to_string(),
            Pairing::Frame(j) => j.to_string(),
        };
        out += &format!("{{\"i\":{},\"psi\":{psi},\"box\":{}}}\n", e.frame, box_json(&e.bbox));
    }
    out
}

fn split_header<'a>(text: &'a str, path: &Path, kind: LogKind) -> Result<(LogHeader, Vec<(usize, &'a str)>)> {
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l));
    let perr = |line, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let (_, first) = lines.next().ok_or_else(|| perr(1, "empty log".into()))?;
    let header: LogHeader = serde_json::from_str(first).map_err(|e| perr(1, format!("bad header: {e}")))?;
    if header.log != kind {
        return Err(perr(1, format!("expected a {kind:?} log, found {:?}", header.log)));
    }
    let body = lines.filter(|(_, l)| !l.trim().is_empty()).collect();
    Ok((header, body))
}

fn parse_box(v: [f64; 4], path: &Path, line: usize) -> Result<BoundingBox> {
    BoundingBox::try_new(v[0], v[1], v[2], v[3]).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    })
}

pub fn parse_raw_log(text: &str, path: &Path) -> Result<(LogHeader, RawResultLog)> {
    let (header, body) = split_header(text, path, LogKind::Raw)?;
    let mut log = RawResultLog::default();
    for (line, l) in body {
        let perr = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let rec: RawLine = serde_json::from_str(l).map_err(|e| perr(e.to_string()))?;
        if rec.k != log.entries.len() {
            return Err(perr(format!("expected k = {}, found {}", log.entries.len(), rec.k)));
        }
        log.entries.push(RawEntry {
            frame: rec.j,
            bbox: parse_box(rec.bbox, path, line)?,
            finished_at: rec.t_r,
        });
    }
    log.validate(header.frames)?;
    Ok((header, log))
}

pub fn parse_paired_log(text: &str, path: &Path) -> Result<(LogHeader, PairedResultLog)> {
    let (header, body) = split_header(text, path, LogKind::Paired)?;
    let mut log = PairedResultLog::default();
    for (line, l) in body {
        let perr = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let rec: PairedLine = serde_json::from_str(l).map_err(|e| perr(e.to_string()))?;
        let source = match &rec.psi {
            Value::String(s) if s == "init" => Pairing::Init,
            Value::Number(n) => Pairing::Frame(
                n.as_u64()
                    .and_then(|v| usize::try_from(v).ok())
                    .ok_or_else(|| perr(format!("bad psi {n}")))?,
            ),
            other => return Err(perr(format!("psi must be \"init\" or a frame id, got {other}"))),
        };
        log.entries.push(PairedEntry {
            frame: rec.i,
            source,
            bbox: parse_box(rec.bbox, path, line)?,
        });
    }
    if log.len() != header.frames {
        return Err(Error::InvalidLog(format!(
            "{}: {} paired entries for {} frames",
            path.display(),
            log.len(),
            header.frames
        )));
    }
    log.validate()?;
    Ok((header, log))
}

pub fn write_raw_log(path: &Path, header: &LogHeader, log: &RawResultLog) -> Result<()> {
    std::fs::write(path, format_raw_log(header, log)).map_err(io_err(path))
}

pub fn write_paired_log(path: &Path, header: &LogHeader, log: &PairedResultLog) -> Result<()> {
    std::fs::write(path, format_paired_log(header, log)).map_err(io_err(path))
}

pub fn read_raw_log(path: &Path) -> Result<(LogHeader, RawResultLog)> {
    parse_raw_log(&std::fs::read_to_string(path).map_err(io_err(path))?, path)
}

pub fn read_paired_log(path: &Path) -> Result<(LogHeader, PairedResultLog)> {
    parse_paired_log(&std::fs::read_to_string(path).map_err(io_err(path))?, path)
}
