//! `run`, `eval`, `compare`, `report` and `synth`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use lae_core::io::{
    format_annotations, parse_annotations, read_dataset, read_paired_log, read_report_csv, synth_sequence,
    write_dataset, write_paired_log, write_raw_log, write_report, LogHeader, LogKind, MotionSpec, ReportFiles,
    ReportRow, SequenceManifest, REPORT_FILE,
};
use lae_core::metrics::{format_delta, improvement_delta, EvaluationReport, Metrics, ReportCell};
use lae_core::runner::{run, RunConfig};
use lae_core::schedule::{read_trace, speed, write_trace};
use lae_core::{GroundTruthSequence, Mode};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{sequence_seed, Experiment, LatencySpec, Source};

pub const CONFIG_FILE: &str = "config.json";
pub const RUN_FILE: &str = "run.json";
pub const FAILURES_FILE: &str = "failures.txt";
pub const TRACE_COPY: &str = "latency_trace.txt";
pub const GROUND_TRUTH_FILE: &str = "groundtruth.txt";
pub const RAW_FILE: &str = "raw.jsonl";
pub const PAIRED_FILE: &str = "paired.jsonl";
pub const CELL_TRACE_FILE: &str = "trace.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceEntry {
    pub name: String,
    pub frames: usize,
    pub frame_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<BTreeMap<String, bool>>,
}

/// What a run directory contains; read back by `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tracker: String,
    pub modes: Vec<Mode>,
    pub attributes: Vec<String>,
    pub sequences: Vec<SequenceEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub sequence: String,
    pub mode: Mode,
    pub message: String,
}

#[derive(Debug)]
pub struct RunSummary {
    pub cells: usize,
    pub failures: Vec<CellFailure>,
    pub report: Option<ReportFiles>,
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    write(path, serde_json::to_string_pretty(value)? + "\n")
}

/// Accepts one motion spec or an array of them.
pub fn load_motion_specs(path: &Path) -> anyhow::Result<Vec<MotionSpec>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<MotionSpec>),
        One(MotionSpec),
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let specs = match serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))? {
        OneOrMany::Many(v) => v,
        OneOrMany::One(s) => vec![s],
    };
    Ok(specs)
}

fn check_name(name: &str) -> anyhow::Result<()> {
    if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
        bail!("sequence name {name:?} cannot be used as a directory name");
    }
    Ok(())
}

fn load_sequences(source: &Source) -> anyhow::Result<Vec<(String, anyhow::Result<GroundTruthSequence>)>> {
    let list: Vec<(String, anyhow::Result<GroundTruthSequence>)> = match source {
        Source::Dataset(root) => read_dataset(root)?
            .into_iter()
            .map(|m| {
                let seq = m.load(root).map_err(anyhow::Error::from);
                (m.name, seq)
            })
            .collect(),
        Source::Synthetic(specs) => specs
            .iter()
            .map(|s| (s.name.clone(), synth_sequence(s).map_err(anyhow::Error::from)))
            .collect(),
    };
    let mut seen = BTreeSet::new();
    for (name, _) in &list {
        check_name(name)?;
        if !seen.insert(name.clone()) {
            bail!("duplicate sequence name {name:?}");
        }
    }
    Ok(list)
}

/// The layered config with paths made self-contained for `out`.
fn effective_config(exp: &Experiment, out: &Path) -> anyhow::Result<crate::config::ConfigFile> {
    let mut file = exp.file.clone();
    if let Source::Dataset(root) = &exp.source {
        file.dataset = Some(std::path::absolute(root)?);
    }
    if let LatencySpec::Trace { path } = &exp.latency {
        let times = read_trace(path)?;
        write_trace(&out.join(TRACE_COPY), &times)?;
        file.latency = Some(format!("trace:{TRACE_COPY}"));
    }
    Ok(file)
}

fn run_cell(exp: &Experiment, seq: &GroundTruthSequence, index: usize, mode: Mode, dir: &Path) -> anyhow::Result<()> {
    let seed = sequence_seed(exp.seed, index);
    let latency = exp.latency.model(exp.init_latency, seed)?;
    let mut trk = exp.make_tracker(seq, seed)?;
    let output = run(seq, &mut trk, &RunConfig::new(mode, latency))?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let header = |log| LogHeader {
        log,
        sequence: seq.name.clone(),
        mode: mode.as_str().to_string(),
        frames: seq.len(),
    };
    write_raw_log(&dir.join(RAW_FILE), &header(LogKind::Raw), &output.raw)?;
    write_paired_log(&dir.join(PAIRED_FILE), &header(LogKind::Paired), &output.paired)?;
    write_trace(&dir.join(CELL_TRACE_FILE), &output.processing_times)?;
    Ok(())
}

/// Runs every sequence under every mode and evaluates what succeeded.
pub fn cmd_run(exp: &Experiment, out: &Path) -> anyhow::Result<RunSummary> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let sequences = load_sequences(&exp.source)?;
    write_json(&out.join(CONFIG_FILE), &effective_config(exp, out)?)?;

    let tracker = exp.tracker_label();
    let mut failures = Vec::new();
    let mut loaded = Vec::new();
    for (index, (name, seq)) in sequences.into_iter().enumerate() {
        match seq {
            Ok(seq) => {
                let dir = out.join(&seq.name);
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                write(&dir.join(GROUND_TRUTH_FILE), format_annotations(&seq.boxes))?;
                loaded.push((index, seq));
            }
            Err(e) => failures.extend(exp.modes.iter().map(|&mode| CellFailure {
                sequence: name.clone(),
                mode,
                message: format!("{e:#}"),
            })),
        }
    }

    let cells: Vec<(usize, &GroundTruthSequence, Mode)> = loaded
        .iter()
        .flat_map(|(i, s)| exp.modes.iter().map(move |&m| (*i, s, m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(exp.jobs).build()?;
    let results: Vec<anyhow::Result<()>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, seq, mode)| run_cell(exp, seq, i, mode, &out.join(&seq.name).join(mode.as_str())))
            .collect()
    });
    for (&(_, seq, mode), r) in cells.iter().zip(results) {
        if let Err(e) = r {
            failures.push(CellFailure {
                sequence: seq.name.clone(),
                mode,
                message: format!("{e:#}"),
            });
        }
    }

    let manifest = RunManifest {
        tracker,
        modes: exp.modes.clone(),
        attributes: exp.attributes.clone(),
        sequences: loaded
            .iter()
            .map(|(_, s)| SequenceEntry {
                name: s.name.clone(),
                frames: s.len(),
                frame_rate: s.frame_rate,
                attributes: s.attributes.clone(),
            })
            .collect(),
    };
    write_json(&out.join(RUN_FILE), &manifest)?;

    let failures_path = out.join(FAILURES_FILE);
    if failures.is_empty() {
        if failures_path.exists() {
            std::fs::remove_file(&failures_path)?;
        }
    } else {
        let text: String = failures
            .iter()
            .map(|f| {
                format!(
                    "{}\t{}\t{}\n",
                    f.sequence,
                    f.mode.as_str(),
                    f.message.replace('\n', " ")
                )
            })
            .collect();
        write(&failures_path, text)?;
    }

    let total = manifest.sequences.len() * exp.modes.len()
        + failures
            .iter()
            .filter(|f| !manifest.sequences.iter().any(|s| s.name == f.sequence))
            .count();
    let report = if failures.len() < total {
        Some(cmd_eval(out, out)?)
    } else {
        None
    };
    Ok(RunSummary {
        cells: total,
        failures,
        report,
    })
}

/// Scores the logs of a run directory and writes the report files to `out`.
pub fn cmd_eval(run_dir: &Path, out: &Path) -> anyhow::Result<ReportFiles> {
    let manifest_path = run_dir.join(RUN_FILE);
    let text =
        std::fs::read_to_string(&manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", manifest_path.display()))?;

    let mut cells = Vec::new();
    for entry in &manifest.sequences {
        let dir = run_dir.join(&entry.name);
        let gt_path = dir.join(GROUND_TRUTH_FILE);
        let gt_text = std::fs::read_to_string(&gt_path)
            .with_context(|| format!("missing ground truth for {}: {}", entry.name, gt_path.display()))?;
        let mut gt = GroundTruthSequence::new(
            entry.name.clone(),
            entry.frame_rate,
            parse_annotations(&gt_text, &gt_path)?,
        )?;
        gt.attributes = entry.attributes.clone();
        for &mode in &manifest.modes {
            let cell = dir.join(mode.as_str());
            let paired_path = cell.join(PAIRED_FILE);
            if !paired_path.exists() {
                continue;
            }
            let (header, paired) = read_paired_log(&paired_path)?;
            if header.sequence != entry.name || header.mode != mode.as_str() {
                bail!(
                    "{} belongs to {}/{}",
                    paired_path.display(),
                    header.sequence,
                    header.mode
                );
            }
            let times = read_trace(&cell.join(CELL_TRACE_FILE))?;
            let fps = speed(times.len(), &times);
            cells.push(ReportCell {
                tracker: manifest.tracker.clone(),
                mode: mode.as_str().to_string(),
                sequence: entry.name.clone(),
                metrics: Metrics::evaluate(&paired, &gt, Some(fps))?,
                attributes: gt.attributes.clone(),
            });
        }
    }
    if cells.is_empty() {
        bail!("no result logs under {}", run_dir.display());
    }
    let report = EvaluationReport::build(cells, &manifest.attributes)?;
    Ok(write_report(&report, out)?)
}

fn report_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(REPORT_FILE)
    } else {
        p.to_path_buf()
    }
}

fn key(r: &ReportRow) -> (String, String, String) {
    (r.tracker.clone(), r.mode.clone(), r.sequence.clone())
}

#[derive(Serialize)]
struct DeltaRow<'a> {
    tracker: &'a str,
    mode: &'a str,
    sequence: &'a str,
    auc_a: String,
    auc_b: String,
    auc_delta_pct: String,
    dp_a: String,
    dp_b: String,
    dp_delta_pct: String,
    fps_a: String,
    fps_b: String,
    fps_delta_pct: String,
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".to_string(), |v| format!("{v:.6}"))
}

/// Per-cell Δ% of `b` against `a` as CSV. Both reports must cover the same cells.
pub fn cmd_compare(a: &Path, b: &Path) -> anyhow::Result<String> {
    let rows_a = read_report_csv(&report_path(a))?;
    let rows_b = read_report_csv(&report_path(b))?;
    let keys_a: BTreeSet<_> = rows_a.iter().map(key).collect();
    let keys_b: BTreeSet<_> = rows_b.iter().map(key).collect();
    if keys_a != keys_b {
        let show = |set: BTreeSet<&(String, String, String)>| {
            set.into_iter()
                .map(|(t, m, s)| format!("{t}/{m}/{s}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let only_a = show(keys_a.difference(&keys_b).collect());
        let only_b = show(keys_b.difference(&keys_a).collect());
        bail!("reports cover different cells; only in first: [{only_a}]; only in second: [{only_b}]");
    }
    let by_key: BTreeMap<_, &ReportRow> = rows_b.iter().map(|r| (key(r), r)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    for ra in &rows_a {
        let rb = by_key[&key(ra)];
        let delta = |x: Option<f64>, y: Option<f64>| match (x, y) {
            (Some(x), Some(y)) => format_delta(improvement_delta(x, y)),
            _ => "N/A".to_string(),
        };
        w.serialize(DeltaRow {
            tracker: &ra.tracker,
            mode: &ra.mode,
            sequence: &ra.sequence,
            auc_a: num(Some(ra.auc)),
            auc_b: num(Some(rb.auc)),
            auc_delta_pct: delta(Some(ra.auc), Some(rb.auc)),
            dp_a: num(Some(ra.dp)),
            dp_b: num(Some(rb.dp)),
            dp_delta_pct: delta(Some(ra.dp), Some(rb.dp)),
            fps_a: num(ra.fps),
            fps_b: num(rb.fps),
            fps_delta_pct: delta(ra.fps, rb.fps),
        })?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Text table of a report: one block per tracker, sequences down, modes across.
pub fn cmd_report(path: &Path) -> anyhow::Result<String> {
    let rows = read_report_csv(&report_path(path))?;
    let mut out = String::new();
    let mut trackers: Vec<&str> = Vec::new();
    for r in &rows {
        if !trackers.contains(&r.tracker.as_str()) {
            trackers.push(&r.tracker);
        }
    }
    for tracker in trackers {
        let mine: Vec<&ReportRow> = rows.iter().filter(|r| r.tracker == tracker).collect();
        let mut modes: Vec<&str> = Vec::new();
        let mut seqs: Vec<&str> = Vec::new();
        for r in &mine {
            if !modes.contains(&r.mode.as_str()) {
                modes.push(&r.mode);
            }
            if !seqs.contains(&r.sequence.as_str()) {
                seqs.push(&r.sequence);
            }
        }
        let width = seqs.iter().map(|s| s.len()).max().unwrap_or(8).max(8);
        writeln!(out, "tracker: {tracker}")?;
        write!(out, "{:width$}", "sequence")?;
        for m in &modes {
            write!(out, "  {:>28}", format!("{m} AUC/DP/Δ%"))?;
        }
        writeln!(out)?;
        for s in seqs {
            write!(out, "{s:width$}")?;
            for m in &modes {
                match mine.iter().find(|r| r.mode == *m && r.sequence == s) {
                    Some(r) => write!(out, "  {:>28}", format!("{:.3} / {:.3} / {}", r.auc, r.dp, r.delta_pct))?,
                    None => write!(out, "  {:>28}", "-")?,
                }
            }
            writeln!(out)?;
        }
        writeln!(out)?;
    }
    Ok(out)
}

/// Writes one annotation file per spec plus a `dataset.json` index.
pub fn cmd_synth(specs: &[MotionSpec], out: &Path) -> anyhow::Result<Vec<SequenceManifest>> {
    let mut manifests = Vec::new();
    for spec in specs {
        check_name(&spec.name)?;
        let seq = synth_sequence(spec)?;
        let dir = out.join(&spec.name);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write(&dir.join(GROUND_TRUTH_FILE), format_annotations(&seq.boxes))?;
        manifests.push(SequenceManifest {
            name: spec.name.clone(),
            annotation: PathBuf::from(&spec.name).join(GROUND_TRUTH_FILE),
            images: None,
            attributes: spec.attributes.clone(),
            frame_rate: spec.frame_rate,
        });
    }
    write_dataset(out, &manifests)?;
    Ok(manifests)
}
