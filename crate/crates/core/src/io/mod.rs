//! File formats: annotations, sequence manifests, synthetic motion specs,
//! result logs and reports.

mod annotations;
mod logs;
mod report;
mod synth;

pub use annotations::{
    format_annotations, load_annotations, load_attribute_flags, parse_annotations, read_dataset, write_annotations,
    write_dataset, SequenceManifest, DATASET_FILE,
};
pub use logs::{
    format_paired_log, format_raw_log, parse_paired_log, parse_raw_log, read_paired_log, read_raw_log,
    write_paired_log, write_raw_log, LogHeader, LogKind,
};
pub use report::{
    format_report_csv, read_report_csv, report_rows, write_report, ReportFiles, ReportRow, AGGREGATE_ROW,
    ATTRIBUTES_FILE, CURVES_FILE, REPORT_FILE,
};
pub use synth::{synth_sequence, MotionSpec, Segment};

/// Six fractional digits, the fixed precision of every numeric output.
pub(crate) fn fixed(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

pub(crate) fn round6(v: f64) -> f64 {
    fixed(v).parse().expect("formatted float parses")
}
