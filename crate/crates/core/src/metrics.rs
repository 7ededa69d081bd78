//! Precision (center error) and success (overlap) curves, DP, AUC and
//! attribute-sliced aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{center_error, iou, BoundingBox};
use crate::model::{GroundTruthSequence, PairedResultLog};

/// Center-error thresholds 0, 1, ..., 50 pixels.
pub const PRECISION_STEPS: usize = 51;
/// Overlap thresholds 0, 0.05, ..., 1.
pub const SUCCESS_STEPS: usize = 21;
/// Distance precision is read off the precision curve at this many pixels.
pub const DP_THRESHOLD: usize = 20;

/// Attribute names used when no vocabulary is configured.
pub const DEFAULT_ATTRIBUTES: [&str; 10] = ["SV", "ARV", "OCC", "DEF", "FCM", "IPR", "OPR", "OV", "SOA", "MB"];

pub fn precision_thresholds() -> Vec<f64> {
    (0..PRECISION_STEPS).map(|t| t as f64).collect()
}

pub fn success_thresholds() -> Vec<f64> {
    (0..SUCCESS_STEPS)
        .map(|k| k as f64 / (SUCCESS_STEPS - 1) as f64)
        .collect()
}

fn check_lengths(outputs: &[BoundingBox], truth: &[BoundingBox]) -> Result<()> {
    if outputs.len() != truth.len() || truth.is_empty() {
        return Err(Error::LengthMismatch {
            outputs: outputs.len(),
            truth: truth.len(),
        });
    }
    Ok(())
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Fraction of frames with center error `<= τ` for each threshold.
pub fn precision_curve_boxes(outputs: &[BoundingBox], truth: &[BoundingBox]) -> Result<Vec<f64>> {
    check_lengths(outputs, truth)?;
    let errors = sorted(outputs.iter().zip(truth).map(|(o, g)| center_error(o, g)).collect());
    let n = errors.len() as f64;
    Ok(precision_thresholds()
        .into_iter()
        .map(|t| errors.partition_point(|&e| e <= t) as f64 / n)
        .collect())
}

/// Fraction of frames with IoU strictly above `θ` for each threshold.
pub fn success_curve_boxes(outputs: &[BoundingBox], truth: &[BoundingBox]) -> Result<Vec<f64>> {
    check_lengths(outputs, truth)?;
    let overlaps = sorted(outputs.iter().zip(truth).map(|(o, g)| iou(o, g)).collect());
    let n = overlaps.len();
    Ok(success_thresholds()
        .into_iter()
        .map(|t| (n - overlaps.partition_point(|&v| v <= t)) as f64 / n as f64)
        .collect())
}

pub fn precision_curve(paired: &PairedResultLog, gt: &GroundTruthSequence) -> Result<Vec<f64>> {
    precision_curve_boxes(&paired.boxes(), &gt.boxes)
}

pub fn success_curve(paired: &PairedResultLog, gt: &GroundTruthSequence) -> Result<Vec<f64>> {
    success_curve_boxes(&paired.boxes(), &gt.boxes)
}

/// Mean of the success curve.
pub fn auc(success: &[f64]) -> f64 {
    if success.is_empty() {
        return 0.0;
    }
    success.iter().sum::<f64>() / success.len() as f64
}

/// Precision at 20 pixels.
pub fn dp(precision: &[f64]) -> f64 {
    precision[DP_THRESHOLD]
}

/// Relative change in percent; `None` when `before` is not positive.
pub fn improvement_delta(before: f64, after: f64) -> Option<f64> {
    (before > 0.0).then(|| (after - before) / before * 100.0)
}

/// Signed, one decimal: `+54.7`, `-0.7`, `+0.0`; `N/A` when undefined.
pub fn format_delta(delta: Option<f64>) -> String {
    match delta {
        None => "N/A".to_string(),
        Some(d) => {
            let rounded = (d * 10.0).round() / 10.0;
            if rounded == 0.0 {
                "+0.0".to_string()
            } else {
                format!("{rounded:+.1}")
            }
        }
    }
}

/// Mean taken as an offset from the first value, exact when all values agree.
fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.collect();
    let first = values[0];
    first + values.iter().map(|v| v - first).sum::<f64>() / values.len() as f64
}

/// Scores for one sequence, or the mean over several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: Vec<f64>,
    pub success: Vec<f64>,
    pub dp: f64,
    pub auc: f64,
    /// Processed frames per second of tracker busy time.
    pub fps: Option<f64>,
}

impl Metrics {
    pub fn from_boxes(outputs: &[BoundingBox], truth: &[BoundingBox], fps: Option<f64>) -> Result<Self> {
        let precision = precision_curve_boxes(outputs, truth)?;
        let success = success_curve_boxes(outputs, truth)?;
        Ok(Self {
            dp: dp(&precision),
            auc: auc(&success),
            precision,
            success,
            fps,
        })
    }

    pub fn evaluate(paired: &PairedResultLog, gt: &GroundTruthSequence, fps: Option<f64>) -> Result<Self> {
        Self::from_boxes(&paired.boxes(), &gt.boxes, fps)
    }

    /// Unweighted mean over sequences; `None` for an empty slice.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a Metrics>) -> Option<Self> {
        let items: Vec<&Metrics> = items.into_iter().collect();
        if items.is_empty() {
            return None;
        }
        let mean_curve = |f: fn(&Metrics) -> &Vec<f64>| -> Vec<f64> {
            let len = f(items[0]).len();
            (0..len).map(|t| mean(items.iter().map(|m| f(m)[t]))).collect()
        };
        let fps: Vec<f64> = items.iter().filter_map(|m| m.fps).collect();
        Some(Self {
            precision: mean_curve(|m| &m.precision),
            success: mean_curve(|m| &m.success),
            dp: mean(items.iter().map(|m| m.dp)),
            auc: mean(items.iter().map(|m| m.auc)),
            fps: (!fps.is_empty()).then(|| mean(fps.iter().copied())),
        })
    }
}

/// Scores of one (tracker, mode, sequence) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportCell {
    pub tracker: String,
    pub mode: String,
    pub sequence: String,
    pub metrics: Metrics,
    pub attributes: Option<BTreeMap<String, bool>>,
}

/// Aggregate over the sequences of one attribute; `metrics` is `None` when no sequence carries it.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeRow {
    pub attribute: String,
    pub sequences: usize,
    pub metrics: Option<Metrics>,
}

/// Mean metrics per attribute over the cells flagged with it.
pub fn attribute_report(cells: &[&ReportCell], vocabulary: &[String]) -> Result<Vec<AttributeRow>> {
    for cell in cells {
        if let Some(flags) = &cell.attributes {
            if let Some(unknown) = flags.keys().find(|k| !vocabulary.contains(k)) {
                return Err(Error::UnknownAttribute(unknown.clone()));
            }
        }
    }
    Ok(vocabulary
        .iter()
        .map(|attr| {
            let flagged: Vec<&Metrics> = cells
                .iter()
                .filter(|c| {
                    c.attributes
                        .as_ref()
                        .and_then(|a| a.get(attr))
                        .copied()
                        .unwrap_or(false)
                })
                .map(|c| &c.metrics)
                .collect();
            AttributeRow {
                attribute: attr.clone(),
                sequences: flagged.len(),
                metrics: Metrics::mean(flagged),
            }
        })
        .collect())
}

/// Per-(tracker, mode) results: one cell per sequence plus the aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportGroup {
    pub tracker: String,
    pub mode: String,
    pub aggregate: Metrics,
    pub attributes: Vec<AttributeRow>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvaluationReport {
    pub cells: Vec<ReportCell>,
    pub groups: Vec<ReportGroup>,
    /// Mode the Δ% column is measured against.
    pub baseline_mode: Option<String>,
}

impl EvaluationReport {
    /// Groups cells by (tracker, mode), aggregates and slices by attribute.
    pub fn build(cells: Vec<ReportCell>, vocabulary: &[String]) -> Result<Self> {
        let mut keys: Vec<(String, String)> = Vec::new();
        for c in &cells {
            let key = (c.tracker.clone(), c.mode.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let mut groups = Vec::new();
        for (tracker, mode) in keys {
            let members: Vec<&ReportCell> = cells
                .iter()
                .filter(|c| c.tracker == tracker && c.mode == mode)
                .collect();
            let aggregate = Metrics::mean(members.iter().map(|c| &c.metrics)).expect("group is non-empty");
            let has_flags = members.iter().any(|c| c.attributes.is_some());
            let attributes = if has_flags {
                attribute_report(&members, vocabulary)?
            } else {
                Vec::new()
            };
            groups.push(ReportGroup {
                tracker,
                mode,
                aggregate,
                attributes,
            });
        }
        let baseline_mode = if cells.iter().any(|c| c.mode == "lae_bare") {
            Some("lae_bare".to_string())
        } else {
            cells.first().map(|c| c.mode.clone())
        };
        Ok(Self {
            cells,
            groups,
            baseline_mode,
        })
    }

    /// AUC of the baseline mode for the same tracker and sequence (`None` sequence = aggregate).
    pub fn baseline_auc(&self, tracker: &str, sequence: Option<&str>) -> Option<f64> {
        let mode = self.baseline_mode.as_deref()?;
        match sequence {
            Some(seq) => self
                .cells
                .iter()
                .find(|c| c.tracker == tracker && c.mode == mode && c.sequence == seq)
                .map(|c| c.metrics.auc),
            None => self
                .groups
                .iter()
                .find(|g| g.tracker == tracker && g.mode == mode)
                .map(|g| g.aggregate.auc),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn truth(n: usize) -> Vec<BoundingBox> {
        (0..n)
            .map(|i| BoundingBox::new(i as f64 * 3.0, 10.0, 40.0, 30.0))
            .collect()
    }

    /// Direct per-threshold, per-frame counting.
    fn brute_precision(out: &[BoundingBox], gt: &[BoundingBox]) -> Vec<f64> {
        (0..=50)
            .map(|t| {
                let mut hits = 0;
                for i in 0..gt.len() {
                    if center_error(&out[i], &gt[i]) <= t as f64 {
                        hits += 1;
                    }
                }
                hits as f64 / gt.len() as f64
            })
            .collect()
    }

    fn brute_success(out: &[BoundingBox], gt: &[BoundingBox]) -> Vec<f64> {
        (0..=20)
            .map(|k| {
                let theta = k as f64 * 0.05;
                let mut hits = 0;
                for i in 0..gt.len() {
                    if iou(&out[i], &gt[i]) > theta {
                        hits += 1;
                    }
                }
                hits as f64 / gt.len() as f64
            })
            .collect()
    }

    #[test]
    fn thresholds_grid() {
        let s = success_thresholds();
        assert_eq!(s.len(), 21);
        assert_eq!(s[0], 0.0);
        assert_eq!(s[10], 0.5);
        assert_eq!(s[20], 1.0);
        assert_eq!(precision_thresholds().len(), 51);
    }

    #[test]
    fn perfect_outputs() {
        let gt = truth(30);
        let m = Metrics::from_boxes(&gt, &gt, None).unwrap();
        assert!(m.precision.iter().all(|&p| p == 1.0));
        assert!(m.success[..20].iter().all(|&s| s == 1.0));
        assert_eq!(m.success[20], 0.0);
        assert_eq!(m.auc, 20.0 / 21.0);
        assert_eq!(m.dp, 1.0);
    }

    #[test]
    fn offset_step_curve() {
        let gt = truth(10);
        let out: Vec<_> = gt.iter().map(|b| b.translate(15.0, 20.0)).collect();
        let p = precision_curve_boxes(&out, &gt).unwrap();
        assert_eq!(p, brute_precision(&out, &gt));
        for (t, v) in p.iter().enumerate() {
            assert_eq!(*v, if t >= 25 { 1.0 } else { 0.0 });
        }
        assert_eq!(dp(&p), 0.0);
        let close: Vec<_> = gt.iter().map(|b| b.translate(3.0, 4.0)).collect();
        assert_eq!(dp(&precision_curve_boxes(&close, &gt).unwrap()), 1.0);
    }

    #[test]
    fn half_lost() {
        let gt = truth(10);
        let out: Vec<_> = gt
            .iter()
            .enumerate()
            .map(|(i, b)| if i % 2 == 0 { *b } else { b.translate(100.0, 0.0) })
            .collect();
        let p = precision_curve_boxes(&out, &gt).unwrap();
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn zero_overlap_auc() {
        let gt = truth(5);
        let out: Vec<_> = gt.iter().map(|b| b.translate(500.0, 0.0)).collect();
        assert_eq!(auc(&success_curve_boxes(&out, &gt).unwrap()), 0.0);
    }

    #[test]
    fn half_overlap_auc() {
        // [0,0,20,10] vs [0,0,10,10]: IoU exactly 100/200
        let gt = vec![BoundingBox::new(0., 0., 20., 10.); 4];
        let out = vec![BoundingBox::new(0., 0., 10., 10.); 4];
        assert_eq!(iou(&out[0], &gt[0]), 0.5);
        let s = success_curve_boxes(&out, &gt).unwrap();
        assert_eq!(s, brute_success(&out, &gt));
        for (k, v) in s.iter().enumerate() {
            assert_eq!(*v, if k < 10 { 1.0 } else { 0.0 });
        }
        assert_eq!(auc(&s), 10.0 / 21.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(precision_curve_boxes(&truth(3), &truth(4)).is_err());
        assert!(success_curve_boxes(&truth(3), &truth(4)).is_err());
    }

    #[test]
    fn improvement_examples() {
        assert_eq!(format_delta(improvement_delta(0.150, 0.232)), "+54.7");
        assert_eq!(format_delta(improvement_delta(0.186, 0.315)), "+69.4");
        assert_eq!(format_delta(improvement_delta(0.330, 0.406)), "+23.0");
        assert_eq!(format_delta(improvement_delta(0.709, 0.704)), "-0.7");
        assert_eq!(improvement_delta(0.4, 0.4), Some(0.0));
        assert_eq!(format_delta(improvement_delta(0.4, 0.4)), "+0.0");
        assert_eq!(improvement_delta(0.0, 0.4), None);
        assert_eq!(format_delta(None), "N/A");
    }

    fn cell(seq: &str, dp_value: f64, flags: &[(&str, bool)]) -> ReportCell {
        let mut precision = vec![0.0; 51];
        precision[20] = dp_value;
        ReportCell {
            tracker: "t".into(),
            mode: "lae_bare".into(),
            sequence: seq.into(),
            metrics: Metrics {
                precision,
                success: vec![dp_value / 2.0; 21],
                dp: dp_value,
                auc: dp_value / 2.0,
                fps: Some(10.0),
            },
            attributes: Some(flags.iter().map(|(k, v)| (k.to_string(), *v)).collect()),
        }
    }

    fn vocab() -> Vec<String> {
        DEFAULT_ATTRIBUTES.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn attribute_singleton_and_empty() {
        let a = cell("a", 0.8, &[("SV", true), ("OCC", false)]);
        let rows = attribute_report(&[&a], &vocab()).unwrap();
        let sv = rows.iter().find(|r| r.attribute == "SV").unwrap();
        assert_eq!(sv.metrics.as_ref().unwrap(), &a.metrics);
        let occ = rows.iter().find(|r| r.attribute == "OCC").unwrap();
        assert_eq!((occ.sequences, occ.metrics.is_none()), (0, true));
    }

    #[test]
    fn attribute_mean_of_two() {
        let a = cell("a", 0.8, &[("SV", true)]);
        let b = cell("b", 0.4, &[("SV", true)]);
        let rows = attribute_report(&[&a, &b], &vocab()).unwrap();
        let sv = rows[0].metrics.as_ref().unwrap();
        assert!((sv.dp - 0.6).abs() < 1e-15);
        assert!((sv.auc - 0.3).abs() < 1e-15);
    }

    #[test]
    fn unknown_attribute_rejected() {
        let a = cell("a", 0.8, &[("XYZ", true)]);
        assert!(matches!(
            attribute_report(&[&a], &vocab()),
            Err(Error::UnknownAttribute(_))
        ));
    }

    #[test]
    fn aggregate_of_identical_is_identity() {
        let a = cell("a", 0.8, &[]);
        let m = Metrics::mean([&a.metrics, &a.metrics, &a.metrics]).unwrap();
        assert_eq!(m, a.metrics);
        assert!(Metrics::mean(std::iter::empty()).is_none());
    }

    fn boxes(n: usize) -> impl Strategy<Value = Vec<BoundingBox>> {
        prop::collection::vec(
            (-50i32..50, -50i32..50, 1i32..60, 1i32..60)
                .prop_map(|(x, y, w, h)| BoundingBox::new(x as f64, y as f64, w as f64, h as f64)),
            n,
        )
    }

    proptest! {
        #[test]
        fn curves_match_brute_force((out, gt) in (1usize..80).prop_flat_map(|n| (boxes(n), boxes(n)))) {
            let p = precision_curve_boxes(&out, &gt).unwrap();
            let s = success_curve_boxes(&out, &gt).unwrap();
            for (a, b) in p.iter().zip(brute_precision(&out, &gt)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            for (a, b) in s.iter().zip(brute_success(&out, &gt)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn translation_invariant((out, gt) in (1usize..40).prop_flat_map(|n| (boxes(n), boxes(n))), dx in -100i32..100, dy in -100i32..100) {
            let a = Metrics::from_boxes(&out, &gt, None).unwrap();
            let shift = |v: &[BoundingBox]| v.iter().map(|b| b.translate(dx as f64, dy as f64)).collect::<Vec<_>>();
            let b = Metrics::from_boxes(&shift(&out), &shift(&gt), None).unwrap();
            prop_assert_eq!(a.dp, b.dp);
            prop_assert_eq!(a.auc, b.auc);
        }
    }
}
