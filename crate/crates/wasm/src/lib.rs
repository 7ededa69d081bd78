//! Browser bindings. Each export takes and returns JSON text; the
//! `*_json` functions do the work and are testable natively.

use lae_core::io::{synth_sequence, MotionSpec};
use lae_core::metrics::{improvement_delta, precision_thresholds, success_thresholds};
use lae_core::runner::{run, RunConfig};
use lae_core::schedule::{simulate_schedule, LatencyModel};
use lae_core::trackers::{SyntheticConfig, SyntheticTracker};
use lae_core::{Mode, Pairing};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimelineRequest {
    pub frames: usize,
    #[serde(default = "default_rate")]
    pub frame_rate: f64,
    /// Per-frame processing time, seconds.
    pub latency: f64,
    /// Frame-0 processing time; defaults to `latency`.
    #[serde(default)]
    pub init_latency: Option<f64>,
}

fn default_rate() -> f64 {
    30.0
}

#[derive(Debug, Serialize)]
pub struct Timeline {
    /// Input frame of each processed output.
    pub processed: Vec<usize>,
    pub finish_times: Vec<f64>,
    /// Input frame of the output scored at each world frame (`null` before the first).
    pub paired: Vec<Option<usize>>,
    /// World frames skipped between consecutive inputs.
    pub skipped: usize,
    pub mean_staleness: f64,
}

pub fn timeline_json(request: &str) -> Result<String, String> {
    let req: TimelineRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if req.frames == 0 || req.frames > 100_000 {
        return Err("frames must be between 1 and 100000".into());
    }
    let model = LatencyModel::Constant {
        seconds: req.latency,
        init: req.init_latency.unwrap_or(req.latency),
    };
    let sched = simulate_schedule(req.frames, req.frame_rate, &model).map_err(|e| e.to_string())?;
    let paired: Vec<Option<usize>> = sched
        .pairing(req.frames, req.frame_rate)
        .into_iter()
        .map(|p| match p {
            Pairing::Init => None,
            Pairing::Frame(j) => Some(j),
        })
        .collect();
    let stale: Vec<f64> = paired
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.map(|j| (i - j) as f64))
        .collect();
    let timeline = Timeline {
        skipped: req.frames - sched.frames.len(),
        mean_staleness: if stale.is_empty() {
            0.0
        } else {
            stale.iter().sum::<f64>() / stale.len() as f64
        },
        processed: sched.frames,
        finish_times: sched.finish_times,
        paired,
    };
    Ok(serde_json::to_string(&timeline).expect("timeline serializes"))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRequest {
    pub frames: usize,
    /// Target motion in pixels per frame.
    pub speed: [f64; 2],
    pub latency: f64,
    #[serde(default)]
    pub init_latency: Option<f64>,
    pub noise_sigma: f64,
    pub search_radius: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct ModeResult {
    pub mode: &'static str,
    pub auc: f64,
    pub dp: f64,
    /// AUC change against lae_bare, percent.
    pub delta_auc: Option<f64>,
    pub precision: Vec<f64>,
    pub success: Vec<f64>,
    /// Center x of the scored box at each world frame.
    pub track_x: Vec<f64>,
    pub track_y: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Scenario {
    pub precision_thresholds: Vec<f64>,
    pub success_thresholds: Vec<f64>,
    pub truth_x: Vec<f64>,
    pub truth_y: Vec<f64>,
    pub modes: Vec<ModeResult>,
}

/// Runs the synthetic tracker on linear motion under every mode.
pub fn scenario_json(request: &str) -> Result<String, String> {
    let req: ScenarioRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if req.frames < 2 || req.frames > 20_000 {
        return Err("frames must be between 2 and 20000".into());
    }
    let spec = MotionSpec::linear(
        "scenario",
        req.frames,
        [0.0, 0.0, 40.0, 40.0],
        [req.speed[0], req.speed[1], 0.0, 0.0],
    );
    let seq = synth_sequence(&spec).map_err(|e| e.to_string())?;
    let latency = LatencyModel::Constant {
        seconds: req.latency,
        init: req.init_latency.unwrap_or(req.latency),
    };
    let cfg = SyntheticConfig {
        noise_sigma: req.noise_sigma,
        search_radius: req.search_radius,
        seed: req.seed,
    };
    let mut modes: Vec<ModeResult> = Vec::new();
    for mode in [
        Mode::LaeBare,
        Mode::LaePreOnly,
        Mode::LaePostOnly,
        Mode::LaePvt,
        Mode::Offline,
    ] {
        let mut tracker = SyntheticTracker::new(seq.boxes.clone(), cfg);
        let out = run(&seq, &mut tracker, &RunConfig::new(mode, latency.clone())).map_err(|e| e.to_string())?;
        let m = out.evaluate(&seq).map_err(|e| e.to_string())?;
        let centers: Vec<(f64, f64)> = out.paired.entries.iter().map(|e| e.bbox.center()).collect();
        modes.push(ModeResult {
            mode: mode.as_str(),
            delta_auc: modes.first().and_then(|bare| improvement_delta(bare.auc, m.auc)),
            auc: m.auc,
            dp: m.dp,
            precision: m.precision,
            success: m.success,
            track_x: centers.iter().map(|c| c.0).collect(),
            track_y: centers.iter().map(|c| c.1).collect(),
        });
    }
    let truth: Vec<(f64, f64)> = seq.boxes.iter().map(|b| b.center()).collect();
    let scenario = Scenario {
        precision_thresholds: precision_thresholds(),
        success_thresholds: success_thresholds(),
        truth_x: truth.iter().map(|c| c.0).collect(),
        truth_y: truth.iter().map(|c| c.1).collect(),
        modes,
    };
    Ok(serde_json::to_string(&scenario).expect("scenario serializes"))
}

/// Schedule of a constant-latency tracker: `{frames, frame_rate?, latency, init_latency?}`.
#[wasm_bindgen]
pub fn timeline(request: &str) -> Result<String, JsValue> {
    timeline_json(request).map_err(|e| JsValue::from_str(&e))
}

/// Metrics and tracks of every mode on one linear-motion scenario.
#[wasm_bindgen]
pub fn scenario(request: &str) -> Result<String, JsValue> {
    scenario_json(request).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn every_other_frame() {
        let v: Value =
            serde_json::from_str(&timeline_json(r#"{"frames":10,"latency":0.0666666666666667}"#).unwrap()).unwrap();
        assert_eq!(v["processed"], serde_json::json!([0, 2, 4, 6, 8]));
        assert_eq!(v["paired"][0], Value::Null);
        assert_eq!(v["skipped"], 5);
    }

    #[test]
    fn scenario_orders_modes() {
        let req = r#"{"frames":150,"speed":[4,0],"latency":0.1666667,"noise_sigma":1,"search_radius":40}"#;
        let v: Value = serde_json::from_str(&scenario_json(req).unwrap()).unwrap();
        let modes = v["modes"].as_array().unwrap();
        assert_eq!(modes.len(), 5);
        assert_eq!(modes[0]["mode"], "lae_bare");
        assert!(modes[3]["auc"].as_f64().unwrap() > modes[0]["auc"].as_f64().unwrap());
        assert_eq!(modes[0]["precision"].as_array().unwrap().len(), 51);
        assert_eq!(modes[0]["track_x"].as_array().unwrap().len(), 150);
    }

    #[test]
    fn bad_requests() {
        assert!(timeline_json(r#"{"frames":0,"latency":0.1}"#).is_err());
        assert!(timeline_json(r#"{"frames":10,"latency":-1}"#).is_err());
        assert!(scenario_json(r#"{"frames":10}"#).is_err());
    }
}
