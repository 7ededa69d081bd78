use lae_core::forecaster::HoldForecaster;
use lae_core::io::{synth_sequence, MotionSpec};
use lae_core::runner::{compare, run, run_forecasting, RunConfig};
use lae_core::schedule::{pair_frame, LatencyModel};
use lae_core::trackers::{EchoTracker, FrameRef, SyntheticConfig, SyntheticTracker, Tracker};
use lae_core::{center_error, BoundingBox, Error, GroundTruthSequence, Mode, Pairing};
use proptest::prelude::*;

fn linear(frames: usize, speed: f64) -> GroundTruthSequence {
    synth_sequence(&MotionSpec::linear(
        "lin",
        frames,
        [50., 80., 40., 30.],
        [speed, 0., 0., 0.],
    ))
    .unwrap()
}

fn oracle(seq: &GroundTruthSequence, noise: f64, radius: f64) -> SyntheticTracker {
    SyntheticTracker::new(
        seq.boxes.clone(),
        SyntheticConfig {
            noise_sigma: noise,
            search_radius: radius,
            seed: 7,
        },
    )
}

fn five_frames() -> LatencyModel {
    LatencyModel::constant(5.0 / 30.0)
}

#[test]
fn offline_oracle_reproduces_truth() {
    let seq = linear(60, 4.0);
    let out = run(
        &seq,
        &mut oracle(&seq, 0.0, 40.0),
        &RunConfig::new(Mode::Offline, five_frames()),
    )
    .unwrap();
    assert_eq!(out.paired.boxes(), seq.boxes);
    assert!(out
        .paired
        .sources()
        .iter()
        .enumerate()
        .all(|(i, p)| *p == Pairing::Frame(i)));
    let m = out.evaluate(&seq).unwrap();
    assert_eq!(m.dp, 1.0);
    assert!(m.success[..20].iter().all(|v| *v == 1.0));
    // offline time is still charged
    assert!((out.speed() - 6.0).abs() < 1e-9);
}

#[test]
fn bare_outputs_lag_the_target() {
    let seq = linear(200, 4.0);
    let out = run(
        &seq,
        &mut oracle(&seq, 0.0, 40.0),
        &RunConfig::new(Mode::LaeBare, five_frames()),
    )
    .unwrap();
    for e in &out.paired.entries[30..] {
        assert!(
            center_error(&e.bbox, &seq.boxes[e.frame]) >= 20.0 - 1e-9,
            "frame {}",
            e.frame
        );
    }
}

#[test]
fn pvt_outputs_catch_up() {
    let seq = linear(200, 4.0);
    let out = run(
        &seq,
        &mut oracle(&seq, 0.0, 40.0),
        &RunConfig::new(Mode::LaePvt, five_frames()),
    )
    .unwrap();
    for e in &out.paired.entries[100..] {
        assert!(center_error(&e.bbox, &seq.boxes[e.frame]) < 2.0, "frame {}", e.frame);
    }
}

#[test]
fn hold_forecasters_reduce_to_bare() {
    let seq = linear(120, 3.0);
    let latency = LatencyModel::SeededRandom {
        mean: 0.1,
        std: 0.04,
        seed: 3,
        init: Some(0.2),
    };
    let b0 = seq.boxes[0];
    let bare = run(
        &seq,
        &mut oracle(&seq, 1.0, 40.0),
        &RunConfig::new(Mode::LaeBare, latency.clone()),
    )
    .unwrap();
    let held = run_forecasting(
        &seq,
        &mut oracle(&seq, 1.0, 40.0),
        &latency,
        30.0,
        Box::new(HoldForecaster::new(&b0)),
        Box::new(HoldForecaster::new(&b0)),
    )
    .unwrap();
    assert_eq!(held.raw, bare.raw);
    assert_eq!(held.paired, bare.paired);
}

#[test]
fn schedule_is_mode_independent() {
    // small radius: some modes lose the target, the timeline must not care
    let seq = linear(90, 6.0);
    let runs: Vec<_> = [Mode::LaeBare, Mode::LaePvt, Mode::LaePreOnly, Mode::LaePostOnly]
        .into_iter()
        .map(|m| run(&seq, &mut oracle(&seq, 1.0, 20.0), &RunConfig::new(m, five_frames())).unwrap())
        .collect();
    for r in &runs[1..] {
        assert_eq!(r.raw.frames(), runs[0].raw.frames());
        assert_eq!(r.raw.finish_times(), runs[0].raw.finish_times());
        assert_eq!(r.paired.sources(), runs[0].paired.sources());
    }
}

#[test]
fn forecaster_call_counts() {
    let seq = linear(100, 2.0);
    let out = run(
        &seq,
        &mut oracle(&seq, 1.0, 40.0),
        &RunConfig::new(Mode::LaePvt, five_frames()),
    )
    .unwrap();
    let last_t = (seq.len() - 1) as f64 / 30.0;
    let available = out.raw.entries.iter().filter(|e| e.finished_at <= last_t).count();
    assert_eq!(out.stats.pre_predictions, out.raw.len() - 1);
    assert_eq!(out.stats.pre_updates, out.raw.len() - 1);
    assert_eq!(out.stats.post_updates, available - 1);
    let past_init = out
        .paired
        .sources()
        .iter()
        .filter(|p| matches!(p, Pairing::Frame(j) if *j > 0))
        .count();
    assert_eq!(out.stats.post_predictions, past_init);
}

#[test]
fn self_comparison_is_zero() {
    let seq = linear(80, 4.0);
    let cfg = RunConfig::new(Mode::LaePvt, five_frames());
    let c = compare(&seq, || oracle(&seq, 1.0, 40.0), &cfg, &cfg).unwrap();
    assert_eq!(c.before, c.after);
    assert_eq!(c.delta_auc, Some(0.0));
    assert_eq!(c.delta_fps, Some(0.0));
}

#[test]
fn short_trace_is_reported() {
    let seq = linear(60, 1.0);
    let cfg = RunConfig::new(Mode::LaeBare, LatencyModel::Trace(vec![0.1, 0.1, 0.1]));
    assert!(matches!(
        run(&seq, &mut EchoTracker, &cfg),
        Err(Error::TraceExhausted { .. })
    ));
}

struct Broken;

impl Tracker for Broken {
    fn initialize(&mut self, _: &FrameRef<'_>, _: &BoundingBox) -> lae_core::Result<()> {
        Ok(())
    }

    fn track(&mut self, _: &FrameRef<'_>, _: &BoundingBox) -> lae_core::Result<BoundingBox> {
        Ok(BoundingBox::new(0., 0., -1., 4.))
    }
}

#[test]
fn invalid_tracker_box_names_frame() {
    let seq = linear(30, 1.0);
    let err = run(&seq, &mut Broken, &RunConfig::new(Mode::LaePvt, five_frames())).unwrap_err();
    assert!(matches!(err, Error::Tracker { frame: 5, .. }), "{err}");
}

#[test]
fn stuck_tracker_freezes() {
    let seq = linear(150, 6.0);
    let out = run(
        &seq,
        &mut oracle(&seq, 1.0, 20.0),
        &RunConfig::new(Mode::LaeBare, five_frames()),
    )
    .unwrap();
    let last = out.raw.entries.last().unwrap().bbox;
    assert!(out.raw.entries[1..].iter().all(|e| e.bbox == last));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn paired_sources_follow_the_raw_log(
        mode in prop::sample::select(vec![Mode::LaeBare, Mode::LaePvt, Mode::LaePreOnly, Mode::LaePostOnly]),
        mean in 0.01f64..0.3,
        seed in 0u64..1000,
        frames in 2usize..150,
    ) {
        let seq = linear(frames, 2.0);
        let latency = LatencyModel::SeededRandom { mean, std: mean / 3.0, seed, init: None };
        let out = run(&seq, &mut oracle(&seq, 1.0, 30.0), &RunConfig::new(mode, latency)).unwrap();
        out.raw.validate(seq.len()).unwrap();
        out.paired.validate().unwrap();
        for i in 0..seq.len() {
            prop_assert_eq!(out.paired.entries[i].source, pair_frame(i, 30.0, &out.raw));
            if i > 0 {
                prop_assert!(out.paired.entries[i].source.frame() < i);
            }
        }
    }
}

fn frozen_from(out: &lae_core::runner::RunOutput) -> Option<usize> {
    let last = out.raw.entries.last()?.bbox;
    let k = out
        .raw
        .entries
        .iter()
        .rposition(|e| e.bbox != last)
        .map_or(0, |k| k + 1);
    Some(k)
}

#[test]
fn pre_forecaster_keeps_lock_after_fast_init() {
    let seq = linear(300, 6.0);
    let latency = LatencyModel::Constant {
        seconds: 5.0 / 30.0,
        init: 2.0 / 30.0,
    };
    let bare = run(
        &seq,
        &mut oracle(&seq, 1.0, 20.0),
        &RunConfig::new(Mode::LaeBare, latency.clone()),
    )
    .unwrap();
    assert!(frozen_from(&bare).unwrap() <= 2);
    let pre = run(
        &seq,
        &mut oracle(&seq, 1.0, 20.0),
        &RunConfig::new(Mode::LaePreOnly, latency),
    )
    .unwrap();
    let last = pre.raw.entries.last().unwrap();
    assert!(center_error(&last.bbox, &seq.boxes[last.frame]) < 10.0);
}

#[test]
fn slow_init_loses_every_mode() {
    // 30 px first jump, 20 px radius, no velocity estimate yet
    let seq = linear(300, 6.0);
    for mode in [Mode::LaeBare, Mode::LaePreOnly, Mode::LaePvt] {
        let out = run(&seq, &mut oracle(&seq, 1.0, 20.0), &RunConfig::new(mode, five_frames())).unwrap();
        assert_eq!(frozen_from(&out), Some(0), "{mode:?}");
        assert_eq!(out.raw.entries.last().unwrap().bbox, seq.boxes[0]);
    }
}
