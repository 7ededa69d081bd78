//! End-to-end run of one sequence: schedule, optional search-region
//! forecasting, tracking, optional output forecasting and pairing.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::forecaster::{BoxForecaster, HoldForecaster, KalmanForecaster};
use crate::geometry::BoundingBox;
use crate::metrics::{improvement_delta, Metrics};
use crate::model::{
    world_time, GroundTruthSequence, Mode, PairedEntry, PairedResultLog, Pairing, RawEntry, RawResultLog,
};
use crate::schedule::{offline_schedule, speed, LatencyModel, LatencySource, Scheduler};
use crate::trackers::{FrameRef, Tracker};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub latency: LatencyModel,
    /// Overrides the sequence frame rate when set.
    pub frame_rate: Option<f64>,
}

impl RunConfig {
    pub fn new(mode: Mode, latency: LatencyModel) -> Self {
        Self {
            mode,
            latency,
            frame_rate: None,
        }
    }
}

/// Forecaster call counts for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunStats {
    pub pre_predictions: usize,
    pub pre_updates: usize,
    pub post_updates: usize,
    pub post_predictions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub raw: RawResultLog,
    pub paired: PairedResultLog,
    /// Processing time of each processed frame, in processing order; replayable as a trace.
    pub processing_times: Vec<f64>,
    pub stats: RunStats,
}

impl RunOutput {
    /// Processed frames per second of busy time.
    pub fn speed(&self) -> f64 {
        speed(self.raw.len(), &self.processing_times)
    }

    pub fn evaluate(&self, seq: &GroundTruthSequence) -> Result<Metrics> {
        Metrics::evaluate(&self.paired, seq, Some(self.speed()))
    }
}

enum Clock {
    Simulated(LatencySource),
    Measured,
}

impl Clock {
    fn new(latency: &LatencyModel) -> Result<Self> {
        match latency {
            LatencyModel::WallClock => Ok(Clock::Measured),
            other => Ok(Clock::Simulated(other.source()?)),
        }
    }
}

/// Calls the tracker and returns its result with the processing time charged for it.
fn timed<T>(
    clock: &mut Clock,
    tracker: &mut dyn Tracker,
    call: impl FnOnce(&mut dyn Tracker) -> Result<T>,
) -> Result<(T, f64)> {
    match clock {
        Clock::Simulated(source) => {
            let out = call(&mut *tracker)?;
            Ok((out, source.next_time()?))
        }
        // the clock is only read here: it is unavailable on some targets
        Clock::Measured => {
            let start = Instant::now();
            let out = call(&mut *tracker)?;
            let measured = tracker.last_elapsed().unwrap_or_else(|| start.elapsed().as_secs_f64());
            Ok((out, measured.max(1e-9)))
        }
    }
}

fn frame_ref(seq: &GroundTruthSequence, id: usize) -> FrameRef<'_> {
    FrameRef {
        id,
        path: seq.frame_paths.as_ref().and_then(|p| p.get(id)).map(|p| p.as_path()),
    }
}

fn forecaster(enabled: bool, b0: &BoundingBox) -> Box<dyn BoxForecaster> {
    if enabled {
        Box::new(KalmanForecaster::new(b0))
    } else {
        Box::new(HoldForecaster::new(b0))
    }
}

/// Runs `tracker` over `seq` under the configured protocol.
pub fn run(seq: &GroundTruthSequence, tracker: &mut dyn Tracker, cfg: &RunConfig) -> Result<RunOutput> {
    seq.validate()?;
    let frame_rate = cfg.frame_rate.unwrap_or(seq.frame_rate);
    let b0 = seq.boxes[0];
    match cfg.mode {
        Mode::Offline => run_offline(seq, tracker, &cfg.latency),
        Mode::LaeBare => run_bare(seq, tracker, &cfg.latency, frame_rate),
        mode => run_forecasting(
            seq,
            tracker,
            &cfg.latency,
            frame_rate,
            forecaster(mode.uses_pre_forecaster(), &b0),
            forecaster(mode.uses_post_forecaster(), &b0),
        ),
    }
}

fn run_offline(seq: &GroundTruthSequence, tracker: &mut dyn Tracker, latency: &LatencyModel) -> Result<RunOutput> {
    let b0 = seq.boxes[0];
    let mut clock = Clock::new(latency)?;
    let mut boxes = Vec::with_capacity(seq.len());
    let mut times = Vec::with_capacity(seq.len());
    let ((), t0) = timed(&mut clock, tracker, |t| t.initialize(&frame_ref(seq, 0), &b0))?;
    boxes.push(b0);
    times.push(t0);
    for i in 1..seq.len() {
        let prior = boxes[i - 1];
        let (b, t) = timed(&mut clock, tracker, |tr| tr.track(&frame_ref(seq, i), &prior))?;
        boxes.push(b);
        times.push(t);
    }
    let schedule = offline_schedule(seq.len(), &LatencyModel::Trace(times.clone()))?;
    let raw = RawResultLog {
        entries: (0..seq.len())
            .map(|i| RawEntry {
                frame: i,
                bbox: boxes[i],
                finished_at: schedule.finish_times[i],
            })
            .collect(),
    };
    let paired = PairedResultLog {
        entries: (0..seq.len())
            .map(|i| PairedEntry {
                frame: i,
                source: Pairing::Frame(i),
                bbox: boxes[i],
            })
            .collect(),
    };
    Ok(RunOutput {
        raw,
        paired,
        processing_times: times,
        stats: RunStats::default(),
    })
}

/// Processes frames on the latency-aware schedule. With a pre-forecaster the
/// search prior is its prediction across the frame gap, otherwise the
/// tracker's own last output.
fn track_schedule(
    seq: &GroundTruthSequence,
    tracker: &mut dyn Tracker,
    latency: &LatencyModel,
    frame_rate: f64,
    mut pre: Option<&mut dyn BoxForecaster>,
    stats: &mut RunStats,
) -> Result<(RawResultLog, Vec<f64>)> {
    let b0 = seq.boxes[0];
    let mut clock = Clock::new(latency)?;
    let mut sched = Scheduler::new(seq.len(), frame_rate);
    let mut raw = RawResultLog::default();

    let ((), t0) = timed(&mut clock, tracker, |t| t.initialize(&frame_ref(seq, 0), &b0))?;
    raw.entries.push(RawEntry {
        frame: 0,
        bbox: b0,
        finished_at: sched.complete(0, t0),
    });

    while let Some(j) = sched.next_frame() {
        let last = *raw.entries.last().expect("frame 0 is logged");
        let prior = match pre.as_deref_mut() {
            Some(f) => {
                stats.pre_predictions += 1;
                f.predict((j - last.frame) as f64)
            }
            None => last.bbox,
        };
        let (z, t) = timed(&mut clock, tracker, |tr| tr.track(&frame_ref(seq, j), &prior))?;
        z.validate().map_err(|_| Error::Tracker {
            frame: j,
            message: format!("invalid output box {:?}", z.to_array()),
        })?;
        if let Some(f) = pre.as_deref_mut() {
            stats.pre_updates += 1;
            f.update(&z);
        }
        raw.entries.push(RawEntry {
            frame: j,
            bbox: z,
            finished_at: sched.complete(j, t),
        });
    }
    Ok((raw, sched.into_result().processing_times))
}

/// Stale outputs scored as-is; the tracker searches around its own last output.
fn run_bare(
    seq: &GroundTruthSequence,
    tracker: &mut dyn Tracker,
    latency: &LatencyModel,
    frame_rate: f64,
) -> Result<RunOutput> {
    let (raw, processing_times) = track_schedule(seq, tracker, latency, frame_rate, None, &mut RunStats::default())?;
    let b0 = seq.boxes[0];
    let mut entries = Vec::with_capacity(seq.len());
    let mut k = 0;
    for i in 0..seq.len() {
        let t = world_time(i, frame_rate);
        while k < raw.len() && raw.entries[k].finished_at <= t {
            k += 1;
        }
        entries.push(match k {
            0 => PairedEntry {
                frame: i,
                source: Pairing::Init,
                bbox: b0,
            },
            k => PairedEntry {
                frame: i,
                source: Pairing::Frame(raw.entries[k - 1].frame),
                bbox: raw.entries[k - 1].bbox,
            },
        });
    }
    Ok(RunOutput {
        raw,
        paired: PairedResultLog { entries },
        processing_times,
        stats: RunStats::default(),
    })
}

/// Latency-aware run with explicit pre- and post-forecasters.
///
/// The pre-forecaster predicts across each frame gap to center the search and
/// is updated with every tracker output. The post-forecaster is updated once
/// per raw output as outputs become available and predicts once per world
/// frame whose paired output is past initialization, extrapolating by the
/// output's staleness.
pub fn run_forecasting(
    seq: &GroundTruthSequence,
    tracker: &mut dyn Tracker,
    latency: &LatencyModel,
    frame_rate: f64,
    mut pre: Box<dyn BoxForecaster>,
    mut post: Box<dyn BoxForecaster>,
) -> Result<RunOutput> {
    let mut stats = RunStats::default();
    let (raw, processing_times) = track_schedule(seq, tracker, latency, frame_rate, Some(pre.as_mut()), &mut stats)?;

    let b0 = seq.boxes[0];
    let mut entries = Vec::with_capacity(seq.len());
    let mut available = 0;
    // raw output 0 is the initialization box the post-forecaster starts from
    let mut consumed = 1;
    for i in 0..seq.len() {
        let t = world_time(i, frame_rate);
        while available < raw.len() && raw.entries[available].finished_at <= t {
            available += 1;
        }
        let entry = match available {
            0 => PairedEntry {
                frame: i,
                source: Pairing::Init,
                bbox: b0,
            },
            k => {
                let latest = raw.entries[k - 1];
                if latest.frame == 0 {
                    PairedEntry {
                        frame: i,
                        source: Pairing::Frame(0),
                        bbox: latest.bbox,
                    }
                } else {
                    while consumed < k {
                        let gap = raw.entries[consumed].frame - raw.entries[consumed - 1].frame;
                        post.predict(gap as f64);
                        post.update(&raw.entries[consumed].bbox);
                        stats.post_updates += 1;
                        consumed += 1;
                    }
                    stats.post_predictions += 1;
                    PairedEntry {
                        frame: i,
                        source: Pairing::Frame(latest.frame),
                        bbox: post.extrapolate((i - latest.frame) as f64),
                    }
                }
            }
        };
        entries.push(entry);
    }
    Ok(RunOutput {
        raw,
        paired: PairedResultLog { entries },
        processing_times,
        stats,
    })
}

/// Metrics of two configurations on the same sequence and their relative change.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub before: Metrics,
    pub after: Metrics,
    pub delta_auc: Option<f64>,
    pub delta_dp: Option<f64>,
    pub delta_fps: Option<f64>,
}

/// Runs `cfg_a` and `cfg_b` with fresh trackers from `make_tracker` and compares them.
pub fn compare<T: Tracker>(
    seq: &GroundTruthSequence,
    mut make_tracker: impl FnMut() -> T,
    cfg_a: &RunConfig,
    cfg_b: &RunConfig,
) -> Result<Comparison> {
    let before = run(seq, &mut make_tracker(), cfg_a)?.evaluate(seq)?;
    let after = run(seq, &mut make_tracker(), cfg_b)?.evaluate(seq)?;
    Ok(Comparison {
        delta_auc: improvement_delta(before.auc, after.auc),
        delta_dp: improvement_delta(before.dp, after.dp),
        delta_fps: match (before.fps, after.fps) {
            (Some(a), Some(b)) => improvement_delta(a, b),
            _ => None,
        },
        before,
        after,
    })
}
