//! Latest-available-frame tracking schedule and output pairing.
//!
//! A tracker that is busy while frames arrive skips all but the newest one.
//! Outputs become available at their finish time; each world frame is scored
//! against the newest output finished no later than its timestamp.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{io_err, Error, Result};
use crate::model::{world_time, Pairing, RawResultLog};

/// Per-frame processing-time source.
#[derive(Debug, Clone, PartialEq)]
pub enum LatencyModel {
    /// Fixed processing time; frame 0 takes `init` seconds.
    Constant { seconds: f64, init: f64 },
    /// Explicit processing times in processing order; element 0 is the frame-0 init latency.
    Trace(Vec<f64>),
    /// Normal processing times, resampled until positive.
    SeededRandom {
        mean: f64,
        std: f64,
        seed: u64,
        init: Option<f64>,
    },
    /// Times measured around the tracker call by the runner.
    WallClock,
}

impl LatencyModel {
    pub fn constant(seconds: f64) -> Self {
        LatencyModel::Constant { seconds, init: seconds }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match self {
            LatencyModel::Constant { seconds, init } => {
                if !positive(*seconds) || !positive(*init) {
                    return Err(Error::InvalidLatency(format!(
                        "constant latency must be positive (got {seconds}, init {init})"
                    )));
                }
            }
            LatencyModel::Trace(times) => {
                if let Some((k, v)) = times.iter().enumerate().find(|(_, v)| !positive(**v)) {
                    return Err(Error::InvalidLatency(format!("trace entry {k} is not positive: {v}")));
                }
            }
            LatencyModel::SeededRandom { mean, std, init, .. } => {
                if !positive(*mean) || !(std.is_finite() && *std >= 0.0) {
                    return Err(Error::InvalidLatency(format!(
                        "random latency needs mean > 0 and std >= 0 (got {mean}, {std})"
                    )));
                }
                if init.is_some_and(|v| !positive(v)) {
                    return Err(Error::InvalidLatency("init latency must be positive".into()));
                }
            }
            LatencyModel::WallClock => {}
        }
        Ok(())
    }

    /// Starts a fresh stream of processing times. Fails for wall-clock mode.
    pub fn source(&self) -> Result<LatencySource> {
        self.validate()?;
        let inner = match self {
            LatencyModel::Constant { seconds, init } => Source::Constant {
                seconds: *seconds,
                init: *init,
            },
            LatencyModel::Trace(times) => Source::Trace(times.clone()),
            LatencyModel::SeededRandom { mean, std, seed, init } => Source::Random {
                dist: Normal::new(*mean, *std).map_err(|e| Error::InvalidLatency(e.to_string()))?,
                rng: Box::new(ChaCha8Rng::seed_from_u64(*seed)),
                init: *init,
            },
            LatencyModel::WallClock => return Err(Error::WallClockUnsimulated),
        };
        Ok(LatencySource { inner, emitted: 0 })
    }
}

#[derive(Debug, Clone)]
enum Source {
    Constant {
        seconds: f64,
        init: f64,
    },
    Trace(Vec<f64>),
    Random {
        dist: Normal<f64>,
        rng: Box<ChaCha8Rng>,
        init: Option<f64>,
    },
}

/// Stateful stream of processing times, indexed by processing order.
#[derive(Debug, Clone)]
pub struct LatencySource {
    inner: Source,
    emitted: usize,
}

impl LatencySource {
    /// Processing time of the next processed frame (the first call is frame 0).
    pub fn next_time(&mut self) -> Result<f64> {
        let k = self.emitted;
        let t = match &mut self.inner {
            Source::Constant { seconds, init } => {
                if k == 0 {
                    *init
                } else {
                    *seconds
                }
            }
            Source::Trace(times) => *times.get(k).ok_or(Error::TraceExhausted {
                needed: k,
                available: times.len(),
            })?,
            Source::Random { dist, rng, init } => match init {
                Some(v) if k == 0 => *v,
                _ => loop {
                    let v = dist.sample(rng.as_mut());
                    if v > 0.0 {
                        break v;
                    }
                },
            },
        };
        self.emitted += 1;
        Ok(t)
    }
}

/// Newest world frame with timestamp `<= t`, clamped to `[0, total - 1]`.
pub fn latest_available_frame(t: f64, frame_rate: f64, total: usize) -> usize {
    let last = total.saturating_sub(1);
    let mut c = ((t * frame_rate).floor().max(0.0) as usize).min(last);
    // settle float rounding against the direct timestamp comparison
    while c < last && world_time(c + 1, frame_rate) <= t {
        c += 1;
    }
    while c > 0 && world_time(c, frame_rate) > t {
        c -= 1;
    }
    c
}

/// Frame the tracker processes after finishing `prev_frame` at `prev_finish`.
///
/// Returns the newest frame that has arrived if it is new, otherwise the next
/// frame to arrive (the tracker idles until then). Returns `None` once the
/// stream has ended: no frame left, or the tracker is free only after the
/// last world timestamp.
pub fn next_input_frame(prev_finish: f64, frame_rate: f64, total: usize, prev_frame: usize) -> Option<usize> {
    if prev_frame + 1 >= total || prev_finish > world_time(total - 1, frame_rate) {
        return None;
    }
    let c = latest_available_frame(prev_finish, frame_rate, total);
    Some(if c > prev_frame { c } else { prev_frame + 1 })
}

/// Time the tracker finishes `frame`: it starts when both it is free and the frame has arrived.
pub fn finish_time(prev_finish: f64, frame: usize, frame_rate: f64, processing: f64) -> f64 {
    prev_finish.max(world_time(frame, frame_rate)) + processing
}

/// Index `k` of the newest output with `finish_times[k] <= t`, if any.
pub fn latest_output_index(t: f64, finish_times: &[f64]) -> Option<usize> {
    finish_times.partition_point(|&f| f <= t).checked_sub(1)
}

/// Output paired with world frame `i`.
pub fn pair_frame(i: usize, frame_rate: f64, log: &RawResultLog) -> Pairing {
    let t = world_time(i, frame_rate);
    let k = log.entries.partition_point(|e| e.finished_at <= t);
    match k.checked_sub(1) {
        Some(k) => Pairing::Frame(log.entries[k].frame),
        None => Pairing::Init,
    }
}

/// Processed frames with their finish times and the processing times consumed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScheduleResult {
    pub frames: Vec<usize>,
    pub finish_times: Vec<f64>,
    pub processing_times: Vec<f64>,
}

impl ScheduleResult {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Pairing of every world frame `0..total` with this schedule's outputs.
    pub fn pairing(&self, total: usize, frame_rate: f64) -> Vec<Pairing> {
        let mut out = Vec::with_capacity(total);
        let mut k = 0;
        for i in 0..total {
            let t = world_time(i, frame_rate);
            while k < self.finish_times.len() && self.finish_times[k] <= t {
                k += 1;
            }
            out.push(match k {
                0 => Pairing::Init,
                k => Pairing::Frame(self.frames[k - 1]),
            });
        }
        out
    }

    /// Processed frames per second of busy time.
    pub fn speed(&self) -> f64 {
        speed(self.frames.len(), &self.processing_times)
    }
}

/// `count` processed frames over the summed processing times.
pub fn speed(count: usize, processing_times: &[f64]) -> f64 {
    let busy: f64 = processing_times.iter().sum();
    if busy > 0.0 {
        count as f64 / busy
    } else {
        0.0
    }
}

/// Incremental schedule, driven one processed frame at a time.
#[derive(Debug, Clone)]
pub struct Scheduler {
    frame_rate: f64,
    total: usize,
    result: ScheduleResult,
}

impl Scheduler {
    pub fn new(total: usize, frame_rate: f64) -> Self {
        Self {
            frame_rate,
            total,
            result: ScheduleResult::default(),
        }
    }

    /// Frame to process next; frame 0 first.
    pub fn next_frame(&self) -> Option<usize> {
        if self.total == 0 {
            return None;
        }
        match (self.result.frames.last(), self.result.finish_times.last()) {
            (Some(&j), Some(&t)) => next_input_frame(t, self.frame_rate, self.total, j),
            _ => Some(0),
        }
    }

    /// Records that `frame` took `processing` seconds; returns its finish time.
    pub fn complete(&mut self, frame: usize, processing: f64) -> f64 {
        let prev = self.result.finish_times.last().copied().unwrap_or(0.0);
        let t = finish_time(prev, frame, self.frame_rate, processing);
        self.result.frames.push(frame);
        self.result.finish_times.push(t);
        self.result.processing_times.push(processing);
        t
    }

    pub fn result(&self) -> &ScheduleResult {
        &self.result
    }

    pub fn into_result(self) -> ScheduleResult {
        self.result
    }
}

/// Simulates which frames a tracker with the given latency processes.
pub fn simulate_schedule(total: usize, frame_rate: f64, latency: &LatencyModel) -> Result<ScheduleResult> {
    if total == 0 {
        return Err(Error::InvalidSequence("schedule needs at least one frame".into()));
    }
    let mut source = latency.source()?;
    let mut sched = Scheduler::new(total, frame_rate);
    while let Some(j) = sched.next_frame() {
        let t = source.next_time()?;
        sched.complete(j, t);
    }
    Ok(sched.into_result())
}

/// Zero-latency protocol: every frame processed back to back.
pub fn offline_schedule(total: usize, latency: &LatencyModel) -> Result<ScheduleResult> {
    let mut source = latency.source()?;
    let mut result = ScheduleResult::default();
    let mut clock = 0.0;
    for j in 0..total {
        let t = source.next_time()?;
        clock += t;
        result.frames.push(j);
        result.finish_times.push(clock);
        result.processing_times.push(t);
    }
    Ok(result)
}

/// Parses a latency trace: one positive decimal per line, line 1 is the init latency.
pub fn parse_trace(text: &str, path: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: format!("not a number: {line:?}"),
        })?;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: format!("processing time must be positive, got {v}"),
            });
        }
        out.push(v);
    }
    Ok(out)
}

/// Shortest decimal form of each time, one per line; parses back bit-identically.
pub fn format_trace(times: &[f64]) -> String {
    times.iter().map(|t| format!("{t}\n")).collect()
}

pub fn read_trace(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_trace(&text, path)
}

pub fn write_trace(path: &Path, times: &[f64]) -> Result<()> {
    std::fs::write(path, format_trace(times)).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use crate::model::RawEntry;
    use proptest::prelude::*;

    /// Linear scan over every world frame for the newest one with `i/κ <= t`.
    fn scan_latest(t: f64, frame_rate: f64, total: usize) -> usize {
        (0..total)
            .filter(|&i| world_time(i, frame_rate) <= t)
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn next_input_frame_examples() {
        assert_eq!(scan_latest(0.1, 30.0, 100), 3);
        assert_eq!(next_input_frame(0.1, 30.0, 100, 0), Some(3));
        assert_eq!(scan_latest(1.0, 30.0, 100), 30);
        assert_eq!(next_input_frame(1.0, 30.0, 100, 0), Some(30));
        assert_eq!(next_input_frame(0.01, 30.0, 100, 0), Some(1));
    }

    #[test]
    fn next_input_frame_end_of_stream() {
        assert_eq!(next_input_frame(0.1, 30.0, 1, 0), None);
        assert_eq!(next_input_frame(5.0, 30.0, 10, 3), None);
        // clamped to the last frame while the stream is still live
        assert_eq!(next_input_frame(9.0 / 30.0, 30.0, 10, 3), Some(9));
    }

    #[test]
    fn finish_time_examples() {
        assert!((finish_time(0.1, 3, 30.0, 0.2) - 0.3).abs() < 1e-12);
        assert!((finish_time(0.01, 1, 30.0, 0.01) - (1.0 / 30.0 + 0.01)).abs() < 1e-12);
        assert_eq!(finish_time(0.0, 0, 30.0, 0.5), 0.5);
    }

    fn log(frames: &[usize], times: &[f64]) -> RawResultLog {
        RawResultLog {
            entries: frames
                .iter()
                .zip(times)
                .map(|(&frame, &finished_at)| RawEntry {
                    frame,
                    bbox: BoundingBox::default(),
                    finished_at,
                })
                .collect(),
        }
    }

    #[test]
    fn pair_frame_examples() {
        let l = log(&[0, 15], &[0.5, 0.7]);
        assert_eq!(pair_frame(0, 30.0, &l), Pairing::Init);
        assert_eq!(pair_frame(18, 30.0, &l), Pairing::Frame(0));
        // 21/30 == 0.7 in floating point, equality counts as available
        assert_eq!(21.0 / 30.0, 0.7);
        assert_eq!(pair_frame(21, 30.0, &l), Pairing::Frame(15));
        assert_eq!(pair_frame(14, 30.0, &l), Pairing::Init);
    }

    #[test]
    fn schedule_fast_tracker_processes_every_frame() {
        let dt = 1.0 / 30.0 - 1e-6;
        let s = simulate_schedule(10, 30.0, &LatencyModel::constant(dt)).unwrap();
        assert_eq!(s.frames, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn schedule_two_frame_latency() {
        let s = simulate_schedule(10, 30.0, &LatencyModel::constant(2.0 / 30.0)).unwrap();
        assert_eq!(s.frames, vec![0, 2, 4, 6, 8]);
        for (k, t) in s.finish_times.iter().enumerate() {
            assert!((t - 2.0 * (k + 1) as f64 / 30.0).abs() < 1e-12);
        }
    }

    #[test]
    fn schedule_seeded_random_is_reproducible() {
        let m = LatencyModel::SeededRandom {
            mean: 0.08,
            std: 0.05,
            seed: 7,
            init: None,
        };
        let a = simulate_schedule(100, 30.0, &m).unwrap();
        let b = simulate_schedule(100, 30.0, &m).unwrap();
        assert_eq!(a, b);
        assert!(a.processing_times.iter().all(|&t| t > 0.0));
        let other = LatencyModel::SeededRandom {
            mean: 0.08,
            std: 0.05,
            seed: 8,
            init: None,
        };
        assert_ne!(a, simulate_schedule(100, 30.0, &other).unwrap());
    }

    #[test]
    fn short_trace_is_an_error() {
        let err = simulate_schedule(100, 30.0, &LatencyModel::Trace(vec![0.1, 0.1])).unwrap_err();
        assert!(matches!(
            err,
            Error::TraceExhausted {
                needed: 2,
                available: 2
            }
        ));
    }

    #[test]
    fn wall_clock_cannot_be_simulated() {
        assert!(matches!(
            simulate_schedule(10, 30.0, &LatencyModel::WallClock),
            Err(Error::WallClockUnsimulated)
        ));
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(LatencyModel::constant(0.0).source().is_err());
        assert!(LatencyModel::Trace(vec![0.1, -0.1]).source().is_err());
        let m = LatencyModel::SeededRandom {
            mean: -1.0,
            std: 0.1,
            seed: 0,
            init: None,
        };
        assert!(m.source().is_err());
    }

    #[test]
    fn trace_text_round_trip() {
        let times = vec![0.5, 1.0 / 30.0, 0.1 + 0.2, 1e-7];
        let text = format_trace(&times);
        let back = parse_trace(&text, Path::new("t")).unwrap();
        assert_eq!(
            times.iter().map(|t| t.to_bits()).collect::<Vec<_>>(),
            back.iter().map(|t| t.to_bits()).collect::<Vec<_>>()
        );
        let err = parse_trace("0.1\nabc\n", Path::new("t")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(parse_trace("0.1\n0\n", Path::new("t")).is_err());
    }

    #[test]
    fn offline_schedule_sums_processing_times() {
        let s = offline_schedule(4, &LatencyModel::Trace(vec![0.5, 0.1, 0.1, 0.1])).unwrap();
        assert_eq!(s.frames, vec![0, 1, 2, 3]);
        assert!((s.finish_times[3] - 0.8).abs() < 1e-12);
        assert!((s.speed() - 4.0 / 0.8).abs() < 1e-12);
    }

    // A slower tracker can start later on a newer frame and so pair a fresher
    // frame id at some world frames, even with constant processing times.
    #[test]
    fn slower_tracker_can_pair_newer_frame() {
        let pairing = |seconds: f64| {
            simulate_schedule(100, 30.0, &LatencyModel::constant(seconds))
                .unwrap()
                .pairing(100, 30.0)
        };
        let fast = pairing(0.1553796502511382);
        let slow = pairing(0.20639345539902254);
        assert_eq!((fast[13], slow[13]), (Pairing::Frame(4), Pairing::Frame(6)));
    }

    fn trace_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1.0 / 90.0..6.0 / 30.0, 100)
    }

    proptest! {
        #[test]
        fn schedule_satisfies_log_invariants(trace in trace_strategy()) {
            let s = simulate_schedule(100, 30.0, &LatencyModel::Trace(trace)).unwrap();
            prop_assert_eq!(s.frames[0], 0);
            let l = log(&s.frames, &s.finish_times);
            prop_assert!(l.validate(100).is_ok());
        }

        #[test]
        fn pairing_is_monotone_and_stale(trace in trace_strategy()) {
            let s = simulate_schedule(100, 30.0, &LatencyModel::Trace(trace)).unwrap();
            let p = s.pairing(100, 30.0);
            let l = log(&s.frames, &s.finish_times);
            for i in 0..100 {
                prop_assert_eq!(p[i], pair_frame(i, 30.0, &l));
                if i > 0 {
                    prop_assert!(p[i].frame() < i);
                    prop_assert!(p[i].frame() >= p[i - 1].frame());
                }
            }
        }

        #[test]
        fn latest_available_matches_scan(t in 0.0f64..5.0, total in 1usize..200) {
            prop_assert_eq!(latest_available_frame(t, 30.0, total), scan_latest(t, 30.0, total));
        }

        #[test]
        fn slower_tracker_finishes_later_and_fewer(
            trace in trace_strategy(),
            extra in prop::collection::vec(0.0..0.1f64, 100),
        ) {
            let slow: Vec<f64> = trace.iter().zip(&extra).map(|(a, b)| a + b).collect();
            let a = simulate_schedule(100, 30.0, &LatencyModel::Trace(trace)).unwrap();
            let b = simulate_schedule(100, 30.0, &LatencyModel::Trace(slow)).unwrap();
            prop_assert!(b.len() <= a.len());
            for k in 0..b.len() {
                prop_assert!(b.finish_times[k] >= a.finish_times[k]);
                prop_assert!(b.frames[k] >= a.frames[k]);
            }
            for i in 0..100 {
                let t = world_time(i, 30.0);
                let na = latest_output_index(t, &a.finish_times).map_or(0, |k| k + 1);
                let nb = latest_output_index(t, &b.finish_times).map_or(0, |k| k + 1);
                prop_assert!(nb <= na);
            }
        }
    }
}
