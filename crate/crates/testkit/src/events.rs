//! Discrete-event simulation of a single tracker watching a frame stream.
//!
//! Frame arrivals and tracker completions sit in one priority queue. On a tie
//! the arrival is handled first. Simulation stops once the tracker frees up
//! after the last arrival.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Arrival(usize),
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    kind: Kind,
}

impl Eq for Event {}

impl Ord for Event {
    // reversed for a min-heap; arrivals before completions at equal times
    fn cmp(&self, other: &Self) -> Ordering {
        let rank = |k: Kind| match k {
            Kind::Arrival(_) => 0,
            Kind::Done => 1,
        };
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| rank(other.kind).cmp(&rank(self.kind)))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub frames: Vec<usize>,
    pub finish_times: Vec<f64>,
}

/// `processing[0]` is the frame-0 time; later entries are consumed in order.
pub fn simulate(total: usize, frame_rate: f64, processing: &[f64]) -> Timeline {
    let mut queue = BinaryHeap::new();
    for i in 0..total {
        queue.push(Event {
            time: i as f64 / frame_rate,
            kind: Kind::Arrival(i),
        });
    }
    let horizon = (total - 1) as f64 / frame_rate;
    let mut out = Timeline {
        frames: Vec::new(),
        finish_times: Vec::new(),
    };
    let mut newest: Option<usize> = None;
    let mut busy = false;
    let mut waiting = false;
    let mut used = 0;
    let mut current = 0;

    while let Some(ev) = queue.pop() {
        let start = match ev.kind {
            Kind::Arrival(i) => {
                newest = Some(i);
                if busy || (!waiting && !out.frames.is_empty()) {
                    None
                } else {
                    Some(i)
                }
            }
            Kind::Done => {
                busy = false;
                out.frames.push(current);
                out.finish_times.push(ev.time);
                if ev.time > horizon {
                    break;
                }
                match newest {
                    Some(n) if n > current => Some(n),
                    _ => {
                        waiting = true;
                        None
                    }
                }
            }
        };
        if let Some(frame) = start {
            waiting = false;
            busy = true;
            current = frame;
            let t = processing[used];
            used += 1;
            queue.push(Event {
                time: ev.time + t,
                kind: Kind::Done,
            });
        }
    }
    out
}

/// Index of the newest frame whose output finished by each world timestamp (`None` before any).
pub fn pairing(total: usize, frame_rate: f64, timeline: &Timeline) -> Vec<Option<usize>> {
    (0..total)
        .map(|i| {
            let t = i as f64 / frame_rate;
            let mut best = None;
            for (k, &f) in timeline.finish_times.iter().enumerate() {
                if f <= t {
                    best = Some(timeline.frames[k]);
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_other_frame() {
        let tl = simulate(10, 30.0, &[2.0 / 30.0; 10]);
        assert_eq!(tl.frames, [0, 2, 4, 6, 8]);
    }

    #[test]
    fn fast_tracker_waits() {
        let tl = simulate(5, 30.0, &[1.0 / 60.0; 5]);
        assert_eq!(tl.frames, [0, 1, 2, 3, 4]);
    }
}
