use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{FrameRef, Tracker};
use crate::error::{Error, Result};
use crate::geometry::{center_error, BoundingBox};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    /// Standard deviation of the Gaussian noise added to each box field, pixels.
    pub noise_sigma: f64,
    /// Target is found only if its center lies within this distance of the prior center.
    pub search_radius: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            noise_sigma: 1.0,
            search_radius: 40.0,
            seed: 0,
        }
    }
}

/// One tracking step against known truth.
///
/// Four noise samples are always drawn so the stream stays aligned whether or
/// not the target is found.
pub fn synthetic_track(
    truth: &BoundingBox,
    prior: &BoundingBox,
    cfg: &SyntheticConfig,
    rng: &mut ChaCha8Rng,
) -> BoundingBox {
    let noise: [f64; 4] = match Normal::new(0.0, cfg.noise_sigma) {
        Ok(dist) if cfg.noise_sigma > 0.0 => std::array::from_fn(|_| dist.sample(rng)),
        _ => [0.0; 4],
    };
    if center_error(truth, prior) > cfg.search_radius {
        return *prior;
    }
    BoundingBox::new(
        truth.x + noise[0],
        truth.y + noise[1],
        (truth.w + noise[2]).max(0.0),
        (truth.h + noise[3]).max(0.0),
    )
}

/// Ground truth plus seeded noise, with a lost-target rule instead of pixels.
#[derive(Debug, Clone)]
pub struct SyntheticTracker {
    truth: Vec<BoundingBox>,
    cfg: SyntheticConfig,
    rng: ChaCha8Rng,
}

impl SyntheticTracker {
    pub fn new(truth: Vec<BoundingBox>, cfg: SyntheticConfig) -> Self {
        Self {
            truth,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
        }
    }
}

impl Tracker for SyntheticTracker {
    fn initialize(&mut self, _frame: &FrameRef<'_>, _init: &BoundingBox) -> Result<()> {
        self.rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        Ok(())
    }

    fn track(&mut self, frame: &FrameRef<'_>, prior: &BoundingBox) -> Result<BoundingBox> {
        let truth = self.truth.get(frame.id).ok_or_else(|| Error::Tracker {
            frame: frame.id,
            message: format!("no ground truth (sequence has {} frames)", self.truth.len()),
        })?;
        Ok(synthetic_track(truth, prior, &self.cfg, &mut self.rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tracker(noise_sigma: f64, search_radius: f64) -> SyntheticTracker {
        let truth = (0..20)
            .map(|i| BoundingBox::new(10.0 * i as f64, 0., 10., 10.))
            .collect();
        SyntheticTracker::new(
            truth,
            SyntheticConfig {
                noise_sigma,
                search_radius,
                seed: 42,
            },
        )
    }

    #[test]
    fn noiseless_tracker_returns_truth() {
        let mut t = tracker(0.0, 50.0);
        let prior = BoundingBox::new(40., 0., 10., 10.);
        assert_eq!(
            t.track(&FrameRef::new(5), &prior).unwrap(),
            BoundingBox::new(50., 0., 10., 10.)
        );
    }

    #[test]
    fn distant_target_returns_prior() {
        let mut t = tracker(1.0, 50.0);
        let prior = BoundingBox::new(0., 0., 10., 10.);
        // truth at frame 10 is 100 px away
        assert_eq!(t.track(&FrameRef::new(10), &prior).unwrap(), prior);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let run = || {
            let mut t = tracker(2.0, 1000.0);
            (0..20)
                .map(|i| t.track(&FrameRef::new(i), &BoundingBox::new(0., 0., 10., 10.)).unwrap())
                .collect::<Vec<_>>()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.iter().any(|b| b.x.fract() != 0.0));
    }

    #[test]
    fn out_of_range_frame_is_an_error() {
        let mut t = tracker(0.0, 10.0);
        assert!(t.track(&FrameRef::new(20), &BoundingBox::default()).is_err());
    }
}
