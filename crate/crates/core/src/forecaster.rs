//! Constant-velocity Kalman filter over `[x, y, w, h, ẋ, ẏ, ẇ, ḣ]`.
//!
//! Time steps are measured in world frames, so velocities are pixels per frame.
//! The transition is `F(Δt) = [[I, Δt·I], [0, I]]` with process noise
//! `Q(Δt) = Δt²·I`, measurements observe the box through `H = [I, 0]` with
//! noise `R = 10·I`.

use nalgebra::{Matrix4, SMatrix, SVector};

use crate::geometry::BoundingBox;

pub type StateVector = SVector<f64, 8>;
pub type Covariance = SMatrix<f64, 8, 8>;
pub type Gain = SMatrix<f64, 8, 4>;
pub type Observation = SMatrix<f64, 4, 8>;

pub const MEASUREMENT_VARIANCE: f64 = 10.0;
pub const INITIAL_VARIANCE: f64 = 10.0;
/// Smallest width/height emitted for an extrapolated box.
pub const MIN_BOX_SIZE: f64 = 1.0;

/// Fixed observation model shared by every forecaster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConstants {
    pub observation: Observation,
    pub measurement_noise: Matrix4<f64>,
}

impl FilterConstants {
    pub fn standard() -> Self {
        Self {
            observation: Observation::identity(),
            measurement_noise: Matrix4::identity() * MEASUREMENT_VARIANCE,
        }
    }
}

pub fn transition_matrix(dt: f64) -> Covariance {
    let mut f = Covariance::identity();
    for r in 0..4 {
        f[(r, r + 4)] = dt;
    }
    f
}

pub fn process_noise(dt: f64) -> Covariance {
    Covariance::identity() * (dt * dt)
}

fn symmetrize(p: &mut Covariance) {
    for r in 0..8 {
        for c in (r + 1)..8 {
            let v = 0.5 * (p[(r, c)] + p[(c, r)]);
            p[(r, c)] = v;
            p[(c, r)] = v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecasterState {
    pub mean: StateVector,
    pub covariance: Covariance,
}

impl ForecasterState {
    /// Zero velocity, covariance `10·I`.
    pub fn init(b0: &BoundingBox) -> Self {
        let mut mean = StateVector::zeros();
        mean.fixed_rows_mut::<4>(0).copy_from_slice(&b0.to_array());
        Self {
            mean,
            covariance: Covariance::identity() * INITIAL_VARIANCE,
        }
    }

    pub fn predict(&self, dt: f64) -> Self {
        let f = transition_matrix(dt);
        let mut covariance = f * self.covariance * f.transpose() + process_noise(dt);
        symmetrize(&mut covariance);
        Self {
            mean: f * self.mean,
            covariance,
        }
    }

    /// Kalman gain for a measurement at this (predicted) state.
    pub fn gain(&self) -> Gain {
        let c = FilterConstants::standard();
        let pht = self.covariance * c.observation.transpose();
        let innovation = c.observation * pht + c.measurement_noise;
        let inv = innovation
            .cholesky()
            .expect("innovation covariance is positive definite")
            .inverse();
        pht * inv
    }

    pub fn update(&self, z: &BoundingBox) -> Self {
        let c = FilterConstants::standard();
        let gain = self.gain();
        let z = SVector::<f64, 4>::from(z.to_array());
        let residual = z - c.observation * self.mean;
        let mut covariance = (Covariance::identity() - gain * c.observation) * self.covariance;
        symmetrize(&mut covariance);
        Self {
            mean: self.mean + gain * residual,
            covariance,
        }
    }

    /// Position block `H·s`, unclamped.
    pub fn position(&self) -> BoundingBox {
        BoundingBox::new(self.mean[0], self.mean[1], self.mean[2], self.mean[3])
    }

    /// `H·F(Δt)·s` with width and height clamped to at least one pixel.
    pub fn extrapolate_box(&self, dt: f64) -> BoundingBox {
        let s = transition_matrix(dt) * self.mean;
        BoundingBox::new(s[0], s[1], s[2].max(MIN_BOX_SIZE), s[3].max(MIN_BOX_SIZE))
    }

    /// Mean followed by the row-major covariance, space separated.
    pub fn to_text(&self) -> String {
        self.mean
            .iter()
            .chain(self.covariance.transpose().iter())
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Box forecaster as used by the runner: observe outputs, predict ahead.
pub trait BoxForecaster {
    /// Advances `dt` frames past the last observation; returns the predicted box.
    fn predict(&mut self, dt: f64) -> BoundingBox;
    /// Folds in a measured box for the frame last predicted.
    fn update(&mut self, z: &BoundingBox);
    /// Box `dt` frames past the last observation, leaving state untouched.
    fn extrapolate(&self, dt: f64) -> BoundingBox;
}

#[derive(Debug, Clone)]
pub struct KalmanForecaster {
    pub state: ForecasterState,
}

impl KalmanForecaster {
    pub fn new(b0: &BoundingBox) -> Self {
        Self {
            state: ForecasterState::init(b0),
        }
    }
}

impl BoxForecaster for KalmanForecaster {
    fn predict(&mut self, dt: f64) -> BoundingBox {
        self.state = self.state.predict(dt);
        self.state.extrapolate_box(0.0)
    }

    fn update(&mut self, z: &BoundingBox) {
        self.state = self.state.update(z);
    }

    fn extrapolate(&self, dt: f64) -> BoundingBox {
        self.state.extrapolate_box(dt)
    }
}

/// Pass-through: always reports the last observed box.
#[derive(Debug, Clone)]
pub struct HoldForecaster {
    last: BoundingBox,
}

impl HoldForecaster {
    pub fn new(b0: &BoundingBox) -> Self {
        Self { last: *b0 }
    }
}

impl BoxForecaster for HoldForecaster {
    fn predict(&mut self, _dt: f64) -> BoundingBox {
        self.last
    }

    fn update(&mut self, z: &BoundingBox) {
        self.last = *z;
    }

    fn extrapolate(&self, _dt: f64) -> BoundingBox {
        self.last
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(mean: [f64; 8], var: f64) -> ForecasterState {
        ForecasterState {
            mean: StateVector::from(mean),
            covariance: Covariance::identity() * var,
        }
    }

    #[test]
    fn constants_are_fixed() {
        let c = FilterConstants::standard();
        assert_eq!(c.measurement_noise, Matrix4::identity() * 10.0);
        for r in 0..4 {
            for col in 0..8 {
                assert_eq!(c.observation[(r, col)], if r == col { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn transition_examples() {
        assert_eq!(transition_matrix(0.0), Covariance::identity());
        let f = transition_matrix(1.0);
        for r in 0..8 {
            for c in 0..8 {
                let expected = if r == c || (r < 4 && c == r + 4) { 1.0 } else { 0.0 };
                assert_eq!(f[(r, c)], expected);
            }
        }
    }

    #[test]
    fn process_noise_examples() {
        assert_eq!(process_noise(0.0), Covariance::zeros());
        assert_eq!(process_noise(3.0), Covariance::identity() * 9.0);
        assert_eq!(process_noise(5.0), process_noise(1.0) * 25.0);
    }

    #[test]
    fn predict_examples() {
        let s = state([10., 10., 5., 5., 1., 2., 0., 0.], 1.0);
        assert_eq!(s.predict(0.0), s);
        let p = s.predict(2.0);
        assert_eq!(p.mean, StateVector::from([12., 14., 5., 5., 1., 2., 0., 0.]));

        // P = I, Δt = 1: F·Fᵀ + I has 3 on position variances, 2 on velocity
        // variances and 1 on position/velocity covariances
        let p = s.predict(1.0).covariance;
        for r in 0..4 {
            assert_eq!(p[(r, r)], 3.0);
            assert_eq!(p[(r + 4, r + 4)], 2.0);
            assert_eq!(p[(r, r + 4)], 1.0);
            assert_eq!(p[(r + 4, r)], 1.0);
        }
    }

    #[test]
    fn update_worked_example() {
        let s = state([12., 14., 5., 5., 1., 2., 0., 0.], 10.0);
        let u = s.update(&BoundingBox::new(14., 16., 5., 5.));
        let expected = [13., 15., 5., 5., 1., 2., 0., 0.];
        for (a, b) in u.mean.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let diag = [5., 5., 5., 5., 10., 10., 10., 10.];
        for (r, d) in diag.iter().enumerate() {
            assert!((u.covariance[(r, r)] - d).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_innovation_keeps_mean() {
        let s = state([12., 14., 5., 5., 1., 2., 0., 0.], 10.0).predict(3.0);
        let u = s.update(&s.position());
        assert_eq!(u.mean, s.mean);
    }

    #[test]
    fn confident_prior_ignores_measurement() {
        let mut s = state([12., 14., 5., 5., 1., 2., 0., 0.], 1e-12);
        s.covariance[(4, 4)] = 1.0;
        let u = s.update(&BoundingBox::new(100., 100., 50., 50.));
        for r in 0..4 {
            assert!((u.mean[r] - s.mean[r]).abs() < 1e-9);
        }
    }

    #[test]
    fn extrapolate_examples() {
        let s = state([10., 10., 5., 5., 1., 2., 0., 0.], 1.0);
        assert_eq!(s.extrapolate_box(0.0), BoundingBox::new(10., 10., 5., 5.));
        assert_eq!(s.extrapolate_box(3.0), BoundingBox::new(13., 16., 5., 5.));
        let shrinking = state([10., 10., 5., 5., 0., 0., -10., 0.], 1.0);
        assert_eq!(shrinking.extrapolate_box(1.0).w, 1.0);
    }

    #[test]
    fn init_examples() {
        let b0 = BoundingBox::new(5., 5., 10., 10.);
        let s = ForecasterState::init(&b0);
        assert_eq!(s.mean, StateVector::from([5., 5., 10., 10., 0., 0., 0., 0.]));
        assert_eq!(s.covariance, Covariance::identity() * 10.0);
        for dt in [0.0, 1.0, 7.0] {
            assert_eq!(s.predict(dt).position(), b0);
        }
        assert_eq!(s.predict(1.0).update(&b0).position(), b0);
    }

    #[test]
    fn hold_forecaster_passes_through() {
        let mut f = HoldForecaster::new(&BoundingBox::new(1., 2., 3., 4.));
        assert_eq!(f.predict(5.0), BoundingBox::new(1., 2., 3., 4.));
        f.update(&BoundingBox::new(5., 6., 7., 8.));
        assert_eq!(f.extrapolate(9.0), BoundingBox::new(5., 6., 7., 8.));
    }

    #[test]
    fn state_text_dump_has_72_values() {
        let s = ForecasterState::init(&BoundingBox::new(1., 2., 3., 4.));
        let text = s.to_text();
        assert_eq!(text.split(' ').count(), 72);
        assert!(text.starts_with("1.000000 2.000000 3.000000 4.000000 0.000000"));
    }

    #[test]
    fn constant_velocity_converges() {
        let b0 = [20.0, 30.0, 40.0, 50.0];
        let v = [3.0, -2.0, 0.5, 0.25];
        let speed = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let truth = |i: usize| BoundingBox::from(std::array::from_fn::<f64, 4, _>(|c| b0[c] + v[c] * i as f64));
        let mut s = ForecasterState::init(&truth(0));
        let mut errors = Vec::new();
        for i in 1..=50 {
            let pred = s.predict(1.0);
            let z = truth(i);
            let e: f64 = (0..4)
                .map(|c| (pred.mean[c] - z.to_array()[c]).powi(2))
                .sum::<f64>()
                .sqrt();
            errors.push(e);
            s = pred.update(&z);
        }
        // the error rings through zero, so check a decaying envelope rather
        // than step-wise monotonicity
        let envelope: Vec<f64> = errors[3..]
            .chunks(10)
            .map(|c| c.iter().cloned().fold(0.0, f64::max))
            .collect();
        for w in envelope.windows(2) {
            assert!(w[1] < w[0], "{errors:?}");
        }
        assert!(errors[4..].iter().all(|&e| e <= errors[3]));
        assert!(*errors.last().unwrap() < 0.05 * speed);
    }

    proptest! {
        #[test]
        fn transition_semigroup(a in 0.0..20.0f64, b in 0.0..20.0f64) {
            let lhs = transition_matrix(a) * transition_matrix(b);
            let rhs = transition_matrix(a + b);
            prop_assert!((lhs - rhs).abs().max() < 1e-12);
        }

        #[test]
        fn gain_is_a_convex_blend(diag in prop::collection::vec(0.0..100.0f64, 8)) {
            let s = ForecasterState {
                mean: StateVector::zeros(),
                covariance: Covariance::from_diagonal(&StateVector::from_vec(diag)),
            };
            let hk = FilterConstants::standard().observation * s.gain();
            for v in hk.iter() {
                prop_assert!((0.0..=1.0).contains(v));
            }
        }

        #[test]
        fn extrapolation_factorizes(mean in prop::collection::vec(-100.0..100.0f64, 8), dt in 0.0..30.0f64) {
            let s = ForecasterState {
                mean: StateVector::from_vec(mean),
                covariance: Covariance::identity(),
            };
            let full = FilterConstants::standard().observation * (transition_matrix(dt) * s.mean);
            let b = s.extrapolate_box(dt);
            prop_assert_eq!(b.x, full[0]);
            prop_assert_eq!(b.y, full[1]);
            prop_assert_eq!(b.w, full[2].max(MIN_BOX_SIZE));
            prop_assert_eq!(b.h, full[3].max(MIN_BOX_SIZE));
        }
    }
}
