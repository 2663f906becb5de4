//! Kalman filtering with scheduled, lossy observations.
//!
//! Two recursions live here. The realized filter (`predict` followed by
//! `update_realized`) runs inside the closed loop and knows whether a packet
//! arrived. The expected-covariance map `expected_cov_step` is what the
//! scheduler plans with: the measurement update is weighted by
//! `δ·σ`, the probability that a granted packet gets through.

use crate::control::SystemMatrices;
use crate::linalg::{
    asymmetry, cholesky_solve, clamp_min_eigenvalue, max_abs, min_symmetric_eigenvalue,
    symmetrize_in_place, Mat, Vector,
};
use thiserror::Error;

/// Smallest eigenvalue allowed for the measurement noise covariance.
pub const MEASUREMENT_NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("innovation covariance V + C Ē Cᵀ is not positive definite")]
    SingularInnovation,
    #[error("{name} must be symmetric positive semidefinite")]
    NotPsd { name: &'static str },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("success probability {0} outside [0, 1]")]
    Probability(f64),
}

/// Process noise `W`, measurement noise `V` and initial state covariance `X₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub w: Mat,
    pub v: Mat,
    pub x0: Mat,
}

impl NoiseModel {
    /// Validates symmetry and semidefiniteness; `V` is lifted to have
    /// eigenvalues of at least [`MEASUREMENT_NOISE_FLOOR`].
    pub fn new(w: Mat, v: Mat, x0: Mat) -> Result<Self, EstimationError> {
        check_psd(&w, "W")?;
        check_psd(&v, "V")?;
        check_psd(&x0, "X0")?;
        if w.shape() != x0.shape() {
            return Err(EstimationError::Dimension("W and X0 must have the same size".into()));
        }
        let v = clamp_min_eigenvalue(&v, MEASUREMENT_NOISE_FLOOR);
        Ok(Self { w, v, x0 })
    }
}

fn check_psd(m: &Mat, name: &'static str) -> Result<(), EstimationError> {
    if !m.is_square() {
        return Err(EstimationError::NotPsd { name });
    }
    let scale = max_abs(m).max(1.0);
    if asymmetry(m) > 1e-12 * scale || min_symmetric_eigenvalue(m) < -1e-12 * scale {
        return Err(EstimationError::NotPsd { name });
    }
    Ok(())
}

/// Posterior estimate and its error covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub xhat: Vector,
    pub e: Mat,
}

impl FilterState {
    /// `x̂₀ = E{x₀} = 0`, `E₀ = X₀`.
    pub fn initial(noise: &NoiseModel) -> Self {
        Self { xhat: Vector::zeros(noise.x0.nrows()), e: noise.x0.clone() }
    }
}

/// Expected estimation-error covariance, the scheduler's planning state.
#[derive(Debug, Clone, PartialEq)]
pub struct CovState(pub Mat);

impl CovState {
    pub fn matrix(&self) -> &Mat {
        &self.0
    }
}

/// Time update: `x̄ = A x̂ + B u`, `Ē = A E Aᵀ + W`.
pub fn predict(fs: &FilterState, sys: &SystemMatrices, u: &Vector, w: &Mat) -> (Vector, Mat) {
    let xbar = &sys.a * &fs.xhat + &sys.b * u;
    let mut ebar = &sys.a * &fs.e * sys.a.transpose() + w;
    symmetrize_in_place(&mut ebar);
    (xbar, ebar)
}

/// `L = Ē Cᵀ (V + C Ē Cᵀ)⁻¹`.
pub fn kalman_gain(ebar: &Mat, c: &Mat, v: &Mat) -> Result<Mat, EstimationError> {
    if c.ncols() != ebar.nrows() || v.nrows() != c.nrows() {
        return Err(EstimationError::Dimension("Ē, C, V sizes are inconsistent".into()));
    }
    let innovation = v + c * ebar * c.transpose();
    // Solve S Lᵀ = C Ē (both S and Ē symmetric).
    let lt = cholesky_solve(&innovation, &(c * ebar)).ok_or(EstimationError::SingularInnovation)?;
    Ok(lt.transpose())
}

/// Measurement update of the realized filter. Without a received packet the
/// prediction is passed through unchanged.
pub fn update_realized(
    xbar: Vector,
    ebar: Mat,
    y: &Vector,
    received: bool,
    c: &Mat,
    v: &Mat,
) -> Result<FilterState, EstimationError> {
    if !received {
        return Ok(FilterState { xhat: xbar, e: ebar });
    }
    let l = kalman_gain(&ebar, c, v)?;
    let innovation = y - c * &xbar;
    let xhat = xbar + &l * innovation;
    let n = ebar.nrows();
    let mut e = (Mat::identity(n, n) - &l * c) * &ebar;
    symmetrize_in_place(&mut e);
    Ok(FilterState { xhat, e })
}

/// The planning map `f^E`: predict, then apply the measurement update with
/// weight `delta·sigma`. `delta` may be fractional for relaxed schedules;
/// the result is affine in `delta`.
pub fn expected_cov_step(
    e: &CovState,
    delta: f64,
    sigma: f64,
    sys: &SystemMatrices,
    noise: &NoiseModel,
) -> Result<CovState, EstimationError> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(EstimationError::Probability(sigma));
    }
    expected_cov_update(&e.0, &sys.a, &sys.c, &noise.w, &noise.v, delta * sigma).map(CovState)
}

/// Raw-matrix form of [`expected_cov_step`] with the combined multiplier
/// `weight = δ·σ`.
pub fn expected_cov_update(
    e: &Mat,
    a: &Mat,
    c: &Mat,
    w: &Mat,
    v: &Mat,
    weight: f64,
) -> Result<Mat, EstimationError> {
    let mut ebar = a * e * a.transpose() + w;
    symmetrize_in_place(&mut ebar);
    if weight == 0.0 {
        return Ok(ebar);
    }
    let l = kalman_gain(&ebar, c, v)?;
    let n = ebar.nrows();
    let mut next = (Mat::identity(n, n) - (&l * c) * weight) * &ebar;
    symmetrize_in_place(&mut next);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    fn scalar_sys(a: f64) -> SystemMatrices {
        SystemMatrices::new(scalar(a), scalar(1.0), scalar(1.0)).unwrap()
    }

    fn scalar_noise(w: f64, v: f64) -> NoiseModel {
        NoiseModel::new(scalar(w), scalar(v), scalar(0.0)).unwrap()
    }

    fn double_integrator() -> (SystemMatrices, NoiseModel) {
        let sys = SystemMatrices::new(
            crate::linalg::mat_from_rows(&[&[1.0, 0.1], &[0.0, 1.0]]),
            crate::linalg::mat_from_rows(&[&[0.005], &[0.1]]),
            Mat::identity(2, 2),
        )
        .unwrap();
        let noise = NoiseModel::new(Mat::identity(2, 2) * 1e-2, Mat::identity(2, 2) * 1e-3, Mat::identity(2, 2) * 1e-2)
            .unwrap();
        (sys, noise)
    }

    #[test]
    fn predict_examples() {
        let sys = SystemMatrices::new(Mat::identity(2, 2), Mat::zeros(2, 1), Mat::identity(2, 2)).unwrap();
        let fs = FilterState { xhat: Vector::zeros(2), e: Mat::zeros(2, 2) };
        let (xbar, ebar) = predict(&fs, &sys, &Vector::zeros(1), &Mat::identity(2, 2));
        assert_eq!(ebar, Mat::identity(2, 2));
        assert_eq!(xbar, Vector::zeros(2));

        let fs = FilterState { xhat: Vector::zeros(1), e: scalar(1.0) };
        let (_, ebar) = predict(&fs, &scalar_sys(2.0), &Vector::zeros(1), &scalar(1.0));
        assert_eq!(ebar[(0, 0)], 5.0);
    }

    #[test]
    fn kalman_gain_examples() {
        assert_eq!(kalman_gain(&scalar(0.0), &scalar(1.0), &scalar(1.0)).unwrap()[(0, 0)], 0.0);
        assert_eq!(kalman_gain(&scalar(1.0), &scalar(1.0), &scalar(0.0)).unwrap()[(0, 0)], 1.0);
        assert!((kalman_gain(&scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap()[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(
            kalman_gain(&scalar(0.0), &scalar(1.0), &scalar(0.0)).unwrap_err(),
            EstimationError::SingularInnovation
        );
    }

    #[test]
    fn update_examples() {
        let y = Vector::from_element(1, 2.0);
        let passthrough = update_realized(Vector::from_element(1, 3.0), scalar(7.0), &y, false, &scalar(1.0), &scalar(1.0))
            .unwrap();
        assert_eq!(passthrough.xhat[0], 3.0);
        assert_eq!(passthrough.e[(0, 0)], 7.0);

        let exact = update_realized(Vector::zeros(1), scalar(1.0), &y, true, &scalar(1.0), &scalar(0.0)).unwrap();
        assert_eq!(exact.e[(0, 0)], 0.0);
        assert_eq!(exact.xhat[0], 2.0);

        let noisy = update_realized(Vector::zeros(1), scalar(1.0), &y, true, &scalar(1.0), &scalar(1.0)).unwrap();
        assert!((noisy.xhat[0] - 1.0).abs() < 1e-15);
        assert!((noisy.e[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn expected_step_examples() {
        let sys = scalar_sys(1.0);
        let e0 = CovState(scalar(0.0));
        let noise = NoiseModel { w: scalar(1.0), v: scalar(0.0), x0: scalar(0.0) };
        let pred = expected_cov_step(&e0, 0.0, 1.0, &sys, &noise).unwrap();
        assert_eq!(pred.0[(0, 0)], 1.0);
        let full = expected_cov_step(&e0, 1.0, 1.0, &sys, &noise).unwrap();
        assert_eq!(full.0[(0, 0)], 0.0);
        let half = expected_cov_step(&e0, 1.0, 0.5, &sys, &noise).unwrap();
        assert_eq!(half.0[(0, 0)], 0.5);
        assert!(matches!(expected_cov_step(&e0, 1.0, 1.5, &sys, &noise), Err(EstimationError::Probability(_))));
    }

    #[test]
    fn noise_model_validation_and_floor() {
        let noise = scalar_noise(1.0, 0.0);
        assert_eq!(noise.v[(0, 0)], MEASUREMENT_NOISE_FLOOR);
        assert_eq!(
            NoiseModel::new(scalar(-1.0), scalar(1.0), scalar(0.0)).unwrap_err(),
            EstimationError::NotPsd { name: "W" }
        );
    }

    #[test]
    fn perfect_channel_matches_realized_filter() {
        let (sys, noise) = double_integrator();
        let mut planned = CovState(noise.x0.clone());
        let mut fs = FilterState::initial(&noise);
        for k in 0..50 {
            planned = expected_cov_step(&planned, 1.0, 1.0, &sys, &noise).unwrap();
            let (xbar, ebar) = predict(&fs, &sys, &Vector::zeros(1), &noise.w);
            let y = Vector::from_element(2, k as f64);
            fs = update_realized(xbar, ebar, &y, true, &sys.c, &noise.v).unwrap();
            assert_eq!(planned.0, fs.e, "step {k}");
        }
    }

    #[test]
    fn converges_to_riccati_steady_state() {
        let (sys, noise) = double_integrator();
        let mut e = CovState(noise.x0.clone());
        let mut step = f64::INFINITY;
        for _ in 0..500 {
            let next = expected_cov_step(&e, 1.0, 1.0, &sys, &noise).unwrap();
            step = max_abs(&(&next.0 - &e.0));
            e = next;
        }
        assert!(step <= 1e-9);
    }

    fn random_psd(seed: &[f64]) -> Mat {
        let f = Mat::from_row_slice(2, 2, &seed[..4]);
        &f * f.transpose()
    }

    proptest! {
        #[test]
        fn communicating_never_increases_trace(seed in prop::collection::vec(-2.0f64..2.0, 4), sigma in 0.0f64..=1.0) {
            let (sys, noise) = double_integrator();
            let e = CovState(random_psd(&seed));
            let silent = expected_cov_step(&e, 0.0, sigma, &sys, &noise).unwrap();
            let sent = expected_cov_step(&e, 1.0, sigma, &sys, &noise).unwrap();
            prop_assert!(sent.0.trace() <= silent.0.trace() + 1e-12);
        }

        #[test]
        fn relaxed_delta_is_convex_combination(seed in prop::collection::vec(-2.0f64..2.0, 4), delta in 0.0f64..=1.0, sigma in 0.0f64..=1.0) {
            let (sys, noise) = double_integrator();
            let e = CovState(random_psd(&seed));
            let mixed = expected_cov_step(&e, delta, sigma, &sys, &noise).unwrap();
            let off = expected_cov_step(&e, 0.0, sigma, &sys, &noise).unwrap();
            let on = expected_cov_step(&e, 1.0, sigma, &sys, &noise).unwrap();
            let combo = &on.0 * delta + &off.0 * (1.0 - delta);
            prop_assert!(max_abs(&(mixed.0 - combo)) <= 1e-12 * max_abs(&off.0).max(1.0));
        }
    }

    #[test]
    fn random_walk_stays_symmetric_psd() {
        use rand::{Rng, SeedableRng};
        let (sys, noise) = double_integrator();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut e = CovState(noise.x0.clone());
        for _ in 0..10_000 {
            let delta = if rng.random::<bool>() { 1.0 } else { 0.0 };
            let sigma: f64 = rng.random();
            e = expected_cov_step(&e, delta, sigma, &sys, &noise).unwrap();
            // Long silent stretches inflate E; restart from X0.
            if max_abs(&e.0) > 1e3 {
                e = CovState(noise.x0.clone());
            }
            assert!(asymmetry(&e.0) <= 1e-10);
            assert!(min_symmetric_eigenvalue(&e.0) >= -1e-10);
        }
    }
}
