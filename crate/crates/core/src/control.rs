//! Controller synthesis and the price of estimation error.
//!
//! A stabilizing state feedback `u = -K x` is designed per agent, either as
//! an LQR (through the discrete algebraic Riccati equation) or from an
//! arbitrary stabilizing gain. The quadratic Lyapunov function `V(x) = xᵀPx`
//! of the closed loop then defines
//!
//! ```text
//! Γ = Kᵀ (R + BᵀPB) K
//! ```
//!
//! and `tr(Γ E)` is the expected one-step increase of `V` caused by an
//! estimation error with covariance `E`. The scheduler minimizes the sum of
//! these traces.

use crate::linalg::{cholesky_solve, max_abs, symmetrize, symmetrize_in_place, Mat, Vector};
use nalgebra::ComplexField;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{0} is not symmetric")]
    NotSymmetric(&'static str),
    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("iteration did not converge after {iterations} iterations (last step {last_step:.3e})")]
    NonConvergent { iterations: usize, last_step: f64 },
    #[error("closed loop is not stable: spectral radius {0}")]
    NotStabilizing(f64),
}

/// Numerical settings for the Lyapunov and Riccati solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverTolerances {
    /// Relative ∞-norm step below which the Riccati recursion stops.
    pub riccati_step: f64,
    pub riccati_max_iter: usize,
    /// Accepted Lyapunov residual, relative to `max(1, ‖P‖)`.
    pub lyapunov_residual: f64,
    pub lyapunov_max_doublings: usize,
    pub symmetry: f64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            riccati_step: 1e-12,
            riccati_max_iter: 100_000,
            lyapunov_residual: 1e-10,
            lyapunov_max_doublings: 64,
            symmetry: 1e-12,
        }
    }
}

/// Plant and sensor matrices of one agent: `x⁺ = Ax + Bu + w`, `y = Cx + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
}

impl SystemMatrices {
    pub fn new(a: Mat, b: Mat, c: Mat) -> Result<Self, ControlError> {
        if !a.is_square() {
            return Err(ControlError::Dimension(format!("A is {}x{}", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        if b.nrows() != n {
            return Err(ControlError::Dimension(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(ControlError::Dimension(format!("C has {} columns, expected {n}", c.ncols())));
        }
        Ok(Self { a, b, c })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// `A - BK`.
    pub fn closed_loop(&self, k: &Mat) -> Mat {
        &self.a - &self.b * k
    }
}

/// Stage cost weights of `ℓ(x,u) = [x;u]ᵀ [[Q, Sᵀ], [S, R]] [x;u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrWeights {
    pub q: Mat,
    pub r: Mat,
    pub s: Mat,
}

impl LqrWeights {
    pub fn new(q: Mat, r: Mat, s: Mat) -> Result<Self, ControlError> {
        if !q.is_square() || !r.is_square() {
            return Err(ControlError::Dimension("Q and R must be square".into()));
        }
        if s.shape() != (r.nrows(), q.nrows()) {
            return Err(ControlError::Dimension(format!(
                "S is {}x{}, expected {}x{}",
                s.nrows(),
                s.ncols(),
                r.nrows(),
                q.nrows()
            )));
        }
        let tol = SolverTolerances::default().symmetry;
        if crate::linalg::asymmetry(&q) > tol * max_abs(&q).max(1.0) {
            return Err(ControlError::NotSymmetric("Q"));
        }
        if crate::linalg::asymmetry(&r) > tol * max_abs(&r).max(1.0) {
            return Err(ControlError::NotSymmetric("R"));
        }
        if symmetrize(&r).cholesky().is_none() {
            return Err(ControlError::NotPositiveDefinite("R"));
        }
        Ok(Self { q, r, s })
    }

    /// Weights without a cross term.
    pub fn diagonal(q: Mat, r: Mat) -> Result<Self, ControlError> {
        let s = Mat::zeros(r.nrows(), q.nrows());
        Self::new(q, r, s)
    }

    /// All three blocks multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { q: &self.q * factor, r: &self.r * factor, s: &self.s * factor }
    }

    fn check_against(&self, sys: &SystemMatrices) -> Result<(), ControlError> {
        if self.q.nrows() != sys.state_dim() || self.r.nrows() != sys.input_dim() {
            return Err(ControlError::Dimension(format!(
                "weights are for n={}, m={} but system has n={}, m={}",
                self.q.nrows(),
                self.r.nrows(),
                sys.state_dim(),
                sys.input_dim()
            )));
        }
        Ok(())
    }
}

/// A designed feedback `u = -K x̂` together with its Lyapunov matrix and the
/// error-pricing matrix Γ.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerDesign {
    pub k: Mat,
    pub p: Mat,
    pub gamma: Mat,
    pub weights: LqrWeights,
}

impl ControllerDesign {
    /// LQR design through the DARE.
    pub fn lqr(sys: &SystemMatrices, weights: LqrWeights) -> Result<Self, ControlError> {
        let (p, k) = solve_dare(sys, &weights)?;
        let gamma = gamma_matrix(&k, &weights.r, &sys.b, &p)?;
        Ok(Self { k, p, gamma, weights })
    }

    /// Design for a given stabilizing gain: `P` solves
    /// `A_Kᵀ P A_K - P + Q = 0` for the supplied `q`, and Γ uses `r`.
    pub fn from_gain(sys: &SystemMatrices, k: Mat, q: Mat, r: Mat) -> Result<Self, ControlError> {
        let a_k = sys.closed_loop(&k);
        let p = solve_discrete_lyapunov(&a_k, &q)?;
        let gamma = gamma_matrix(&k, &r, &sys.b, &p)?;
        let weights = LqrWeights::diagonal(q, r)?;
        Ok(Self { k, p, gamma, weights })
    }

    /// `[I; -K]ᵀ [[Q, Sᵀ], [S, R]] [I; -K]`, the stage cost of the nominal
    /// loop `u = -Kx`. For a DARE design `A_Kᵀ P A_K - P + Q_eff = 0`.
    pub fn closed_loop_weight(&self) -> Mat {
        let w = &self.weights;
        let sk = w.s.transpose() * &self.k;
        symmetrize(&(&w.q - &sk - sk.transpose() + self.k.transpose() * &w.r * &self.k))
    }

    pub fn control(&self, xhat: &Vector) -> Vector {
        -(&self.k * xhat)
    }
}

/// Spectral radius from the real Schur form.
pub fn spectral_radius(a: &Mat) -> Result<f64, ControlError> {
    if !a.is_square() {
        return Err(ControlError::Dimension("spectral radius of a non-square matrix".into()));
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or(ControlError::NonConvergent { iterations: 10_000, last_step: f64::NAN })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.clone().modulus())
        .fold(0.0, f64::max))
}

/// Solves `A_Kᵀ P A_K - P + Q = 0` by squared Smith (doubling) iteration
/// followed by a few plain fixed-point refinement sweeps.
pub fn solve_discrete_lyapunov(a_k: &Mat, q: &Mat) -> Result<Mat, ControlError> {
    solve_discrete_lyapunov_with(a_k, q, &SolverTolerances::default())
}

pub fn solve_discrete_lyapunov_with(
    a_k: &Mat,
    q: &Mat,
    tol: &SolverTolerances,
) -> Result<Mat, ControlError> {
    if !a_k.is_square() || q.shape() != a_k.shape() {
        return Err(ControlError::Dimension("A_K and Q must be square and of equal size".into()));
    }
    let rho = spectral_radius(a_k)?;
    if rho >= 1.0 {
        return Err(ControlError::NonConvergent { iterations: 0, last_step: f64::INFINITY });
    }

    let mut p = symmetrize(q);
    let mut power = a_k.clone();
    let mut last_step = f64::INFINITY;
    let mut converged = false;
    for _ in 0..tol.lyapunov_max_doublings {
        let increment = power.transpose() * &p * &power;
        last_step = max_abs(&increment);
        p += increment;
        symmetrize_in_place(&mut p);
        power = &power * &power;
        if !p.iter().all(|v| v.is_finite()) {
            break;
        }
        if last_step <= f64::EPSILON * max_abs(&p).max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(ControlError::NonConvergent { iterations: tol.lyapunov_max_doublings, last_step });
    }

    for _ in 0..3 {
        p = q + a_k.transpose() * &p * a_k;
        symmetrize_in_place(&mut p);
    }
    let residual = lyapunov_residual(a_k, q, &p);
    if residual > tol.lyapunov_residual * max_abs(&p).max(1.0) {
        return Err(ControlError::NonConvergent { iterations: tol.lyapunov_max_doublings, last_step: residual });
    }
    Ok(p)
}

/// `‖A_Kᵀ P A_K - P + Q‖` (largest absolute entry).
pub fn lyapunov_residual(a_k: &Mat, q: &Mat, p: &Mat) -> f64 {
    max_abs(&(a_k.transpose() * p * a_k - p + q))
}

/// Stabilizing solution of the DARE with cross term:
///
/// ```text
/// 0 = Q - P + AᵀPA - (Sᵀ + AᵀPB) K
/// K = (R + BᵀPB)⁻¹ (S + BᵀPA)
/// ```
///
/// computed by the Riccati recursion started at `P₀ = Q`.
pub fn solve_dare(sys: &SystemMatrices, w: &LqrWeights) -> Result<(Mat, Mat), ControlError> {
    solve_dare_with(sys, w, &SolverTolerances::default())
}

pub fn solve_dare_with(
    sys: &SystemMatrices,
    w: &LqrWeights,
    tol: &SolverTolerances,
) -> Result<(Mat, Mat), ControlError> {
    w.check_against(sys)?;
    let a = &sys.a;
    let b = &sys.b;
    let at = a.transpose();
    let st = w.s.transpose();

    let mut p = symmetrize(&w.q);
    let mut last_step = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < tol.riccati_max_iter {
        iterations += 1;
        let k = riccati_gain(sys, w, &p)?;
        let mut next = &w.q + &at * &p * a - (&st + &at * &p * b) * k;
        symmetrize_in_place(&mut next);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(ControlError::NonConvergent { iterations, last_step });
        }
        last_step = max_abs(&(&next - &p));
        p = next;
        if last_step <= tol.riccati_step * max_abs(&p).max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(ControlError::NonConvergent { iterations, last_step });
    }
    let k = riccati_gain(sys, w, &p)?;
    let rho = spectral_radius(&sys.closed_loop(&k))?;
    if rho >= 1.0 {
        return Err(ControlError::NotStabilizing(rho));
    }
    Ok((p, k))
}

/// `K = (R + BᵀPB)⁻¹ (S + BᵀPA)`; a failed Cholesky factorization means the
/// iterate left the positive definite cone.
fn riccati_gain(sys: &SystemMatrices, w: &LqrWeights, p: &Mat) -> Result<Mat, ControlError> {
    let bt = sys.b.transpose();
    let h = &w.r + &bt * p * &sys.b;
    let rhs = &w.s + &bt * p * &sys.a;
    cholesky_solve(&h, &rhs).ok_or(ControlError::NonConvergent { iterations: 0, last_step: f64::NAN })
}

/// Residuals `(‖Q - P + AᵀPA - (Sᵀ + AᵀPB)K‖, ‖(R + BᵀPB)K - (S + BᵀPA)‖)`.
pub fn dare_residuals(sys: &SystemMatrices, w: &LqrWeights, p: &Mat, k: &Mat) -> (f64, f64) {
    let at = sys.a.transpose();
    let bt = sys.b.transpose();
    let first = &w.q - p + &at * p * &sys.a - (w.s.transpose() + &at * p * &sys.b) * k;
    let second = (&w.r + &bt * p * &sys.b) * k - (&w.s + &bt * p * &sys.a);
    (max_abs(&first), max_abs(&second))
}

/// Inverse LQR: weights `R = I, S = K, Q = KᵀK` for which `K` is the optimal
/// gain (the DARE is solved by `P = 0`).
pub fn lqr_from_gain(sys: &SystemMatrices, k: &Mat) -> Result<LqrWeights, ControlError> {
    if k.shape() != (sys.input_dim(), sys.state_dim()) {
        return Err(ControlError::Dimension(format!(
            "K is {}x{}, expected {}x{}",
            k.nrows(),
            k.ncols(),
            sys.input_dim(),
            sys.state_dim()
        )));
    }
    let rho = spectral_radius(&sys.closed_loop(k))?;
    if rho >= 1.0 {
        return Err(ControlError::NotStabilizing(rho));
    }
    let m = sys.input_dim();
    Ok(LqrWeights { q: k.transpose() * k, r: Mat::identity(m, m), s: k.clone() })
}

/// `Γ = Kᵀ (R + BᵀPB) K`, symmetrized.
pub fn gamma_matrix(k: &Mat, r: &Mat, b: &Mat, p: &Mat) -> Result<Mat, ControlError> {
    let n = p.nrows();
    let m = r.nrows();
    if k.shape() != (m, n) || b.shape() != (n, m) || !p.is_square() || !r.is_square() {
        return Err(ControlError::Dimension("K, R, B, P sizes are inconsistent".into()));
    }
    Ok(symmetrize(&(k.transpose() * (r + b.transpose() * p * b) * k)))
}

/// `ℓ(x,u) = xᵀQx + 2uᵀSx + uᵀRu`.
pub fn stage_cost(x: &Vector, u: &Vector, w: &LqrWeights) -> f64 {
    x.dot(&(&w.q * x)) + 2.0 * u.dot(&(&w.s * x)) + u.dot(&(&w.r * u))
}
