//! `φ(x) = (1/2)‖Ax − b‖² + ρ‖x‖₁` with an iterative prox.

use nalgebra::{DMatrix, DVector};

use super::{shrink, DcError, ProxMode, ProxOracle, ProxPoint};
use crate::linalg::gram_lambda_max;

pub const DEFAULT_INNER_TOL: f64 = 1e-10;
pub const DEFAULT_INNER_MAX_ITERS: usize = 100_000;

/// Least squares plus an ℓ1 penalty.
///
/// The prox subproblem `min_x φ(x) + ‖x − y‖²/(2μ)` is `1/μ`-strongly convex
/// with an `(λ_max(AᵀA) + 1/μ)`-smooth part, and is solved by accelerated
/// proximal gradient with constant momentum, warm-started at `y`. The loop
/// stops when the fixed-point residual `‖z − T(z)‖` of the prox-gradient map
/// `T` at the extrapolated point drops below `tol`.
#[derive(Debug, Clone)]
pub struct LassoComposite {
    a: DMatrix<f64>,
    b: DVector<f64>,
    rho: f64,
    lambda_max: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl LassoComposite {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, rho: f64) -> Result<Self, DcError> {
        let lambda_max = gram_lambda_max(&a);
        Self::with_lambda_max(a, b, rho, lambda_max)
    }

    /// Skips the eigenvalue computation when `λ_max(AᵀA)` is already known.
    pub fn with_lambda_max(a: DMatrix<f64>, b: DVector<f64>, rho: f64, lambda_max: f64) -> Result<Self, DcError> {
        if a.nrows() != b.len() {
            return Err(DcError::DimensionMismatch(format!("A has {} rows, b has {}", a.nrows(), b.len())));
        }
        assert!(rho >= 0.0, "ℓ1 weight must be nonnegative");
        Ok(Self { a, b, rho, lambda_max, tol: DEFAULT_INNER_TOL, max_iters: DEFAULT_INNER_MAX_ITERS })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }
}

impl ProxOracle for LassoComposite {
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.a * x - &self.b).norm_squared() + self.rho * x.lp_norm(1)
    }

    fn solve_prox(&self, y: &DVector<f64>, mu: f64, mode: ProxMode) -> Result<ProxPoint, DcError> {
        let p = self.a.ncols();
        if y.len() != p {
            return Err(DcError::DimensionMismatch(format!("point {} vs {p} columns", y.len())));
        }
        let budget = match mode {
            ProxMode::Exact => self.max_iters,
            ProxMode::Budget(q) => q,
        };
        let inv_mu = 1.0 / mu;
        let lip = self.lambda_max + inv_mu;
        let step = 1.0 / lip;
        let kappa_root = (lip * mu).sqrt();
        let momentum = (kappa_root - 1.0) / (kappa_root + 1.0);
        let thresh = step * self.rho;

        let mut x = y.clone();
        let mut z = y.clone();
        let mut resid = DVector::zeros(self.a.nrows());
        let mut grad = DVector::zeros(p);
        let mut x_next = DVector::zeros(p);
        let mut fixed_point = f64::INFINITY;
        let mut iters = 0;

        while iters < budget {
            iters += 1;
            // grad = Aᵀ(Az − b) + (z − y)/μ
            resid.copy_from(&self.b);
            resid.gemv(1.0, &self.a, &z, -1.0);
            grad.copy_from(&z);
            grad.axpy(-inv_mu, y, inv_mu);
            grad.gemv_tr(1.0, &self.a, &resid, 1.0);

            fixed_point = 0.0;
            for j in 0..p {
                let t = shrink(z[j] - step * grad[j], thresh);
                fixed_point += (t - z[j]) * (t - z[j]);
                x_next[j] = t;
            }
            fixed_point = fixed_point.sqrt();
            if !fixed_point.is_finite() {
                return Err(DcError::InnerSolverDiverged { iterations: iters, residual: fixed_point });
            }
            for j in 0..p {
                z[j] = x_next[j] + momentum * (x_next[j] - x[j]);
            }
            std::mem::swap(&mut x, &mut x_next);
            if fixed_point < self.tol {
                break;
            }
        }
        if matches!(mode, ProxMode::Exact) && fixed_point >= self.tol {
            return Err(DcError::InnerSolverDiverged { iterations: iters, residual: fixed_point });
        }
        Ok(ProxPoint::new(self, x, y, mu, iters))
    }
}
