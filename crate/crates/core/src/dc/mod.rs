//! Difference-of-convex functions accessed through proximal oracles.
//!
//! Each agent's objective is `f_i − g_i` with `f_i` weakly convex and `g_i`
//! convex. Both parts are smoothed by their Moreau envelopes
//!
//! ```text
//! M_{μφ}(y) = min_x φ(x) + ‖x − y‖² / (2μ),    x_{μφ}(y) = argmin of the same
//! ```
//!
//! which are differentiable with `∇M_{μφ}(y) = (y − x_{μφ}(y)) / μ`. The
//! smoothed local objective `F_{i,μ} = M_{μf_i} − M_{μg_i}` therefore has
//! gradient `(x_{μg_i}(y) − x_{μf_i}(y)) / μ`.

mod lasso;
mod oracles;

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

pub use lasso::{LassoComposite, DEFAULT_INNER_MAX_ITERS, DEFAULT_INNER_TOL};
pub use oracles::{L1Norm, L2Norm, ShiftedQuadratic, WeaklyConvexL1, Zero};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DcError {
    #[error("smoothing parameter μ = {mu} out of range for weak-convexity modulus {modulus} (need 0 < μ·m < 1)")]
    SmoothingOutOfRange { mu: f64, modulus: f64 },
    #[error("inner prox solver failed after {iterations} iterations (fixed-point residual {residual:e})")]
    InnerSolverDiverged { iterations: usize, residual: f64 },
    #[error("convex part has weak-convexity modulus {0}, expected 0")]
    NotConvex(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// How hard an iterative prox oracle works. Closed-form oracles ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProxMode {
    /// Iterate to the oracle's configured fixed-point tolerance.
    #[default]
    Exact,
    /// Stop after at most this many inner iterations.
    Budget(usize),
}

/// A proximal-map evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxPoint {
    pub x: DVector<f64>,
    /// `φ(x) + ‖x − y‖² / (2μ)`, the Moreau envelope when `x` is exact.
    pub envelope: f64,
    pub iterations: usize,
}

impl ProxPoint {
    pub(crate) fn new(phi: &(impl ProxOracle + ?Sized), x: DVector<f64>, y: &DVector<f64>, mu: f64, iterations: usize) -> Self {
        let envelope = phi.value(&x) + (&x - y).norm_squared() / (2.0 * mu);
        Self { x, envelope, iterations }
    }
}

/// Evaluation and proximal access to a (weakly) convex function `φ`.
pub trait ProxOracle: Send + Sync + fmt::Debug {
    fn value(&self, x: &DVector<f64>) -> f64;

    /// `m ≥ 0` such that `φ + (m/2)‖·‖²` is convex.
    fn weak_convexity(&self) -> f64 {
        0.0
    }

    /// Minimizes `φ(x) + ‖x − y‖² / (2μ)`; `μ` has already been validated.
    fn solve_prox(&self, y: &DVector<f64>, mu: f64, mode: ProxMode) -> Result<ProxPoint, DcError>;

    fn prox_point(&self, y: &DVector<f64>, mu: f64, mode: ProxMode) -> Result<ProxPoint, DcError> {
        check_smoothing(mu, self.weak_convexity())?;
        self.solve_prox(y, mu, mode)
    }
}

pub(crate) fn check_smoothing(mu: f64, modulus: f64) -> Result<(), DcError> {
    if mu > 0.0 && mu.is_finite() && mu * modulus < 1.0 {
        Ok(())
    } else {
        Err(DcError::SmoothingOutOfRange { mu, modulus })
    }
}

/// `x_{μφ}(y)`.
pub fn prox(phi: &dyn ProxOracle, y: &DVector<f64>, mu: f64) -> Result<DVector<f64>, DcError> {
    Ok(phi.prox_point(y, mu, ProxMode::Exact)?.x)
}

/// `M_{μφ}(y)`.
pub fn moreau_value(phi: &dyn ProxOracle, y: &DVector<f64>, mu: f64) -> Result<f64, DcError> {
    Ok(phi.prox_point(y, mu, ProxMode::Exact)?.envelope)
}

/// One agent's pair `(f_i, g_i)`.
#[derive(Debug, Clone)]
pub struct DcFunction {
    pub f: Arc<dyn ProxOracle>,
    pub g: Arc<dyn ProxOracle>,
}

/// Both prox maps of a [`DcFunction`] at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxPair {
    pub f: ProxPoint,
    pub g: ProxPoint,
}

impl ProxPair {
    /// `x_{μg}(y) − x_{μf}(y)`.
    pub fn gap(&self) -> DVector<f64> {
        &self.g.x - &self.f.x
    }
}

impl DcFunction {
    pub fn new(f: Arc<dyn ProxOracle>, g: Arc<dyn ProxOracle>) -> Result<Self, DcError> {
        let mg = g.weak_convexity();
        if mg != 0.0 {
            return Err(DcError::NotConvex(mg));
        }
        Ok(Self { f, g })
    }

    /// `f(x) − g(x)`.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.f.value(x) - self.g.value(x)
    }

    pub fn weak_convexity(&self) -> f64 {
        self.f.weak_convexity()
    }

    pub fn prox_pair(&self, y: &DVector<f64>, mu: f64, mode: ProxMode) -> Result<ProxPair, DcError> {
        Ok(ProxPair { f: self.f.prox_point(y, mu, mode)?, g: self.g.prox_point(y, mu, mode)? })
    }

    /// `F_{i,μ}(y) = M_{μf}(y) − M_{μg}(y)`.
    pub fn smoothed_value(&self, y: &DVector<f64>, mu: f64) -> Result<f64, DcError> {
        let pair = self.prox_pair(y, mu, ProxMode::Exact)?;
        Ok(pair.f.envelope - pair.g.envelope)
    }
}

/// `∇F_{i,μ}(y) = (x_{μg}(y) − x_{μf}(y)) / μ`.
pub fn grad_f_mu(dc: &DcFunction, y: &DVector<f64>, mu: f64, mode: ProxMode) -> Result<DVector<f64>, DcError> {
    Ok(dc.prox_pair(y, mu, mode)?.gap() / mu)
}

/// Smoothing parameter together with the Lipschitz moduli it implies.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SmoothingParams {
    pub mu: f64,
    pub m_f: f64,
    /// Modulus of `∇M_{μf}`: `(2 − μ m_f) / (μ − μ² m_f)`.
    pub l_mu_mf: f64,
    /// Modulus of `∇M_{μg}`: `2 / μ`.
    pub l_mu_mg: f64,
    /// Modulus of `∇F_{i,μ}`, equal to `l_mu_mf`.
    pub l_mu_f: f64,
}

/// Moduli for `0 < μ < 1/m_f` (any positive μ when `m_f = 0`).
pub fn lipschitz_constants(m_f: f64, mu: f64) -> Result<SmoothingParams, DcError> {
    if m_f < 0.0 || !m_f.is_finite() {
        return Err(DcError::SmoothingOutOfRange { mu, modulus: m_f });
    }
    check_smoothing(mu, m_f)?;
    let l_mu_mf = (2.0 - mu * m_f) / (mu - mu * mu * m_f);
    if !l_mu_mf.is_finite() {
        return Err(DcError::SmoothingOutOfRange { mu, modulus: m_f });
    }
    Ok(SmoothingParams { mu, m_f, l_mu_mf, l_mu_mg: 2.0 / mu, l_mu_f: l_mu_mf })
}

/// Coordinatewise `sign(y)·max(|y| − t, 0)`; ties at `|y| = t` map to zero.
pub fn soft_threshold(y: &DVector<f64>, t: f64) -> DVector<f64> {
    y.map(|v| shrink(v, t))
}

#[inline]
pub(crate) fn shrink(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}
