//! Residual metrics, stationarity certificates and checks of the
//! convergence-analysis bounds against a recorded run.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::consensus::mean_vector;
use crate::dc::{DcError, DcFunction, ProxMode, ProxPair};

/// Ground truth used by the solution and objective residuals.
#[derive(Debug, Clone, Default)]
pub struct Reference {
    pub x_star: Option<DVector<f64>>,
    pub f_star: Option<f64>,
}

/// One row per outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub k: usize,
    pub eta_k: f64,
    /// Communication rounds spent producing this iterate.
    pub consensus_rounds: usize,
    pub solution_residual: Option<f64>,
    pub stationarity_residual: f64,
    pub objective_residual: Option<f64>,
    pub consensus_residual: f64,
    pub xi_norm: f64,
    pub xi_hat_norm: Option<f64>,
    pub elapsed_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// `(1/n) Σ ‖y_i − x*‖`.
    pub solution: Option<f64>,
    /// `(1/n) Σ ‖x_{μg_i}(y_i) − x_{μf_i}(y_i)‖`.
    pub stationarity: f64,
    /// `|F(y_1) − F*|` with the nonsmooth objective `F`.
    pub objective: Option<f64>,
    /// `(1/n) Σ_i Σ_j ‖y_i − y_j‖`.
    pub consensus: f64,
}

/// Exact prox pairs `(x_{μf_i}(y_i), x_{μg_i}(y_i))` for every agent.
pub fn prox_pairs(problem: &[DcFunction], ys: &[DVector<f64>], mu: f64, mode: ProxMode) -> Result<Vec<ProxPair>, DcError> {
    if problem.len() != ys.len() {
        return Err(DcError::DimensionMismatch(format!("{} functions, {} points", problem.len(), ys.len())));
    }
    problem.par_iter().zip(ys.par_iter()).map(|(dc, y)| dc.prox_pair(y, mu, mode)).collect()
}

/// Prox pairs of every agent's functions at one common point.
pub fn prox_pairs_at(problem: &[DcFunction], y: &DVector<f64>, mu: f64) -> Result<Vec<ProxPair>, DcError> {
    problem.par_iter().map(|dc| dc.prox_pair(y, mu, ProxMode::Exact)).collect()
}

/// `F(x) = (1/n) Σ (f_i(x) − g_i(x))`.
pub fn objective(problem: &[DcFunction], x: &DVector<f64>) -> f64 {
    problem.iter().map(|dc| dc.value(x)).sum::<f64>() / problem.len() as f64
}

/// `(1/n) Σ_i Σ_j ‖y_i − y_j‖`.
pub fn consensus_residual(ys: &[DVector<f64>]) -> f64 {
    let n = ys.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += (&ys[i] - &ys[j]).norm();
        }
    }
    total / n as f64
}

/// Averaged prox gap `(1/n) Σ (x_{μg_i} − x_{μf_i})`.
pub fn mean_gap(pairs: &[ProxPair]) -> DVector<f64> {
    let gaps: Vec<_> = pairs.iter().map(ProxPair::gap).collect();
    mean_vector(&gaps)
}

pub(crate) fn residuals_from_pairs(
    problem: &[DcFunction],
    ys: &[DVector<f64>],
    pairs: &[ProxPair],
    reference: &Reference,
) -> Residuals {
    let n = ys.len() as f64;
    Residuals {
        solution: reference.x_star.as_ref().map(|xs| ys.iter().map(|y| (y - xs).norm()).sum::<f64>() / n),
        stationarity: pairs.iter().map(|p| p.gap().norm()).sum::<f64>() / n,
        objective: reference.f_star.map(|fs| (objective(problem, &ys[0]) - fs).abs()),
        consensus: consensus_residual(ys),
    }
}

/// All four residuals at the agents' iterates `ys`.
pub fn residuals(problem: &[DcFunction], ys: &[DVector<f64>], mu: f64, reference: &Reference) -> Result<Residuals, DcError> {
    let pairs = prox_pairs(problem, ys, mu, ProxMode::Exact)?;
    Ok(residuals_from_pairs(problem, ys, &pairs, reference))
}

/// `ξ` from the agents' iterates and `ξ̂` from their average.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub xi: DVector<f64>,
    pub xi_hat: DVector<f64>,
}

/// `ξ = μ⁻¹ (1/n) Σ (x_{μg_i}(y_i) − x_{μf_i}(y_i))`, and `ξ̂` the same with
/// every `y_i` replaced by `ŷ`. `ξ̂` equals `∇F_μ(ŷ)`.
pub fn stationarity_certificate(problem: &[DcFunction], ys: &[DVector<f64>], mu: f64) -> Result<Certificate, DcError> {
    let pairs = prox_pairs(problem, ys, mu, ProxMode::Exact)?;
    let y_hat = mean_vector(ys);
    let hat_pairs = prox_pairs_at(problem, &y_hat, mu)?;
    Ok(Certificate { xi: mean_gap(&pairs) / mu, xi_hat: mean_gap(&hat_pairs) / mu })
}

/// Quantities around the averaged iterate, recorded when diagnostics are on.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationDiagnostics {
    pub k: usize,
    pub eta: f64,
    /// `ŷ^(k)`.
    pub y_hat: DVector<f64>,
    /// `ẑ^(k)`, the average the consensus step aimed at (absent at `k = 0`).
    pub z_hat: Option<DVector<f64>>,
    /// `max_i ‖y_i^(k) − ẑ^(k)‖`.
    pub max_dev_from_z_hat: Option<f64>,
    /// `h^(k) = (1/n) Σ ∇F_{i,μ}(y_i^(k))`.
    pub h: DVector<f64>,
    /// `ĥ^(k) = (1/n) Σ ∇F_{i,μ}(ŷ^(k))`.
    pub h_hat: DVector<f64>,
    /// `F_μ(ŷ^(k))`.
    pub smoothed_objective: f64,
}

/// Iterations where `‖h^(k) − ĥ^(k)‖ > 2 L_μF η^(k)`.
pub fn gradient_mismatch_violations(diags: &[IterationDiagnostics], l_mu_f: f64) -> Vec<usize> {
    diags
        .iter()
        .filter(|d| (&d.h - &d.h_hat).norm() > 2.0 * l_mu_f * d.eta)
        .map(|d| d.k)
        .collect()
}

/// Constants of the sufficient-decrease argument, from observed quantities:
/// `C₁ = (2αL + 1)² / α`, `C₂ = sup_k ‖ĥ^(k)‖ (2αL + 1)`, `C = C₁ + C₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentConstants {
    pub c1: f64,
    pub c2: f64,
    pub c: f64,
}

pub fn descent_constants(diags: &[IterationDiagnostics], alpha: f64, l_mu_f: f64) -> DescentConstants {
    let growth = 2.0 * alpha * l_mu_f + 1.0;
    let sup_h = diags.iter().map(|d| d.h_hat.norm()).fold(0.0, f64::max);
    let c1 = growth * growth / alpha;
    let c2 = sup_h * growth;
    DescentConstants { c1, c2, c: c1 + c2 }
}

/// Iterations `k` where
/// `F_μ(ŷ^(k)) − F_μ(ŷ^(k+1)) + (3C/2) η^(k) < (α/2) ‖ĥ^(k)‖²`.
pub fn sufficient_decrease_violations(diags: &[IterationDiagnostics], alpha: f64, c: f64) -> Vec<usize> {
    diags
        .windows(2)
        .filter(|w| {
            let lhs = w[0].smoothed_objective - w[1].smoothed_objective + 1.5 * c * w[0].eta;
            lhs < 0.5 * alpha * w[0].h_hat.norm_squared()
        })
        .map(|w| w[0].k)
        .collect()
}

/// Riemann zeta for `s > 1`: direct sum plus an Euler–Maclaurin tail.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta needs s > 1");
    const N: usize = 1000;
    let head: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    let n = N as f64;
    head + n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
}

/// Outcome of the best-iterate rate inequality at one horizon `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateCheck {
    pub horizon: usize,
    /// `min_{k<K} ‖(1/n)Σ x_{μg_i}(ŷ^(k)) − (1/n)Σ x_{μf_i}(ŷ^(k))‖²`.
    pub lhs: f64,
    /// `(2μ²/(αK)) (F_μ(ŷ^(0)) − F_best + 2C ζ(1+θ))`.
    pub rhs: f64,
}

impl RateCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// Evaluates the rate inequality for each horizon covered by `diags`.
/// `F_best` is the smallest recorded `F_μ(ŷ^(k))`.
pub fn rate_checks(
    diags: &[IterationDiagnostics],
    horizons: &[usize],
    alpha: f64,
    mu: f64,
    theta: f64,
    c: f64,
) -> Vec<RateCheck> {
    let Some(first) = diags.first() else { return Vec::new() };
    let f_best = diags.iter().map(|d| d.smoothed_objective).fold(f64::INFINITY, f64::min);
    let tail = 2.0 * c * zeta(1.0 + theta);
    horizons
        .iter()
        .filter(|&&kk| kk >= 1 && kk <= diags.len())
        .map(|&kk| {
            let lhs = diags[..kk]
                .iter()
                .map(|d| (mu * mu) * d.h_hat.norm_squared())
                .fold(f64::INFINITY, f64::min);
            let rhs = 2.0 * mu * mu / (alpha * kk as f64) * (first.smoothed_objective - f_best + tail);
            RateCheck { horizon: kk, lhs, rhs }
        })
        .collect()
}
