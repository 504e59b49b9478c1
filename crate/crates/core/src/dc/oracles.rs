//! Closed-form proximal oracles.

use nalgebra::DVector;

use super::{shrink, DcError, ProxMode, ProxOracle, ProxPoint};

/// `φ ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl ProxOracle for Zero {
    fn value(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }

    fn solve_prox(&self, y: &DVector<f64>, mu: f64, _mode: ProxMode) -> Result<ProxPoint, DcError> {
        Ok(ProxPoint::new(self, y.clone(), y, mu, 0))
    }
}

/// `φ(x) = (w/2)‖x − c‖²`.
#[derive(Debug, Clone)]
pub struct ShiftedQuadratic {
    pub center: DVector<f64>,
    pub weight: f64,
}

impl ShiftedQuadratic {
    pub fn new(center: DVector<f64>, weight: f64) -> Self {
        assert!(weight >= 0.0, "quadratic weight must be nonnegative");
        Self { center, weight }
    }

    /// `(1/2)‖x‖²` on `R^dim`.
    pub fn half_squared_norm(dim: usize) -> Self {
        Self::new(DVector::zeros(dim), 1.0)
    }
}

impl ProxOracle for ShiftedQuadratic {
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.weight * (x - &self.center).norm_squared()
    }

    fn solve_prox(&self, y: &DVector<f64>, mu: f64, _mode: ProxMode) -> Result<ProxPoint, DcError> {
        if y.len() != self.center.len() {
            return Err(DcError::DimensionMismatch(format!("point {} vs center {}", y.len(), self.center.len())));
        }
        let mw = mu * self.weight;
        let x = (y + &self.center * mw) / (1.0 + mw);
        Ok(ProxPoint::new(self, x, y, mu, 0))
    }
}

/// `φ(x) = ρ‖x‖₁`; the prox is the coordinatewise soft threshold at `μρ`.
#[derive(Debug, Clone, Copy)]
pub struct L1Norm {
    pub rho: f64,
}

impl L1Norm {
    pub fn new(rho: f64) -> Self {
        assert!(rho >= 0.0, "ℓ1 weight must be nonnegative");
        Self { rho }
    }
}

impl ProxOracle for L1Norm {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.rho * x.lp_norm(1)
    }

    fn solve_prox(&self, y: &DVector<f64>, mu: f64, _mode: ProxMode) -> Result<ProxPoint, DcError> {
        let t = mu * self.rho;
        Ok(ProxPoint::new(self, y.map(|v| shrink(v, t)), y, mu, 0))
    }
}

/// `φ(x) = ρ‖x‖₂`; the prox is block shrinkage `(1 − μρ/‖y‖)₊ y`.
#[derive(Debug, Clone, Copy)]
pub struct L2Norm {
    pub rho: f64,
}

impl L2Norm {
    pub fn new(rho: f64) -> Self {
        assert!(rho >= 0.0, "ℓ2 weight must be nonnegative");
        Self { rho }
    }
}

impl ProxOracle for L2Norm {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.rho * x.norm()
    }

    fn solve_prox(&self, y: &DVector<f64>, mu: f64, _mode: ProxMode) -> Result<ProxPoint, DcError> {
        let t = mu * self.rho;
        let norm = y.norm();
        let x = if norm <= t { DVector::zeros(y.len()) } else { y * (1.0 - t / norm) };
        Ok(ProxPoint::new(self, x, y, mu, 0))
    }
}

/// `φ(x) = ρ‖x‖₁ − (c/2)‖x‖²`, weakly convex with modulus `c`. The prox is
/// the soft threshold at `μρ` stretched by `1 / (1 − μc)`.
#[derive(Debug, Clone, Copy)]
pub struct WeaklyConvexL1 {
    pub rho: f64,
    pub curvature: f64,
}

impl WeaklyConvexL1 {
    pub fn new(rho: f64, curvature: f64) -> Self {
        assert!(rho >= 0.0 && curvature >= 0.0);
        Self { rho, curvature }
    }
}

impl ProxOracle for WeaklyConvexL1 {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.rho * x.lp_norm(1) - 0.5 * self.curvature * x.norm_squared()
    }

    fn weak_convexity(&self) -> f64 {
        self.curvature
    }

    fn solve_prox(&self, y: &DVector<f64>, mu: f64, _mode: ProxMode) -> Result<ProxPoint, DcError> {
        let t = mu * self.rho;
        let stretch = 1.0 / (1.0 - mu * self.curvature);
        Ok(ProxPoint::new(self, y.map(|v| shrink(v, t) * stretch), y, mu, 0))
    }
}
