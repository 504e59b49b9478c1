use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::consensus::RadiusRule;
use crate::solver::{StepScaling, Variant};

/// Name of the generator recorded in manifests: ChaCha20 (rand_chacha 0.9),
/// instance draws on stream 1, graph draws on stream 0 reseeded per attempt.
pub const RNG_NAME: &str = "chacha20/rand_chacha-0.9";

/// Problem sizes beyond this many matrix entries in total trigger a runtime warning.
pub const LARGE_INSTANCE_ENTRIES: usize = 5_000_000;

/// Parameters of the sparse-recovery benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_agents: usize,
    /// Rows of each agent's measurement matrix.
    pub m: usize,
    /// Dimension of the decision variable.
    pub p: usize,
    /// Nonzeros of the ground truth; `⌈0.05 p⌉` when absent.
    pub s: Option<usize>,
    pub rho: f64,
    pub noise_scale: f64,
    pub connect_prob: f64,
    pub alpha: f64,
    pub theta: f64,
    pub seed: u64,
    pub variants: Vec<Variant>,
    /// Outer iterations.
    #[serde(rename = "K")]
    pub k_max: usize,
    pub output: PathBuf,
    pub certify: bool,
    pub step_scaling: StepScaling,
    pub radius_rule: RadiusRule,
    /// Write per-round radius traces of the consensus variants.
    pub trace_consensus: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_agents: 10,
            m: 72,
            p: 256,
            s: None,
            rho: 0.1,
            noise_scale: 0.01,
            connect_prob: 0.2,
            alpha: 0.01,
            theta: 0.1,
            seed: 42,
            variants: Variant::benchmark_set(),
            k_max: 300,
            output: PathBuf::from("out"),
            certify: true,
            step_scaling: StepScaling::default(),
            radius_rule: RadiusRule::default(),
            trace_consensus: false,
        }
    }
}

impl ExperimentConfig {
    /// Large preset: 720 rows per agent, dimension 2560.
    pub fn paper_scale() -> Self {
        Self { m: 720, p: 2560, ..Self::default() }
    }

    pub fn sparsity(&self) -> usize {
        self.s.unwrap_or_else(|| (self.p as f64 * 0.05).ceil() as usize)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::InvalidConfig(msg));
        if self.n_agents == 0 || self.m == 0 || self.p == 0 {
            return bad(format!("sizes must be positive (n={}, m={}, p={})", self.n_agents, self.m, self.p));
        }
        let s = self.sparsity();
        if s == 0 || s > self.p {
            return bad(format!("sparsity must lie in 1..={}, got {s}", self.p));
        }
        for (name, v) in [("rho", self.rho), ("alpha", self.alpha), ("theta", self.theta)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return bad(format!("noise_scale must be nonnegative, got {}", self.noise_scale));
        }
        if !(self.connect_prob > 0.0 && self.connect_prob <= 1.0) {
            return bad(format!("connect_prob must lie in (0, 1], got {}", self.connect_prob));
        }
        if self.variants.is_empty() {
            return bad("no variants requested".into());
        }
        Ok(())
    }

    pub fn is_large(&self) -> bool {
        self.n_agents * self.m * self.p > LARGE_INSTANCE_ENTRIES
    }
}
