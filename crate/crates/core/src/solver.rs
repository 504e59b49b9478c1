//! The DDC-Consensus outer loop and its two relaxations.
//!
//! Every outer iteration has two phases. Each agent first takes a gradient
//! step on its smoothed local objective,
//!
//! ```text
//! z_i = y_i − (α/μ) (x_{μg_i}(y_i) − x_{μf_i}(y_i)),
//! ```
//!
//! then the agents replace their iterates by η^(k+1)-accurate estimates of
//! the average `ẑ` (Consensus and Inexact variants) or by a single push-sum
//! round (Mixing). The tolerance schedule is `η^(k) = k^{−(1+θ)}` for `k ≥ 1`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{mean_vector, mixing_step, ConsensusError, EtaConsensus, RadiusRule, TraceRow, DEFAULT_MAX_ROUNDS};
use crate::dc::{lipschitz_constants, DcError, DcFunction, ProxMode, ProxPair, SmoothingParams};
use crate::graph::{Digraph, GraphError, WeightMatrix};
use crate::metrics::{mean_gap, prox_pairs, prox_pairs_at, residuals_from_pairs, IterationDiagnostics, Reference, RunRecord};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Dc(#[from] DcError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Which communication and prox accuracy the outer loop uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Exact prox maps and η-consensus.
    Consensus,
    /// η-consensus, but iterative prox maps stop after `q` inner iterations.
    Inexact(usize),
    /// Exact prox maps and one push-sum round instead of η-consensus.
    Mixing,
}

impl Variant {
    pub fn prox_mode(self) -> ProxMode {
        match self {
            Variant::Inexact(q) => ProxMode::Budget(q),
            Variant::Consensus | Variant::Mixing => ProxMode::Exact,
        }
    }

    /// The four variants of the benchmark study.
    pub fn benchmark_set() -> Vec<Variant> {
        vec![Variant::Consensus, Variant::Inexact(10), Variant::Inexact(100), Variant::Mixing]
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Consensus => write!(f, "consensus"),
            Variant::Inexact(q) => write!(f, "inexact-{q}"),
            Variant::Mixing => write!(f, "mixing"),
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "consensus" => Ok(Variant::Consensus),
            "mixing" => Ok(Variant::Mixing),
            other => other
                .strip_prefix("inexact-")
                .and_then(|q| q.parse().ok())
                .filter(|&q| q > 0)
                .map(Variant::Inexact)
                .ok_or_else(|| format!("unknown variant '{s}' (expected consensus, inexact-<q>, mixing)")),
        }
    }
}

impl Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Scale of the local gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepScaling {
    /// `z_i = y_i − α ∇F_{i,μ}(y_i)`: the average moves by `α h^(k)`.
    #[default]
    Aggregate,
    /// `z_i = y_i − (α/n) ∇F_{i,μ}(y_i)`: each agent descends on its `1/n`
    /// share, so the average moves by `(α/n) h^(k)`.
    PerAgentShare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Init {
    #[default]
    Zeros,
    /// Independent `scale · N(0, 1)` entries, agent by agent.
    Gaussian { seed: u64, scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub mu: f64,
    pub theta: f64,
    /// Tolerance reported for `k = 0`, where `k^{−(1+θ)}` is undefined.
    pub eta0: f64,
    pub max_outer_iters: usize,
    pub variant: Variant,
    /// Stop early once the stationarity residual drops below this value.
    pub stationarity_tol: Option<f64>,
    /// Diameter bound `D`; the exact diameter when absent.
    pub diameter_bound: Option<usize>,
    pub max_consensus_rounds: usize,
    pub radius_rule: RadiusRule,
    pub step_scaling: StepScaling,
    pub init: Init,
    /// Also evaluate `ξ̂` (prox maps at the average).
    pub certify: bool,
    /// Record [`IterationDiagnostics`] per iteration.
    pub diagnostics: bool,
    pub trace_consensus: bool,
    /// Fill `elapsed_ms`; off by default so records are reproducible.
    pub record_timing: bool,
}

impl SolverConfig {
    pub fn new(alpha: f64, mu: f64) -> Self {
        Self {
            alpha,
            mu,
            theta: 0.1,
            eta0: 1.0,
            max_outer_iters: 300,
            variant: Variant::Consensus,
            stationarity_tol: None,
            diameter_bound: None,
            max_consensus_rounds: DEFAULT_MAX_ROUNDS,
            radius_rule: RadiusRule::default(),
            step_scaling: StepScaling::default(),
            init: Init::default(),
            certify: true,
            diagnostics: false,
            trace_consensus: false,
            record_timing: false,
        }
    }

    /// `η^(0) = eta0`, `η^(k) = k^{−(1+θ)}` for `k ≥ 1`.
    pub fn eta(&self, k: usize) -> f64 {
        if k == 0 {
            self.eta0
        } else {
            (k as f64).powf(-(1.0 + self.theta))
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("step size must be positive, got {}", self.alpha));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return bad(format!("θ must be positive, got {}", self.theta));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return bad(format!("η^(0) must be positive, got {}", self.eta0));
        }
        if self.diameter_bound == Some(0) {
            return bad("diameter bound must be at least 1".into());
        }
        if let Variant::Inexact(0) = self.variant {
            return bad("inexact variant needs a positive inner budget".into());
        }
        Ok(())
    }
}

/// `z = y − c (x_{μg}(y) − x_{μf}(y))` with `c = α/μ` or `α/(nμ)`.
fn descend(y: &DVector<f64>, pair: &ProxPair, cfg: &SolverConfig, n: usize) -> DVector<f64> {
    let scale = match cfg.step_scaling {
        StepScaling::Aggregate => cfg.alpha / cfg.mu,
        StepScaling::PerAgentShare => cfg.alpha / (cfg.mu * n as f64),
    };
    let mut z = y.clone();
    z.axpy(-scale, &pair.gap(), 1.0);
    z
}

/// `y^(0)` for `n` agents in `R^dim`.
pub fn initial_iterates(init: &Init, n: usize, dim: usize) -> Vec<DVector<f64>> {
    match init {
        Init::Zeros => vec![DVector::zeros(dim); n],
        Init::Gaussian { seed, scale } => {
            let mut rng = ChaCha20Rng::seed_from_u64(*seed);
            (0..n)
                .map(|_| DVector::from_fn(dim, |_, _| {
                    let draw: f64 = StandardNormal.sample(&mut rng);
                    scale * draw
                }))
                .collect()
        }
    }
}

/// One agent's local gradient step; under `Inexact(q)` both prox maps use
/// the `q`-iteration budget.
pub fn gradient_step(dc: &DcFunction, y: &DVector<f64>, cfg: &SolverConfig, n: usize) -> Result<DVector<f64>, SolverError> {
    let pair = dc.prox_pair(y, cfg.mu, cfg.variant.prox_mode())?;
    Ok(descend(y, &pair, cfg, n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub y: Vec<DVector<f64>>,
    pub z: Vec<DVector<f64>>,
    pub k: usize,
    pub consensus_rounds_total: usize,
    /// Rounds spent on the most recent outer iteration.
    pub last_rounds: usize,
}

impl SolverState {
    pub fn new(y: Vec<DVector<f64>>) -> Self {
        Self { z: y.clone(), y, k: 0, consensus_rounds_total: 0, last_rounds: 0 }
    }

    pub fn y_hat(&self) -> DVector<f64> {
        mean_vector(&self.y)
    }
}

/// Everything a run produces.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub diagnostics: Vec<IterationDiagnostics>,
    pub consensus_trace: Vec<TraceRow>,
}

pub struct Solver<'a> {
    problem: &'a [DcFunction],
    weights: WeightMatrix,
    cfg: SolverConfig,
    smoothing: SmoothingParams,
    diameter_bound: usize,
    state: SolverState,
    /// Exact prox pairs at the current `y`, shared by the metrics and the next step.
    cached: Option<Vec<ProxPair>>,
    trace: Vec<TraceRow>,
}

impl<'a> Solver<'a> {
    /// Validates the configuration, clips `α` to `1/L_μF` (with a warning)
    /// and synthesizes the column-stochastic weights of `graph`.
    pub fn new(problem: &'a [DcFunction], graph: &Digraph, dim: usize, cfg: SolverConfig) -> Result<Self, SolverError> {
        cfg.validate()?;
        let n = graph.n();
        if problem.len() != n {
            return Err(SolverError::DimensionMismatch(format!("{} agent functions for a {n}-node graph", problem.len())));
        }
        let m_f = problem.iter().map(DcFunction::weak_convexity).fold(0.0, f64::max);
        let smoothing = lipschitz_constants(m_f, cfg.mu)?;
        let mut cfg = cfg;
        let alpha_max = 1.0 / smoothing.l_mu_f;
        if cfg.alpha > alpha_max {
            log::warn!("step size {} exceeds 1/L_muF = {alpha_max}; clipping", cfg.alpha);
            cfg.alpha = alpha_max;
        }
        let diameter = graph.diameter()?;
        let diameter_bound = match cfg.diameter_bound {
            Some(d) if d < diameter => {
                return Err(SolverError::InvalidConfig(format!("diameter bound {d} below graph diameter {diameter}")));
            }
            Some(d) => d,
            None => diameter.max(1),
        };
        let weights = WeightMatrix::column_stochastic(graph)?;
        let y0 = initial_iterates(&cfg.init, n, dim);
        let mut solver = Self {
            problem,
            weights,
            smoothing,
            diameter_bound,
            state: SolverState::new(Vec::new()),
            cached: None,
            trace: Vec::new(),
            cfg,
        };
        solver.set_iterates(y0)?;
        Ok(solver)
    }

    /// Replaces the current iterates, e.g. to start from a given `y^(0)`.
    pub fn set_iterates(&mut self, y: Vec<DVector<f64>>) -> Result<(), SolverError> {
        if y.len() != self.problem.len() {
            return Err(SolverError::DimensionMismatch(format!("{} iterates for {} agents", y.len(), self.problem.len())));
        }
        if y.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(SolverError::InvalidConfig("initial iterates must be finite".into()));
        }
        self.state = SolverState::new(y);
        self.cached = None;
        Ok(())
    }

    /// Starts from explicit per-agent iterates instead of `cfg.init`.
    pub fn with_start(mut self, y: Vec<DVector<f64>>) -> Result<Self, SolverError> {
        self.set_iterates(y)?;
        Ok(self)
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn smoothing(&self) -> SmoothingParams {
        self.smoothing
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn diameter_bound(&self) -> usize {
        self.diameter_bound
    }

    /// Step by which the agents' average moves along `h^(k)`.
    pub fn effective_step(&self) -> f64 {
        match self.cfg.step_scaling {
            StepScaling::Aggregate => self.cfg.alpha,
            StepScaling::PerAgentShare => self.cfg.alpha / self.problem.len() as f64,
        }
    }

    fn exact_pairs(&mut self) -> Result<&[ProxPair], SolverError> {
        if self.cached.is_none() {
            self.cached = Some(prox_pairs(self.problem, &self.state.y, self.cfg.mu, ProxMode::Exact)?);
        }
        Ok(self.cached.as_deref().unwrap_or_default())
    }

    /// One outer iteration: local gradient steps, then consensus or mixing.
    pub fn step(&mut self) -> Result<(), SolverError> {
        let n = self.problem.len();
        let mode = self.cfg.variant.prox_mode();
        let pairs = match (mode, self.cached.take()) {
            (ProxMode::Exact, Some(pairs)) => pairs,
            _ => prox_pairs(self.problem, &self.state.y, self.cfg.mu, mode)?,
        };
        let cfg = &self.cfg;
        let z: Vec<DVector<f64>> = self.state.y.par_iter().zip(pairs.par_iter()).map(|(y, p)| descend(y, p, cfg, n)).collect();

        let next_k = self.state.k + 1;
        let (y, rounds) = match self.cfg.variant {
            Variant::Consensus | Variant::Inexact(_) => {
                let protocol = EtaConsensus::new(self.diameter_bound, self.cfg.eta(next_k))
                    .with_max_rounds(self.cfg.max_consensus_rounds)
                    .with_rule(self.cfg.radius_rule)
                    .with_trace(self.cfg.trace_consensus);
                let res = protocol.run(&z, &self.weights)?;
                if let Some(rows) = res.trace {
                    let offset = self.state.consensus_rounds_total;
                    self.trace.extend(rows.into_iter().map(|r| TraceRow { round: r.round + offset, ..r }));
                }
                (res.w_final, res.rounds_used)
            }
            Variant::Mixing => (mixing_step(&z, &self.weights)?, 1),
        };
        self.state = SolverState {
            y,
            z,
            k: next_k,
            consensus_rounds_total: self.state.consensus_rounds_total + rounds,
            last_rounds: rounds,
        };
        Ok(())
    }

    fn record(&mut self, reference: &Reference, started: Instant) -> Result<(RunRecord, Option<IterationDiagnostics>), SolverError> {
        let mu = self.cfg.mu;
        let certify = self.cfg.certify;
        let want_diag = self.cfg.diagnostics;
        let k = self.state.k;
        let eta = self.cfg.eta(k);
        let rounds = self.state.last_rounds;
        let problem = self.problem;
        let y = self.state.y.clone();
        let z = self.state.z.clone();
        let pairs = self.exact_pairs()?.to_vec();

        let res = residuals_from_pairs(problem, &y, &pairs, reference);
        let xi = mean_gap(&pairs) / mu;
        let hat = if certify || want_diag {
            let y_hat = mean_vector(&y);
            let hat_pairs = prox_pairs_at(problem, &y_hat, mu)?;
            Some((y_hat, hat_pairs))
        } else {
            None
        };
        let xi_hat = hat.as_ref().map(|(_, hp)| mean_gap(hp) / mu);
        let diag = match (&hat, want_diag) {
            (Some((y_hat, hat_pairs)), true) => {
                let z_hat = (k > 0).then(|| mean_vector(&z));
                let max_dev = z_hat.as_ref().map(|zh| y.iter().map(|yi| (yi - zh).norm()).fold(0.0, f64::max));
                let smoothed = hat_pairs.iter().map(|p| p.f.envelope - p.g.envelope).sum::<f64>() / problem.len() as f64;
                Some(IterationDiagnostics {
                    k,
                    eta,
                    y_hat: y_hat.clone(),
                    z_hat,
                    max_dev_from_z_hat: max_dev,
                    h: xi.clone(),
                    h_hat: xi_hat.clone().unwrap_or_else(|| xi.clone()),
                    smoothed_objective: smoothed,
                })
            }
            _ => None,
        };
        let record = RunRecord {
            k,
            eta_k: eta,
            consensus_rounds: rounds,
            solution_residual: res.solution,
            stationarity_residual: res.stationarity,
            objective_residual: res.objective,
            consensus_residual: res.consensus,
            xi_norm: xi.norm(),
            xi_hat_norm: xi_hat.map(|v| v.norm()),
            elapsed_ms: self.cfg.record_timing.then(|| started.elapsed().as_secs_f64() * 1e3),
        };
        Ok((record, diag))
    }

    /// Iterates until `max_outer_iters` or the stationarity threshold, with
    /// one record per iterate `k = 0, 1, ...`.
    pub fn run(&mut self, reference: &Reference) -> Result<RunOutput, SolverError> {
        let started = Instant::now();
        let mut out = RunOutput::default();
        loop {
            let (record, diag) = self.record(reference, started)?;
            let done = self.state.k >= self.cfg.max_outer_iters
                || self.cfg.stationarity_tol.is_some_and(|tol| record.stationarity_residual < tol);
            out.records.push(record);
            out.diagnostics.extend(diag);
            if done {
                break;
            }
            self.step()?;
        }
        out.consensus_trace = std::mem::take(&mut self.trace);
        Ok(out)
    }
}

/// Builds a [`Solver`] and runs it from `y^(0) = init`.
pub fn run(
    problem: &[DcFunction],
    graph: &Digraph,
    cfg: SolverConfig,
    init: Vec<DVector<f64>>,
    reference: &Reference,
) -> Result<RunOutput, SolverError> {
    let dim = init.first().map_or(0, DVector::len);
    Solver::new(problem, graph, dim, cfg)?.with_start(init)?.run(reference)
}
