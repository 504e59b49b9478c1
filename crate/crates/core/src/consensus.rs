//! Push-sum (ratio) consensus with distributed radius tracking and
//! finite-time η-termination.
//!
//! Each agent holds a numerator `u_i`, a positive denominator `v_i` and the
//! ratio estimate `w_i = u_i / v_i`. A round mixes `u` and `v` with a
//! column-stochastic matrix, so `Σ u_i` and `Σ v_i` are conserved and the
//! true average `û` stays inside the convex hull of the `w_i` (weights
//! `v_i / n`). The radius `r_i` bounds a ball around `w_i` that encloses every
//! agent's state from the start of the current window of `D` rounds; once all
//! window radii fall below η the agents stop.

use std::io::Write;

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use crate::graph::WeightMatrix;

/// Default cap on communication rounds for a single η-consensus call.
pub const DEFAULT_MAX_ROUNDS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConsensusError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("diameter bound must be at least 1")]
    InvalidDiameterBound,
    #[error("η-consensus did not terminate within {max_rounds} rounds (smallest window radius {best_radius:e})")]
    MaxRoundsExceeded { max_rounds: usize, best_radius: f64 },
}

/// Which increment the radius recursion uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusRule {
    /// `max_{j ∈ N_i⁻ ∪ {i}} ‖w_i^(k) − w_j^(k−1)‖ + r_j^(k−1)`: the ball at `i`
    /// grows to cover the balls it hears from, itself included.
    #[default]
    NeighborDistance,
    /// `max_{j ∈ N_i⁻} ‖w_i^(k) − w_i^(k−1)‖ + r_j^(k−1)`, the self-difference
    /// form. Kept for comparison; it carries no enclosure guarantee.
    SelfDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusState {
    pub u: Vec<DVector<f64>>,
    pub v: Vec<f64>,
    pub w: Vec<DVector<f64>>,
    pub r: Vec<f64>,
    pub k: usize,
}

impl ConsensusState {
    /// Round-zero state: `u = w = init`, `v = 1`, `r = 0`.
    pub fn new(init: &[DVector<f64>]) -> Result<Self, ConsensusError> {
        let Some(first) = init.first() else {
            return Err(ConsensusError::DimensionMismatch("no agents".into()));
        };
        if let Some(bad) = init.iter().position(|x| x.len() != first.len()) {
            return Err(ConsensusError::DimensionMismatch(format!(
                "agent {bad} has dimension {}, agent 0 has {}",
                init[bad].len(),
                first.len()
            )));
        }
        Ok(Self {
            u: init.to_vec(),
            v: vec![1.0; init.len()],
            w: init.to_vec(),
            r: vec![0.0; init.len()],
            k: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn dim(&self) -> usize {
        self.u[0].len()
    }

    /// `Σ_i u_i`, conserved by every round.
    pub fn mass(&self) -> DVector<f64> {
        sum_vectors(&self.u)
    }
}

pub(crate) fn sum_vectors(xs: &[DVector<f64>]) -> DVector<f64> {
    let mut acc = DVector::zeros(xs[0].len());
    for x in xs {
        acc += x;
    }
    acc
}

/// Arithmetic mean of per-agent vectors.
pub fn mean_vector(xs: &[DVector<f64>]) -> DVector<f64> {
    sum_vectors(xs) / xs.len() as f64
}

/// One synchronous push-sum round. The radius is carried over unchanged;
/// see [`radius_update`].
pub fn consensus_round(state: &ConsensusState, weights: &WeightMatrix) -> Result<ConsensusState, ConsensusError> {
    let n = state.n();
    if weights.n() != n || state.v.len() != n || state.w.len() != n {
        return Err(ConsensusError::DimensionMismatch(format!(
            "state has {n} agents, weight matrix is {0}x{0}",
            weights.n()
        )));
    }
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let pii = weights.diag(i);
        let mut ui = &state.u[i] * pii;
        let mut vi = pii * state.v[i];
        for &(j, pij) in weights.in_weights(i) {
            ui.axpy(pij, &state.u[j], 1.0);
            vi += pij * state.v[j];
        }
        w.push(&ui / vi);
        u.push(ui);
        v.push(vi);
    }
    Ok(ConsensusState { u, v, w, r: state.r.clone(), k: state.k + 1 })
}

/// Output of one radius update.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusStep {
    /// `r_i^(k)`: zero at multiples of `D`, the accumulated radius otherwise.
    pub radius: Vec<f64>,
    /// At `k = mD`, the accumulated radius that closes the window, before the
    /// reset. This is the value compared against η and the radius of the
    /// enclosing ball around `w_i^(mD)`.
    pub window: Option<Vec<f64>>,
}

impl RadiusStep {
    /// Radius before any reset, for tracing.
    pub fn accumulated(&self) -> &[f64] {
        self.window.as_deref().unwrap_or(&self.radius)
    }
}

/// Radius recursion for round `state.k`, given the state one round earlier.
pub fn radius_update(
    state: &ConsensusState,
    prev: &ConsensusState,
    weights: &WeightMatrix,
    diameter_bound: usize,
    rule: RadiusRule,
) -> RadiusStep {
    debug_assert_eq!(state.k, prev.k + 1);
    let n = state.n();
    let accumulated: Vec<f64> = (0..n)
        .map(|i| {
            let nbrs = weights.in_weights(i).iter().map(|&(j, _)| j);
            match rule {
                RadiusRule::NeighborDistance => std::iter::once(i)
                    .chain(nbrs)
                    .map(|j| (&state.w[i] - &prev.w[j]).norm() + prev.r[j])
                    .fold(0.0, f64::max),
                RadiusRule::SelfDifference => {
                    let step = (&state.w[i] - &prev.w[i]).norm();
                    nbrs.map(|j| step + prev.r[j]).fold(0.0, f64::max)
                }
            }
        })
        .collect();
    if diameter_bound > 0 && state.k % diameter_bound == 0 {
        RadiusStep { radius: vec![0.0; n], window: Some(accumulated) }
    } else {
        RadiusStep { radius: accumulated, window: None }
    }
}

/// One row of the optional debugging trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub round: usize,
    pub agent: usize,
    pub radius: f64,
    pub deviation_from_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusResult {
    /// States `w_i^(mD)` at the detecting round; each lies within η of the
    /// initial average.
    pub w_final: Vec<DVector<f64>>,
    /// Communication rounds consumed (`k_η`).
    pub rounds_used: usize,
    /// Per-round, per-agent accumulated radii (before the reset at multiples of `D`).
    pub radius_trace: Vec<Vec<f64>>,
    /// Window radii at the detecting round.
    pub final_window: Vec<f64>,
    pub trace: Option<Vec<TraceRow>>,
}

/// Parameters of the finite-time η-consensus protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaConsensus {
    /// Upper bound `D` on the graph diameter.
    pub diameter_bound: usize,
    pub eta: f64,
    pub max_rounds: usize,
    pub rule: RadiusRule,
    pub trace: bool,
}

impl EtaConsensus {
    pub fn new(diameter_bound: usize, eta: f64) -> Self {
        Self { diameter_bound, eta, max_rounds: DEFAULT_MAX_ROUNDS, rule: RadiusRule::default(), trace: false }
    }

    pub fn with_max_rounds(mut self, max_rounds: usize) -> Self {
        self.max_rounds = max_rounds;
        self
    }

    pub fn with_rule(mut self, rule: RadiusRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_trace(mut self, trace: bool) -> Self {
        self.trace = trace;
        self
    }

    /// Runs rounds until, at some `k = mD` with `m ≥ 1`, every agent's window
    /// radius is below η. Global detection is a direct check over agents; each
    /// agent's own test is `window_i < η`.
    pub fn run(&self, init: &[DVector<f64>], weights: &WeightMatrix) -> Result<ConsensusResult, ConsensusError> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(ConsensusError::InvalidTolerance(self.eta));
        }
        if self.diameter_bound == 0 {
            return Err(ConsensusError::InvalidDiameterBound);
        }
        let mut state = ConsensusState::new(init)?;
        if weights.n() != state.n() {
            return Err(ConsensusError::DimensionMismatch(format!(
                "{} initial states for a {}-agent weight matrix",
                state.n(),
                weights.n()
            )));
        }
        let average = self.trace.then(|| mean_vector(init));
        let mut trace = self.trace.then(Vec::new);
        let mut radius_trace = Vec::new();
        let mut best_radius = f64::INFINITY;

        while state.k < self.max_rounds {
            let mut next = consensus_round(&state, weights)?;
            let step = radius_update(&next, &state, weights, self.diameter_bound, self.rule);
            next.r = step.radius.clone();
            if let (Some(rows), Some(avg)) = (trace.as_mut(), average.as_ref()) {
                for (i, (&radius, w)) in step.accumulated().iter().zip(&next.w).enumerate() {
                    rows.push(TraceRow { round: next.k, agent: i, radius, deviation_from_mean: (w - avg).norm() });
                }
            }
            radius_trace.push(step.accumulated().to_vec());
            state = next;

            if let Some(window) = step.window {
                let detected = window.iter().all(|&r| r < self.eta);
                best_radius = best_radius.min(window.iter().copied().fold(0.0, f64::max));
                if detected {
                    return Ok(ConsensusResult {
                        w_final: state.w,
                        rounds_used: state.k,
                        radius_trace,
                        final_window: window,
                        trace,
                    });
                }
            }
        }
        Err(ConsensusError::MaxRoundsExceeded { max_rounds: self.max_rounds, best_radius })
    }
}

/// η-consensus with the default radius rule and round cap.
pub fn run_eta_consensus(
    init: &[DVector<f64>],
    weights: &WeightMatrix,
    diameter_bound: usize,
    eta: f64,
    max_rounds: usize,
) -> Result<ConsensusResult, ConsensusError> {
    EtaConsensus::new(diameter_bound, eta).with_max_rounds(max_rounds).run(init, weights)
}

/// A single push-sum round from `u = init`, `v = 1`, returning `w = u / v`.
pub fn mixing_step(init: &[DVector<f64>], weights: &WeightMatrix) -> Result<Vec<DVector<f64>>, ConsensusError> {
    let state = ConsensusState::new(init)?;
    Ok(consensus_round(&state, weights)?.w)
}

/// Writes trace rows as CSV with header `round,agent,radius,deviation_from_mean`.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Digraph;

    fn scalars(xs: &[f64]) -> Vec<DVector<f64>> {
        xs.iter().map(|&x| DVector::from_element(1, x)).collect()
    }

    fn cycle3() -> WeightMatrix {
        WeightMatrix::column_stochastic(&Digraph::cycle(3).unwrap()).unwrap()
    }

    #[test]
    fn consensus_is_a_fixed_point() {
        let p = WeightMatrix::column_stochastic(&Digraph::erdos_renyi(6, 0.5, 1).unwrap()).unwrap();
        let init = vec![DVector::from_vec(vec![2.5, -1.0]); 6];
        let next = consensus_round(&ConsensusState::new(&init).unwrap(), &p).unwrap();
        for w in &next.w {
            assert!((w - &init[0]).norm() < 1e-15);
        }
    }

    #[test]
    fn cycle_round_matches_hand_product() {
        let s1 = consensus_round(&ConsensusState::new(&scalars(&[1.0, 0.0, 0.0])).unwrap(), &cycle3()).unwrap();
        let u: Vec<f64> = s1.u.iter().map(|x| x[0]).collect();
        assert_eq!(u, vec![0.5, 0.5, 0.0]);
        assert_eq!(s1.k, 1);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = cycle3();
        let state = ConsensusState::new(&scalars(&[1.0, 2.0])).unwrap();
        assert!(matches!(consensus_round(&state, &p), Err(ConsensusError::DimensionMismatch(_))));
        let ragged = vec![DVector::zeros(1), DVector::zeros(2)];
        assert!(ConsensusState::new(&ragged).is_err());
    }

    #[test]
    fn cycle_radii_match_hand_unrolled_recursion() {
        // w^1 = (.5, .5, 0), w^2 = (.25, .5, .25), w^3 = (.25, .375, .375)
        let p = cycle3();
        let mut prev = ConsensusState::new(&scalars(&[1.0, 0.0, 0.0])).unwrap();
        let expected = [vec![0.5, 0.5, 0.0], vec![0.75, 0.5, 0.75]];
        for want in &expected {
            let mut next = consensus_round(&prev, &p).unwrap();
            let step = radius_update(&next, &prev, &p, 3, RadiusRule::NeighborDistance);
            assert_eq!(step.window, None);
            assert_eq!(&step.radius, want);
            next.r = step.radius;
            prev = next;
        }
        let next = consensus_round(&prev, &p).unwrap();
        let step = radius_update(&next, &prev, &p, 3, RadiusRule::NeighborDistance);
        assert_eq!(step.radius, vec![0.0; 3]);
        assert_eq!(step.window, Some(vec![0.75, 0.875, 0.875]));
        // the closing balls contain every initial state
        let window = step.window.unwrap();
        for i in 0..3 {
            for x in [1.0, 0.0, 0.0] {
                assert!((next.w[i][0] - x).abs() <= window[i] + 1e-15);
            }
        }
    }

    #[test]
    fn static_states_have_zero_radius() {
        let p = cycle3();
        let prev = ConsensusState::new(&scalars(&[4.0; 3])).unwrap();
        let next = consensus_round(&prev, &p).unwrap();
        for rule in [RadiusRule::NeighborDistance, RadiusRule::SelfDifference] {
            assert_eq!(radius_update(&next, &prev, &p, 3, rule).radius, vec![0.0; 3]);
        }
    }

    #[test]
    fn equal_init_terminates_at_first_check() {
        let p = cycle3();
        let res = run_eta_consensus(&scalars(&[7.0; 3]), &p, 3, 1e-9, 100).unwrap();
        assert_eq!(res.rounds_used, 3);
        assert!(res.w_final.iter().all(|w| w[0] == 7.0));
    }

    #[test]
    fn cycle_reaches_one_third() {
        let res = run_eta_consensus(&scalars(&[1.0, 0.0, 0.0]), &cycle3(), 3, 1e-6, 10_000).unwrap();
        for w in &res.w_final {
            assert!((w[0] - 1.0 / 3.0).abs() < 1e-6);
        }
        // P = (I + S)/2 with S the cyclic shift: the subdominant eigenvalue modulus is
        // |1 + e^{2πi/3}|/2 = 1/2, so the spread halves each round and roughly
        // log2(1e6) ≈ 20 rounds are needed, rounded up to a multiple of D = 3.
        assert!(res.rounds_used % 3 == 0);
        assert!((18..=45).contains(&res.rounds_used), "rounds {}", res.rounds_used);
    }

    #[test]
    fn errors_for_bad_parameters() {
        let p = cycle3();
        let init = scalars(&[1.0, 0.0, 0.0]);
        assert_eq!(run_eta_consensus(&init, &p, 3, 0.0, 10), Err(ConsensusError::InvalidTolerance(0.0)));
        assert_eq!(run_eta_consensus(&init, &p, 0, 1e-3, 10), Err(ConsensusError::InvalidDiameterBound));
        assert!(matches!(
            run_eta_consensus(&init, &p, 3, 1e-12, 6),
            Err(ConsensusError::MaxRoundsExceeded { max_rounds: 6, .. })
        ));
    }

    #[test]
    fn trace_csv_has_expected_header() {
        let res = EtaConsensus::new(3, 1e-3).with_trace(true).run(&scalars(&[1.0, 0.0, 0.0]), &cycle3()).unwrap();
        let rows = res.trace.unwrap();
        assert_eq!(rows.len(), res.rounds_used * 3);
        let mut buf = Vec::new();
        write_trace_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("round,agent,radius,deviation_from_mean\n1,0,0.5,"));
    }

    #[test]
    fn mixing_step_normalizes_by_denominator() {
        // row sums of the cycle matrix are all 1, so w = P u
        let w = mixing_step(&scalars(&[1.0, 0.0, 0.0]), &cycle3()).unwrap();
        assert_eq!(w.iter().map(|x| x[0]).collect::<Vec<_>>(), vec![0.5, 0.5, 0.0]);
    }
}
