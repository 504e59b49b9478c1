//! Distributed difference-of-convex optimization over strongly connected
//! digraphs.
//!
//! Agents minimize `(1/n) Σ_i (f_i − g_i)` with convex `g_i` and weakly
//! convex `f_i`. Each agent descends on the Moreau-smoothed local objective
//! and then runs a push-sum consensus protocol that detects, in finite time,
//! when all agents hold the average to within a prescribed tolerance.
//!
//! - [`graph`]: digraphs, random generation and column-stochastic weights.
//! - [`consensus`]: push-sum with finite-time η-consensus detection.
//! - [`dc`]: proximal oracles, Moreau envelopes and DC components.
//! - [`solver`]: the outer loop and its variants.
//! - [`metrics`]: residuals and checks of the convergence bounds.
//! - [`harness`]: the sparse-recovery benchmark and its artifacts.

pub mod consensus;
pub mod dc;
pub mod graph;
pub mod harness;
mod linalg;
pub mod metrics;
pub mod solver;

pub use linalg::gram_lambda_max;
