//! Reference computations for the integration tests, written independently
//! of the library's own algorithms.
#![allow(dead_code)]

use std::collections::VecDeque;

use ddc_core::graph::Digraph;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut impl Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| gaussian(rng))
}

pub fn gaussian_mat(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Box–Muller, so the tests do not share the library's normal sampler.
pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// A random strongly connected digraph: a Hamiltonian cycle through a random
/// permutation plus independent extra edges with probability `extra`.
pub fn random_strong_digraph(rng: &mut impl Rng, n: usize, extra: f64) -> Digraph {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut edges: Vec<(usize, usize)> = (0..n).map(|k| (order[(k + 1) % n], order[k])).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < extra {
                edges.push((i, j));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Digraph::new(n, edges).unwrap()
}

/// All-pairs hop distances by Floyd–Warshall over the edge list; `None` if
/// some pair is unreachable. Edge `(i, j)` means `j` sends to `i`.
pub fn floyd_warshall_diameter(g: &Digraph) -> Option<usize> {
    let n = g.n();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for (i, j) in g.edges() {
        d[j][i] = 1;
    }
    for k in 0..n {
        for a in 0..n {
            for b in 0..n {
                let via = d[a][k] + d[k][b];
                if via < d[a][b] {
                    d[a][b] = via;
                }
            }
        }
    }
    let worst = d.iter().flatten().copied().max().unwrap_or(0);
    (worst < inf).then_some(worst)
}

/// Set of nodes reachable from `src` along sender → receiver edges.
pub fn reachable(g: &Digraph, src: usize) -> Vec<bool> {
    let mut seen = vec![false; g.n()];
    let mut queue = VecDeque::from([src]);
    seen[src] = true;
    while let Some(j) = queue.pop_front() {
        for (a, b) in g.edges() {
            if b == j && !seen[a] {
                seen[a] = true;
                queue.push_back(a);
            }
        }
    }
    seen
}

/// `λ_max(AᵀA)` by power iteration on `AᵀA` from a fixed dense start.
pub fn power_iteration(a: &DMatrix<f64>) -> f64 {
    let mut v = DVector::from_fn(a.ncols(), |i, _| 1.0 + (i as f64 * 0.37).sin());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let w = a.transpose() * (a * &v);
        let next = w.norm();
        v = w / next;
        if (next - lambda).abs() <= 1e-15 * next {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// `argmin_x (1/2)‖Ax − b‖² + ρ‖x‖₁ + ‖x − y‖²/(2μ)` by cyclic coordinate
/// descent with exact coordinate minimization.
pub fn lasso_prox_cd(a: &DMatrix<f64>, b: &DVector<f64>, rho: f64, y: &DVector<f64>, mu: f64) -> DVector<f64> {
    let p = a.ncols();
    let mut x = y.clone();
    let mut r = b - a * &x;
    let col_sq: Vec<f64> = (0..p).map(|j| a.column(j).norm_squared()).collect();
    for _ in 0..200_000 {
        let mut biggest = 0.0f64;
        for j in 0..p {
            let old = x[j];
            let c = a.column(j).dot(&r) + col_sq[j] * old + y[j] / mu;
            let curv = col_sq[j] + 1.0 / mu;
            let new = c.signum() * (c.abs() - rho).max(0.0) / curv;
            if new != old {
                r.axpy(old - new, &a.column(j).into_owned(), 1.0);
                x[j] = new;
                biggest = biggest.max((new - old).abs());
            }
        }
        if biggest < 1e-15 {
            break;
        }
    }
    x
}

/// Minimizer of a convex function on `R²` by repeated grid refinement.
pub fn grid_argmin_2d(obj: impl Fn(f64, f64) -> f64, center: (f64, f64), half_width: f64) -> (f64, f64) {
    let steps = 200;
    let (mut cx, mut cy) = center;
    let mut hw = half_width;
    for _ in 0..30 {
        let mut best = (f64::INFINITY, cx, cy);
        for a in 0..=steps {
            for b in 0..=steps {
                let x = cx - hw + 2.0 * hw * a as f64 / steps as f64;
                let y = cy - hw + 2.0 * hw * b as f64 / steps as f64;
                let v = obj(x, y);
                if v < best.0 {
                    best = (v, x, y);
                }
            }
        }
        cx = best.1;
        cy = best.2;
        hw *= 0.1;
        if hw < 1e-12 {
            break;
        }
    }
    (cx, cy)
}
