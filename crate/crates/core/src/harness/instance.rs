//! Sparse-recovery instances and their binary encoding.
//!
//! Layout of an instance file, all integers `u64` and all reals `f64`,
//! little-endian:
//!
//! ```text
//! magic   8 bytes  "DDCINST1"
//! header  n, m, p, s
//! rho, mu, f_star
//! support s integers, ascending
//! x_star  p reals
//! then for each agent i = 0..n:
//!   A_i   m·p reals, column-major
//!   b_i   m reals
//! ```

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::{ExperimentConfig, HarnessError};
use crate::dc::{DcFunction, L2Norm, LassoComposite};
use crate::gram_lambda_max;
use crate::metrics::Reference;

pub const MAGIC: &[u8; 8] = b"DDCINST1";

/// Stream of the instance generator; graphs use stream 0.
pub const INSTANCE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DVector<f64>>,
    pub x_star: DVector<f64>,
    /// Ascending indices of the nonzeros of `x_star`.
    pub support: Vec<usize>,
    pub rho: f64,
    /// `1 / max_i λ_max(A_iᵀA_i)`.
    pub mu: f64,
    /// Objective value at the ground truth.
    pub f_star: f64,
}

/// Uniform draw from `0..bound` by rejection on raw `u64`s, so the result
/// does not depend on the width of `usize` or on a library's range sampler.
fn uniform_below(rng: &mut impl RngCore, bound: u64) -> u64 {
    let zone = u64::MAX - u64::MAX % bound;
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % bound;
        }
    }
}

fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws an instance. The order of draws is fixed: every `A_i` entry,
/// agent by agent in column-major order; the support by a partial
/// Fisher–Yates shuffle; the nonzero values in ascending index order; then
/// the noise of each agent in turn.
pub fn generate_instance(cfg: &ExperimentConfig) -> Result<Instance, HarnessError> {
    cfg.validate()?;
    let (n, m, p, s) = (cfg.n_agents, cfg.m, cfg.p, cfg.sparsity());
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(INSTANCE_STREAM);

    let mut a: Vec<DMatrix<f64>> = (0..n)
        .map(|_| {
            let data: Vec<f64> = (0..m * p).map(|_| gaussian(&mut rng)).collect();
            DMatrix::from_vec(m, p, data)
        })
        .collect();
    for ai in &mut a {
        for mut col in ai.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            } else {
                // a zero Gaussian column has probability zero; keep unit norm anyway
                col[0] = 1.0;
            }
        }
    }

    let mut perm: Vec<usize> = (0..p).collect();
    for i in 0..s {
        let j = i + uniform_below(&mut rng, (p - i) as u64) as usize;
        perm.swap(i, j);
    }
    let mut support = perm[..s].to_vec();
    support.sort_unstable();
    let mut x_star = DVector::zeros(p);
    for &j in &support {
        // a draw of exactly zero would shrink the support
        x_star[j] = loop {
            let v = gaussian(&mut rng);
            if v != 0.0 {
                break v;
            }
        };
    }

    let b: Vec<DVector<f64>> = a
        .iter()
        .map(|ai| {
            let mut bi = ai * &x_star;
            for v in bi.iter_mut() {
                *v += cfg.noise_scale * gaussian(&mut rng);
            }
            bi
        })
        .collect();

    let lambda = a.iter().map(gram_lambda_max).fold(0.0, f64::max);
    let mu = 1.0 / lambda;
    let mut inst = Instance { a, b, x_star, support, rho: cfg.rho, mu, f_star: 0.0 };
    inst.f_star = inst.objective(&inst.x_star);
    Ok(inst)
}

impl Instance {
    pub fn n_agents(&self) -> usize {
        self.a.len()
    }

    pub fn dim(&self) -> usize {
        self.x_star.len()
    }

    /// `(1/n) Σ (1/2)‖A_i x − b_i‖² + ρ‖x‖₁ − ρ‖x‖₂`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let ls: f64 = self.a.iter().zip(&self.b).map(|(a, b)| 0.5 * (a * x - b).norm_squared()).sum();
        ls / self.n_agents() as f64 + self.rho * (x.lp_norm(1) - x.norm())
    }

    /// `λ_max(A_iᵀA_i)` per agent.
    pub fn lambda_max(&self) -> Vec<f64> {
        self.a.iter().map(gram_lambda_max).collect()
    }

    /// The agents' components `f_i = (1/2)‖A_i x − b_i‖² + ρ‖x‖₁`, `g_i = ρ‖x‖₂`.
    pub fn problem(&self) -> Result<Vec<DcFunction>, HarnessError> {
        let g = Arc::new(L2Norm::new(self.rho));
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| {
                let f = LassoComposite::new(a.clone(), b.clone(), self.rho)?;
                Ok(DcFunction::new(Arc::new(f), g.clone())?)
            })
            .collect()
    }

    pub fn reference(&self) -> Reference {
        Reference { x_star: Some(self.x_star.clone()), f_star: Some(self.f_star) }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (n, p) = (self.n_agents(), self.dim());
        let m = self.b.first().map_or(0, DVector::len);
        let mut out = Vec::with_capacity(8 * (8 + self.support.len() + p + n * (m * p + m)));
        out.extend_from_slice(MAGIC);
        for v in [n, m, p, self.support.len()] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for v in [self.rho, self.mu, self.f_star] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &j in &self.support {
            out.extend_from_slice(&(j as u64).to_le_bytes());
        }
        let reals = self.x_star.iter().chain(self.a.iter().zip(&self.b).flat_map(|(a, b)| a.iter().chain(b.iter())));
        for v in reals {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, HarnessError> {
        let mut reader = Reader { bytes, pos: 0 };
        if reader.take(8)? != MAGIC {
            return Err(HarnessError::Format("bad magic".into()));
        }
        let n = reader.usize()?;
        let m = reader.usize()?;
        let p = reader.usize()?;
        let s = reader.usize()?;
        let expected = 8 * (8 + s + p + n * (m * p + m));
        if bytes.len() != expected {
            return Err(HarnessError::Format(format!("expected {expected} bytes for n={n}, m={m}, p={p}, s={s}, got {}", bytes.len())));
        }
        let rho = reader.f64()?;
        let mu = reader.f64()?;
        let f_star = reader.f64()?;
        let support = (0..s).map(|_| reader.usize()).collect::<Result<Vec<_>, _>>()?;
        if support.iter().any(|&j| j >= p) {
            return Err(HarnessError::Format("support index out of range".into()));
        }
        let x_star = DVector::from_vec(reader.reals(p)?);
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for _ in 0..n {
            a.push(DMatrix::from_vec(m, p, reader.reals(m * p)?));
            b.push(DVector::from_vec(reader.reals(m)?));
        }
        Ok(Self { a, b, x_star, support, rho, mu, f_star })
    }

    /// Hex SHA-256 of [`Instance::to_bytes`].
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], HarnessError> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| HarnessError::Format("truncated instance".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn word(&mut self) -> Result<[u8; 8], HarnessError> {
        Ok(self.take(8)?.try_into().expect("8-byte slice"))
    }

    fn usize(&mut self) -> Result<usize, HarnessError> {
        let v = u64::from_le_bytes(self.word()?);
        usize::try_from(v).map_err(|_| HarnessError::Format(format!("size {v} does not fit")))
    }

    fn f64(&mut self) -> Result<f64, HarnessError> {
        Ok(f64::from_le_bytes(self.word()?))
    }

    fn reals(&mut self, len: usize) -> Result<Vec<f64>, HarnessError> {
        (0..len).map(|_| self.f64()).collect()
    }
}

/// Random strongly connected digraph for `cfg`, on stream 0 of the same seed.
pub fn generate_graph(cfg: &ExperimentConfig) -> Result<crate::graph::Digraph, HarnessError> {
    Ok(crate::graph::Digraph::erdos_renyi(cfg.n_agents, cfg.connect_prob, cfg.seed)?)
}
