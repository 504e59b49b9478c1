use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RNG_NAME;
use super::instance::{generate_graph, generate_instance, Instance};
use super::{ExperimentConfig, HarnessError};
use crate::consensus::write_trace_csv;
use crate::dc::lipschitz_constants;
use crate::graph::Digraph;
use crate::metrics::RunRecord;
use crate::solver::{RunOutput, Solver, SolverConfig, Variant};

pub const INSTANCE_FILE: &str = "instance.bin";
pub const GRAPH_FILE: &str = "graph.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub name: String,
    pub csv_path: PathBuf,
    pub total_rounds: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub rng: String,
    pub mu: f64,
    #[serde(rename = "L_muF")]
    pub l_mu_f: f64,
    /// Step size actually used, after clipping to `1/L_muF`.
    pub alpha_used: f64,
    pub f_star: f64,
    pub diameter: usize,
    pub edges: usize,
    pub instance_path: PathBuf,
    pub instance_sha256: String,
    pub graph_path: PathBuf,
    pub variants: Vec<VariantSummary>,
}

/// One variant's in-memory result.
#[derive(Debug, Clone)]
pub struct VariantRun {
    pub variant: Variant,
    pub output: RunOutput,
    pub wall_ms: f64,
}

impl VariantRun {
    pub fn records(&self) -> &[RunRecord] {
        &self.output.records
    }

    pub fn total_rounds(&self) -> usize {
        self.output.records.iter().map(|r| r.consensus_rounds).sum()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn solver_config(cfg: &ExperimentConfig, inst: &Instance, variant: Variant) -> SolverConfig {
    let mut sc = SolverConfig::new(cfg.alpha, inst.mu);
    sc.theta = cfg.theta;
    sc.max_outer_iters = cfg.k_max;
    sc.variant = variant;
    sc.certify = cfg.certify;
    sc.step_scaling = cfg.step_scaling;
    sc.radius_rule = cfg.radius_rule;
    sc.trace_consensus = cfg.trace_consensus;
    sc
}

/// Runs one variant from `y^(0) = 0` without touching the disk.
pub fn run_variant(
    cfg: &ExperimentConfig,
    inst: &Instance,
    graph: &Digraph,
    variant: Variant,
) -> Result<VariantRun, HarnessError> {
    let problem = inst.problem()?;
    let started = Instant::now();
    let sc = solver_config(cfg, inst, variant);
    let mut solver = Solver::new(&problem, graph, inst.dim(), sc)?;
    let output = solver.run(&inst.reference())?;
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    log::info!("{variant}: {} iterations in {wall_ms:.0} ms", output.records.len().saturating_sub(1));
    Ok(VariantRun { variant, output, wall_ms })
}

/// Writes records as CSV; absent values become empty fields.
pub fn write_records_csv<W: Write>(records: &[RunRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, HarnessError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json { path, source })
}

struct Prepared {
    inst: Instance,
    graph: Digraph,
    sha: String,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, HarnessError> {
    cfg.validate()?;
    if cfg.is_large() {
        log::warn!(
            "n={}, m={}, p={} is a large instance; expect a long runtime",
            cfg.n_agents,
            cfg.m,
            cfg.p
        );
    }
    fs::create_dir_all(&cfg.output).map_err(io_err(&cfg.output))?;
    let inst = generate_instance(cfg)?;
    let graph = generate_graph(cfg)?;
    let bytes = inst.to_bytes();
    write_file(&cfg.output.join(INSTANCE_FILE), &bytes)?;
    write_file(&cfg.output.join(GRAPH_FILE), graph.to_json().as_bytes())?;
    let sha = inst.sha256();
    Ok(Prepared { inst, graph, sha })
}

fn manifest(cfg: &ExperimentConfig, prep: &Prepared, variants: Vec<VariantSummary>) -> Result<Manifest, HarnessError> {
    let smoothing = lipschitz_constants(0.0, prep.inst.mu)?;
    Ok(Manifest {
        config: cfg.clone(),
        rng: RNG_NAME.to_string(),
        mu: prep.inst.mu,
        l_mu_f: smoothing.l_mu_f,
        alpha_used: cfg.alpha.min(1.0 / smoothing.l_mu_f),
        f_star: prep.inst.f_star,
        diameter: prep.graph.diameter()?,
        edges: prep.graph.edge_count(),
        instance_path: PathBuf::from(INSTANCE_FILE),
        instance_sha256: prep.sha.clone(),
        graph_path: PathBuf::from(GRAPH_FILE),
        variants,
    })
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), HarnessError> {
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(manifest).map_err(|source| HarnessError::Json { path: path.clone(), source })?;
    write_file(&path, json.as_bytes())
}

/// Writes the instance, graph and a manifest without variant runs.
pub fn generate(cfg: &ExperimentConfig) -> Result<Manifest, HarnessError> {
    let prep = prepare(cfg)?;
    let manifest = manifest(cfg, &prep, Vec::new())?;
    write_manifest(&cfg.output, &manifest)?;
    Ok(manifest)
}

/// Runs every requested variant (in parallel), writes one CSV per variant
/// and finally the manifest.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Manifest, HarnessError> {
    let prep = prepare(cfg)?;
    let summaries = cfg
        .variants
        .par_iter()
        .map(|&variant| {
            let run = run_variant(cfg, &prep.inst, &prep.graph, variant)?;
            let csv_name = PathBuf::from(format!("{variant}.csv"));
            let csv_path = cfg.output.join(&csv_name);
            let file = fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
            write_records_csv(run.records(), file).map_err(|source| HarnessError::Csv { path: csv_path.clone(), source })?;
            if cfg.trace_consensus && !run.output.consensus_trace.is_empty() {
                let trace_path = cfg.output.join(format!("{variant}_consensus_trace.csv"));
                let file = fs::File::create(&trace_path).map_err(io_err(&trace_path))?;
                write_trace_csv(&run.output.consensus_trace, file)
                    .map_err(|source| HarnessError::Csv { path: trace_path.clone(), source })?;
            }
            Ok(VariantSummary { name: variant.to_string(), csv_path: csv_name, total_rounds: run.total_rounds(), wall_ms: run.wall_ms })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let manifest = manifest(cfg, &prep, summaries)?;
    write_manifest(&cfg.output, &manifest)?;
    Ok(manifest)
}

/// Parameters `sweep` can vary.
pub const SWEEP_PARAMS: &[&str] = &["alpha", "theta", "rho", "noise_scale", "connect_prob", "n_agents", "m", "p", "s", "seed", "K"];

/// A copy of `base` with `param` set to `value`.
pub fn with_param(base: &ExperimentConfig, param: &str, value: &str) -> Result<ExperimentConfig, HarnessError> {
    let bad = || HarnessError::InvalidConfig(format!("cannot set {param} to '{value}'"));
    let real = || value.parse::<f64>().map_err(|_| bad());
    let int = || value.parse::<usize>().map_err(|_| bad());
    let mut cfg = base.clone();
    match param {
        "alpha" => cfg.alpha = real()?,
        "theta" => cfg.theta = real()?,
        "rho" => cfg.rho = real()?,
        "noise_scale" => cfg.noise_scale = real()?,
        "connect_prob" => cfg.connect_prob = real()?,
        "n_agents" => cfg.n_agents = int()?,
        "m" => cfg.m = int()?,
        "p" => cfg.p = int()?,
        "s" => cfg.s = Some(int()?),
        "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
        "K" => cfg.k_max = int()?,
        _ => {
            return Err(HarnessError::InvalidConfig(format!(
                "unknown sweep parameter '{param}' (expected one of {})",
                SWEEP_PARAMS.join(", ")
            )))
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the experiment once per value, each into `<output>/<param>=<value>`.
pub fn sweep(base: &ExperimentConfig, param: &str, values: &[String]) -> Result<Vec<Manifest>, HarnessError> {
    let configs = values
        .iter()
        .map(|v| {
            let mut cfg = with_param(base, param, v)?;
            cfg.output = base.output.join(format!("{param}={v}"));
            Ok(cfg)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    configs.iter().map(run_experiment).collect()
}

