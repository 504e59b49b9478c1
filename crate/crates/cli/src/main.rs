use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ddc_core::consensus::RadiusRule;
use ddc_core::harness::{self, ExperimentConfig, Manifest};
use ddc_core::solver::{StepScaling, Variant};

#[derive(Parser)]
#[command(name = "ddc", version, about = "Distributed DC optimization over digraphs: benchmark driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the instance, graph and manifest without running any variant.
    Generate(ExperimentArgs),
    /// Run every requested variant and write one CSV per variant.
    Run(ExperimentArgs),
    /// Repeat `run` for each value of one parameter.
    Sweep {
        /// Parameter to vary (alpha, theta, rho, noise_scale, connect_prob, n_agents, m, p, s, seed, K).
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[command(flatten)]
        exp: ExperimentArgs,
    },
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// JSON config; flags given explicitly override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the large preset (m=720, p=2560).
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    n_agents: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    noise_scale: Option<f64>,
    #[arg(long)]
    connect_prob: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated: consensus, inexact-<q>, mixing.
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<Variant>>,
    /// Outer iterations.
    #[arg(short = 'K', long = "iterations")]
    k_max: Option<usize>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Compute the certificate at the averaged iterate.
    #[arg(long, overrides_with = "no_certify")]
    certify: bool,
    #[arg(long, overrides_with = "certify")]
    no_certify: bool,
    #[arg(long, value_parser = parse_scaling)]
    step_scaling: Option<StepScaling>,
    #[arg(long, value_parser = parse_rule)]
    radius_rule: Option<RadiusRule>,
    /// Also write per-round consensus radius traces.
    #[arg(long)]
    trace_consensus: bool,
}

fn parse_scaling(s: &str) -> Result<StepScaling, String> {
    match s {
        "aggregate" => Ok(StepScaling::Aggregate),
        "per-agent-share" => Ok(StepScaling::PerAgentShare),
        _ => Err(format!("expected aggregate or per-agent-share, got '{s}'")),
    }
}

fn parse_rule(s: &str) -> Result<RadiusRule, String> {
    match s {
        "neighbor-distance" => Ok(RadiusRule::NeighborDistance),
        "self-difference" => Ok(RadiusRule::SelfDifference),
        _ => Err(format!("expected neighbor-distance or self-difference, got '{s}'")),
    }
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.paper_scale) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            (None, true) => ExperimentConfig::paper_scale(),
            (None, false) => ExperimentConfig::default(),
        };
        if self.paper_scale {
            cfg.m = 720;
            cfg.p = 2560;
        }
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$target = v; })*
            };
        }
        set!(n_agents => n_agents, m => m, p => p, rho => rho, noise_scale => noise_scale,
             connect_prob => connect_prob, alpha => alpha, theta => theta, seed => seed,
             variants => variants, k_max => k_max, output => output,
             step_scaling => step_scaling, radius_rule => radius_rule);
        if self.s.is_some() {
            cfg.s = self.s;
        }
        if self.certify {
            cfg.certify = true;
        }
        if self.no_certify {
            cfg.certify = false;
        }
        if self.trace_consensus {
            cfg.trace_consensus = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn summarize(manifest: &Manifest) {
    println!(
        "instance {} (mu = {:.6e}, L_muF = {:.6e}, diameter {})",
        &manifest.instance_sha256[..16],
        manifest.mu,
        manifest.l_mu_f,
        manifest.diameter
    );
    for v in &manifest.variants {
        println!("  {:<12} {:>8} rounds {:>10.0} ms  {}", v.name, v.total_rounds, v.wall_ms, v.csv_path.display());
    }
}

fn warn_if_large(cfg: &ExperimentConfig) {
    if cfg.is_large() {
        eprintln!(
            "warning: n={} m={} p={} is far beyond desk scale; a full run can take hours",
            cfg.n_agents, cfg.m, cfg.p
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => {
            let cfg = args.resolve()?;
            let manifest = harness::generate(&cfg)?;
            summarize(&manifest);
        }
        Command::Run(args) => {
            let cfg = args.resolve()?;
            warn_if_large(&cfg);
            let manifest = harness::run_experiment(&cfg)?;
            summarize(&manifest);
        }
        Command::Sweep { param, values, exp } => {
            let cfg = exp.resolve()?;
            if values.is_empty() {
                bail!("sweep needs at least one value");
            }
            warn_if_large(&cfg);
            for (value, manifest) in values.iter().zip(harness::sweep(&cfg, &param, &values)?) {
                println!("{param} = {value}");
                summarize(&manifest);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
