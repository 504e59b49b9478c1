mod common;

use std::fs;

use common::power_iteration;
use ddc_core::harness::{
    generate, generate_instance, read_manifest, run_experiment, sweep, with_param, ExperimentConfig, HarnessError,
    Instance, INSTANCE_FILE, MANIFEST_FILE,
};
use ddc_core::solver::Variant;
use proptest::prelude::*;

fn desk() -> ExperimentConfig {
    ExperimentConfig::default()
}

#[test]
fn desk_instance_invariants() {
    let cfg = desk();
    let inst = generate_instance(&cfg).unwrap();
    assert_eq!(inst.n_agents(), 10);
    assert_eq!(cfg.sparsity(), 13);
    for a in &inst.a {
        assert_eq!(a.shape(), (72, 256));
        for col in a.column_iter() {
            assert!((col.norm() - 1.0).abs() < 1e-12);
        }
    }
    assert_eq!(inst.x_star.iter().filter(|&&v| v != 0.0).count(), 13);
    assert_eq!(inst.support.len(), 13);
    assert!(inst.support.windows(2).all(|w| w[0] < w[1]));

    let lambdas: Vec<f64> = inst.a.iter().map(power_iteration).collect();
    for (lib, oracle) in inst.lambda_max().iter().zip(&lambdas) {
        assert!((lib - oracle).abs() < 1e-8, "{lib} vs {oracle}");
    }
    let worst = lambdas.iter().copied().fold(0.0, f64::max);
    assert!((inst.mu - 1.0 / worst).abs() < 1e-8 * inst.mu);
}

#[test]
fn f_star_matches_its_definition() {
    let cfg = ExperimentConfig { n_agents: 3, m: 6, p: 9, s: Some(2), ..desk() };
    let inst = generate_instance(&cfg).unwrap();
    let xs = &inst.x_star;
    let mut ls = 0.0;
    for (a, b) in inst.a.iter().zip(&inst.b) {
        let r = a * xs - b;
        ls += 0.5 * r.dot(&r);
    }
    let l1: f64 = xs.iter().map(|v| v.abs()).sum();
    let l2 = xs.dot(xs).sqrt();
    let want = ls / 3.0 + cfg.rho * l1 - cfg.rho * l2;
    assert!((inst.f_star - want).abs() < 1e-12);
}

#[test]
fn noiseless_trivial_instance_has_zero_residual_at_truth() {
    let cfg = ExperimentConfig { n_agents: 1, m: 2, p: 2, s: Some(2), noise_scale: 0.0, ..desk() };
    let inst = generate_instance(&cfg).unwrap();
    assert_eq!(&inst.a[0] * &inst.x_star, inst.b[0]);
    assert_eq!(inst.objective(&inst.x_star) - inst.f_star, 0.0);
    let problem = inst.problem().unwrap();
    assert!((ddc_core::metrics::objective(&problem, &inst.x_star) - inst.f_star).abs() < 1e-14);
}

#[test]
fn same_seed_same_bytes() {
    let cfg = ExperimentConfig { seed: 1, ..desk() };
    let a = generate_instance(&cfg).unwrap().to_bytes();
    let b = generate_instance(&cfg).unwrap().to_bytes();
    assert_eq!(a, b);
    assert_eq!(Instance::from_bytes(&a).unwrap().to_bytes(), a);
}

#[test]
fn invalid_configs_rejected() {
    for cfg in [
        ExperimentConfig { s: Some(0), ..desk() },
        ExperimentConfig { s: Some(257), ..desk() },
        ExperimentConfig { rho: 0.0, ..desk() },
        ExperimentConfig { connect_prob: 0.0, ..desk() },
        ExperimentConfig { n_agents: 0, ..desk() },
        ExperimentConfig { variants: vec![], ..desk() },
    ] {
        assert!(matches!(generate_instance(&cfg), Err(HarnessError::InvalidConfig(_))), "{cfg:?}");
    }
}

#[test]
fn single_iteration_writes_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { variants: vec![Variant::Consensus], k_max: 1, output: dir.path().to_path_buf(), ..desk() };
    let manifest = run_experiment(&cfg).unwrap();
    let csv = fs::read_to_string(dir.path().join("consensus.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "k,eta_k,consensus_rounds,solution_residual,stationarity_residual,objective_residual,consensus_residual,xi_norm,xi_hat_norm,elapsed_ms"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,") && lines[2].starts_with("1,"));
    // timing is off by default, so the last field is empty
    assert!(lines[2].ends_with(','));

    assert_eq!(manifest.variants.len(), 1);
    assert_eq!(manifest.variants[0].name, "consensus");
    assert!(manifest.variants[0].total_rounds > 0);
    let reread = read_manifest(dir.path()).unwrap();
    assert_eq!(reread.instance_sha256, manifest.instance_sha256);
    assert_eq!(reread.config, cfg);
    let bytes = fs::read(dir.path().join(INSTANCE_FILE)).unwrap();
    assert_eq!(Instance::from_bytes(&bytes).unwrap().sha256(), manifest.instance_sha256);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    for key in ["config", "mu", "L_muF", "instance_sha256", "variants"] {
        assert!(json.get(key).is_some(), "manifest lacks {key}");
    }
}

#[test]
fn reruns_reproduce_every_csv() {
    let base = ExperimentConfig { n_agents: 4, m: 20, p: 40, k_max: 12, ..desk() };
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let m1 = run_experiment(&ExperimentConfig { output: d1.path().to_path_buf(), ..base.clone() }).unwrap();
    run_experiment(&ExperimentConfig { output: d2.path().to_path_buf(), ..base }).unwrap();
    assert_eq!(m1.variants.len(), 4);
    for v in &m1.variants {
        let a = fs::read(d1.path().join(&v.csv_path)).unwrap();
        let b = fs::read(d2.path().join(&v.csv_path)).unwrap();
        assert_eq!(a, b, "{} differs", v.name);
    }
    assert_eq!(fs::read(d1.path().join(INSTANCE_FILE)).unwrap(), fs::read(d2.path().join(INSTANCE_FILE)).unwrap());
}

#[test]
fn generate_writes_manifest_without_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { n_agents: 3, m: 5, p: 8, output: dir.path().join("nested"), ..desk() };
    let manifest = generate(&cfg).unwrap();
    assert!(manifest.variants.is_empty());
    assert!(dir.path().join("nested").join(MANIFEST_FILE).exists());
    assert!(dir.path().join("nested").join("graph.json").exists());
}

#[test]
fn paper_scale_config_is_accepted_and_flagged() {
    let cfg = ExperimentConfig::paper_scale();
    cfg.validate().unwrap();
    assert!(cfg.is_large());
    assert!(!desk().is_large());
    assert_eq!(cfg.sparsity(), 128);
}

#[test]
fn sweep_runs_each_value_in_its_own_directory() {
    let dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig {
        n_agents: 3,
        m: 6,
        p: 8,
        k_max: 2,
        variants: vec![Variant::Mixing],
        output: dir.path().to_path_buf(),
        ..desk()
    };
    let manifests = sweep(&base, "alpha", &["0.01".into(), "0.02".into()]).unwrap();
    assert_eq!(manifests.len(), 2);
    assert_eq!(manifests[1].config.alpha, 0.02);
    assert!(dir.path().join("alpha=0.02").join("mixing.csv").exists());
    assert!(matches!(with_param(&base, "gamma", "1"), Err(HarnessError::InvalidConfig(_))));
    assert!(matches!(with_param(&base, "m", "x"), Err(HarnessError::InvalidConfig(_))));
}

#[test]
fn io_errors_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let cfg = ExperimentConfig { n_agents: 2, m: 3, p: 4, output: blocker.join("sub"), ..desk() };
    let err = run_experiment(&cfg).unwrap_err();
    assert!(matches!(err, HarnessError::Io { .. }));
    assert!(err.to_string().contains("sub"));
}

#[test]
fn config_json_round_trip_uses_field_names() {
    let cfg = desk();
    let json = serde_json::to_value(&cfg).unwrap();
    assert_eq!(json["K"], 300);
    assert_eq!(json["variants"][1], "inexact-10");
    let back: ExperimentConfig = serde_json::from_value(json).unwrap();
    assert_eq!(back, cfg);
    let partial: ExperimentConfig = serde_json::from_str(r#"{"m": 20, "variants": ["mixing"]}"#).unwrap();
    assert_eq!(partial.m, 20);
    assert_eq!(partial.p, 256);
    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_instances_satisfy_invariants(seed in any::<u64>(), n in 1usize..4, m in 1usize..8, p in 1usize..10, s_frac in 0.01f64..1.0) {
        let s = ((p as f64 * s_frac).ceil() as usize).clamp(1, p);
        let cfg = ExperimentConfig { n_agents: n, m, p, s: Some(s), seed, ..desk() };
        let inst = generate_instance(&cfg).unwrap();
        prop_assert_eq!(inst.x_star.iter().filter(|&&v| v != 0.0).count(), s);
        for a in &inst.a {
            for col in a.column_iter() {
                prop_assert!((col.norm() - 1.0).abs() < 1e-12);
            }
        }
        prop_assert!(inst.mu > 0.0 && inst.mu.is_finite());
        prop_assert!((inst.objective(&inst.x_star) - inst.f_star).abs() <= 1e-12 * inst.f_star.abs().max(1.0));
    }
}
