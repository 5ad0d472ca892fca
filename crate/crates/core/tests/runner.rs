use osbsim::runner::{self, Cell, ExperimentConfig, ExperimentKind, Manifest, Table};
use osbsim::Error;

fn small(kind: ExperimentKind, dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind);
    cfg.t_final = 0.6;
    cfg.dt = vec![0.2];
    cfg.orders = vec![2];
    cfg.output = dir.join(format!("{}.csv", kind.name()));
    cfg
}

#[test]
fn step_counts_round_to_the_nearest_integer() {
    let cfg = ExperimentConfig::new(ExperimentKind::TrotterSweep);
    let steps: Vec<usize> = cfg.dt.iter().map(|&dt| cfg.n_steps(dt)).collect();
    assert_eq!(steps, vec![20, 10, 7, 5, 4]);
}

#[test]
fn config_file_merges_over_kind_defaults() {
    let cfg = ExperimentConfig::from_json(r#"{"kind": "noise_sweep", "xi": [0.5], "model": {"gamma": 0.25}}"#, None).unwrap();
    let base = ExperimentConfig::new(ExperimentKind::NoiseSweep);
    assert_eq!(cfg.xi, vec![0.5]);
    assert_eq!(cfg.model.gamma, 0.25);
    assert_eq!(cfg.model.omega, base.model.omega);
    assert_eq!(cfg.dt, base.dt);
    assert!(ExperimentConfig::from_json(r#"{"kind": "noise_sweep", "bogus": 1}"#, None).is_err());
    assert!(ExperimentConfig::from_json(r#"{"kind": "noise_sweep"}"#, Some(ExperimentKind::GammaSweep)).is_err());
    assert!(ExperimentConfig::from_json(r#"{"xi": [1]}"#, None).is_err());
}

#[test]
fn validation_lists_every_problem() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::NoiseSweep);
    cfg.orders = vec![3];
    cfg.dt = vec![-0.1];
    cfg.xi = vec![-1.0];
    cfg.gamma = vec![f64::NAN];
    match cfg.validate() {
        Err(Error::Config(msgs)) => assert!(msgs.len() >= 4, "{msgs:?}"),
        other => panic!("expected config errors, got {other:?}"),
    }
}

#[test]
fn empty_table_writes_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/empty.csv");
    runner::emit_csv(&Table::new(&["a", "b"]), &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "a,b\n");
}

#[test]
fn nan_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nan.csv");
    let mut t = Table::new(&["x", "y"]);
    t.rows.push(vec![Cell::Int(1), Cell::Float(f64::NAN)]);
    assert!(matches!(runner::emit_csv(&t, &path), Err(Error::NanOutput { row: 0, .. })));
    assert!(!path.exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(ExperimentKind::Observables, dir.path());
    cfg.xi = vec![0.0, 0.1];
    cfg.shots = Some(2000);
    cfg.seed = 11;
    let first = runner::run(&cfg).unwrap();
    let a = std::fs::read(&first.csv).unwrap();
    let m1 = std::fs::read(&first.manifest).unwrap();
    let second = runner::run(&cfg).unwrap();
    assert_eq!(a, std::fs::read(&second.csv).unwrap());
    assert_eq!(m1, std::fs::read(&second.manifest).unwrap());

    let manifest: Manifest = serde_json::from_slice(&m1).unwrap();
    assert_eq!(manifest.config_sha256, cfg.hash());
    assert_eq!(manifest.rows, first.table.rows.len());
    assert_eq!(manifest.config, cfg);

    cfg.seed = 12;
    let other = runner::run(&cfg).unwrap();
    assert_ne!(a, std::fs::read(&other.csv).unwrap());
}

#[test]
fn every_experiment_produces_its_columns() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ExperimentKind::ALL {
        let mut cfg = small(kind, dir.path());
        if kind == ExperimentKind::GateCounts {
            cfg.spins = vec![1];
            cfg.levels = vec![4];
        }
        let out = runner::run(&cfg).unwrap();
        assert_eq!(out.table.columns, kind.columns(), "{}", kind.name());
        assert!(!out.table.rows.is_empty());
        let text = std::fs::read_to_string(&out.csv).unwrap();
        assert_eq!(text.lines().next().unwrap(), kind.columns().join(","));
        assert_eq!(text.lines().count(), out.table.rows.len() + 1);
    }
}

#[test]
fn exact_mode_leaves_sampled_columns_empty() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(ExperimentKind::Observables, dir.path());
    cfg.xi = vec![0.0];
    let table = runner::compute(&cfg).unwrap();
    assert!(table.floats("sigma_z_sampled").is_empty());
    assert_eq!(table.floats("sigma_z_sim").len(), 4);
    let sim = table.floats("boson_number_sim");
    let exact = table.floats("boson_number_exact");
    // Noiseless Trotter steps start on the exact state.
    assert!((sim[0] - exact[0]).abs() < 1e-12);
}

#[test]
fn noise_raises_infidelity() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(ExperimentKind::NoiseSweep, dir.path());
    cfg.xi = vec![0.0, 0.1, 1.0];
    let table = runner::compute(&cfg).unwrap();
    let avg = table.floats("avg_infidelity");
    assert!(avg[0] < avg[1] && avg[1] < avg[2], "{avg:?}");
}
