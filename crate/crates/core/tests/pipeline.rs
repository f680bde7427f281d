use std::fs;
use std::path::Path;

use distrl_core::config::{ExperimentConfig, GridCell};
use distrl_core::experiment::{self, *};
use distrl_core::model_file::ModelFile;
use distrl_core::{Error, PathState};

fn small() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    for kv in [
        "market.n_steps=24",
        "train.n_epochs=3",
        "train.paths_per_epoch=20",
        "model.n_quantiles=8",
        "model.n_centers=6",
        "oracle.monitor_paths=200",
        "oracle.benchmark_paths=500",
        "train.base_seed=17",
    ] {
        c.apply_override(kv).unwrap();
    }
    c
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap()
}

#[test]
fn training_reruns_are_byte_identical() {
    let cfg = small();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_train(&cfg, a.path()).unwrap();
    run_train(&cfg, b.path()).unwrap();
    for f in [MODEL_FILE, DIAGNOSTICS_FILE, EVALUATION_FILE, CONFIG_FILE] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    let diag = String::from_utf8(read(a.path(), DIAGNOSTICS_FILE)).unwrap();
    assert_eq!(diag.lines().count(), 1 + 3);
    let eval = String::from_utf8(read(a.path(), EVALUATION_FILE)).unwrap();
    assert_eq!(eval.lines().count(), 2);
    // the echoed configuration parses back to the same configuration
    let echo = String::from_utf8(read(a.path(), CONFIG_FILE)).unwrap();
    assert_eq!(ExperimentConfig::from_kv_text(&echo).unwrap(), cfg);
}

#[test]
fn benchmark_reruns_are_byte_identical() {
    let cfg = small();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_benchmark(&cfg, a.path()).unwrap();
    let rb = run_benchmark(&cfg, b.path()).unwrap();
    assert_eq!(ra, rb);
    for f in [BENCHMARK_SUMMARY_FILE, BENCHMARK_PAYOFFS_FILE, CONFIG_FILE] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    let payoffs = String::from_utf8(read(a.path(), BENCHMARK_PAYOFFS_FILE)).unwrap();
    assert_eq!(payoffs.lines().count(), 1 + cfg.benchmark_paths);
    assert!(payoffs.starts_with(&format!("discounted_payoff_cfg_{:016x}\n", cfg.hash())));
}

#[test]
fn zero_noise_benchmark_is_the_discounted_deterministic_payoff() {
    let mut cfg = small();
    for kv in ["market.sigma=0", "market.s0=110", "train.payoff_cap=none", "market.n_steps=252"] {
        cfg.apply_override(kv).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let r = run_benchmark(&cfg, dir.path()).unwrap();
    let m = &cfg.market;
    let avg = (0..=m.n_steps).map(|i| m.s0 * (m.r * i as f64 * m.dt()).exp()).sum::<f64>() / (m.n_steps + 1) as f64;
    let expected = (-m.r * m.t_maturity).exp() * (avg - m.k);
    assert!((r.price - expected).abs() <= 1e-10 * expected, "{} vs {expected}", r.price);
    assert_eq!(r.std_error, 0.0);
}

#[test]
fn untrained_model_prices_at_the_pilot_mean() {
    let mut cfg = small();
    cfg.train.n_epochs = 0;
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_train(&cfg, dir.path()).unwrap();
    let report = run_price(&dir.path().join(MODEL_FILE), None, Some(dir.path())).unwrap();
    assert!((report.price - outcome.init_mean).abs() < 1e-12);
    for q in &report.quantiles {
        assert!((q - outcome.init_mean).abs() < 1e-12);
    }
    let csv = String::from_utf8(read(dir.path(), QUANTILES_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 1 + cfg.n_quantiles);
    assert!(csv.starts_with(QUANTILES_HEADER));
}

#[test]
fn saved_model_predicts_like_the_trained_one() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_train(&cfg, dir.path()).unwrap();
    let state = PathState { spot: 118.0, running_avg: 109.5, step_index: 7 };
    let loaded = run_price(&dir.path().join(MODEL_FILE), Some(state), None).unwrap();
    assert_eq!(loaded.quantiles, outcome.model.predict_quantiles(&state).unwrap());
    let file = ModelFile::load(&dir.path().join(MODEL_FILE)).unwrap();
    assert_eq!(file.model, outcome.model);
    assert_eq!(file.market, cfg.market);
}

#[test]
fn price_rejects_states_outside_the_feature_domain() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    run_train(&cfg, dir.path()).unwrap();
    let state = PathState { spot: 250.0, running_avg: 100.0, step_index: 1 };
    let err = run_price(&dir.path().join(MODEL_FILE), Some(state), None).unwrap_err();
    assert!(matches!(err, Error::OutOfRange { value, .. } if value == 250.0));
}

#[test]
fn price_reports_the_expected_format_version() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    fs::write(&path, "distrl-quantile-model\nformat_version = 7\n").unwrap();
    let err = run_price(&path, None, None).unwrap_err();
    assert!(matches!(err, Error::Format { expected: 1, .. }), "{err}");
}

#[test]
fn failed_training_leaves_no_partial_outputs() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    // a directory where a file must go makes the second write fail
    fs::create_dir(dir.path().join(DIAGNOSTICS_FILE)).unwrap();
    let err = run_train(&cfg, dir.path()).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(!dir.path().join(MODEL_FILE).exists());
    assert!(!dir.path().join(EVALUATION_FILE).exists());
}

#[test]
fn empty_grid_gives_header_only_table() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    let rows = run_table(&cfg, dir.path()).unwrap();
    assert!(rows.is_empty());
    assert_eq!(String::from_utf8(read(dir.path(), TABLE_FILE)).unwrap(), format!("{TABLE_HEADER}\n"));
}

#[test]
fn table_has_one_ordered_row_per_cell_and_reruns_identically() {
    let mut cfg = small();
    cfg.grid = vec![
        GridCell { s0: 105.0, cap: Some(10.0) },
        GridCell { s0: 105.0, cap: Some(20.0) },
        GridCell { s0: 120.0, cap: None },
    ];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let rows = run_table(&cfg, a.path()).unwrap();
    run_table(&cfg, b.path()).unwrap();
    assert_eq!(read(a.path(), TABLE_FILE), read(b.path(), TABLE_FILE));
    let caps: Vec<_> = rows.iter().map(|r| (r.s0_minus_k, r.max_payoff)).collect();
    assert_eq!(caps, vec![(5.0, Some(10.0)), (5.0, Some(20.0)), (20.0, None)]);
    // each cell equals a standalone training run with the cell's settings
    let solo = experiment::train_model(&cell_config(&cfg, &cfg.grid[1])).unwrap();
    let (mc, dr, _, w1) = rows[1].outcome.clone().unwrap();
    assert_eq!((mc, dr, w1), (solo.evaluation.mc_price, solo.evaluation.distrl_price, solo.evaluation.w1));
}
