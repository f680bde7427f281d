use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
# small run for tests
market.n_steps = 24
train.n_epochs = 2
train.paths_per_epoch = 20
model.n_quantiles = 6
model.n_centers = 5
oracle.monitor_paths = 100
oracle.benchmark_paths = 300
";

fn distrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_distrl"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn config(dir: &Path) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, SMALL).unwrap();
    path.display().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn train_then_price_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let out = dir.path().join("run");
    let o = distrl(&["train", "--config", &cfg, "--output", out.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["model.txt", "diagnostics.csv", "evaluation.csv", "config.resolved"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let resolved = fs::read_to_string(out.join("config.resolved")).unwrap();
    assert!(resolved.contains("train.base_seed = 5\n"));

    let model = out.join("model.txt");
    let o = distrl(&["price", model.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("price "));
    assert_eq!(stdout.lines().count(), 2 + 6);
    assert!(out.join("quantiles.csv").exists() && out.join("price.csv").exists());
}

#[test]
fn reruns_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(code(&distrl(&["train", "--config", &cfg, "--output", out.to_str().unwrap()])), 0);
        assert_eq!(code(&distrl(&["benchmark", "--config", &cfg, "--output", out.to_str().unwrap()])), 0);
    }
    for f in ["model.txt", "diagnostics.csv", "evaluation.csv", "benchmark.csv", "benchmark_payoffs.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn key_flags_and_set_are_equivalent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = distrl(&["benchmark", "--config", &cfg, "--market.s0", "110", "--output", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = distrl(&["benchmark", "--config", &cfg, "--set", "market.s0=110", "--output", b.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(a.join("benchmark.csv")).unwrap(), fs::read(b.join("benchmark.csv")).unwrap());
    assert!(fs::read_to_string(a.join("config.resolved")).unwrap().contains("market.s0 = 110.0\n"));
}

#[test]
fn table_with_grid_and_empty_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let out = dir.path().join("t");
    let o = distrl(&["table", "--config", &cfg, "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read_to_string(out.join("table.csv")).unwrap(),
        "s0_minus_k,max_payoff,mc_price,distrl_price,abs_error,w1,seed,error\n"
    );
    let o = distrl(&["table", "--config", &cfg, "--table.grid", "105:10, 105:20", "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("5.0,10.0,") && rows[1].starts_with("5.0,20.0,"));
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    // configuration errors
    assert_eq!(code(&distrl(&["train", "--config", &cfg, "--set", "market.sigma=-1"])), 1);
    assert_eq!(code(&distrl(&["train", "--set", "market.volatility=0.2"])), 1);
    assert_eq!(code(&distrl(&["train", "--no-such-flag"])), 1);
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "distrl-quantile-model\nformat_version = 9\n").unwrap();
    let o = distrl(&["price", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("expected format version 1"));
    // numerical / contract failures
    let out = dir.path().join("m");
    assert_eq!(code(&distrl(&["train", "--config", &cfg, "--output", out.to_str().unwrap()])), 0);
    let model = out.join("model.txt");
    let o = distrl(&["price", model.to_str().unwrap(), "--spot", "500", "--avg", "100", "--step", "1"]);
    assert_eq!(code(&o), 2);
    // I/O errors
    assert_eq!(code(&distrl(&["price", dir.path().join("missing.txt").to_str().unwrap()])), 3);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = distrl(&["benchmark", "--config", &cfg, "--output", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn help_succeeds() {
    let o = distrl(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("benchmark"));
}
