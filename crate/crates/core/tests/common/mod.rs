#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_periodic-rips");

pub const TEST_HIDDEN_DIM: &str = "32";
pub const TEST_HEADS: &str = "4";
pub const GOLDEN_SEED: &str = "7";
pub const FOLD_SEEDS: [&str; 3] = ["11", "12", "13"];

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn polymers_dir() -> PathBuf {
    crate_dir().join("data/polymers")
}

pub fn mini_dir() -> PathBuf {
    crate_dir().join("data/mini")
}

pub fn golden_path(name: &str) -> PathBuf {
    crate_dir().join("tests/golden").join(name)
}

pub fn bundled_polymers() -> Vec<PathBuf> {
    ["polyethylene", "peo", "polystyrene"].iter().map(|n| polymers_dir().join(format!("{n}.json"))).collect()
}

pub fn run<I, S>(args: I, envs: &[(&str, &str)]) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

pub fn run_ok<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = run(args, &[]);
    assert!(out.status.success(), "command failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

pub fn gen_weights(out: &Path, seed: &str) {
    run_ok([
        "gen-test-weights",
        "--seed",
        seed,
        "--hidden-dim",
        TEST_HIDDEN_DIM,
        "--heads",
        TEST_HEADS,
        "--out",
        out.to_str().unwrap(),
    ]);
}

/// Predictions CSV of the three bundled polymers under the golden seed.
pub fn bundled_predictions(dir: &Path, envs: &[(&str, &str)]) -> Vec<u8> {
    let w = dir.join("golden.hsmpw");
    gen_weights(&w, GOLDEN_SEED);
    let out = dir.join("bundled.csv");
    let mut args: Vec<String> = vec!["predict".into(), "--input".into()];
    args.extend(bundled_polymers().iter().map(|p| p.display().to_string()));
    args.extend(["--weights".into(), w.display().to_string(), "--out".into(), out.display().to_string()]);
    let o = run(&args, envs);
    assert!(o.status.success(), "predict failed: {}", String::from_utf8_lossy(&o.stderr));
    fs::read(out).unwrap()
}

/// rips, featurize, predict (three folds) and analyze over the mini dataset;
/// returns the analysis CSV.
pub fn mini_chain(dir: &Path) -> Vec<u8> {
    let mut units: Vec<PathBuf> = fs::read_dir(mini_dir()).unwrap().map(|e| e.unwrap().path()).collect();
    units.sort();
    for u in &units {
        let out = dir.join("rips").join(u.file_stem().unwrap());
        run_ok(["rips", "--input", u.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    }
    let feats = dir.join("features");
    run_ok(["featurize", "--input", mini_dir().to_str().unwrap(), "--out", feats.to_str().unwrap()]);
    let mut args: Vec<String> = vec!["predict".into(), "--input".into(), feats.display().to_string(), "--weights".into()];
    for s in FOLD_SEEDS {
        let w = dir.join(format!("fold{s}.hsmpw"));
        gen_weights(&w, s);
        args.push(w.display().to_string());
    }
    let preds = dir.join("predictions.csv");
    args.extend(["--out".into(), preds.display().to_string()]);
    run_ok(&args);
    let analysis = dir.join("analysis.csv");
    run_ok([
        "analyze",
        "--predictions",
        preds.to_str().unwrap(),
        "--out",
        analysis.to_str().unwrap(),
    ]);
    fs::read(analysis).unwrap()
}

/// Compares against a golden file, rewriting it when `UPDATE_GOLDEN` is set.
pub fn golden_matches(name: &str, actual: &[u8]) -> bool {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
        return true;
    }
    match fs::read(&path) {
        Ok(expected) => expected == actual,
        Err(_) => false,
    }
}
