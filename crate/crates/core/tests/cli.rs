mod common;

use std::fs;
use std::path::Path;

use common::{gen_weights, run, run_ok};

fn code(out: &std::process::Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

#[test]
fn rips_writes_levels_distances_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let input = common::polymers_dir().join("polystyrene.json");
    run_ok(["rips", "--input", s(&input), "--out", s(dir.path())]);
    for name in ["distances.csv", "level0.txt", "level1.txt", "level2.txt", "manifest.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let level0 = fs::read_to_string(dir.path().join("level0.txt")).unwrap();
    assert!(level0.starts_with("# dim=0 count=8"));
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["subcommand"], "rips");
    assert_eq!(manifest["config"]["cutoffs"], serde_json::json!([2.0, 3.0, 4.0]));
    assert!(manifest["started_unix_ms"].is_u64());
    assert!(!dir.path().join("manifest.json.tmp").exists());
}

#[test]
fn identical_invocations_give_identical_outputs() {
    let input = common::polymers_dir().join("peo.json");
    let outs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            run_ok(["featurize", "--input", s(&input), "--out", s(dir.path()), "--csv"]);
            run_ok(["curvature", "--input", s(&input), "--out", s(&dir.path().join("c"))]);
            let files = ["peo.features", "peo.features.csv", "c/level0_curvature.csv", "c/level2_curvature.csv"];
            let bytes: Vec<Vec<u8>> = files.iter().map(|f| fs::read(dir.path().join(f)).unwrap()).collect();
            (dir, bytes)
        })
        .collect();
    assert_eq!(outs[0].1, outs[1].1);
}

#[test]
fn bad_arguments_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let input = common::polymers_dir().join("peo.json");
    assert_eq!(code(&run(["rips", "--input", s(&input), "--out", s(dir.path()), "--max-dim", "5"], &[])), 2);
    assert_eq!(code(&run(["rips", "--input", s(&input), "--out", s(dir.path()), "--cutoffs", "3,2"], &[])), 2);
    assert_eq!(code(&run(["curvature", "--input", s(&input), "--out", s(dir.path()), "--temperature", "0"], &[])), 2);
    assert_eq!(code(&run(["rips", "--bogus"], &[])), 2);
}

#[test]
fn unreadable_input_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{").unwrap();
    let out = run(["featurize", "--input", s(&bad), "--out", s(&dir.path().join("o"))], &[]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed"));
    let missing = dir.path().join("absent.json");
    assert_eq!(code(&run(["rips", "--input", s(&missing), "--out", s(dir.path())], &[])), 1);
}

#[test]
fn partial_batch_keeps_good_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("in");
    fs::create_dir(&inputs).unwrap();
    for name in ["polyethylene", "peo"] {
        fs::copy(common::polymers_dir().join(format!("{name}.json")), inputs.join(format!("{name}.json"))).unwrap();
    }
    fs::write(inputs.join("broken.json"), "not json").unwrap();
    let out_dir = dir.path().join("out");
    let out = run(["featurize", "--input", s(&inputs), "--out", s(&out_dir)], &[]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.json"));
    assert!(out_dir.join("polyethylene.features").exists());
    assert!(out_dir.join("peo.features").exists());
    assert!(!out_dir.join("broken.features").exists());
    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["failures"].as_array().unwrap().len(), 1);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn feature_containers_predict_like_json_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.hsmpw");
    gen_weights(&w, "21");
    let feats = dir.path().join("feats");
    run_ok(["featurize", "--input", s(&common::mini_dir()), "--out", s(&feats)]);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    run_ok(["predict", "--input", s(&feats), "--weights", s(&w), "--out", s(&a)]);
    run_ok(["predict", "--input", s(&common::mini_dir()), "--weights", s(&w), "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(text.lines().nth(1).unwrap().starts_with("Ar-Et-A-mCl,Ar-Et-A,m-Cl,"));
    let manifest = read_json(&dir.path().join("a.csv.manifest.json"));
    assert_eq!(manifest["weights"][0]["seed"], 21);
}

#[test]
fn non_periodic_mode_changes_the_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let input = common::polymers_dir().join("peo.json");
    let (p, q) = (dir.path().join("p"), dir.path().join("q"));
    run_ok(["rips", "--input", s(&input), "--out", s(&p)]);
    run_ok(["rips", "--input", s(&input), "--out", s(&q), "--non-periodic"]);
    assert_ne!(fs::read(p.join("distances.csv")).unwrap(), fs::read(q.join("distances.csv")).unwrap());
}

#[test]
fn mismatched_schemas_are_version_errors() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.hsmpw");
    gen_weights(&w, "1");
    let feats = dir.path().join("feats");
    let input = common::polymers_dir().join("peo.json");
    run_ok(["featurize", "--input", s(&input), "--out", s(&feats)]);
    let path = feats.join("peo.features");
    let bytes = fs::read(&path).unwrap();
    let needle = b"periodic-rips-features/1";
    let at = bytes.windows(needle.len()).position(|w| w == needle).unwrap();
    let mut edited = bytes.clone();
    edited[at + needle.len() - 1] = b'9';
    fs::write(&path, edited).unwrap();
    let out = run(["predict", "--input", s(&path), "--weights", s(&w), "--out", s(&dir.path().join("p.csv"))], &[]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));

    let other = dir.path().join("other.hsmpw");
    run_ok(["gen-test-weights", "--seed", "2", "--hidden-dim", "32", "--heads", "4", "--cutoffs", "2,3,5", "--out", s(&other)]);
    let out = run(["predict", "--input", s(&input), "--weights", s(&w), s(&other), "--out", s(&dir.path().join("p.csv"))], &[]);
    assert_eq!(code(&out), 3);
}

#[test]
fn analyze_filters_comparisons_and_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.hsmpw");
    gen_weights(&w, "4");
    let preds = dir.path().join("p.csv");
    run_ok(["predict", "--input", s(&common::mini_dir()), "--weights", s(&w), "--out", s(&preds)]);
    let (out, summary) = (dir.path().join("a.csv"), dir.path().join("s.csv"));
    run_ok(["analyze", "--predictions", s(&preds), "--comparison", "alpha_methylation", "--out", s(&out), "--summary", s(&summary)]);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.starts_with("alpha_methylation:")));
    assert_eq!(fs::read_to_string(&summary).unwrap().lines().count(), 5);
    let bad = run(["analyze", "--predictions", s(&preds), "--comparison", "nonsense", "--out", s(&out)], &[]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let one = common::bundled_predictions(dir.path(), &[("PERIODIC_RIPS_THREADS", "1")]);
    let many = common::bundled_predictions(dir.path(), &[("PERIODIC_RIPS_THREADS", "3")]);
    assert_eq!(one, many);
}

#[test]
fn gen_test_weights_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    gen_weights(&a, "99");
    gen_weights(&b, "99");
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}
