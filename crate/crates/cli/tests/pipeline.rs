use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn fairflip(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairflip"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = fairflip(dir, args);
    assert!(
        out.status.success(),
        "`fairflip {}` failed:\n{}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn prepare(dir: &Path) {
    ok(dir, &["synth", "--seed", "7", "--out", "train.csv"]);
    ok(dir, &["synth", "--seed", "8", "--out", "val.csv"]);
    ok(
        dir,
        &[
            "train-aux", "--train", "train.csv", "--predict", "val.csv", "--out", "val_probs.csv",
            "--seed", "0", "--iterations", "500",
        ],
    );
    ok(
        dir,
        &["score", "--probs", "val_probs.csv", "--criterion", "eo", "--train", "train.csv", "--out", "s.csv"],
    );
}

#[test]
fn synth_writes_1200_rows() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["synth", "--seed", "7", "--out", "d.csv"]);
    let text = read(tmp.path(), "d.csv");
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("y,a,x0,x1"));
    assert_eq!(lines.count(), 1200);
}

#[test]
fn delta_above_one_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let out = fairflip(
        tmp.path(),
        &["fit", "--scores", "s.csv", "--data", "d.csv", "--criterion", "dp", "--delta", "2", "--out", "r.kv"],
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("delta"), "{err}");
    assert!(!tmp.path().join("r.kv").exists());
}

#[test]
fn full_pipeline_runs_and_records_provenance() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    prepare(dir);
    ok(
        dir,
        &["fit", "--scores", "s.csv", "--data", "val.csv", "--criterion", "eo", "--delta", "0.02", "--out", "r.kv"],
    );
    let report = ok(
        dir,
        &["eval", "--scores", "s.csv", "--data", "val.csv", "--criterion", "eo", "--rule", "r.kv", "--out", "e.json"],
    );
    assert!(report.contains("accuracy = "));

    let json: serde_json::Value = serde_json::from_str(&read(dir, "e.json")).unwrap();
    assert!(json["cc"].as_f64().unwrap() <= 0.02 + 1e-12);
    assert_eq!(json["disparities"].as_array().unwrap().len(), 2);

    for out in ["train.csv", "val_probs.csv", "s.csv", "r.kv", "e.json"] {
        let prov: serde_json::Value = serde_json::from_str(&read(dir, &format!("{out}.provenance.json"))).unwrap();
        assert_eq!(prov["tool"], "fairflip");
        assert_eq!(prov["version"], env!("CARGO_PKG_VERSION"));
        assert!(prov["config"].is_object());
        assert!(prov["argv"].as_array().unwrap().len() > 2);
    }
}

#[test]
fn sampled_search_needs_a_seed() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    prepare(dir);
    let out = fairflip(
        dir,
        &[
            "fit", "--scores", "s.csv", "--data", "val.csv", "--criterion", "eo", "--delta", "0.05",
            "--method", "pairs", "--m", "50", "--out", "r.kv",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: fit: --seed"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    prepare(dir);
    let args = |out: &'static str| {
        vec![
            "frontier", "--scores", "s.csv", "--data", "val.csv", "--criterion", "eo", "--deltas",
            "0.01,0.05,inf", "--method", "pairs", "--m", "60", "--seed", "5", "--out", out,
        ]
    };
    ok(dir, &args("f1.csv"));
    ok(dir, &args("f2.csv"));
    assert_eq!(read(dir, "f1.csv"), read(dir, "f2.csv"));
    assert_eq!(read(dir, "f1.csv").lines().count(), 4);

    ok(dir, &["synth", "--seed", "7", "--out", "again.csv"]);
    assert_eq!(read(dir, "train.csv"), read(dir, "again.csv"));
}

#[test]
fn oracle_and_dual_rule() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    prepare(dir);
    let stdout = ok(
        dir,
        &[
            "oracle", "--scores", "s.csv", "--data", "val.csv", "--criterion", "eo", "--delta", "0.02",
            "--out", "o.csv", "--rule-out", "dual.kv",
        ],
    );
    assert!(stdout.contains("status = optimal"));
    assert_eq!(read(dir, "o.csv").lines().count(), 1201);
    assert!(read(dir, "dual.kv").contains("algorithm = lp-dual"));
    ok(dir, &["apply", "--scores", "s.csv", "--rule", "dual.kv", "--out", "ap.csv"]);
    assert_eq!(read(dir, "ap.csv").lines().next(), Some("yhat,flip,prediction"));
}

#[test]
fn corrupt_keeps_probabilities_in_range() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    prepare(dir);
    ok(
        dir,
        &["corrupt", "--probs", "val_probs.csv", "--criterion", "dp", "--alpha", "0.3", "--seed", "1", "--out", "c.csv"],
    );
    let text = read(dir, "c.csv");
    let mut n = 0;
    for line in text.lines().skip(1) {
        for v in line.split(',') {
            let v: f64 = v.parse().unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
        n += 1;
    }
    assert_eq!(n, 1200);
}

#[test]
fn svg_outputs() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    prepare(dir);
    ok(
        dir,
        &["fit", "--scores", "s.csv", "--data", "val.csv", "--criterion", "eo", "--delta", "0.05", "--out", "r.kv"],
    );
    ok(
        dir,
        &["render", "scatter", "--scores", "s.csv", "--data", "val.csv", "--rule", "r.kv", "--out", "sc.svg"],
    );
    let svg = read(dir, "sc.svg");
    assert_eq!(svg.matches("<circle").count(), 1200 + 4);
    assert_eq!(svg.matches(r#"class="rule""#).count(), 1);

    ok(
        dir,
        &[
            "frontier", "--scores", "s.csv", "--data", "val.csv", "--criterion", "eo", "--deltas",
            "0.01,0.03,0.1", "--out", "f.csv",
        ],
    );
    ok(dir, &["render", "frontier", "--frontier", "f.csv", "--out", "f.svg"]);
    let svg = read(dir, "f.svg");
    assert_eq!(svg.matches(r#"<circle class="validation""#).count(), 3);
    assert_eq!(svg.matches(r#"class="delta""#).count(), 3);

    std::fs::write(dir.join("empty.csv"), "delta,val_accuracy,val_cc\n").unwrap();
    let out = fairflip(dir, &["render", "frontier", "--frontier", "empty.csv", "--out", "e.svg"]);
    assert!(!out.status.success());
}

#[test]
fn missing_prior_source_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--seed", "1", "--n", "200", "--out", "d.csv"]);
    ok(dir, &["train-aux", "--train", "d.csv", "--out", "p.csv", "--seed", "0", "--iterations", "50"]);
    let out = fairflip(dir, &["score", "--probs", "p.csv", "--criterion", "dp", "--out", "s.csv"]);
    assert_eq!(out.status.code(), Some(1));
    ok(dir, &["score", "--probs", "p.csv", "--criterion", "dp", "--val", "d.csv", "--out", "s.csv"]);
}
