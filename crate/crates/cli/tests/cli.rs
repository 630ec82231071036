use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gstkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gstkit"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = gstkit(args);
    assert!(
        out.status.success(),
        "gstkit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn lgst_design_has_85_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("short.jsonl");
    ok(&[
        "design",
        "--kind",
        "lgst",
        "--gates",
        "G1,G2,G3,G4",
        "--fiducials",
        "G1,G2,G3,G4",
        "--out",
        p(&out),
    ]);
    assert_eq!(lines(&out), 85);
}

#[test]
fn germ_design_has_1066_lines_with_append() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("long.jsonl");
    ok(&[
        "design",
        "--kind",
        "germ",
        "--powers",
        "2,4,8,16,32,64,128",
        "--append",
        "G4",
        "--out",
        p(&out),
    ]);
    assert_eq!(lines(&out), 1066);
    let stdout = ok(&["design", "--kind", "germ"]).stdout;
    assert_eq!(String::from_utf8(stdout).unwrap().lines().count(), 533);
}

#[test]
fn test_design_has_ten_bases_of_101() {
    let out = ok(&["design", "--kind", "test", "--seed", "5"]).stdout;
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 1010);
}

#[test]
fn simulate_is_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("d.jsonl");
    ok(&["design", "--kind", "lgst", "--out", p(&design)]);
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let c = dir.path().join("c.jsonl");
    for (out, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        ok(&[
            "simulate",
            "--design",
            p(&design),
            "--n",
            "1900",
            "--seed",
            seed,
            "--out",
            p(out),
        ]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn fit_gauge_and_score_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let f = |name: &str| dir.path().join(name);
    ok(&["design", "--kind", "lgst", "--out", p(&f("short.jsonl"))]);
    ok(&[
        "design",
        "--kind",
        "test",
        "--length",
        "6",
        "--num-random",
        "2",
        "--out",
        p(&f("test.jsonl")),
    ]);
    ok(&[
        "targets",
        "--over-rotation",
        "0.02",
        "--depolarization",
        "0.01",
        "--out",
        p(&f("truth.json")),
    ]);
    ok(&[
        "simulate",
        "--gateset",
        p(&f("truth.json")),
        "--design",
        p(&f("short.jsonl")),
        "--seed",
        "1",
        "--out",
        p(&f("train.jsonl")),
    ]);
    ok(&[
        "simulate",
        "--gateset",
        p(&f("truth.json")),
        "--design",
        p(&f("test.jsonl")),
        "--n",
        "950",
        "--seed",
        "2",
        "--out",
        p(&f("test-data.jsonl")),
    ]);
    for method in ["lgst", "mle", "standard"] {
        ok(&[
            "fit",
            "--method",
            method,
            "--data",
            p(&f("train.jsonl")),
            "--design",
            p(&f("short.jsonl")),
            "--out",
            p(&f(&format!("{method}.json"))),
            "--diagnostics",
            p(&f(&format!("{method}-diag.json"))),
        ]);
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(f("mle-diag.json")).unwrap()).unwrap();
    assert!(report["final_nll"].as_f64().unwrap() <= report["initial_nll"].as_f64().unwrap());
    let lgst_diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(f("lgst-diag.json")).unwrap()).unwrap();
    assert_eq!(lgst_diag["rank"], 4);
    assert!(!f("standard-diag.json").exists());

    ok(&[
        "gauge-opt",
        "--estimate",
        p(&f("mle.json")),
        "--out",
        p(&f("mle-g.json")),
        "--report",
        p(&f("gauge.json")),
    ]);
    let gauge: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(f("gauge.json")).unwrap()).unwrap();
    assert!(
        gauge["discrepancy_after"].as_f64().unwrap()
            <= gauge["discrepancy_before"].as_f64().unwrap()
    );

    let mle = format!("mle={}", p(&f("mle.json")));
    let mle_g = format!("fixed={}", p(&f("mle-g.json")));
    ok(&[
        "score",
        "--estimate",
        &mle,
        "--estimate",
        &mle_g,
        "--data",
        p(&f("test-data.jsonl")),
        "--design",
        p(&f("test.jsonl")),
        "--out",
        p(&f("scores.json")),
        "--csv",
        p(&f("scores.csv")),
    ]);
    let csv = fs::read_to_string(f("scores.csv")).unwrap();
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("L,estimate_name,mean_per_count_score"));
    let rows: Vec<Vec<&str>> = rows.map(|r| r.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * 7);
    // Gauge fixing leaves every score unchanged.
    for pair in rows.chunks(2) {
        let a: f64 = pair[0][2].parse().unwrap();
        let b: f64 = pair[1][2].parse().unwrap();
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");

    let out = gstkit(&["simulate", "--design", p(&missing)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.jsonl"));

    let out = gstkit(&["frobnicate"]);
    assert!(!out.status.success());

    // Duplicate fiducials make the Gram matrix singular.
    let design = dir.path().join("d.jsonl");
    ok(&[
        "design",
        "--kind",
        "lgst",
        "--fiducials",
        "G1,G1,G3,G4",
        "--out",
        p(&design),
    ]);
    let data = dir.path().join("data.jsonl");
    ok(&["simulate", "--design", p(&design), "--out", p(&data)]);
    let out = gstkit(&[
        "fit",
        "--method",
        "lgst",
        "--data",
        p(&data),
        "--design",
        p(&design),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = gstkit(&[
        "score",
        "--estimate",
        "no-equals-sign",
        "--data",
        p(&data),
        "--design",
        p(&design),
    ]);
    assert!(!out.status.success());
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("d.jsonl");
    ok(&[
        "design",
        "--kind",
        "germ",
        "--powers",
        "2,4",
        "--out",
        p(&design),
    ]);
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = Command::new(env!("CARGO_BIN_EXE_gstkit"))
            .args(["simulate", "--design", p(&design), "--seed", "9"])
            .env("GSTKIT_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        outputs.push(out.stdout);
    }
    assert_eq!(outputs[0], outputs[1]);
    let bad = Command::new(env!("CARGO_BIN_EXE_gstkit"))
        .args(["design", "--kind", "lgst"])
        .env("GSTKIT_THREADS", "many")
        .output()
        .unwrap();
    assert!(!bad.status.success());
}
