use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn opsys(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opsys"))
        .args(args)
        .env("THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn construct_then_classify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let pair = dir.path().join("pair.json");
    let o = opsys(&["construct", "--q", "2/5", "--phases", "0.6+0.8i,-1", "--out", p(&pair)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&pair);
    assert_eq!(doc["format"], 1);
    assert_eq!(doc["manifest"]["subcommand"], "construct");
    assert_eq!(doc["dim"], 5);

    let out = dir.path().join("class.json");
    let o = opsys(&["classify", "--s", p(&pair), "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    let r = json(&out)["result"].clone();
    // ξ = α⁵ and ζ = β⁵ = −1.
    let alpha = num(&r["xi"]);
    let a5 = cpow((0.6, 0.8), 5);
    assert!((alpha.0 - a5.0).abs() < 1e-9 && (alpha.1 - a5.1).abs() < 1e-9, "{alpha:?} {a5:?}");
    let zeta = num(&r["zeta"]);
    assert!((zeta.0 + 1.0).abs() < 1e-9 && zeta.1.abs() < 1e-9);
    assert!(r["residual"].as_f64().unwrap() <= r["tol"].as_f64().unwrap());
}

fn num(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

fn cpow(z: (f64, f64), k: usize) -> (f64, f64) {
    (0..k).fold((1.0, 0.0), |(a, b), _| (a * z.0 - b * z.1, a * z.1 + b * z.0))
}

#[test]
fn equiv_of_distinct_angles_is_neither() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert_eq!(code(&opsys(&["construct", "--q", "1/3", "--phases", "1,1", "--out", p(&a)])), 0);
    assert_eq!(code(&opsys(&["construct", "--q", "2/3", "--out", p(&b)])), 0);
    let out = dir.path().join("eq.json");
    let o = opsys(&["equiv", "--s", p(&a), "--r", p(&b), "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    let doc = json(&out);
    assert_eq!(doc["result"]["verdict"], "neither");
    assert_eq!(doc["manifest"]["tolerances"]["sdp"], 1e-8);

    // Level 1 cannot tell them apart.
    let o = opsys(&["equiv", "--s", p(&a), "--r", p(&b), "--level", "one", "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&out)["result"]["verdict"], "equivalent");
}

#[test]
fn dilation_constant_at_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.json");
    let o = opsys(&["dilation", "--q", "1/2", "--tol", "1e-6", "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    let r = json(&out)["result"].clone();
    let c = r["constant"].as_f64().unwrap();
    assert!((c - 2f64.sqrt()).abs() < 1e-6);
    assert!(r["error_bound"].as_f64().unwrap() <= 1e-6);
    // Same constant from a pair of angles with the same difference.
    let o = opsys(&["dilation", "--q", "3/4", "--q2", "1/4", "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    assert!((json(&out)["result"]["constant"].as_f64().unwrap() - c).abs() < 1e-6);
}

#[test]
fn float_angles_are_rejected() {
    let o = opsys(&["dilation", "--q", "0.5"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("k/n"));
}

#[test]
fn malformed_tuple_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"format":1,"dim":2,"d":2,"matrices":[[[[1,0]]],[[[1,0]]]]}"#).unwrap();
    let o = opsys(&["classify", "--s", p(&bad)]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("schema error") && err.contains("dim"), "{err}");

    let o = opsys(&["classify", "--s", p(&dir.path().join("missing.json"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn usage_errors_exit_nonzero() {
    // Argument parsing errors come from clap and are nonzero.
    assert_ne!(code(&opsys(&["no-such-command"])), 0);
    let o = opsys(&["member", "--s", "x.json"]);
    assert_ne!(code(&o), 0);
    let o = opsys(&["construct", "--phases", "2,1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn nrange_csv_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let pauli = dir.path().join("f.json");
    assert_eq!(code(&opsys(&["construct", "--kind", "pauli", "--out", p(&pauli)])), 0);
    let csv = dir.path().join("n.csv");
    let o = opsys(&["nrange", "--s", p(&pauli), "--directions", "12", "--out", p(&csv)]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "index,c1_re,c1_im,c2_re,c2_im,support");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 12);
    for r in rows {
        let h: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert!((h - 1.0).abs() < 1e-9);
    }
    let side = json(&dir.path().join("n.csv.manifest.json"));
    assert_eq!(side["manifest"]["seeds"][0], 0);
}

#[test]
fn member_and_support() {
    let dir = tempfile::tempdir().unwrap();
    let pauli = dir.path().join("f.json");
    assert_eq!(code(&opsys(&["construct", "--kind", "pauli", "--out", p(&pauli)])), 0);
    // (0.5, 0.5) lies in the disk; (1, 1) does not.
    let inside = dir.path().join("in.json");
    std::fs::write(&inside, r#"{"format":1,"dim":1,"d":2,"matrices":[[[[0.5,0]]],[[[0.5,0]]]]}"#).unwrap();
    let outside = dir.path().join("out.json");
    std::fs::write(&outside, r#"{"format":1,"dim":1,"d":2,"matrices":[[[[1,0]]],[[[1,0]]]]}"#).unwrap();
    let out = dir.path().join("m.json");
    assert_eq!(code(&opsys(&["member", "--s", p(&pauli), "--a", p(&inside), "--out", p(&out)])), 0);
    assert_eq!(json(&out)["result"]["verdict"], "feasible");
    assert_eq!(code(&opsys(&["member", "--s", p(&pauli), "--a", p(&outside), "--out", p(&out)])), 0);
    assert_eq!(json(&out)["result"]["verdict"], "infeasible");

    // h(c) = |c| on the disk: direction (0.6, 0.8) gives 1.
    let dirn = dir.path().join("b.json");
    std::fs::write(&dirn, r#"{"format":1,"dim":1,"d":2,"matrices":[[[[0.6,0]]],[[[0.8,0]]]]}"#).unwrap();
    assert_eq!(code(&opsys(&["support", "--s", p(&pauli), "--b", p(&dirn), "--out", p(&out)])), 0);
    let r = json(&out)["result"].clone();
    assert!((r["value"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!(r["lower"].as_f64().unwrap() <= r["upper"].as_f64().unwrap() + 1e-9);
}

#[test]
fn chain_and_extreme_on_the_universal_sample() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.json");
    assert_eq!(code(&opsys(&["construct", "--kind", "universal", "--q", "1/3", "--grid", "2", "--out", p(&s)])), 0);
    let out = dir.path().join("c.json");
    let o = opsys(&["chain", "--s", p(&s), "--seed", "2", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out)["result"].clone();
    assert_eq!(r["stop"], "no-dilation");
    assert!(r["final_level"].as_u64().unwrap() <= 3);

    // The standard pair as values is a boundary restriction.
    let v = dir.path().join("v.json");
    assert_eq!(code(&opsys(&["construct", "--q", "1/3", "--out", p(&v)])), 0);
    let o = opsys(&["extreme", "--s", p(&s), "--values", p(&v), "--directions", "8", "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    let r = json(&out)["result"].clone();
    assert_eq!(r["classification"], "boundary-restriction");
    assert!(r["coupling"].as_f64().unwrap() < 1e-6);
}

#[test]
fn butterfly_csv_is_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    assert_eq!(code(&opsys(&["butterfly", "--n-max", "5", "--out", p(&csv)])), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<(u64, u64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[4].parse().unwrap())
        })
        .collect();
    for &(k, n, c) in &rows {
        if k == 0 {
            continue;
        }
        let mirror = rows.iter().find(|r| r.0 == n - k && r.1 == n).unwrap();
        assert!((mirror.2 - c).abs() < 2e-6);
    }
}

#[test]
fn transpose_check_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let o = opsys(&["transpose-check", "--q", "1/3", "--grid", "4", "--samples", "20", "--seed", "5", "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    let doc = json(&out);
    assert_eq!(doc["manifest"]["seeds"][0], 5);
    assert!(doc["result"]["max_deviation"].as_f64().unwrap() < 1e-3);
}

#[test]
fn identical_runs_give_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        assert_eq!(code(&opsys(&["transpose-check", "--q", "2/5", "--grid", "3", "--samples", "10", "--seed", "9", "--out", p(out)])), 0);
    }
    assert_eq!(json(&a)["result"], json(&b)["result"]);
}

#[test]
fn selftest_quick_subset_and_fault_injection() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("st.json");
    let o = opsys(&["selftest", "--quick", "--only", "1,2,4,5", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&out);
    assert_eq!(doc["result"]["passed"], 4);
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.lines().filter(|l| l.starts_with("[PASS]")).count(), 4);

    let o = opsys(&["selftest", "--quick", "--only", "2,5,11", "--inject-sdp-tol", "1.0", "--out", p(&out)]);
    assert_eq!(code(&o), 1);
    let r = json(&out)["result"].clone();
    let passed: Vec<bool> = r["criteria"].as_array().unwrap().iter().map(|c| c["passed"].as_bool().unwrap()).collect();
    assert_eq!(passed, vec![true, false, false]);
}
