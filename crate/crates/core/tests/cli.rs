use mls_core::cli::{run, EXIT_ERROR, EXIT_PASS, EXIT_VIOLATION};
use mls_core::lscore::LogSignature;
use serde_json::Value;

fn mls(args: &[&str]) -> (i32, String) {
    let out = run(std::iter::once("mls").chain(args.iter().copied()));
    (out.code, out.stdout)
}

fn report(stdout: &str) -> Value {
    let end = stdout.rfind("\n}").expect("json report") + 2;
    serde_json::from_str(&stdout[..end]).unwrap()
}

#[test]
fn counts_minus_3_2() {
    let (code, out) = mls(&["counts", "--kind", "minus", "--q", "3", "--m", "2"]);
    assert_eq!(code, EXIT_PASS);
    assert_eq!(out.lines().last(), Some("10"));
    assert_eq!(report(&out)["result"]["enumerated"], 10);
}

#[test]
fn construct_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ls.json");
    let p = path.to_str().unwrap();
    let (code, _) = mls(&["construct", "--family", "O-", "--q", "3", "--m", "2", "--out", p]);
    assert_eq!(code, EXIT_PASS);
    let (code, out) = mls(&["verify", p, "--mode", "exhaustive"]);
    assert_eq!(code, EXIT_PASS);
    let r = report(&out);
    assert_eq!(r["result"]["length"], 21);
    assert_eq!(r["result"]["mls"], true);
    assert!(out.contains("MLS confirmed"));
}

#[test]
fn tampered_file_reports_collision() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ls.json");
    let p = path.to_str().unwrap();
    mls(&["construct", "--family", "O-", "--q", "3", "--m", "2", "--out", p]);
    let mut ls = LogSignature::load(&path).unwrap();
    let last = ls.blocks.len() - 1;
    ls.blocks[last][1] = ls.blocks[last][0].clone();
    ls.save(&path).unwrap();
    let (code, out) = mls(&["verify", p, "--mode", "exhaustive"]);
    assert_eq!(code, EXIT_VIOLATION);
    let r = report(&out);
    assert!(!r["result"]["collisions"].as_array().unwrap().is_empty());
    assert!(out.contains("collision"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(mls(&["counts", "--kind", "minus", "--q", "3", "--m", "2", "--bogus"]).0, EXIT_ERROR);
    assert_eq!(mls(&["construct", "--family", "GL", "--q", "3", "--n", "2"]).0, EXIT_ERROR);
    assert_eq!(mls(&["counts", "--kind", "minus", "--q", "4", "--m", "2"]).0, EXIT_ERROR);
    assert_eq!(mls(&["verify", "/nonexistent/ls.json"]).0, EXIT_ERROR);
}

#[test]
fn reports_are_reproducible() {
    let args = ["construct", "--family", "SO+", "--q", "3", "--m", "2", "--no-timing"];
    let (_, a) = mls(&args);
    let (_, b) = mls(&args);
    assert_eq!(a, b);
    let r = report(&a);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["seed"], 42);
    assert_eq!(r["budgets"]["budget"], 1_000_000);
    assert_eq!(r["config"]["command"], "construct");
    assert_eq!(r["config"]["group"]["family"], "SO+");
    assert!(r["timing_ms"].is_null());
    let (_, timed) = mls(&args[..7]);
    assert!(report(&timed)["timing_ms"].is_u64());
}

#[test]
fn sampled_verify_and_factor() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ls.json");
    let p = path.to_str().unwrap();
    mls(&["construct", "--family", "O+", "--q", "3", "--m", "3", "--out", p, "--samples", "200"]);
    let (code, out) = mls(&["verify", p, "--mode", "sampled", "--samples", "300"]);
    assert_eq!(code, EXIT_PASS, "{out}");
    assert_eq!(report(&out)["result"]["roundtrip_failures"], 0);
    let (code, out) = mls(&["factor", "--family", "O+", "--q", "3", "--m", "3", "--rank", "12345"]);
    assert_eq!(code, EXIT_PASS);
    assert_eq!(report(&out)["result"]["rank"], 12345);
    let (code, _) = mls(&["factor", "--family", "Omega-", "--q", "3", "--n", "6", "--samples", "200"]);
    assert_eq!(code, EXIT_PASS);
}

#[test]
fn remaining_commands() {
    let (code, out) = mls(&["spread-check", "--kind", "plus", "--q", "3", "--m", "2"]);
    assert_eq!(code, EXIT_PASS, "{out}");
    let (code, out) = mls(&["parabolic", "--kind", "minus", "--q", "3", "--m", "2"]);
    assert_eq!(code, EXIT_PASS, "{out}");
    assert_eq!(report(&out)["result"]["stabilizer_order"], 144);
    let (code, out) = mls(&["project", "--family", "PSO-", "--q", "3", "--m", "2"]);
    assert_eq!(code, EXIT_PASS, "{out}");
    assert_eq!(report(&out)["result"]["verification"]["distinct"], 360);
    let (code, out) = mls(&["omega-check", "--kind", "odd", "--q", "3", "--m", "1"]);
    assert_eq!(code, EXIT_PASS);
    assert_eq!(report(&out)["result"]["audit"]["oracle_order"], 12);
}

#[test]
fn pgm_key_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("key.json");
    let p = path.to_str().unwrap();
    let (code, a) = mls(&["pgm-demo", "--family", "O-", "--q", "3", "--n", "2", "--seed", "9", "--out", p, "--no-timing"]);
    assert_eq!(code, EXIT_PASS, "{a}");
    let (code, b) = mls(&["pgm-demo", "--family", "O-", "--q", "3", "--n", "2", "--seed", "9", "--in", p, "--no-timing"]);
    assert_eq!(code, EXIT_PASS);
    assert_eq!(report(&a)["result"]["sample"], report(&b)["result"]["sample"]);
}
