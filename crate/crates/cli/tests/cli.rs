use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slowdisp"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn num(v: &Value) -> f64 {
    v.as_str().unwrap().parse().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
    root_cfg: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root_cfg = write(dir.path(), "root.json", r#"{"word": "paper-root"}"#);
        Fixture { dir, root_cfg }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }
}

#[test]
fn jet_of_published_root_is_nearly_flat() {
    let f = Fixture::new();
    let (code, stdout, _) = run(&["jet", "--config", f.root_cfg.to_str().unwrap(), "--out", &f.s("jet.json"), "--compare-paper"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("||H||"));
    let doc = json(&f.path("jet.json"));
    let a = doc["a"].as_array().unwrap();
    assert_eq!(a.len(), 7);
    for c in &a[1..5] {
        assert!(num(c).abs() <= 1e-13);
    }
    assert_eq!(doc["precision_bits"], 256);
}

#[test]
fn jet_of_single_letter_and_equal_times() {
    let f = Fixture::new();
    let cfg = write(f.dir.path(), "one.json", r#"{"word": {"signs": [1], "durations": [1.0]}}"#);
    let (code, _, _) = run(&["jet", "--config", cfg.to_str().unwrap(), "--out", &f.s("one.json.out")]);
    assert_eq!(code, 0);
    let a0 = num(&json(&f.path("one.json.out"))["a"][0]);
    assert!((a0 - 1f64.cos()).abs() < 1e-15);

    let s = 0.7f64;
    let cfg = write(
        f.dir.path(),
        "eq.json",
        &format!(r#"{{"word": {{"signs": [1, -1, 1, -1], "durations": [{s}, {s}, {s}, {s}]}}, "precision_bits": 53}}"#),
    );
    let (code, _, _) = run(&["jet", "--config", cfg.to_str().unwrap(), "--out", &f.s("eq.out")]);
    assert_eq!(code, 0);
    let a2 = num(&json(&f.path("eq.out"))["a"][1]);
    let expect = 4.0 * ((2.0 * s).cos() - 1.0);
    assert!((a2 - expect).abs() < 1e-12, "{a2} vs {expect}");
}

#[test]
fn invalid_inputs_exit_2() {
    let f = Fixture::new();
    let bad = write(f.dir.path(), "bad.json", r#"{"word": "nope"}"#);
    assert_eq!(run(&["jet", "--config", bad.to_str().unwrap(), "--out", &f.s("x")]).0, 2);
    assert_eq!(run(&["jet", "--config", &f.s("missing.json"), "--out", &f.s("x")]).0, 2);
    assert_eq!(run(&["jet", "--precision-bits", "10", "--out", &f.s("x")]).0, 2);
    assert_eq!(run(&["certify", "--config", f.root_cfg.to_str().unwrap(), "--radius", "0.6", "--out", &f.s("c")]).0, 2);
    assert_eq!(run(&["decay", "--n-list", "10,20,30", "--out", &f.s("d.csv")]).0, 2);
    assert_eq!(run(&["decay", "--n-list", "10,20,30,25,40", "--out", &f.s("d.csv")]).0, 2);
    assert_eq!(run(&["bogus"]).0, 2);
}

#[test]
fn certify_published_root_and_non_root() {
    let f = Fixture::new();
    let (code, stdout, _) = run(&[
        "certify", "--config", f.root_cfg.to_str().unwrap(), "--radius", "1e-3", "--out", &f.s("cert.json"), "--compare-paper",
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("verdict true"));
    assert!(stdout.contains("normalized determinant"));
    let cert = json(&f.path("cert.json"));
    assert_eq!(cert["verdict"], true);
    assert_eq!(cert["strategy"]["kind"], "analytic");

    let root = write(f.dir.path(), "far.json", r#"{"point": ["1.1", "0.6", "2.0", "0.9"]}"#);
    let (code, _, _) = run(&[
        "certify", "--config", f.root_cfg.to_str().unwrap(), "--root", root.to_str().unwrap(), "--radius", "1e-3", "--out", &f.s("far_cert.json"),
    ]);
    assert_eq!(code, 1);
    let cert = json(&f.path("far_cert.json"));
    assert_eq!(cert["conditions"]["product_condition"], false);
    assert_eq!(cert["verdict"], false);
}

#[test]
fn solve_from_published_root_and_reproducibility() {
    let f = Fixture::new();
    let (code, _, _) = run(&["solve", "--init", "paper-root", "--out", &f.s("init.json")]);
    assert_eq!(code, 0);
    let doc = json(&f.path("init.json"));
    assert!(doc["stage_log"][0]["iterations"].as_u64().unwrap() <= 4);
    assert_eq!(doc["orbit"].as_array().unwrap().len(), 8);

    let cfg = write(f.dir.path(), "seeded.json", r#"{"word": "paper-root", "seed": 3, "thresholds": {"samples": 300}}"#);
    let a = f.s("a.json");
    let b = f.s("b.json");
    let code_a = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", &a]).0;
    let code_b = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", &b]).0;
    assert_eq!(code_a, code_b);
    assert!(code_a == 0 || code_a == 1);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(json(Path::new(&a))["seed"], 3);
}

#[test]
fn dispersion_outputs() {
    let f = Fixture::new();
    let (code, _, _) = run(&["solve", "--init", "paper-root", "--out", &f.s("root.out.json")]);
    assert_eq!(code, 0);
    let (code, _, _) = run(&[
        "dispersion", "--root", &f.s("root.out.json"), "--xi-max", "0.2", "--grid", "21", "--out", &f.s("disp.csv"),
    ]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(f.path("disp.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("xi,theta,F"));
    assert_eq!(lines.count(), 21);
    let side = json(&f.path("disp.json"));
    assert_eq!(side["k"], 10);
    let e = num(&side["flatness_exponent"]);
    assert!((9.5..=10.5).contains(&e));

    let cfg = write(f.dir.path(), "one.json", r#"{"word": {"signs": [1], "durations": ["0.8"]}}"#);
    let (code, _, _) = run(&["dispersion", "--config", cfg.to_str().unwrap(), "--grid", "5", "--out", &f.s("one.csv")]);
    assert_eq!(code, 0);
    let side = json(&f.path("one.json"));
    assert_eq!(side["k"], 2);
    assert!((num(&side["theta_k0"]) - 0.8).abs() < 1e-60);
}

#[test]
fn dispersion_branch_degeneracy_exits_3() {
    let f = Fixture::new();
    // duration pi: F(0) = -1
    let cfg = write(
        f.dir.path(),
        "deg.json",
        r#"{"word": {"signs": [1], "durations": ["3.14159265358979323846264338327950288419716939937510582097494459"]}}"#,
    );
    let (code, _, err) = run(&["dispersion", "--config", cfg.to_str().unwrap(), "--out", &f.s("deg.csv")]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn decay_outputs_and_fit() {
    let f = Fixture::new();
    let cfg = write(f.dir.path(), "one.json", r#"{"word": {"signs": [1], "durations": [1.0]}, "precision_bits": 53}"#);
    let (code, _, _) = run(&[
        "decay", "--config", cfg.to_str().unwrap(), "--n-list", "1000,2000,4000,8000,16000", "--threads", "2", "--out", &f.s("decay.csv"),
    ]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(f.path("decay.csv")).unwrap();
    assert!(csv.starts_with("n,amplitude_plus,amplitude_minus,prediction\n"));
    assert_eq!(csv.lines().count(), 6);
    let fit = json(&f.path("decay.json"));
    let slope = num(&fit["slope"]);
    assert!((slope + 0.5).abs() < 0.02, "{slope}");
    assert!(num(&fit["r2"]) > 0.999);
}
