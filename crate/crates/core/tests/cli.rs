use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_netlist-fi");

fn demos() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN).args(["demos", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir
}

fn run(dir: &Path, name: &str, extra: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(["run", "--lib", "demo_cells.lib", "--netlist", &format!("{name}.v"), "--spec", &format!("{name}.json")])
        .args(extra)
        .output()
        .unwrap()
}

#[test]
fn demos_writes_every_file() {
    let dir = demos();
    for f in ["demo_cells.lib", "sp2v.v", "sp2v.json", "tmr_counter.v", "sparse_fsm.json", "two_gate.v", "multiplier.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
}

#[test]
fn exit_codes() {
    let dir = demos();
    let secure = run(dir.path(), "sp2v", &["-k", "1"]);
    assert_eq!(secure.status.code(), Some(0));
    let table = String::from_utf8(secure.stdout).unwrap();
    assert!(table.contains("Effective %"), "{table}");
    assert!(table.contains("0 / 27"), "{table}");

    let broken = run(dir.path(), "two_gate", &[]);
    assert_eq!(broken.status.code(), Some(2));

    let missing = Command::new(BIN)
        .current_dir(dir.path())
        .args(["run", "--lib", "demo_cells.lib", "--netlist", "nope.v", "--spec", "sp2v.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.v"));
}

#[test]
fn json_report_and_max_faults() {
    let dir = demos();
    let out = run(dir.path(), "sp2v", &["-k", "3", "--max-faults", "100", "--format", "json", "--report", "r.json"]);
    assert!(matches!(out.status.code(), Some(0 | 2)));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    let model = &report["models"][0];
    assert_eq!(model["total"], 100);
    assert!(model["execution_seconds"].is_number());
    let stdout: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stdout["models"][0]["total"], 100);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn external_solver_matches_internal() {
    let dir = demos();
    let internal = run(dir.path(), "two_gate", &["--report", "a.json"]);
    let solver = format!("external:{BIN}");
    let external = run(dir.path(), "two_gate", &["--solver", &solver, "--solver-arg", "solve-dimacs", "--report", "b.json"]);
    assert_eq!(internal.status.code(), Some(2));
    assert_eq!(external.status.code(), Some(2), "{}", String::from_utf8_lossy(&external.stderr));
    let strip = |f: &str| -> serde_json::Value {
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(f)).unwrap()).unwrap();
        for m in v["models"].as_array_mut().unwrap() {
            m.as_object_mut().unwrap().remove("execution_seconds");
        }
        v
    };
    let (a, b) = (strip("a.json"), strip("b.json"));
    assert_eq!(a["models"][0]["effective"], b["models"][0]["effective"]);
    assert_eq!(a["models"][0]["effective_faults"].as_array().unwrap().len(), b["models"][0]["effective_faults"].as_array().unwrap().len());
}

#[test]
fn dump_target_and_differential() {
    let dir = demos();
    let out = run(dir.path(), "tmr_counter", &["--dump-target", "target.json", "--dump-differential", "0"]);
    assert!(out.status.success() || out.status.code() == Some(2));
    for f in ["target.counter_detect.json", "target.counter_detect.dot", "target.counter_effect.json", "differential-counter_effect-0.dot"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let t: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("target.counter_detect.json")).unwrap()).unwrap();
    assert!(t["circuit_ge"].as_f64().unwrap() > 0.0);
    assert!(!t["alerts"].as_array().unwrap().is_empty());
}

#[test]
fn solve_dimacs_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let sat = dir.path().join("sat.cnf");
    std::fs::write(&sat, "p cnf 2 2\n1 2 0\n-1 0\n").unwrap();
    let out = Command::new(BIN).arg("solve-dimacs").arg(&sat).output().unwrap();
    assert_eq!(out.status.code(), Some(10));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "s SATISFIABLE\nv -1 2 0\n");

    let unsat = dir.path().join("unsat.cnf");
    std::fs::write(&unsat, "p cnf 1 2\n1 0\n-1 0\n").unwrap();
    let out = Command::new(BIN).arg("solve-dimacs").arg(&unsat).output().unwrap();
    assert_eq!(out.status.code(), Some(20));
}
