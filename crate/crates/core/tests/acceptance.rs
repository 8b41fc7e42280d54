//! Acceptance gate: one PASS/FAIL line per criterion.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use netlist_fi::campaign::{run_model, CampaignOptions, ModelReport, PreparedModel};
use netlist_fi::demos::{multiplier_demo, sp2v_demo, sparse_fsm_demo, tmr_counter_demo, two_gate_demo, Demo};
use netlist_fi::diff::{brute_force_verdict, evaluate, inject_faults, DiffOp};
use netlist_fi::expr::BoolExpr;
use netlist_fi::fault_spec::parse_fault_spec;
use netlist_fi::graph::NodeKind;
use netlist_fi::sat::{tseitin, Cdcl};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const C1_DIFFERENTIALS: usize = 600;
const C1_MAX_GATES: usize = 40;
const C1_MAX_INPUTS: usize = 16;
const C3_BUDGET: Duration = Duration::from_secs(30);
const C5_DIFFERENTIALS: usize = 1000;
const C5_RATIO: usize = 4;
const C7_BUDGET: Duration = Duration::from_secs(120);

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn campaign(model: &PreparedModel, jobs: usize) -> ModelReport {
    run_model(model, &CampaignOptions { jobs, ..Default::default() }).expect("campaign runs")
}

/// Every model of a demo, prepared at `k`.
fn models(demo: &Demo, k: usize) -> Vec<PreparedModel> {
    let d = design(&demo.netlist);
    parse_fault_spec(&demo.spec)
        .unwrap()
        .iter()
        .map(|m| netlist_fi::campaign::prepare_model(&d, m, Some(k)).unwrap())
        .collect()
}

fn c1_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let (mut done, mut disagreements, mut effective) = (0, 0, 0);
    let mut per_mode = [0usize; 4];
    while done < C1_DIFFERENTIALS {
        let mode = MODES[done % 4];
        let case = random_case(&mut rng, C1_MAX_GATES, C1_MAX_INPUTS, mode);
        let d = design(&case.netlist);
        let Ok(model) = netlist_fi::campaign::prepare_model(&d, &parse_fault_spec(&case.spec).unwrap()[0], Some(1)) else {
            continue;
        };
        if model.target.free_inputs.len() > C1_MAX_INPUTS || model.target.mode != mode {
            continue;
        }
        let config = random_config(&mut rng, &model, 3);
        let faulty = inject_faults(&model.target, &config).unwrap();
        let diff = model.differential(&config).unwrap();
        let sat = evaluate(&diff, &Cdcl { seed: done as u64, conflict_limit: None }).unwrap();
        let bf = brute_force_verdict(&diff, 20).unwrap();
        let independent = oracle(&model.target, &faulty);
        let bf_witness = bf.witness.as_ref().map(|w| w.iter().map(|x| x.1).collect::<Vec<_>>());
        if sat.is_effective() != bf.is_effective() || bf_witness != independent {
            disagreements += 1;
        }
        effective += sat.is_effective() as usize;
        per_mode[done % 4] += 1;
        done += 1;
    }
    check(
        disagreements == 0 && effective > 0 && effective < done,
        format!(
            "{disagreements} disagreements over {done} differentials (FE/FD/FS/FS+alert = {per_mode:?}, {effective} effective); tolerance 0"
        ),
    )
}

fn c2_split_register() -> Outcome {
    let d = design(include_str!("data/split_register.v"));
    let m = prepare(
        &d,
        r#"{"fimodels": {"split_register": {
            "stages": {"s": {"inputs": ["U3"], "outputs": ["U3", "Out1"]}},
            "input_values": {"U3": 1}, "output_values": {"U3": 0, "Out1": 0}}}}"#,
        None,
    );
    let g = &m.target.graph;
    let names: BTreeSet<&str> = g.nodes.iter().map(|n| n.name.as_str()).collect();
    let expect: BTreeSet<&str> = ["U3.Q", "U1", "U4", "U3.D", "U6", "U5", "Out1", "aux:U1/B"].into();
    let kind = |n: &str| g.node_id(n).map(|v| g.node(v).kind.clone());
    let u6_pass = matches!(kind("U6"), Some(NodeKind::PassThrough { .. }));
    let split = kind("U3.Q") == Some(NodeKind::AuxInput) && kind("U3.D") == Some(NodeKind::OutputPort);
    let aux_on_u1 =
        g.edges.iter().any(|e| g.name(e.src) == "aux:U1/B" && g.name(e.dst) == "U1") && m.target.free_inputs.len() == 1;
    let excluded = ["U2", "In1", "In2", "In3"].iter().all(|n| !names.contains(n));
    check(
        names == expect && u6_pass && split && aux_on_u1 && excluded,
        format!("nodes {names:?}; U6 pass-through {u6_pass}; U3 split {split}; aux on U1 {aux_on_u1}"),
    )
}

fn c3_thresholds() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    let mut run = |demo: &Demo, model: usize, k: usize, want_effective: bool| {
        let m = &models(demo, k)[model];
        let start = Instant::now();
        let r = campaign(m, 8);
        let took = start.elapsed();
        let pass = (r.effective > 0) == want_effective && r.inconclusive_faults.is_empty() && took < C3_BUDGET;
        ok &= pass;
        lines.push(format!("{} {} k={k}: {}/{} in {:.1}s", demo.name, r.setting, r.effective, r.total, took.as_secs_f64()));
    };
    let (sp2v, fsm, tmr) = (sp2v_demo(), sparse_fsm_demo(), tmr_counter_demo());
    for k in 1..=3 {
        run(&sp2v, 0, k, k == 3);
        run(&fsm, 0, k, k == 3);
    }
    run(&tmr, 0, 1, false);
    check(ok, format!("{}; budget {}s each", lines.join(", "), C3_BUDGET.as_secs()))
}

fn c4_no_false_negatives() -> Outcome {
    let (mut checked, mut oracle_effective, mut missed) = (0u64, 0u64, 0u64);
    for demo in [sp2v_demo(), tmr_counter_demo(), sparse_fsm_demo(), two_gate_demo()] {
        for k in 1..=2 {
            for m in models(&demo, k) {
                let r = campaign(&m, 8);
                let reported: HashSet<u64> = r.effective_faults.iter().map(|f| f.index).collect();
                for (i, c) in m.configs().enumerate() {
                    checked += 1;
                    let f = inject_faults(&m.target, &c).unwrap();
                    if oracle(&m.target, &f).is_some() {
                        oracle_effective += 1;
                        missed += !reported.contains(&(i as u64)) as u64;
                    }
                }
            }
        }
    }
    check(
        missed == 0 && oracle_effective > 0,
        format!("{missed} missed of {oracle_effective} oracle-effective configurations ({checked} checked, k <= 2); tolerance 0"),
    )
}

/// Operators of the differential: n-ary AND/OR count n - 1 (at least 1),
/// XOR 1, NOT 0; a node whose expression has no operator (an alias or a
/// constant) counts 1, and the root assertion counts 1.
fn operator_count(nodes: &[DiffOp]) -> usize {
    fn ops(e: &BoolExpr<usize>) -> usize {
        match e {
            BoolExpr::Var(_) | BoolExpr::Const(_) => 0,
            BoolExpr::Not(x) => ops(x),
            BoolExpr::And(xs) | BoolExpr::Or(xs) => (xs.len().max(2) - 1) + xs.iter().map(ops).sum::<usize>(),
            BoolExpr::Xor(a, b) => 1 + ops(a) + ops(b),
        }
    }
    1 + nodes
        .iter()
        .map(|op| match op {
            DiffOp::Input => 0,
            DiffOp::Const(_) => 1,
            DiffOp::Expr(e) => ops(e).max(1),
        })
        .sum::<usize>()
}

fn c5_tseitin_linearity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let (mut done, mut worst, mut violations) = (0, 0.0f64, 0);
    while done < C5_DIFFERENTIALS {
        let case = random_case(&mut rng, C1_MAX_GATES, C1_MAX_INPUTS, MODES[done % 4]);
        let d = design(&case.netlist);
        let Ok(model) = netlist_fi::campaign::prepare_model(&d, &parse_fault_spec(&case.spec).unwrap()[0], Some(1)) else {
            continue;
        };
        let diff = model.differential(&random_config(&mut rng, &model, 3)).unwrap();
        let cnf = tseitin(&diff);
        let ops = operator_count(&diff.nodes.iter().map(|n| n.op.clone()).collect::<Vec<_>>());
        let ratio = cnf.clauses.len() as f64 / ops as f64;
        worst = worst.max(ratio);
        violations += (cnf.clauses.len() > C5_RATIO * ops) as usize;
        done += 1;
    }
    check(
        violations == 0,
        format!("{violations} of {done} differentials above {C5_RATIO}x operators; worst ratio {worst:.2}"),
    )
}

fn strip_timing(json: &str) -> String {
    json.lines().filter(|l| !l.contains("\"execution_seconds\"")).collect::<Vec<_>>().join("\n")
}

fn c6_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_netlist-fi");
    let status = std::process::Command::new(bin).args(["demos", "--out"]).arg(dir.path()).output().unwrap();
    assert!(status.status.success());
    let mut compared = Vec::new();
    let mut ok = true;
    for (name, k) in [("sp2v", "3"), ("tmr_counter", "1"), ("sparse_fsm", "3"), ("two_gate", "1")] {
        let mut reports = Vec::new();
        for jobs in ["1", "8"] {
            let out = dir.path().join(format!("{name}-{jobs}.json"));
            let st = std::process::Command::new(bin)
                .current_dir(dir.path())
                .args(["run", "--lib", "demo_cells.lib", "--netlist", &format!("{name}.v"), "--spec", &format!("{name}.json")])
                .args(["-k", k, "--jobs", jobs, "--format", "json", "--report"])
                .arg(&out)
                .output()
                .unwrap();
            ok &= matches!(st.status.code(), Some(0 | 2));
            reports.push(strip_timing(&std::fs::read_to_string(&out).unwrap_or_default()));
        }
        let same = !reports[0].is_empty() && reports[0] == reports[1];
        ok &= same;
        compared.push(format!("{name} k={k} {}", if same { "identical" } else { "DIFFERENT" }));
    }
    // library path with a larger stream
    let m = &models(&multiplier_demo(), 1)[0];
    let one = run_model(m, &CampaignOptions { jobs: 1, max_faults: Some(400), ..Default::default() }).unwrap();
    let eight = run_model(m, &CampaignOptions { jobs: 8, max_faults: Some(400), ..Default::default() }).unwrap();
    let same = one.effective_faults == eight.effective_faults && one.total == eight.total;
    ok &= same;
    compared.push(format!("multiplier first 400 {}", if same { "identical" } else { "DIFFERENT" }));
    check(ok, format!("jobs 1 vs 8, timing excluded: {}", compared.join(", ")))
}

fn c7_performance() -> Outcome {
    let m = &models(&multiplier_demo(), 1)[0];
    let gates = (0..m.target.graph.len()).filter(|&v| m.target.graph.is_logic(v)).count();
    let start = Instant::now();
    let r = campaign(m, 8);
    let took = start.elapsed();
    check(
        took < C7_BUDGET && r.total as u128 == m.total_configs() && r.inconclusive_faults.is_empty(),
        format!(
            "{gates}-gate multiplier, k=1, {} configurations ({} effective) in {:.1}s; budget {}s",
            r.total,
            r.effective,
            took.as_secs_f64(),
            C7_BUDGET.as_secs()
        ),
    )
}

fn c8_witness_replay() -> Outcome {
    let (mut replayed, mut failed) = (0, 0);
    let mut runs = Vec::new();
    for (demo, k) in [
        (sp2v_demo(), 3),
        (tmr_counter_demo(), 1),
        (tmr_counter_demo(), 2),
        (sparse_fsm_demo(), 3),
        (two_gate_demo(), 1),
        (multiplier_demo(), 1),
    ] {
        for m in models(&demo, k) {
            let r = campaign(&m, 8);
            for rec in &r.effective_faults {
                let faulty = inject_faults(&m.target, &record_config(&m, rec)).unwrap();
                replayed += 1;
                failed += !rec.witness.as_ref().is_some_and(|w| replay(&m, &faulty, w)) as usize;
            }
            runs.push(format!("{} k={k}", r.name));
        }
    }
    check(
        failed == 0 && replayed > 0,
        format!("{failed} of {replayed} effective records failed replay ({} campaigns); tolerance 0", runs.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, fn() -> Outcome); 8] = [
        ("C1", "oracle equivalence", c1_oracle_equivalence),
        ("C2", "register split structure", c2_split_register),
        ("C3", "encoding thresholds", c3_thresholds),
        ("C4", "no false negatives", c4_no_false_negatives),
        ("C5", "Tseitin linearity", c5_tseitin_linearity),
        ("C6", "determinism", c6_determinism),
        ("C7", "performance budget", c7_performance),
        ("C8", "witness replay", c8_witness_replay),
    ];
    let mut failures = 0;
    for (id, title, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("acceptance {id} {title}: PASS ({detail}) [{secs:.1}s]"),
            Err(detail) => {
                failures += 1;
                println!("acceptance {id} {title}: FAIL ({detail}) [{secs:.1}s]");
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
