#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use netlist_fi::campaign::{load_design, prepare_model, Design, FaultRecord, PreparedModel};
use netlist_fi::demos::demo_library;
use netlist_fi::diff::FaultConfig;
use netlist_fi::fault_spec::{parse_fault_spec, EvaluationMode, Replacement};
use netlist_fi::graph::{NodeId, Values};
use netlist_fi::target::{CheckedSignal, TargetGraph};
use rand::seq::IndexedRandom;
use rand::{Rng, RngCore};

pub fn design(netlist: &str) -> Design {
    load_design(&demo_library(), netlist, &BTreeMap::new(), None).expect("demo netlist loads")
}

pub fn prepare(design: &Design, spec: &str, k: Option<usize>) -> PreparedModel {
    let model = parse_fault_spec(spec).expect("spec parses").remove(0);
    prepare_model(design, &model, k).expect("model prepares")
}

/// Values of the faulty and fault-free copies under 64 free-input
/// assignments, computed directly with the graph evaluator.
fn evaluate_pair(t: &TargetGraph, f: &TargetGraph, free: &[u64]) -> (Values, Values) {
    let mut defined: HashMap<(NodeId, String), bool> = HashMap::new();
    for (sig, bits) in &t.defined_inputs {
        for ((n, p), b) in sig.bits.iter().zip(bits) {
            defined.insert((*n, p.clone()), *b);
        }
    }
    let position: HashMap<NodeId, usize> = t.free_inputs.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let source = |v: NodeId, pin: &str| -> Option<u64> {
        if let Some(b) = defined.get(&(v, pin.to_string())) {
            return Some(if *b { !0 } else { 0 });
        }
        if pin.is_empty() {
            return position.get(&v).map(|&i| free[i]);
        }
        None
    };
    let nf = t.graph.evaluate(&source).expect("reference evaluates");
    let fv = f.graph.evaluate(&source).expect("faulty evaluates");
    (nf, fv)
}

fn word(b: bool) -> u64 {
    if b {
        !0
    } else {
        0
    }
}

/// Lanes on which every bit of `list` equals `want`.
fn equal(t: &TargetGraph, vals: &Values, list: &[CheckedSignal], want: &dyn Fn(&CheckedSignal) -> Vec<bool>) -> u64 {
    let mut acc = !0u64;
    for s in list {
        for ((n, p), e) in s.signal.bits.iter().zip(want(s)) {
            acc &= !(vals.get(&t.graph, *n, p).unwrap() ^ word(e));
        }
    }
    acc
}

/// Lanes on which the mode's predicate holds.
pub fn predicate_lanes(t: &TargetGraph, f: &TargetGraph, free: &[u64]) -> u64 {
    let (nf, fv) = evaluate_pair(t, f, free);
    let expected = |s: &CheckedSignal| s.expected.clone();
    let target = |s: &CheckedSignal| s.fault_target.clone().unwrap();
    let ok_nf = equal(t, &nf, &t.outputs, &expected);
    let ok_f = match t.mode {
        EvaluationMode::Unspecific | EvaluationMode::UnspecificWithAlerts => !equal(t, &fv, &t.outputs, &expected),
        EvaluationMode::Specific | EvaluationMode::SpecificWithAlerts => equal(t, &fv, &t.outputs, &target),
    };
    let alerts = if t.mode.has_alerts() {
        equal(t, &nf, &t.alerts, &expected) & equal(t, &fv, &t.alerts, &expected)
    } else {
        !0
    };
    ok_nf & ok_f & alerts
}

/// Independent decision by enumerating every free-input assignment:
/// the first witness in lexicographic order (first input most significant).
pub fn oracle(t: &TargetGraph, f: &TargetGraph) -> Option<Vec<bool>> {
    let n = t.free_inputs.len();
    assert!(n <= 20, "oracle bound");
    let total = 1u64 << n;
    let mut base = 0;
    while base < total {
        let lanes = (total - base).min(64);
        let free: Vec<u64> = (0..n)
            .map(|i| (0..lanes).fold(0u64, |w, l| w | (((base + l) >> (n - 1 - i)) & 1) << l))
            .collect();
        let mask = if lanes == 64 { !0 } else { (1u64 << lanes) - 1 };
        let hits = predicate_lanes(t, f, &free) & mask;
        if hits != 0 {
            let a = base + hits.trailing_zeros() as u64;
            return Some((0..n).map(|i| (a >> (n - 1 - i)) & 1 == 1).collect());
        }
        base += 64;
    }
    None
}

/// Rebuild the configuration of a report record.
pub fn record_config(model: &PreparedModel, r: &FaultRecord) -> FaultConfig {
    let g = &model.target.graph;
    FaultConfig {
        faults: r
            .faults
            .iter()
            .map(|f| {
                let rep = match f.replacement.as_str() {
                    "0" => Replacement::Const(false),
                    "1" => Replacement::Const(true),
                    c => Replacement::Cell(c.to_string()),
                };
                (g.node_id(&f.location).expect("location exists"), rep)
            })
            .collect(),
    }
}

/// Replay a witness through the evaluator: true when the predicate holds.
pub fn replay(model: &PreparedModel, faulty: &TargetGraph, witness: &[(String, bool)]) -> bool {
    let t = &model.target;
    let by_name: HashMap<&str, bool> = witness.iter().map(|(n, b)| (n.as_str(), *b)).collect();
    let free: Vec<u64> = t.free_inputs.iter().map(|&v| word(by_name[t.graph.name(v)])).collect();
    predicate_lanes(t, faulty, &free) & 1 == 1
}

const GATES: [(&str, &[&str], &str); 9] = [
    ("INV_X1", &["A"], "ZN"),
    ("BUF_X1", &["A"], "Z"),
    ("NAND2_X1", &["A1", "A2"], "ZN"),
    ("NOR2_X1", &["A1", "A2"], "ZN"),
    ("AND2_X1", &["A1", "A2"], "ZN"),
    ("OR2_X1", &["A1", "A2"], "ZN"),
    ("XOR2_X1", &["A", "B"], "Z"),
    ("XNOR2_X1", &["A", "B"], "ZN"),
    ("AOI21_X1", &["A1", "B1", "B2"], "ZN"),
];

pub struct RandomCase {
    pub netlist: String,
    pub spec: String,
    pub mode: EvaluationMode,
}

/// Random netlist over the demo library with a specification in `mode`.
/// Expected values come from a random evaluation so the reference side is
/// satisfiable.
pub fn random_case(rng: &mut impl RngCore, max_gates: usize, max_inputs: usize, mode: EvaluationMode) -> RandomCase {
    let n_in = rng.random_range(2..=max_inputs);
    let n_gates = rng.random_range(3..=max_gates);
    let mut signals: Vec<String> = (0..n_in).map(|i| format!("x{i}")).collect();
    let mut body = String::new();
    for g in 0..n_gates {
        let (cell, ins, out) = GATES.choose(rng).unwrap();
        let conns: Vec<String> = ins
            .iter()
            .map(|p| {
                // bias towards recent signals for depth
                let lo = signals.len().saturating_sub(8);
                let s = if rng.random_bool(0.7) { &signals[rng.random_range(lo..signals.len())] } else { signals.choose(rng).unwrap() };
                format!(".{p}({s})")
            })
            .collect();
        let _ = writeln!(body, "  {cell} g{g} ({}, .{out}(w{g}));", conns.join(", "));
        signals.push(format!("w{g}"));
    }
    let wires: Vec<String> = (0..n_gates).map(|g| format!("w{g}")).collect();
    let n_out = rng.random_range(1..=3.min(n_gates));
    let alerts = mode.has_alerts();
    let n_alert = if alerts { rng.random_range(1..=2.min(n_gates)) } else { 0 };
    let mut picks: Vec<usize> = (0..n_gates).collect();
    let mut chosen = Vec::new();
    for _ in 0..n_out + n_alert {
        // later gates are deeper; prefer them
        let i = if rng.random_bool(0.6) { picks.len() - 1 - rng.random_range(0..picks.len().min(4)) } else { rng.random_range(0..picks.len()) };
        chosen.push(picks.remove(i));
        if picks.is_empty() {
            break;
        }
    }
    let outs: Vec<usize> = chosen.iter().copied().take(n_out).collect();
    let alrts: Vec<usize> = chosen.iter().copied().skip(n_out).collect();
    let mut ports: Vec<String> = (0..n_in).map(|i| format!("x{i}")).collect();
    ports.extend((0..outs.len()).map(|i| format!("y{i}")));
    ports.extend((0..alrts.len()).map(|i| format!("e{i}")));
    let mut netlist = format!("module rnd ({});\n", ports.join(", "));
    let _ = writeln!(netlist, "  input {};", (0..n_in).map(|i| format!("x{i}")).collect::<Vec<_>>().join(", "));
    for (i, &o) in outs.iter().enumerate() {
        let _ = writeln!(netlist, "  output y{i};\n  assign y{i} = w{o};");
    }
    for (i, &o) in alrts.iter().enumerate() {
        let _ = writeln!(netlist, "  output e{i};\n  assign e{i} = w{o};");
    }
    let _ = writeln!(netlist, "  wire {};", wires.join(", "));
    netlist.push_str(&body);
    netlist.push_str("endmodule\n");

    // reference evaluation at one random point
    let d = design(&netlist);
    let g = &d.graph;
    let assignment: Vec<bool> = (0..n_in).map(|_| rng.random_bool(0.5)).collect();
    let vals = g
        .evaluate(&|v, _| {
            let i: usize = g.name(v).strip_prefix('x')?.parse().ok()?;
            Some(word(assignment[i]))
        })
        .unwrap();
    let port_value = |name: &str| vals.get(g, g.node_id(name).unwrap(), "o").unwrap() & 1 == 1;

    let mut input_values = Vec::new();
    for (i, b) in assignment.iter().enumerate() {
        if rng.random_bool(0.3) {
            input_values.push(format!("\"x{i}\": {}", *b as u8));
        }
    }
    let y_bits: Vec<bool> = (0..outs.len()).map(|i| port_value(&format!("y{i}"))).collect();
    let values = |bits: &[bool], prefix: &str| -> String {
        bits.iter().enumerate().map(|(i, b)| format!("\"{prefix}{i}\": {}", *b as u8)).collect::<Vec<_>>().join(", ")
    };
    let mut fields = vec![
        format!(
            "\"stages\": {{\"s\": {{\"inputs\": [{}], \"outputs\": [{}]}}}}",
            (0..n_in).map(|i| format!("\"x{i}\"")).collect::<Vec<_>>().join(", "),
            (0..outs.len()).map(|i| format!("\"y{i}\"")).collect::<Vec<_>>().join(", ")
        ),
        format!("\"input_values\": {{{}}}", input_values.join(", ")),
        format!("\"output_values\": {{{}}}", values(&y_bits, "y")),
    ];
    if mode.is_specific() {
        let ef: Vec<bool> = y_bits.iter().map(|b| if rng.random_bool(0.5) { !b } else { *b }).collect();
        fields.push(format!("\"output_fault_values\": {{{}}}", values(&ef, "y")));
    }
    if alerts {
        let ea: Vec<bool> = (0..alrts.len())
            .map(|i| if rng.random_bool(0.8) { port_value(&format!("e{i}")) } else { rng.random_bool(0.5) })
            .collect();
        fields.push(format!("\"alert_values\": {{{}}}", values(&ea, "e")));
    }
    let spec = format!("{{\"fimodels\": {{\"rnd\": {{{}}}}}}}", fields.join(", "));
    RandomCase { netlist, spec, mode }
}

/// A random valid configuration of `model` with up to `max_k` faults.
pub fn random_config(rng: &mut impl RngCore, model: &PreparedModel, max_k: usize) -> FaultConfig {
    let k = rng.random_range(1..=max_k.min(model.sites.len()));
    let mut idx: Vec<usize> = (0..model.sites.len()).collect();
    let mut faults = Vec::new();
    for _ in 0..k {
        let s = &model.sites[idx.remove(rng.random_range(0..idx.len()))];
        faults.push((s.node, s.choices.choose(rng).unwrap().clone()));
    }
    faults.sort_by_key(|f| f.0);
    FaultConfig { faults }
}

pub const MODES: [EvaluationMode; 4] = [
    EvaluationMode::Unspecific,
    EvaluationMode::UnspecificWithAlerts,
    EvaluationMode::Specific,
    EvaluationMode::SpecificWithAlerts,
];
