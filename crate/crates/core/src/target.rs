//! Register removal and extraction of the combinational target subcircuit.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::fault_spec::{BitVector, EvaluationMode, FaultSpecification, SpecError};
use crate::graph::{CircuitGraph, GraphError, NodeId, NodeKind, RegisterSplit, INPUT_PORT_PIN, OUTPUT_PORT_PIN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TargetError {
    #[error("cannot tell the data input of sequential cell `{0}`")]
    UnknownSequentialSemantics(String),
    #[error("combinational cycle through {0:?}")]
    CombinationalCycle(Vec<String>),
    #[error("no path from the declared inputs to the declared outputs")]
    EmptyTarget,
    #[error("`{0}` does not name a node, bus or register in the circuit")]
    UnknownNode(String),
    #[error("`{node}`: {reason}")]
    AmbiguousPin { node: String, reason: String },
    #[error("stage connection: {0}")]
    Stage(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Replace every register by clock-free logic. Registers on a cycle are
/// split into a state input (one auxiliary node per used output pin,
/// named `REG.PIN`) and a next-state sink (`REG.DATA`); the others become
/// pass-throughs. Returns the graph and any warnings.
pub fn preprocess(g: &CircuitGraph) -> Result<(CircuitGraph, Vec<String>), TargetError> {
    let on_cycle = g.sequential_cycle_nodes();
    let mut warnings = Vec::new();
    let mut data_pin: BTreeMap<NodeId, String> = BTreeMap::new();
    for id in 0..g.len() {
        if !g.is_sequential(id) {
            continue;
        }
        let cell = g.cell_type(id).unwrap();
        let def = g.cell_def(cell)?;
        match &def.data_pin {
            Some(d) if !def.functions.is_empty() => {
                data_pin.insert(id, d.clone());
            }
            _ => return Err(TargetError::UnknownSequentialSemantics(cell.to_string())),
        }
    }

    let mut out = CircuitGraph::new(g.cells.clone());
    // old id -> new id for nodes that survive as themselves
    let mut map: Vec<Option<NodeId>> = vec![None; g.len()];
    let mut state: BTreeMap<(NodeId, String), NodeId> = BTreeMap::new();
    let mut sinks: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let reserved: BTreeSet<&str> = g.nodes.iter().map(|n| n.name.as_str()).collect();
    let fresh = |out: &CircuitGraph, base: String| {
        let mut name = base.clone();
        let mut i = 1;
        while reserved.contains(name.as_str()) || out.node_id(&name).is_some() {
            name = format!("{base}#{i}");
            i += 1;
        }
        name
    };

    for (id, node) in g.nodes.iter().enumerate() {
        if on_cycle.contains(&id) {
            continue;
        }
        let kind = match data_pin.get(&id) {
            Some(d) => NodeKind::PassThrough { cell: g.cell_type(id).unwrap().to_string(), data_pin: d.clone() },
            None => node.kind.clone(),
        };
        map[id] = Some(out.add_node(node.name.clone(), kind));
    }
    for &id in &on_cycle {
        let name = g.name(id).to_string();
        let mut pins: Vec<&str> = g.edges.iter().filter(|e| e.src == id).map(|e| e.src_pin.as_str()).collect();
        pins.sort();
        pins.dedup();
        if pins.len() > 1 {
            warnings.push(format!("register `{name}` drives the loop through several outputs {pins:?}; each is split separately"));
        }
        let mut split = RegisterSplit { cell: g.cell_type(id).unwrap().to_string(), state: Vec::new(), next: None };
        for p in pins {
            let aux = out.add_node(fresh(&out, format!("{name}.{p}")), NodeKind::AuxInput);
            state.insert((id, p.to_string()), aux);
            split.state.push((p.to_string(), aux));
        }
        let sink = out.add_node(fresh(&out, format!("{name}.{}", data_pin[&id])), NodeKind::OutputPort);
        sinks.insert(id, sink);
        split.next = Some(sink);
        out.splits.insert(name, split);
    }

    for e in &g.edges {
        let src = match map[e.src] {
            Some(s) => s,
            None => state[&(e.src, e.src_pin.clone())],
        };
        let (dst, dst_pin) = match (map[e.dst], data_pin.get(&e.dst)) {
            (_, Some(d)) if *d != e.dst_pin => continue,
            (Some(d), _) => (d, e.dst_pin.clone()),
            (None, _) => (sinks[&e.dst], OUTPUT_PORT_PIN.to_string()),
        };
        out.add_edge(src, e.src_pin.clone(), dst, dst_pin);
    }

    if let Err(GraphError::CyclicGraph(names)) = out.topological_order() {
        return Err(TargetError::CombinationalCycle(names));
    }
    Ok((out, warnings))
}

/// A named boundary signal, bits least significant first. Each bit is a
/// node and the output pin carrying it (`""` on single-valued nodes,
/// `"o"` on output ports).
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub name: String,
    pub bits: Vec<(NodeId, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckedSignal {
    pub signal: Signal,
    pub expected: Vec<bool>,
    /// Target value under a fault (specific modes only).
    pub fault_target: Option<Vec<bool>>,
}

/// The extracted combinational subcircuit plus its boundary.
#[derive(Debug, Clone)]
pub struct TargetGraph {
    pub graph: CircuitGraph,
    pub mode: EvaluationMode,
    /// Inputs with values from the specification.
    pub defined_inputs: Vec<(Signal, Vec<bool>)>,
    /// Source nodes without a value: undefined declared inputs and
    /// auxiliary inputs, in node order.
    pub free_inputs: Vec<NodeId>,
    pub outputs: Vec<CheckedSignal>,
    pub alerts: Vec<CheckedSignal>,
    pub ge: f64,
    pub warnings: Vec<String>,
    defined: BTreeMap<(NodeId, String), bool>,
}

impl TargetGraph {
    /// Value fixed by the specification for `(node, pin)`.
    pub fn defined_value(&self, node: NodeId, pin: &str) -> Option<bool> {
        if self.graph.node(node).kind.is_single_valued() {
            return self.defined.get(&(node, String::new())).copied();
        }
        self.defined.get(&(node, pin.to_string())).copied()
    }

    /// Whether any output of `node` is fixed by the specification.
    pub fn is_defined_node(&self, node: NodeId) -> bool {
        self.defined.range((node, String::new())..).next().is_some_and(|((n, _), _)| *n == node)
    }

    /// Logic nodes that may carry a fault.
    pub fn fault_candidates(&self) -> Vec<NodeId> {
        (0..self.graph.len())
            .filter(|&v| matches!(self.graph.node(v).kind, NodeKind::Cell { .. }) && !self.is_defined_node(v))
            .collect()
    }

    /// Node/edge graph JSON plus the boundary annotations.
    pub fn to_json(&self) -> serde_json::Value {
        let g = &self.graph;
        let bits = |s: &Signal| -> Vec<String> {
            s.bits.iter().map(|(n, p)| if p.is_empty() { g.name(*n).to_string() } else { format!("{}.{p}", g.name(*n)) }).collect()
        };
        let checked = |list: &[CheckedSignal]| -> Vec<serde_json::Value> {
            list.iter()
                .map(|c| {
                    let mut o = serde_json::json!({"name": c.signal.name, "bits": bits(&c.signal), "expected": c.expected});
                    if let Some(t) = &c.fault_target {
                        o["fault_target"] = serde_json::json!(t);
                    }
                    o
                })
                .collect()
        };
        serde_json::json!({
            "setting": self.mode.setting(),
            "circuit_ge": self.ge,
            "defined_inputs": self.defined_inputs.iter().map(|(s, v)| serde_json::json!({"name": s.name, "bits": bits(s), "value": v})).collect::<Vec<_>>(),
            "free_inputs": self.free_inputs.iter().map(|&n| g.name(n)).collect::<Vec<_>>(),
            "outputs": checked(&self.outputs),
            "alerts": checked(&self.alerts),
            "graph": g.to_json(),
        })
    }

    /// Evaluate the target with `free` supplying one word per free input.
    pub fn evaluate_words(&self, free: &dyn Fn(usize) -> u64) -> Result<crate::graph::Values, GraphError> {
        let position: BTreeMap<NodeId, usize> = self.free_inputs.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let word = |b: bool| if b { !0u64 } else { 0 };
        self.graph.evaluate(&|v, pin| {
            if let Some(b) = self.defined_value(v, pin) {
                return Some(word(b));
            }
            if pin.is_empty() {
                return position.get(&v).map(|&i| free(i));
            }
            None
        })
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    Input,
    Output,
}

/// Resolve a specification name to its bits in the preprocessed graph.
fn resolve(g: &CircuitGraph, name: &str, pin: Option<&str>, role: Role) -> Result<Signal, TargetError> {
    if let Some(bit) = resolve_bit(g, name, pin, role)? {
        return Ok(Signal { name: name.to_string(), bits: vec![bit] });
    }
    let prefix = format!("{name}[");
    let mut indexed: BTreeMap<i64, &str> = BTreeMap::new();
    let candidates = g.nodes.iter().map(|n| n.name.as_str()).chain(g.splits.keys().map(|s| s.as_str()));
    for n in candidates {
        if let Some(idx) = n.strip_prefix(&prefix).and_then(|r| r.strip_suffix(']')).and_then(|i| i.parse().ok()) {
            indexed.insert(idx, n);
        }
    }
    if indexed.is_empty() {
        return Err(TargetError::UnknownNode(name.to_string()));
    }
    let mut bits = Vec::new();
    for n in indexed.values() {
        bits.push(resolve_bit(g, n, pin, role)?.ok_or_else(|| TargetError::UnknownNode(n.to_string()))?);
    }
    Ok(Signal { name: name.to_string(), bits })
}

fn resolve_bit(g: &CircuitGraph, name: &str, pin: Option<&str>, role: Role) -> Result<Option<(NodeId, String)>, TargetError> {
    if let Some(split) = g.splits.get(name) {
        return match role {
            Role::Output => Ok(split.next.map(|n| (n, OUTPUT_PORT_PIN.to_string()))),
            Role::Input => {
                let chosen = match pin {
                    Some(p) if split.state.iter().any(|(sp, _)| sp == p) => split.state.iter().find(|(sp, _)| sp == p),
                    _ if split.state.len() == 1 => split.state.first(),
                    _ => {
                        // Prefer the non-inverted state output.
                        let def = g.cell_def(&split.cell)?;
                        let plain = def.functions.iter().find(|(_, f)| matches!(f, crate::expr::BoolExpr::Var(_)));
                        plain.and_then(|(p, _)| split.state.iter().find(|(sp, _)| sp == p))
                    }
                };
                match chosen {
                    Some((_, aux)) => Ok(Some((*aux, String::new()))),
                    None => Err(TargetError::AmbiguousPin {
                        node: name.to_string(),
                        reason: "register has no usable state output".into(),
                    }),
                }
            }
        };
    }
    let Some(id) = g.node_id(name) else { return Ok(None) };
    let kind = &g.node(id).kind;
    if kind.is_single_valued() {
        return Ok(Some((id, String::new())));
    }
    if *kind == NodeKind::OutputPort {
        return Ok(Some((id, OUTPUT_PORT_PIN.to_string())));
    }
    let outs = g.output_pins(id)?;
    let chosen = match pin {
        Some(p) if outs.iter().any(|o| o == p) => p.to_string(),
        _ if outs.len() == 1 => outs[0].clone(),
        _ => {
            return Err(TargetError::AmbiguousPin {
                node: name.to_string(),
                reason: format!("pick one of the output pins {outs:?}"),
            })
        }
    };
    Ok(Some((id, chosen)))
}

fn check_width(sig: &Signal, v: &BitVector) -> Result<Vec<bool>, TargetError> {
    Ok(v.resolve(&sig.name, sig.bits.len())?)
}

/// Extract the subcircuit between the declared inputs and outputs of all
/// stages of `spec` from the preprocessed graph `g`.
pub fn extract_target(g: &CircuitGraph, spec: &FaultSpecification) -> Result<TargetGraph, TargetError> {
    let values = |list: &[(String, BitVector)], name: &str| list.iter().find(|(k, _)| k == name).map(|(_, v)| v.clone());

    // Names produced by stage i and consumed by stage i + 1 are internal.
    let mut internal: BTreeSet<&str> = BTreeSet::new();
    for (i, st) in spec.stages.iter().enumerate() {
        for name in &st.inputs {
            let producers: Vec<usize> =
                (0..i).filter(|&j| spec.stages[j].outputs.contains(name)).collect();
            if producers.is_empty() {
                continue;
            }
            if i > 0 && producers == [i - 1] {
                if g.splits.contains_key(name.as_str()) {
                    return Err(TargetError::Stage(format!(
                        "`{name}` is a register; stages cannot be chained through it"
                    )));
                }
                if values(&spec.input_values, name).is_some() {
                    return Err(TargetError::Stage(format!("`{name}` connects two stages and cannot take an input value")));
                }
                internal.insert(name);
            } else {
                return Err(TargetError::Stage(format!(
                    "`{name}` is an input of stage `{}` but is produced by stage(s) {:?}",
                    st.name,
                    producers.iter().map(|&j| spec.stages[j].name.as_str()).collect::<Vec<_>>()
                )));
            }
        }
    }

    let mut inputs: Vec<(Signal, Option<Vec<bool>>)> = Vec::new();
    let mut keep: BTreeSet<NodeId> = BTreeSet::new();
    let mut all_sinks: BTreeSet<NodeId> = BTreeSet::new();
    let mut seen_inputs: BTreeSet<&str> = BTreeSet::new();
    let alert_signals: Vec<Signal> = spec
        .alert_values
        .iter()
        .map(|(n, v)| resolve(g, n, v.pin.as_deref(), Role::Output))
        .collect::<Result<_, _>>()?;
    let alert_nodes: BTreeSet<NodeId> = alert_signals.iter().flat_map(|s| s.bits.iter().map(|b| b.0)).collect();

    for st in &spec.stages {
        let mut src = BTreeSet::new();
        for name in &st.inputs {
            let v = values(&spec.input_values, name);
            let sig = resolve(g, name, v.as_ref().and_then(|v| v.pin.as_deref()), Role::Input)?;
            src.extend(sig.bits.iter().map(|b| b.0));
            if !internal.contains(name.as_str()) && seen_inputs.insert(name) {
                let bits = v.map(|v| check_width(&sig, &v)).transpose()?;
                inputs.push((sig, bits));
            }
        }
        let mut dst = alert_nodes.clone();
        for name in &st.outputs {
            let v = values(&spec.output_values, name);
            let sig = resolve(g, name, v.as_ref().and_then(|v| v.pin.as_deref()), Role::Output)?;
            dst.extend(sig.bits.iter().map(|b| b.0));
        }
        let between = g.nodes_between(&src, &dst)?;
        all_sinks.extend(dst.intersection(&between).copied());
        keep.extend(between);
    }
    if all_sinks.is_empty() {
        return Err(TargetError::EmptyTarget);
    }
    for (name, _) in &spec.input_values {
        if !seen_inputs.contains(name.as_str()) {
            return Err(TargetError::Stage(format!("input value for `{name}`, which is not a stage input")));
        }
    }
    let stage_outputs: BTreeSet<&str> = spec.stages.iter().flat_map(|s| s.outputs.iter().map(|o| o.as_str())).collect();

    let mut output_signals = Vec::new();
    for (name, v) in &spec.output_values {
        if !stage_outputs.contains(name.as_str()) {
            return Err(TargetError::Stage(format!("expected value for `{name}`, which is not a stage output")));
        }
        output_signals.push((resolve(g, name, v.pin.as_deref(), Role::Output)?, v));
    }
    for (sig, _) in &output_signals {
        keep.extend(sig.bits.iter().map(|b| b.0));
    }
    keep.extend(&alert_nodes);
    for (sig, _) in &inputs {
        keep.extend(sig.bits.iter().map(|b| b.0));
    }

    // Tie-offs stay attached rather than becoming free inputs.
    let ties: Vec<NodeId> = g
        .edges
        .iter()
        .filter(|e| keep.contains(&e.dst) && matches!(g.node(e.src).kind, NodeKind::ConstSource(_)))
        .map(|e| e.src)
        .collect();
    keep.extend(ties);

    let (mut t, map) = g.induced_subgraph_with_map(&keep);
    let remap = |s: &Signal| Signal { name: s.name.clone(), bits: s.bits.iter().map(|(n, p)| (map[n], p.clone())).collect() };

    let mut defined: BTreeMap<(NodeId, String), bool> = BTreeMap::new();
    let mut defined_inputs = Vec::new();
    let mut warnings = Vec::new();
    for (sig, bits) in &inputs {
        let sig = remap(sig);
        match bits {
            Some(bits) => {
                for ((n, p), b) in sig.bits.iter().zip(bits) {
                    defined.insert((*n, p.clone()), *b);
                }
                defined_inputs.push((sig, bits.clone()));
            }
            None => {
                for (n, _) in &sig.bits {
                    if !t.node(*n).kind.is_single_valued() {
                        warnings.push(format!("input `{}` has no value and is computed from its fan-in", sig.name));
                    }
                }
            }
        }
    }

    let read_pins: BTreeSet<(NodeId, String)> = output_signals
        .iter()
        .map(|(s, _)| s)
        .chain(&alert_signals)
        .flat_map(|s| s.bits.iter().map(|(n, p)| (map[n], p.clone())))
        .collect();

    // Attach auxiliary inputs where extraction cut a fan-in.
    let mut driven: BTreeSet<(NodeId, String)> = t.edges.iter().map(|e| (e.dst, e.dst_pin.clone())).collect();
    let ids: Vec<NodeId> = (0..t.len()).collect();
    for v in ids {
        if t.node(v).kind.is_single_valued() {
            continue;
        }
        if t.node(v).kind != NodeKind::OutputPort {
            let outs = t.output_pins(v)?;
            let used: BTreeSet<&str> = t.edges.iter().filter(|e| e.src == v).map(|e| e.src_pin.as_str()).collect();
            let read: BTreeSet<&str> =
                read_pins.iter().filter(|(n, _)| *n == v).map(|(_, p)| p.as_str()).collect();
            let all_defined = outs
                .iter()
                .filter(|p| used.contains(p.as_str()) || read.contains(p.as_str()))
                .all(|p| defined.contains_key(&(v, p.clone())));
            if all_defined && outs.iter().any(|p| defined.contains_key(&(v, p.clone()))) {
                continue;
            }
        }
        for pin in t.input_pins(v)? {
            if driven.contains(&(v, pin.clone())) {
                continue;
            }
            let base = if t.node(v).kind == NodeKind::OutputPort {
                format!("aux:{}", t.name(v))
            } else {
                format!("aux:{}/{pin}", t.name(v))
            };
            let name = t.unique_name(&base);
            let aux = t.add_node(name, NodeKind::AuxInput);
            t.add_edge(aux, INPUT_PORT_PIN, v, pin.clone());
            driven.insert((v, pin));
        }
    }

    let free_inputs: Vec<NodeId> = (0..t.len())
        .filter(|&v| matches!(t.node(v).kind, NodeKind::InputPort | NodeKind::AuxInput))
        .filter(|&v| !defined.contains_key(&(v, String::new())))
        .collect();

    let mode = spec.mode();
    let mut outputs = Vec::new();
    for (sig, v) in &output_signals {
        let expected = check_width(sig, v)?;
        let fault_target = match &spec.output_fault_values {
            Some(f) => {
                let fv = f.iter().find(|(k, _)| *k == sig.name).map(|(_, v)| v).expect("keys checked at parse time");
                Some(check_width(sig, fv)?)
            }
            None => None,
        };
        outputs.push(CheckedSignal { signal: remap(sig), expected, fault_target });
    }
    let mut alerts = Vec::new();
    for (sig, (_, v)) in alert_signals.iter().zip(&spec.alert_values) {
        alerts.push(CheckedSignal { signal: remap(sig), expected: check_width(sig, v)?, fault_target: None });
    }

    let ge = gate_equivalents(&t);
    Ok(TargetGraph { graph: t, mode, defined_inputs, free_inputs, outputs, alerts, ge, warnings, defined })
}

/// Summed cell area over the smallest NAND2 area. Without areas this is
/// the number of logic nodes.
pub fn gate_equivalents(g: &CircuitGraph) -> f64 {
    let logic: Vec<NodeId> = (0..g.len()).filter(|&v| g.is_logic(v)).collect();
    let areas: Option<f64> = logic
        .iter()
        .map(|&v| g.cell_type(v).and_then(|c| g.cells.get(c)).and_then(|c| c.area))
        .sum();
    match (areas, g.cells.nand2_area) {
        (Some(a), Some(n)) if n > 0.0 => a / n,
        _ => logic.len() as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fault_spec::parse_fault_spec;
    use crate::liberty::{CellDefinition, CellLibrary};
    use crate::netlist::{build_graph, parse_netlist};

    fn lib() -> CellLibrary {
        let src = r#"library(t) {
          cell(INV) { area: 1; pin(A) { direction: input; } pin(ZN) { direction: output; function: "!A"; } }
          cell(BUF) { area: 1; pin(A) { direction: input; } pin(Z) { direction: output; function: "A"; } }
          cell(NAND2) { area: 1; pin(A1) { direction: input; } pin(A2) { direction: input; } pin(ZN) { direction: output; function: "!(A1 & A2)"; } }
          cell(XOR2) { area: 2; pin(A) { direction: input; } pin(B) { direction: input; } pin(Z) { direction: output; function: "A ^ B"; } }
          cell(AOI21) { area: 1.5; pin(A) { direction: input; } pin(B1) { direction: input; } pin(B2) { direction: input; }
                        pin(ZN) { direction: output; function: "!(A | (B1 & B2))"; } }
          cell(DFF) { area: 4; ff(IQ, IQN) { next_state: "D"; clocked_on: "CK"; }
                      pin(D) { direction: input; } pin(CK) { direction: input; clock: true; }
                      pin(Q) { direction: output; function: "IQ"; } pin(QN) { direction: output; function: "IQN"; } }
        }"#;
        crate::liberty::parse_liberty(src).unwrap()
    }

    fn graph(src: &str) -> CircuitGraph {
        let m = parse_netlist(src).unwrap().remove(0);
        build_graph(&m, &lib(), &BTreeMap::new()).unwrap().0
    }

    const SPLIT: &str = "module split_register(In1, In2, In3, clk, Out1);
        input In1, In2, In3, clk; output Out1; wire n2, n1, n4, q3, q6;
        AOI21 U2(.A(In1), .B1(In2), .B2(In3), .ZN(n2));
        XOR2 U1(.A(q3), .B(n2), .Z(n1));
        INV U4(.A(n1), .ZN(n4));
        DFF U3(.D(n4), .CK(clk), .Q(q3));
        DFF U6(.D(n4), .CK(clk), .Q(q6));
        BUF U5(.A(q6), .Z(Out1));
      endmodule";

    fn spec(body: &str) -> FaultSpecification {
        parse_fault_spec(&format!(r#"{{"fimodels": {{"m": {{{body}}}}}}}"#)).unwrap().remove(0).spec
    }

    #[test]
    fn split_register_preprocess_and_extract() {
        let (p, w) = preprocess(&graph(SPLIT)).unwrap();
        assert!(w.is_empty());
        assert_eq!(p.node(p.node_id("U6").unwrap()).kind, NodeKind::PassThrough { cell: "DFF".into(), data_pin: "D".into() });
        assert!(p.node_id("U3").is_none());
        assert_eq!(p.node(p.node_id("U3.Q").unwrap()).kind, NodeKind::AuxInput);
        assert_eq!(p.node(p.node_id("U3.D").unwrap()).kind, NodeKind::OutputPort);
        // The clock no longer reaches anything.
        let clk = p.node_id("clk").unwrap();
        assert!(p.edges.iter().all(|e| e.src != clk));

        let s = spec(
            r#""stages": {"s": {"inputs": ["U3"], "outputs": ["U3", "Out1"]}},
               "input_values": {"U3": "1'b1"}, "output_values": {"U3": "1'b0", "Out1": "1'b0"}"#,
        );
        let t = extract_target(&p, &s).unwrap();
        let names: BTreeSet<&str> = t.graph.nodes.iter().map(|n| n.name.as_str()).collect();
        let expect: BTreeSet<&str> = ["U3.Q", "U1", "U4", "U3.D", "U6", "U5", "Out1", "aux:U1/B"].into_iter().collect();
        assert_eq!(names, expect);
        assert_eq!(t.free_inputs, vec![t.graph.node_id("aux:U1/B").unwrap()]);
        assert_eq!(t.fault_candidates().len(), 3);
        // 2 + 1 + 4 + 1 = 8 area units over a NAND2 of 1.
        assert_eq!(t.ge, 8.0);
    }

    #[test]
    fn shift_register_is_identity() {
        let g = graph(
            "module sr(d, clk, q); input d, clk; output q; wire a, b;
             DFF r0(.D(d), .CK(clk), .Q(a)); DFF r1(.D(a), .CK(clk), .Q(b)); DFF r2(.D(b), .CK(clk), .Q(q)); endmodule",
        );
        let (p, _) = preprocess(&g).unwrap();
        assert_eq!(p.nodes.iter().filter(|n| matches!(n.kind, NodeKind::PassThrough { .. })).count(), 3);
        let d = p.node_id("d").unwrap();
        for x in [0u64, !0, 0xdead_beef] {
            let vals = p.evaluate(&|v, _| if v == d { Some(x) } else if p.node(v).kind.is_single_valued() { Some(0) } else { None }).unwrap();
            assert_eq!(vals.get(&p, p.node_id("q").unwrap(), "o").unwrap(), x);
        }
    }

    #[test]
    fn combinational_graph_unchanged() {
        let g = graph("module m(a,b,y); input a,b; output y; NAND2 u(.A1(a), .A2(b), .ZN(y)); endmodule");
        assert_eq!(preprocess(&g).unwrap().0, g);
    }

    #[test]
    fn combinational_loop_rejected() {
        let g = graph("module m(a,y); input a; output y; wire x; NAND2 u(.A1(a), .A2(y), .ZN(x)); INV v(.A(x), .ZN(y)); endmodule");
        assert!(matches!(preprocess(&g), Err(TargetError::CombinationalCycle(_))));
    }

    #[test]
    fn scan_flop_without_data_pin() {
        let mut l = lib();
        let mut sdff = l.get("DFF").unwrap().clone();
        sdff.name = "SDFF".into();
        sdff.data_pin = None;
        sdff.functions.clear();
        l.insert(sdff).unwrap();
        let m = parse_netlist("module m(d,c,q); input d,c; output q; SDFF r(.D(d), .CK(c), .Q(q)); endmodule").unwrap().remove(0);
        let g = build_graph(&m, &l, &BTreeMap::new()).unwrap().0;
        assert_eq!(preprocess(&g).unwrap_err(), TargetError::UnknownSequentialSemantics("SDFF".into()));
    }

    #[test]
    fn direct_wire_and_bus() {
        let g = graph("module m(input [1:0] a, output [1:0] y); assign y = a; endmodule");
        let s = spec(r#""stages": {"s": {"inputs": ["a"], "outputs": ["y"]}}, "input_values": {"a": "2'b10"}, "output_values": {"y": "2'b10"}"#);
        let t = extract_target(&g, &s).unwrap();
        assert_eq!(t.graph.len(), 4);
        assert!(t.free_inputs.is_empty());
        assert_eq!(t.outputs[0].expected, vec![false, true]);
        let bad = spec(r#""stages": {"s": {"inputs": ["a"], "outputs": ["y"]}}, "output_values": {"y": "3'b010"}"#);
        assert!(matches!(extract_target(&g, &bad), Err(TargetError::Spec(SpecError::WidthMismatch { .. }))));
    }

    #[test]
    fn unreachable_is_empty() {
        let g = graph("module m(a,b,y,z); input a,b; output y,z; INV u(.A(a), .ZN(y)); INV v(.A(b), .ZN(z)); endmodule");
        let s = spec(r#""stages": {"s": {"inputs": ["a"], "outputs": ["z"]}}, "output_values": {"z": 0}"#);
        assert_eq!(extract_target(&g, &s).unwrap_err(), TargetError::EmptyTarget);
        let s = spec(r#""stages": {"s": {"inputs": ["a"], "outputs": ["q"]}}, "output_values": {"q": 0}"#);
        assert_eq!(extract_target(&g, &s).unwrap_err(), TargetError::UnknownNode("q".into()));
    }

    #[test]
    fn stages_chain_by_name() {
        let g = graph(
            "module m(a,b,y); input a,b; output y; wire n, x;
             NAND2 u(.A1(a), .A2(b), .ZN(n)); INV v(.A(n), .ZN(x)); INV w(.A(x), .ZN(y)); endmodule",
        );
        let s = spec(
            r#""stages": {"one": {"inputs": ["a", "b"], "outputs": ["v"]}, "two": {"inputs": ["v"], "outputs": ["y"]}},
               "input_values": {"a": 1, "b": 1}, "output_values": {"y": 0}"#,
        );
        let t = extract_target(&g, &s).unwrap();
        assert_eq!(t.graph.len(), 6);
        assert!(t.free_inputs.is_empty());
        let vals = t.evaluate_words(&|_| 0).unwrap();
        let (yn, yp) = &t.outputs[0].signal.bits[0];
        assert_eq!(vals.get(&t.graph, *yn, yp).unwrap(), 0);

        let bad = spec(
            r#""stages": {"one": {"inputs": ["a"], "outputs": ["v"]}, "two": {"inputs": ["v"], "outputs": ["y"]}},
               "input_values": {"v": 1}, "output_values": {"y": 0}"#,
        );
        assert!(matches!(extract_target(&g, &bad), Err(TargetError::Stage(_))));
    }

    #[test]
    fn cell_node_as_defined_input() {
        let g = graph("module m(a,b,y); input a,b; output y; wire n; NAND2 u(.A1(a), .A2(b), .ZN(n)); INV v(.A(n), .ZN(y)); endmodule");
        let s = spec(r#""stages": {"s": {"inputs": ["u"], "outputs": ["y"]}}, "input_values": {"u": 1}, "output_values": {"y": 0}"#);
        let t = extract_target(&g, &s).unwrap();
        // u is a cut point: no aux inputs on its fan-in and not a fault site.
        assert_eq!(t.graph.len(), 3);
        assert_eq!(t.fault_candidates(), vec![t.graph.node_id("v").unwrap()]);
        let vals = t.evaluate_words(&|_| 0).unwrap();
        assert_eq!(vals.get(&t.graph, t.graph.node_id("y").unwrap(), "o").unwrap(), 0);
    }

    #[test]
    fn ge_fallback_counts_gates() {
        let mut l = CellLibrary::new("x");
        l.insert(CellDefinition::combinational("INV", &["A"], &[("ZN", "!A")]).unwrap()).unwrap();
        let m = parse_netlist("module m(a,y); input a; output y; wire n; INV u(.A(a), .ZN(n)); INV v(.A(n), .ZN(y)); endmodule")
            .unwrap()
            .remove(0);
        let g = build_graph(&m, &l, &BTreeMap::new()).unwrap().0;
        assert_eq!(gate_equivalents(&g), 2.0);
    }
}
