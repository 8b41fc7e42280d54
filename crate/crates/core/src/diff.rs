//! Fault configurations, fault injection, and the differential graph that
//! compares a faulty copy of the target against the fault-free one.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::expr::BoolExpr;
use crate::fault_spec::{EvaluationMode, FaultMappings, Replacement};
use crate::graph::{CircuitGraph, GraphError, NodeId, NodeKind};
use crate::sat::{tseitin, SatResult, SatSolver, SolverError};
use crate::target::{CheckedSignal, TargetGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("fault location `{0}` is not a node of the target")]
    UnknownLocation(String),
    #[error("fault location `{name}`: {reason}")]
    NotALocation { name: String, reason: String },
    #[error("fault location `{name}` has type `{cell}`, which has no fault mapping")]
    UnmappedLocation { name: String, cell: String },
    #[error("the target has no gate with a fault mapping")]
    NoMappableLocations,
    #[error("{0} free inputs exceed the enumeration bound")]
    TooManyInputs(usize),
    #[error("replacement `{replacement}` does not fit `{node}`: {reason}")]
    ArityMismatch { node: String, replacement: String, reason: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// A gate that may be faulted and the replacements it may receive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultSite {
    pub node: NodeId,
    pub choices: Vec<Replacement>,
}

/// `k` simultaneous faults at distinct locations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FaultConfig {
    pub faults: Vec<(NodeId, Replacement)>,
}

/// Fault sites of `target`: the named `locations`, or every mappable gate.
pub fn fault_sites(
    target: &TargetGraph,
    locations: Option<&[String]>,
    mappings: &FaultMappings,
) -> Result<Vec<FaultSite>, DiffError> {
    let g = &target.graph;
    let sites: Vec<FaultSite> = match locations {
        Some(names) => {
            let mut seen = BTreeSet::new();
            let mut out = Vec::new();
            for name in names {
                let v = g.node_id(name).ok_or_else(|| DiffError::UnknownLocation(name.clone()))?;
                let not = |reason: &str| DiffError::NotALocation { name: name.clone(), reason: reason.into() };
                if !matches!(g.node(v).kind, NodeKind::Cell { .. } | NodeKind::PassThrough { .. }) {
                    return Err(not("only gates and registers can be faulted"));
                }
                if target.is_defined_node(v) {
                    return Err(not("its value is fixed by the specification"));
                }
                let cell = g.cell_type(v).unwrap();
                let choices = mappings
                    .get(cell)
                    .ok_or_else(|| DiffError::UnmappedLocation { name: name.clone(), cell: cell.to_string() })?;
                if seen.insert(v) {
                    out.push(FaultSite { node: v, choices: choices.clone() });
                }
            }
            out.sort_by_key(|s| s.node);
            out
        }
        None => target
            .fault_candidates()
            .into_iter()
            .filter_map(|v| mappings.get(g.cell_type(v)?).map(|c| FaultSite { node: v, choices: c.clone() }))
            .collect(),
    };
    if sites.is_empty() {
        return Err(DiffError::NoMappableLocations);
    }
    Ok(sites)
}

/// Number of configurations: the sum over k-subsets of the product of
/// choice counts.
pub fn count_configs(sites: &[FaultSite], k: usize) -> u128 {
    let mut e = vec![0u128; k + 1];
    e[0] = 1;
    for s in sites {
        let c = s.choices.len() as u128;
        for j in (1..=k).rev() {
            e[j] = e[j].saturating_add(e[j - 1].saturating_mul(c));
        }
    }
    e[k]
}

/// Lexicographic stream of configurations: k-subsets of sites in order,
/// and within a subset the choices with the last site varying fastest.
pub struct FaultConfigs<'a> {
    sites: &'a [FaultSite],
    subset: Vec<usize>,
    choice: Vec<usize>,
    done: bool,
}

pub fn enumerate_fault_configs(sites: &[FaultSite], k: usize) -> FaultConfigs<'_> {
    let done = k == 0 || k > sites.len();
    FaultConfigs { sites, subset: (0..k).collect(), choice: vec![0; k], done }
}

impl FaultConfigs<'_> {
    fn advance_subset(&mut self) -> bool {
        let (n, k) = (self.sites.len(), self.subset.len());
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.subset[i] < n - k + i {
                self.subset[i] += 1;
                for j in i + 1..k {
                    self.subset[j] = self.subset[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
}

impl Iterator for FaultConfigs<'_> {
    type Item = FaultConfig;

    fn next(&mut self) -> Option<FaultConfig> {
        loop {
            if self.done {
                return None;
            }
            let usable = self.subset.iter().all(|&s| !self.sites[s].choices.is_empty());
            let current = usable.then(|| FaultConfig {
                faults: self
                    .subset
                    .iter()
                    .zip(&self.choice)
                    .map(|(&s, &c)| (self.sites[s].node, self.sites[s].choices[c].clone()))
                    .collect(),
            });
            // odometer over choices, then next subset
            let mut i = self.choice.len();
            let mut carried = true;
            while usable && i > 0 {
                i -= 1;
                self.choice[i] += 1;
                if self.choice[i] < self.sites[self.subset[i]].choices.len() {
                    carried = false;
                    break;
                }
                self.choice[i] = 0;
            }
            if carried {
                self.choice.iter_mut().for_each(|c| *c = 0);
                if !self.advance_subset() {
                    self.done = true;
                }
            }
            if current.is_some() {
                return current;
            }
        }
    }
}

/// A copy of `target` with the faults of `config` applied. Node ids are
/// unchanged.
pub fn inject_faults(target: &TargetGraph, config: &FaultConfig) -> Result<TargetGraph, DiffError> {
    let mut t = target.clone();
    for (v, rep) in &config.faults {
        let g = &mut t.graph;
        let base = g.node(*v).kind.clone();
        match rep {
            Replacement::Const(b) => {
                g.nodes[*v].kind = NodeKind::ConstSource(*b);
                g.edges.retain(|e| e.dst != *v);
            }
            Replacement::Cell(cell) => {
                let def = g.cell_def(cell)?;
                let have = g.input_pins(*v)?.len();
                if def.input_pins.len() > have {
                    return Err(DiffError::ArityMismatch {
                        node: g.name(*v).to_string(),
                        replacement: cell.clone(),
                        reason: format!("{} inputs, the gate has {have}", def.input_pins.len()),
                    });
                }
                g.nodes[*v].kind = NodeKind::Faulted { base: Box::new(base), replacement: cell.clone() };
            }
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiffOp {
    Input,
    Const(bool),
    /// Function over earlier node indices.
    Expr(BoolExpr<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffNode {
    pub name: String,
    pub op: DiffOp,
}

/// Signal indices of the compared vectors and their expected values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Bindings {
    pub o_nf: Vec<usize>,
    pub o_f: Vec<usize>,
    pub o_e: Vec<bool>,
    pub o_ef: Option<Vec<bool>>,
    pub o_nfa: Vec<usize>,
    pub o_fa: Vec<usize>,
    pub o_ea: Vec<bool>,
}

/// Flat, topologically ordered differential graph: shared inputs, the
/// fault-free copy, the faulty copy, and the output logic ending in the
/// root.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffGraph {
    pub nodes: Vec<DiffNode>,
    pub root: usize,
    /// Indices of the shared free inputs.
    pub inputs: Vec<usize>,
    pub bindings: Bindings,
    pub mode: Option<EvaluationMode>,
}

impl DiffGraph {
    /// Wrap raw nodes; inputs are the `Input` nodes in order.
    pub fn from_nodes(nodes: Vec<DiffNode>, root: usize) -> Self {
        let inputs = nodes.iter().enumerate().filter(|(_, n)| n.op == DiffOp::Input).map(|(i, _)| i).collect();
        DiffGraph { nodes, root, inputs, bindings: Bindings::default(), mode: None }
    }

    pub fn input_names(&self) -> Vec<&str> {
        self.inputs.iter().map(|&i| self.nodes[i].name.as_str()).collect()
    }

    /// Bit-parallel evaluation of every node; `inputs[k]` drives the k-th
    /// shared input.
    pub fn eval_words(&self, inputs: &[u64]) -> Vec<u64> {
        let mut vals = vec![0u64; self.nodes.len()];
        let mut next_input = 0;
        for (i, n) in self.nodes.iter().enumerate() {
            vals[i] = match &n.op {
                DiffOp::Input => {
                    next_input += 1;
                    inputs[next_input - 1]
                }
                DiffOp::Const(b) => {
                    if *b {
                        !0
                    } else {
                        0
                    }
                }
                DiffOp::Expr(e) => e.eval_words(&|j: &usize| vals[*j]),
            };
        }
        vals
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph differential {\n  rankdir=LR;\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let label = match &n.op {
                DiffOp::Input => format!("{} (in)", n.name),
                DiffOp::Const(b) => format!("{} = {}", n.name, *b as u8),
                DiffOp::Expr(e) => {
                    let text = e.map_vars(|j| format!("#{j}")).to_string();
                    let short: String = text.chars().take(40).collect();
                    format!("{}\\n{short}", n.name)
                }
            };
            let shape = if i == self.root { "doublecircle" } else { "box" };
            let _ = writeln!(s, "  n{i} [label=\"{}\", shape={shape}];", label.replace('"', "'"));
            if let DiffOp::Expr(e) = &n.op {
                for j in e.vars() {
                    let _ = writeln!(s, "  n{j} -> n{i};");
                }
            }
        }
        s.push_str("}\n");
        s
    }
}

struct Builder {
    nodes: Vec<DiffNode>,
}

impl Builder {
    fn push(&mut self, name: String, op: DiffOp) -> usize {
        self.nodes.push(DiffNode { name, op });
        self.nodes.len() - 1
    }
}

/// Output pins of each node that anything reads.
fn used_pins(t: &TargetGraph) -> BTreeMap<NodeId, BTreeSet<String>> {
    let mut used: BTreeMap<NodeId, BTreeSet<String>> = BTreeMap::new();
    for e in &t.graph.edges {
        used.entry(e.src).or_default().insert(e.src_pin.clone());
    }
    for s in t.outputs.iter().chain(&t.alerts) {
        for (n, p) in &s.signal.bits {
            used.entry(*n).or_default().insert(p.clone());
        }
    }
    used
}

fn add_copy(
    b: &mut Builder,
    t: &TargetGraph,
    g: &CircuitGraph,
    prefix: &str,
    shared: &HashMap<NodeId, usize>,
    consts: [usize; 2],
    used: &BTreeMap<NodeId, BTreeSet<String>>,
) -> Result<HashMap<(NodeId, String), usize>, DiffError> {
    let mut sig: HashMap<(NodeId, String), usize> = HashMap::new();
    let adj = g.adjacency();
    let lookup = |sig: &HashMap<(NodeId, String), usize>, n: NodeId, p: &str| -> Result<usize, DiffError> {
        let key = if g.node(n).kind.is_single_valued() { String::new() } else { p.to_string() };
        sig.get(&(n, key)).copied().ok_or_else(|| {
            DiffError::Graph(GraphError::MissingValue { node: g.name(n).to_string(), pin: p.to_string() })
        })
    };
    let empty = BTreeSet::new();
    for v in g.topological_order()? {
        let node = g.node(v);
        let name = format!("{prefix}/{}", node.name);
        if node.kind.is_single_valued() {
            let idx = if let Some(&i) = shared.get(&v).filter(|_| !matches!(node.kind, NodeKind::ConstSource(_))) {
                i
            } else if let Some(val) = t.defined_value(v, "") {
                consts[val as usize]
            } else if let NodeKind::ConstSource(c) = node.kind {
                b.push(name, DiffOp::Const(c))
            } else {
                return Err(GraphError::MissingValue { node: node.name.clone(), pin: String::new() }.into());
            };
            sig.insert((v, String::new()), idx);
            continue;
        }
        let inputs: HashMap<&str, (NodeId, &str)> =
            adj.incoming[v].iter().map(|&ei| (g.edges[ei].dst_pin.as_str(), (g.edges[ei].src, g.edges[ei].src_pin.as_str()))).collect();
        if node.kind == NodeKind::OutputPort {
            let (s, p) = inputs.values().next().copied().ok_or_else(|| {
                DiffError::Graph(GraphError::MissingValue { node: node.name.clone(), pin: "o".into() })
            })?;
            let d = lookup(&sig, s, p)?;
            let i = b.push(name, DiffOp::Expr(BoolExpr::Var(d)));
            sig.insert((v, "o".into()), i);
            continue;
        }
        for pin in used.get(&v).unwrap_or(&empty) {
            let idx = if let Some(val) = t.defined_value(v, pin) {
                consts[val as usize]
            } else {
                let f = g.node_function(v, pin)?;
                let e = f.try_map_vars(&mut |p: &String| {
                    let (s, sp) = inputs.get(p.as_str()).copied().ok_or_else(|| {
                        DiffError::Graph(GraphError::MissingValue { node: node.name.clone(), pin: p.clone() })
                    })?;
                    lookup(&sig, s, sp)
                })?;
                b.push(format!("{name}.{pin}"), DiffOp::Expr(e))
            };
            sig.insert((v, pin.clone()), idx);
        }
    }
    Ok(sig)
}

fn literal(s: usize, value: bool) -> BoolExpr<usize> {
    if value {
        BoolExpr::Var(s)
    } else {
        BoolExpr::not(BoolExpr::Var(s))
    }
}

/// Per-bit XNOR against constants, conjoined.
fn equal(sigs: &[usize], vals: &[bool]) -> BoolExpr<usize> {
    BoolExpr::And(sigs.iter().zip(vals).map(|(&s, &v)| literal(s, v)).collect())
}

/// Per-bit XOR against constants, disjoined.
fn differ(sigs: &[usize], vals: &[bool]) -> BoolExpr<usize> {
    BoolExpr::Or(sigs.iter().zip(vals).map(|(&s, &v)| literal(s, !v)).collect())
}

/// Assemble the differential graph of `target` and its faulty copy.
pub fn build_differential(target: &TargetGraph, faulty: &TargetGraph) -> Result<DiffGraph, DiffError> {
    let mut b = Builder { nodes: Vec::new() };
    let mut shared = HashMap::new();
    let mut inputs = Vec::new();
    for &v in &target.free_inputs {
        let i = b.push(target.graph.name(v).to_string(), DiffOp::Input);
        shared.insert(v, i);
        inputs.push(i);
    }
    let consts = [b.push("1'b0".into(), DiffOp::Const(false)), b.push("1'b1".into(), DiffOp::Const(true))];
    let used = used_pins(target);
    let nf = add_copy(&mut b, target, &target.graph, "nf", &shared, consts, &used)?;
    let f = add_copy(&mut b, target, &faulty.graph, "f", &shared, consts, &used)?;

    let bits = |sig: &HashMap<(NodeId, String), usize>, g: &CircuitGraph, list: &[CheckedSignal]| -> Vec<usize> {
        list.iter()
            .flat_map(|s| s.signal.bits.iter())
            .map(|(n, p)| {
                let key = if g.node(*n).kind.is_single_valued() { String::new() } else { p.clone() };
                sig[&(*n, key)]
            })
            .collect()
    };
    let flat = |list: &[CheckedSignal], pick: &dyn Fn(&CheckedSignal) -> Vec<bool>| -> Vec<bool> {
        list.iter().flat_map(pick).collect()
    };
    let bindings = Bindings {
        o_nf: bits(&nf, &target.graph, &target.outputs),
        o_f: bits(&f, &faulty.graph, &target.outputs),
        o_e: flat(&target.outputs, &|s| s.expected.clone()),
        o_ef: target.mode.is_specific().then(|| flat(&target.outputs, &|s| s.fault_target.clone().unwrap_or_default())),
        o_nfa: bits(&nf, &target.graph, &target.alerts),
        o_fa: bits(&f, &faulty.graph, &target.alerts),
        o_ea: flat(&target.alerts, &|s| s.expected.clone()),
    };

    let mode = target.mode;
    let mut terms = vec![b.push("O_NF==O_E".into(), DiffOp::Expr(equal(&bindings.o_nf, &bindings.o_e)))];
    terms.push(match &bindings.o_ef {
        Some(ef) => b.push("O_F==O_EF".into(), DiffOp::Expr(equal(&bindings.o_f, ef))),
        None => b.push("O_F!=O_E".into(), DiffOp::Expr(differ(&bindings.o_f, &bindings.o_e))),
    });
    if mode.has_alerts() {
        terms.push(b.push("O_NFA==O_EA".into(), DiffOp::Expr(equal(&bindings.o_nfa, &bindings.o_ea))));
        terms.push(b.push("O_FA==O_EA".into(), DiffOp::Expr(equal(&bindings.o_fa, &bindings.o_ea))));
    }
    let root = b.push("root".into(), DiffOp::Expr(BoolExpr::And(terms.into_iter().map(BoolExpr::Var).collect())));
    Ok(DiffGraph { nodes: b.nodes, root, inputs, bindings, mode: Some(mode) })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Effective,
    Ineffective,
    Inconclusive(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VerdictStats {
    pub variables: usize,
    pub clauses: usize,
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub status: Status,
    /// Free-input assignment of an effective fault, in input order.
    pub witness: Option<Vec<(String, bool)>>,
    pub stats: VerdictStats,
}

impl Verdict {
    pub fn is_effective(&self) -> bool {
        self.status == Status::Effective
    }

    fn inconclusive(reason: String, stats: VerdictStats) -> Self {
        Verdict { status: Status::Inconclusive(reason), witness: None, stats }
    }
}

/// Decide the differential with a SAT solver. A model is replayed through
/// the graph before it is accepted.
pub fn evaluate(diff: &DiffGraph, solver: &dyn SatSolver) -> Result<Verdict, DiffError> {
    let cnf = tseitin(diff);
    let (result, s) = solver.solve(&cnf)?;
    let stats = VerdictStats {
        variables: cnf.num_vars,
        clauses: cnf.clauses.len(),
        conflicts: s.conflicts,
        decisions: s.decisions,
        propagations: s.propagations,
    };
    Ok(match result {
        SatResult::Unsat => Verdict { status: Status::Ineffective, witness: None, stats },
        SatResult::Unknown(why) => Verdict::inconclusive(why, stats),
        SatResult::Sat(model) => {
            let assignment: Vec<bool> = diff.inputs.iter().map(|&i| model[cnf.node_vars[i] as usize - 1]).collect();
            let words: Vec<u64> = assignment.iter().map(|&b| if b { !0 } else { 0 }).collect();
            if diff.eval_words(&words)[diff.root] & 1 == 0 {
                return Ok(Verdict::inconclusive("solver model does not satisfy the root".into(), stats));
            }
            let names = diff.input_names();
            let witness = names.iter().zip(assignment).map(|(n, b)| (n.to_string(), b)).collect();
            Verdict { status: Status::Effective, witness: Some(witness), stats }
        }
    })
}

pub const DEFAULT_BRUTE_FORCE_BOUND: usize = 20;

/// Decide the differential by enumerating every free-input assignment.
/// The witness is the first satisfying assignment in lexicographic order
/// (first input most significant).
pub fn brute_force_verdict(diff: &DiffGraph, bound: usize) -> Result<Verdict, DiffError> {
    let n = diff.inputs.len();
    if n > bound || n >= 64 {
        return Err(DiffError::TooManyInputs(n));
    }
    const LANE: [u64; 6] = [
        0xAAAA_AAAA_AAAA_AAAA,
        0xCCCC_CCCC_CCCC_CCCC,
        0xF0F0_F0F0_F0F0_F0F0,
        0xFF00_FF00_FF00_FF00,
        0xFFFF_0000_FFFF_0000,
        0xFFFF_FFFF_0000_0000,
    ];
    let total: u64 = 1 << n;
    let valid = if total >= 64 { !0 } else { (1u64 << total) - 1 };
    let mut base = 0u64;
    while base < total {
        let words: Vec<u64> = (0..n)
            .map(|i| {
                let bit = n - 1 - i;
                if bit < 6 {
                    LANE[bit]
                } else if (base >> bit) & 1 == 1 {
                    !0
                } else {
                    0
                }
            })
            .collect();
        let hits = diff.eval_words(&words)[diff.root] & valid;
        if hits != 0 {
            let a = base + hits.trailing_zeros() as u64;
            let names = diff.input_names();
            let witness = (0..n).map(|i| (names[i].to_string(), (a >> (n - 1 - i)) & 1 == 1)).collect();
            return Ok(Verdict { status: Status::Effective, witness: Some(witness), stats: VerdictStats::default() });
        }
        base += 64;
    }
    Ok(Verdict { status: Status::Ineffective, witness: None, stats: VerdictStats::default() })
}
