//! Directed multigraph of ports, cells and auxiliary nodes, plus the graph
//! algorithms used by extraction and the reference evaluator.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::expr::BoolExpr;
use crate::liberty::{CellDefinition, CellLibrary};

pub type NodeId = usize;

/// Output pin name of input-port nodes.
pub const INPUT_PORT_PIN: &str = "i";
/// Input pin name of output-port nodes.
pub const OUTPUT_PORT_PIN: &str = "o";

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    InputPort,
    OutputPort,
    Cell { cell: String },
    /// Clock-free register replacement mapping the data input to its outputs.
    PassThrough { cell: String, data_pin: String },
    AuxInput,
    ConstSource(bool),
    /// A cell or pass-through whose function was replaced by another cell's
    /// function, inputs and outputs bound positionally.
    Faulted { base: Box<NodeKind>, replacement: String },
}

impl NodeKind {
    /// Kinds whose every output pin carries the same single value.
    pub fn is_single_valued(&self) -> bool {
        matches!(self, NodeKind::InputPort | NodeKind::AuxInput | NodeKind::ConstSource(_))
    }

    pub fn is_source(&self) -> bool {
        self.is_single_valued()
    }

    pub fn type_name(&self) -> String {
        match self {
            NodeKind::InputPort => "input".into(),
            NodeKind::OutputPort => "output".into(),
            NodeKind::Cell { cell } => cell.clone(),
            NodeKind::PassThrough { cell, .. } => format!("passthrough:{cell}"),
            NodeKind::AuxInput => "aux".into(),
            NodeKind::ConstSource(b) => format!("const{}", *b as u8),
            NodeKind::Faulted { base, replacement } => format!("{}->{replacement}", base.type_name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub src: NodeId,
    pub src_pin: String,
    pub dst: NodeId,
    pub dst_pin: String,
}

/// A cyclic register cut into a current-state input and a next-state sink.
#[derive(Debug, Clone, PartialEq)]
pub struct RegisterSplit {
    pub cell: String,
    /// `(output pin, aux node)` for every output pin that had fan-out.
    pub state: Vec<(String, NodeId)>,
    pub next: Option<NodeId>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("graph is cyclic (through {0:?})")]
    CyclicGraph(Vec<String>),
    #[error("unknown cell type `{0}`")]
    UnknownCell(String),
    #[error("node `{node}` has no value for pin `{pin}`")]
    MissingValue { node: String, pin: String },
    #[error("node `{node}`: cell `{cell}` has no function for `{pin}`")]
    NoFunction { node: String, cell: String, pin: String },
    #[error("replacement `{replacement}` does not fit node `{node}`: {reason}")]
    ArityMismatch { node: String, replacement: String, reason: String },
    #[error("invalid graph JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone)]
pub struct CircuitGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub cells: Arc<CellLibrary>,
    pub splits: BTreeMap<String, RegisterSplit>,
    index: HashMap<String, NodeId>,
}

impl PartialEq for CircuitGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges && self.splits == other.splits
    }
}

/// Per-node incoming and outgoing edge indices.
pub struct Adjacency {
    pub incoming: Vec<Vec<usize>>,
    pub outgoing: Vec<Vec<usize>>,
}

impl CircuitGraph {
    pub fn new(cells: Arc<CellLibrary>) -> Self {
        CircuitGraph { nodes: Vec::new(), edges: Vec::new(), cells, splits: BTreeMap::new(), index: HashMap::new() }
    }

    pub fn add_node(&mut self, name: impl Into<String>, kind: NodeKind) -> NodeId {
        let name = name.into();
        let id = self.nodes.len();
        let prev = self.index.insert(name.clone(), id);
        debug_assert!(prev.is_none(), "duplicate node name {name}");
        self.nodes.push(Node { name, kind });
        id
    }

    pub fn add_edge(&mut self, src: NodeId, src_pin: impl Into<String>, dst: NodeId, dst_pin: impl Into<String>) {
        self.edges.push(Edge { src, src_pin: src_pin.into(), dst, dst_pin: dst_pin.into() });
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id].name
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn unique_name(&self, base: &str) -> String {
        if !self.index.contains_key(base) {
            return base.to_string();
        }
        (1..).map(|i| format!("{base}#{i}")).find(|n| !self.index.contains_key(n)).unwrap()
    }

    pub fn adjacency(&self) -> Adjacency {
        let mut incoming = vec![Vec::new(); self.nodes.len()];
        let mut outgoing = vec![Vec::new(); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            outgoing[e.src].push(i);
            incoming[e.dst].push(i);
        }
        Adjacency { incoming, outgoing }
    }

    pub fn cell_def(&self, name: &str) -> Result<&CellDefinition, GraphError> {
        self.cells.get(name).ok_or_else(|| GraphError::UnknownCell(name.to_string()))
    }

    pub fn is_sequential(&self, id: NodeId) -> bool {
        match &self.nodes[id].kind {
            NodeKind::Cell { cell } => self.cells.get(cell).is_some_and(|c| c.is_sequential),
            _ => false,
        }
    }

    /// Cells, pass-throughs and faulted nodes: everything carrying logic.
    pub fn is_logic(&self, id: NodeId) -> bool {
        matches!(self.nodes[id].kind, NodeKind::Cell { .. } | NodeKind::PassThrough { .. } | NodeKind::Faulted { .. })
    }

    /// The library cell type behind a logic node.
    pub fn cell_type(&self, id: NodeId) -> Option<&str> {
        fn of(kind: &NodeKind) -> Option<&str> {
            match kind {
                NodeKind::Cell { cell } | NodeKind::PassThrough { cell, .. } => Some(cell),
                NodeKind::Faulted { base, .. } => of(base),
                _ => None,
            }
        }
        of(&self.nodes[id].kind)
    }

    fn kind_input_pins(&self, kind: &NodeKind) -> Result<Vec<String>, GraphError> {
        Ok(match kind {
            NodeKind::InputPort | NodeKind::AuxInput | NodeKind::ConstSource(_) => Vec::new(),
            NodeKind::OutputPort => vec![OUTPUT_PORT_PIN.to_string()],
            NodeKind::Cell { cell } => self.cell_def(cell)?.input_pins.clone(),
            NodeKind::PassThrough { data_pin, .. } => vec![data_pin.clone()],
            NodeKind::Faulted { base, .. } => self.kind_input_pins(base)?,
        })
    }

    fn kind_output_pins(&self, kind: &NodeKind) -> Result<Vec<String>, GraphError> {
        Ok(match kind {
            NodeKind::InputPort => vec![INPUT_PORT_PIN.to_string()],
            NodeKind::OutputPort | NodeKind::AuxInput | NodeKind::ConstSource(_) => Vec::new(),
            NodeKind::Cell { cell } | NodeKind::PassThrough { cell, .. } => self.cell_def(cell)?.output_pins.clone(),
            NodeKind::Faulted { base, .. } => self.kind_output_pins(base)?,
        })
    }

    /// Input pins that must be driven. Output ports have the single pin `o`.
    pub fn input_pins(&self, id: NodeId) -> Result<Vec<String>, GraphError> {
        self.kind_input_pins(&self.nodes[id].kind)
    }

    /// Declared output pins; empty for single-valued kinds (any pin name is
    /// accepted on those).
    pub fn output_pins(&self, id: NodeId) -> Result<Vec<String>, GraphError> {
        self.kind_output_pins(&self.nodes[id].kind)
    }

    /// Function of one output pin over the node's own input pin names.
    pub fn node_function(&self, id: NodeId, out_pin: &str) -> Result<BoolExpr, GraphError> {
        let node = &self.nodes[id];
        let missing = |cell: &str| GraphError::NoFunction { node: node.name.clone(), cell: cell.to_string(), pin: out_pin.to_string() };
        match &node.kind {
            NodeKind::Cell { cell } | NodeKind::PassThrough { cell, .. } => {
                self.cell_def(cell)?.function(out_pin).cloned().ok_or_else(|| missing(cell))
            }
            NodeKind::Faulted { base, replacement } => {
                let inputs = self.kind_input_pins(base)?;
                let outputs = self.kind_output_pins(base)?;
                let rep = self.cell_def(replacement)?;
                let j = outputs.iter().position(|p| p == out_pin).ok_or_else(|| missing(replacement))?;
                let rep_out = rep.output_pins.get(j).ok_or_else(|| GraphError::ArityMismatch {
                    node: node.name.clone(),
                    replacement: replacement.clone(),
                    reason: format!("no output at position {j}"),
                })?;
                let f = rep.function(rep_out).ok_or_else(|| missing(replacement))?;
                let mut bind = |v: &String| {
                    let i = rep.input_index(v).expect("declared pin");
                    inputs.get(i).cloned().ok_or_else(|| GraphError::ArityMismatch {
                        node: node.name.clone(),
                        replacement: replacement.clone(),
                        reason: format!("no input at position {i}"),
                    })
                };
                f.try_map_vars(&mut bind)
            }
            NodeKind::ConstSource(b) => Ok(BoolExpr::Const(*b)),
            _ => Err(missing(&node.kind.type_name())),
        }
    }

    /// Nodes lying on some directed path from `sources` to `sinks`.
    pub fn nodes_between(&self, sources: &BTreeSet<NodeId>, sinks: &BTreeSet<NodeId>) -> Result<BTreeSet<NodeId>, GraphError> {
        for &n in sources.iter().chain(sinks) {
            if n >= self.nodes.len() {
                return Err(GraphError::UnknownNode(format!("#{n}")));
            }
        }
        let adj = self.adjacency();
        let fwd = self.reach(sources, &adj.outgoing, |e| e.dst);
        let bwd = self.reach(sinks, &adj.incoming, |e| e.src);
        Ok((0..self.nodes.len()).filter(|&n| fwd[n] && bwd[n]).collect())
    }

    fn reach(&self, start: &BTreeSet<NodeId>, adj: &[Vec<usize>], next: impl Fn(&Edge) -> NodeId) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue: VecDeque<NodeId> = start.iter().copied().collect();
        for &s in start {
            seen[s] = true;
        }
        while let Some(n) = queue.pop_front() {
            for &ei in &adj[n] {
                let m = next(&self.edges[ei]);
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        seen
    }

    /// Strongly connected components (Tarjan, iterative). Components come
    /// out in reverse topological order.
    pub fn strongly_connected_components(&self) -> Vec<Vec<NodeId>> {
        let n = self.nodes.len();
        let mut succ = vec![Vec::new(); n];
        for e in &self.edges {
            succ[e.src].push(e.dst);
        }
        const UNSET: usize = usize::MAX;
        let mut index = vec![UNSET; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut comps = Vec::new();
        let mut counter = 0;
        for root in 0..n {
            if index[root] != UNSET {
                continue;
            }
            let mut call: Vec<(NodeId, usize)> = vec![(root, 0)];
            index[root] = counter;
            low[root] = counter;
            counter += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut i)) = call.last_mut() {
                if *i < succ[v].len() {
                    let w = succ[v][*i];
                    *i += 1;
                    if index[w] == UNSET {
                        index[w] = counter;
                        low[w] = counter;
                        counter += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    call.pop();
                    if let Some(&(parent, _)) = call.last() {
                        low[parent] = low[parent].min(low[v]);
                    }
                    if low[v] == index[v] {
                        let mut comp = Vec::new();
                        loop {
                            let w = stack.pop().unwrap();
                            on_stack[w] = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        comps.push(comp);
                    }
                }
            }
        }
        comps
    }

    /// Sequential nodes lying on a directed cycle.
    pub fn sequential_cycle_nodes(&self) -> BTreeSet<NodeId> {
        let self_loops: BTreeSet<NodeId> = self.edges.iter().filter(|e| e.src == e.dst).map(|e| e.src).collect();
        let mut out = BTreeSet::new();
        for comp in self.strongly_connected_components() {
            for &v in &comp {
                if (comp.len() > 1 || self_loops.contains(&v)) && self.is_sequential(v) {
                    out.insert(v);
                }
            }
        }
        out
    }

    /// Topological order of all nodes, or the nodes of one cycle.
    pub fn topological_order(&self) -> Result<Vec<NodeId>, GraphError> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        let adj = self.adjacency();
        for e in &self.edges {
            indeg[e.dst] += 1;
        }
        let mut ready: VecDeque<NodeId> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_front() {
            order.push(v);
            for &ei in &adj.outgoing[v] {
                let w = self.edges[ei].dst;
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.push_back(w);
                }
            }
        }
        if order.len() == n {
            return Ok(order);
        }
        let mut cyclic: Vec<String> = self
            .strongly_connected_components()
            .into_iter()
            .find(|c| c.len() > 1 || self.edges.iter().any(|e| e.src == c[0] && e.dst == c[0]))
            .unwrap_or_default()
            .into_iter()
            .map(|v| self.nodes[v].name.clone())
            .collect();
        cyclic.sort();
        Err(GraphError::CyclicGraph(cyclic))
    }

    /// Restrict to `keep`; edges survive when both endpoints are kept.
    /// Returns the new graph and the old-to-new id map.
    pub fn induced_subgraph_with_map(&self, keep: &BTreeSet<NodeId>) -> (CircuitGraph, BTreeMap<NodeId, NodeId>) {
        let mut g = CircuitGraph::new(self.cells.clone());
        let mut map = BTreeMap::new();
        for &old in keep {
            let node = &self.nodes[old];
            map.insert(old, g.add_node(node.name.clone(), node.kind.clone()));
        }
        for e in &self.edges {
            if let (Some(&s), Some(&d)) = (map.get(&e.src), map.get(&e.dst)) {
                g.add_edge(s, e.src_pin.clone(), d, e.dst_pin.clone());
            }
        }
        for (name, split) in &self.splits {
            let state: Vec<_> = split.state.iter().filter_map(|(p, n)| map.get(n).map(|m| (p.clone(), *m))).collect();
            let next = split.next.and_then(|n| map.get(&n).copied());
            if next.is_some() || !state.is_empty() {
                g.splits.insert(name.clone(), RegisterSplit { cell: split.cell.clone(), state, next });
            }
        }
        (g, map)
    }

    pub fn induced_subgraph(&self, keep: &BTreeSet<NodeId>) -> CircuitGraph {
        self.induced_subgraph_with_map(keep).0
    }

    /// Evaluate every node output under bit-parallel source values.
    ///
    /// `source` supplies values for input ports and auxiliary inputs, and may
    /// override any `(node, pin)` output (used for defined inputs). Output
    /// ports get the value of their driver under pin `o`.
    pub fn evaluate(&self, source: &dyn Fn(NodeId, &str) -> Option<u64>) -> Result<Values, GraphError> {
        let order = self.topological_order()?;
        let adj = self.adjacency();
        let mut values = Values { per_node: vec![BTreeMap::new(); self.nodes.len()] };
        for v in order {
            let node = &self.nodes[v];
            if node.kind.is_single_valued() {
                let x = match (&node.kind, source(v, "")) {
                    (_, Some(x)) => x,
                    (NodeKind::ConstSource(b), None) => {
                        if *b {
                            !0
                        } else {
                            0
                        }
                    }
                    _ => return Err(GraphError::MissingValue { node: node.name.clone(), pin: String::new() }),
                };
                values.per_node[v].insert(String::new(), x);
                continue;
            }
            let mut inputs: BTreeMap<&str, u64> = BTreeMap::new();
            for &ei in &adj.incoming[v] {
                let e = &self.edges[ei];
                inputs.insert(&e.dst_pin, values.get(self, e.src, &e.src_pin)?);
            }
            if node.kind == NodeKind::OutputPort {
                let x = *inputs
                    .get(OUTPUT_PORT_PIN)
                    .or_else(|| inputs.values().next())
                    .ok_or_else(|| GraphError::MissingValue { node: node.name.clone(), pin: OUTPUT_PORT_PIN.into() })?;
                values.per_node[v].insert(OUTPUT_PORT_PIN.to_string(), x);
                continue;
            }
            for pin in self.output_pins(v)? {
                let x = match source(v, &pin) {
                    Some(x) => x,
                    None => {
                        let f = self.node_function(v, &pin)?;
                        let mut missing = None;
                        let x = f.eval_words(&|p: &String| match inputs.get(p.as_str()) {
                            Some(x) => *x,
                            None => 0,
                        });
                        f.for_each_var(&mut |p| {
                            if missing.is_none() && !inputs.contains_key(p.as_str()) {
                                missing = Some(p.clone());
                            }
                        });
                        if let Some(pin) = missing {
                            return Err(GraphError::MissingValue { node: node.name.clone(), pin });
                        }
                        x
                    }
                };
                values.per_node[v].insert(pin, x);
            }
        }
        Ok(values)
    }

    // -----------------------------------------------------------------------
    // exports

    /// Node/edge JSON: `{"Nodes": {name: {"type": ..}}, "Edges": {"1": {"out": .., "in": ..}}}`.
    pub fn to_json(&self) -> Value {
        let mut nodes = serde_json::Map::new();
        for n in &self.nodes {
            let v = match &n.kind {
                NodeKind::PassThrough { cell, data_pin } => json!({"type": "passthrough", "cell": cell, "data_pin": data_pin}),
                NodeKind::Faulted { base, replacement } => json!({"type": "faulted", "base": base.type_name(), "replacement": replacement}),
                k => json!({"type": k.type_name()}),
            };
            nodes.insert(n.name.clone(), v);
        }
        let mut edges = serde_json::Map::new();
        for (i, e) in self.edges.iter().enumerate() {
            edges.insert(
                (i + 1).to_string(),
                json!({
                    "out": {"node": self.nodes[e.src].name, "port": e.src_pin},
                    "in": {"node": self.nodes[e.dst].name, "port": e.dst_pin},
                }),
            );
        }
        json!({"Nodes": nodes, "Edges": edges})
    }

    /// Import the JSON graph shape produced by [`CircuitGraph::to_json`].
    pub fn from_json(text: &str, cells: Arc<CellLibrary>) -> Result<CircuitGraph, GraphError> {
        let err = |m: String| GraphError::Json(m);
        let v: Value = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
        let mut g = CircuitGraph::new(cells);
        let nodes = v.get("Nodes").and_then(Value::as_object).ok_or_else(|| err("missing `Nodes` object".into()))?;
        for (name, spec) in nodes {
            let ty = spec.get("type").and_then(Value::as_str).ok_or_else(|| err(format!("node `{name}` has no type")))?;
            let kind = match ty {
                "input" => NodeKind::InputPort,
                "output" => NodeKind::OutputPort,
                "aux" => NodeKind::AuxInput,
                "const0" => NodeKind::ConstSource(false),
                "const1" => NodeKind::ConstSource(true),
                "passthrough" => {
                    let field = |k: &str| spec.get(k).and_then(Value::as_str).map(str::to_string);
                    NodeKind::PassThrough {
                        cell: field("cell").ok_or_else(|| err(format!("node `{name}`: passthrough without cell")))?,
                        data_pin: field("data_pin").ok_or_else(|| err(format!("node `{name}`: passthrough without data_pin")))?,
                    }
                }
                cell => {
                    g.cell_def(cell)?;
                    NodeKind::Cell { cell: cell.to_string() }
                }
            };
            if g.node_id(name).is_some() {
                return Err(err(format!("duplicate node `{name}`")));
            }
            g.add_node(name.clone(), kind);
        }
        let edges = v.get("Edges").and_then(Value::as_object).ok_or_else(|| err("missing `Edges` object".into()))?;
        for (key, e) in edges {
            let end = |side: &str| -> Result<(NodeId, String), GraphError> {
                let s = e.get(side).ok_or_else(|| err(format!("edge {key}: missing `{side}`")))?;
                let node = s.get("node").and_then(Value::as_str).ok_or_else(|| err(format!("edge {key}: no node")))?;
                let port = s.get("port").and_then(Value::as_str).ok_or_else(|| err(format!("edge {key}: no port")))?;
                let id = g.node_id(node).ok_or_else(|| GraphError::UnknownNode(node.to_string()))?;
                Ok((id, port.to_string()))
            };
            let (s, sp) = end("out")?;
            let (d, dp) = end("in")?;
            g.add_edge(s, sp, d, dp);
        }
        Ok(g)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph circuit {\n  rankdir=LR;\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let shape = match n.kind {
                NodeKind::InputPort | NodeKind::AuxInput => "invtriangle",
                NodeKind::OutputPort => "triangle",
                NodeKind::ConstSource(_) => "plaintext",
                NodeKind::PassThrough { .. } => "box3d",
                _ => "box",
            };
            let _ = writeln!(out, "  n{i} [label=\"{}\\n{}\", shape={shape}];", escape(&n.name), escape(&n.kind.type_name()));
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  n{} -> n{} [taillabel=\"{}\", headlabel=\"{}\"];",
                e.src,
                e.dst,
                escape(&e.src_pin),
                escape(&e.dst_pin)
            );
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Result of [`CircuitGraph::evaluate`].
#[derive(Debug, Clone)]
pub struct Values {
    per_node: Vec<BTreeMap<String, u64>>,
}

impl Values {
    pub fn get(&self, g: &CircuitGraph, node: NodeId, pin: &str) -> Result<u64, GraphError> {
        let m = &self.per_node[node];
        let key = if g.nodes[node].kind.is_single_valued() { "" } else { pin };
        m.get(key).copied().ok_or_else(|| GraphError::MissingValue { node: g.nodes[node].name.clone(), pin: pin.to_string() })
    }
}
