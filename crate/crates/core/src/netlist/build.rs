use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::graph::{CircuitGraph, NodeId, NodeKind, INPUT_PORT_PIN, OUTPUT_PORT_PIN};
use crate::liberty::{CellDefinition, CellLibrary};

use super::{Direction, NetRef, NetlistError, NetlistModule};

/// An input pin (or output port) with no driver. It is tied to a fresh
/// auxiliary input named `node`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DanglingInput {
    pub instance: String,
    pub pin: String,
    pub node: String,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.parent[a.max(b)] = a.min(b);
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Driver {
    Pin(NodeId, usize),
    Const(bool),
}

/// Build the circuit graph of `module`. Library cells and submodule
/// functions are both valid instance types.
pub fn build_graph(
    module: &NetlistModule,
    library: &CellLibrary,
    submodules: &BTreeMap<String, CellDefinition>,
) -> Result<(CircuitGraph, Vec<DanglingInput>), NetlistError> {
    let mut lib = library.clone();
    for def in submodules.values() {
        lib.insert(def.clone()).map_err(|_| NetlistError::SubmoduleCollision(def.name.clone()))?;
    }
    let mut g = CircuitGraph::new(Arc::new(lib));

    // Net bits get dense ids; aliases merge them.
    let mut net_ids: HashMap<String, usize> = HashMap::new();
    let mut net_names: Vec<String> = Vec::new();
    let mut net = |name: &str| -> usize {
        if let Some(&i) = net_ids.get(name) {
            return i;
        }
        net_names.push(name.to_string());
        net_ids.insert(name.to_string(), net_names.len() - 1);
        net_names.len() - 1
    };

    // (net, driver) and (net, sink node, sink pin)
    let mut drivers: Vec<(usize, Driver)> = Vec::new();
    let mut sinks: Vec<(usize, NodeId, String)> = Vec::new();
    let mut const_sinks: Vec<(bool, NodeId, String)> = Vec::new();
    let mut dangling_pins: Vec<(NodeId, String)> = Vec::new();
    let mut src_pins: Vec<String> = Vec::new();
    let mut src_pin = |pin: &str| -> usize {
        match src_pins.iter().position(|p| p == pin) {
            Some(i) => i,
            None => {
                src_pins.push(pin.to_string());
                src_pins.len() - 1
            }
        }
    };

    for port in &module.ports {
        for bit in port.bits() {
            if g.node_id(&bit).is_some() {
                return Err(NetlistError::DuplicateName(bit));
            }
            let n = net(&bit);
            match port.direction {
                Direction::Input => {
                    let id = g.add_node(bit, NodeKind::InputPort);
                    drivers.push((n, Driver::Pin(id, src_pin(INPUT_PORT_PIN))));
                }
                Direction::Output => {
                    let id = g.add_node(bit, NodeKind::OutputPort);
                    sinks.push((n, id, OUTPUT_PORT_PIN.to_string()));
                }
            }
        }
    }

    for inst in &module.instances {
        let Some(def) = g.cells.get(&inst.cell).cloned() else {
            return Err(NetlistError::UnresolvedCell(inst.cell.clone()));
        };
        if g.node_id(&inst.name).is_some() {
            return Err(NetlistError::DuplicateName(inst.name.clone()));
        }
        let id = g.add_node(inst.name.clone(), NodeKind::Cell { cell: inst.cell.clone() });
        let unknown =
            |pin: &str| NetlistError::UnknownPin { instance: inst.name.clone(), cell: inst.cell.clone(), pin: pin.into() };
        for (pin, r) in &inst.connections {
            let is_in = def.input_pins.contains(pin);
            let is_out = def.output_pins.contains(pin);
            if !is_in && !is_out {
                return Err(unknown(pin));
            }
            match (r, is_in) {
                (NetRef::Bit(b), true) => sinks.push((net(b), id, pin.clone())),
                (NetRef::Bit(b), false) => drivers.push((net(b), Driver::Pin(id, src_pin(pin)))),
                (NetRef::Const(v), true) => const_sinks.push((*v, id, pin.clone())),
                (NetRef::Const(_), false) => {
                    return Err(NetlistError::MultipleDrivers(format!("{}/{pin} (output tied to a constant)", inst.name)))
                }
                (NetRef::Unconnected, true) => dangling_pins.push((id, pin.clone())),
                (NetRef::Unconnected, false) => {}
            }
        }
        for pin in &def.input_pins {
            if !inst.connections.iter().any(|(p, _)| p == pin) {
                dangling_pins.push((id, pin.clone()));
            }
        }
    }

    let mut uf = UnionFind { parent: Vec::new() };
    let mut const_ties: Vec<(usize, bool)> = Vec::new();
    for (lhs, rhs) in &module.assigns {
        let l = net(lhs);
        match rhs {
            NetRef::Bit(r) => {
                let r = net(r);
                uf.parent.extend(uf.parent.len()..=l.max(r));
                uf.union(l, r);
            }
            NetRef::Const(v) => const_ties.push((l, *v)),
            NetRef::Unconnected => {}
        }
    }
    uf.parent.extend(uf.parent.len()..net_names.len());
    drivers.extend(const_ties.iter().map(|&(n, v)| (n, Driver::Const(v))));

    let mut class_driver: BTreeMap<usize, Driver> = BTreeMap::new();
    for &(n, d) in &drivers {
        let c = uf.find(n);
        if let Some(prev) = class_driver.insert(c, d) {
            if prev != d {
                return Err(NetlistError::MultipleDrivers(net_names[c].clone()));
            }
        }
    }

    let mut consts: [Option<NodeId>; 2] = [None, None];
    let mut const_node = |g: &mut CircuitGraph, v: bool| -> NodeId {
        *consts[v as usize].get_or_insert_with(|| {
            let name = g.unique_name(if v { "1'b1" } else { "1'b0" });
            g.add_node(name, NodeKind::ConstSource(v))
        })
    };

    let mut dangling = Vec::new();
    for (n, dst, pin) in sinks {
        match class_driver.get(&uf.find(n)) {
            Some(Driver::Pin(src, sp)) => g.add_edge(*src, src_pins[*sp].clone(), dst, pin),
            Some(Driver::Const(v)) => {
                let c = const_node(&mut g, *v);
                g.add_edge(c, INPUT_PORT_PIN, dst, pin);
            }
            None => dangling_pins.push((dst, pin)),
        }
    }
    for (v, dst, pin) in const_sinks {
        let c = const_node(&mut g, v);
        g.add_edge(c, INPUT_PORT_PIN, dst, pin);
    }
    for (dst, pin) in dangling_pins {
        let instance = g.name(dst).to_string();
        let base = if g.node(dst).kind == NodeKind::OutputPort {
            format!("aux:{instance}")
        } else {
            format!("aux:{instance}/{pin}")
        };
        let name = g.unique_name(&base);
        let aux = g.add_node(name.clone(), NodeKind::AuxInput);
        g.add_edge(aux, INPUT_PORT_PIN, dst, pin.clone());
        dangling.push(DanglingInput { instance, pin, node: name });
    }
    Ok((g, dangling))
}
