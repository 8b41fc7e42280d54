//! Turn a structural Verilog module into a circuit graph and evaluate it
//! on all input assignments at once.
//!
//!     cargo run --example netlist_graph

use std::collections::BTreeMap;

use netlist_fi::demos::{demo_library, two_gate_demo};
use netlist_fi::graph::NodeKind;
use netlist_fi::netlist::{build_graph, parse_netlist, select_top};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let modules = parse_netlist(&two_gate_demo().netlist)?;
    let top = select_top(&modules, None)?;
    let (g, dangling) = build_graph(top, &demo_library(), &BTreeMap::new())?;
    println!("module {}: {} nodes, {} edges, {} dangling inputs", top.name, g.len(), g.edges.len(), dangling.len());
    for v in g.topological_order()? {
        let inputs: Vec<String> =
            g.edges.iter().filter(|e| e.dst == v).map(|e| format!("{}.{}", g.name(e.src), e.src_pin)).collect();
        println!("  {:<6} {:<12} <- {}", g.name(v), g.node(v).kind.type_name(), inputs.join(", "));
    }

    // Input port i takes the i-th column of a 64-row truth table.
    let ports: Vec<_> = (0..g.len()).filter(|&v| matches!(g.node(v).kind, NodeKind::InputPort)).collect();
    let column = |i: usize| (0..64u64).fold(0u64, |w, row| w | (((row >> i) & 1) << row));
    let values = g.evaluate(&|v, _pin| ports.iter().position(|&p| p == v).map(column))?;
    for v in (0..g.len()).filter(|&v| matches!(g.node(v).kind, NodeKind::OutputPort)) {
        let rows = 1u64 << ports.len();
        let word = values.get(&g, v, "o")? & if rows >= 64 { !0 } else { (1 << rows) - 1 };
        println!("  output {} truth table {word:#x}", g.name(v));
    }
    Ok(())
}
