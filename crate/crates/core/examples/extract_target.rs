//! Extract the target graph of a fault model and print it as JSON.
//!
//!     cargo run --example extract_target

use std::collections::BTreeMap;

use netlist_fi::campaign::load_design;
use netlist_fi::demos::{demo_library, tmr_counter_demo};
use netlist_fi::fault_spec::parse_fault_spec;
use netlist_fi::target::extract_target;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demo = tmr_counter_demo();
    let design = load_design(&demo_library(), &demo.netlist, &BTreeMap::new(), None)?;
    for w in &design.warnings {
        eprintln!("warning: {w}");
    }
    for model in parse_fault_spec(&demo.spec)? {
        let target = extract_target(&design.graph, &model.spec)?;
        println!(
            "# {} ({:?}): {} of {} nodes kept, {} free inputs, {:.2} GE",
            model.name,
            model.mode,
            target.graph.len(),
            design.graph.len(),
            target.free_inputs.len(),
            target.ge
        );
        println!("{}", serde_json::to_string_pretty(&target.to_json())?);
    }
    Ok(())
}
