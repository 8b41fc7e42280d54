//! Build the differential graph of every single-fault configuration and
//! decide it with the internal CDCL solver. Brute force over the free
//! inputs cross-checks each verdict.
//!
//!     cargo run --example differential_sat

use netlist_fi::campaign::{load_design, prepare_model};
use netlist_fi::demos::{demo_library, two_gate_demo};
use netlist_fi::diff::{brute_force_verdict, evaluate, DEFAULT_BRUTE_FORCE_BOUND};
use netlist_fi::fault_spec::parse_fault_spec;
use netlist_fi::sat::Cdcl;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demo = two_gate_demo();
    let design = load_design(&demo_library(), &demo.netlist, &Default::default(), None)?;
    let model = &parse_fault_spec(&demo.spec)?[0];
    let prepared = prepare_model(&design, model, Some(1))?;
    for config in prepared.configs() {
        let faults: Vec<String> =
            config.faults.iter().map(|(v, r)| format!("{}={r}", prepared.target.graph.name(*v))).collect();
        let diff = prepared.differential(&config)?;
        let sat = evaluate(&diff, &Cdcl::default())?;
        let bf = brute_force_verdict(&diff, DEFAULT_BRUTE_FORCE_BOUND)?;
        assert_eq!(sat.is_effective(), bf.is_effective());
        print!(
            "{:<12} {:?} ({} vars, {} clauses)",
            faults.join(" "),
            sat.status,
            sat.stats.variables,
            sat.stats.clauses
        );
        if let Some(w) = &sat.witness {
            let w: Vec<String> = w.iter().map(|(n, b)| format!("{n}={}", *b as u8)).collect();
            print!("  witness {}", w.join(" "));
        }
        println!();
    }
    Ok(())
}
