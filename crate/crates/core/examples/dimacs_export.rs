//! Encode a differential graph in CNF, write it as DIMACS, then read it
//! back and solve it.
//!
//!     cargo run --example dimacs_export [-- out.cnf]

use netlist_fi::campaign::{load_design, prepare_model};
use netlist_fi::demos::{demo_library, sp2v_demo};
use netlist_fi::fault_spec::parse_fault_spec;
use netlist_fi::sat::{emit_dimacs, parse_dimacs, tseitin, Cdcl, SatResult, SatSolver};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demo = sp2v_demo();
    let design = load_design(&demo_library(), &demo.netlist, &Default::default(), None)?;
    let prepared = prepare_model(&design, &parse_fault_spec(&demo.spec)?[0], Some(3))?;
    let config = prepared.configs().next().expect("at least one configuration");
    let diff = prepared.differential(&config)?;
    let cnf = tseitin(&diff);
    let text = emit_dimacs(&cnf);
    match std::env::args().nth(1) {
        Some(path) => std::fs::write(&path, &text)?,
        None => print!("{}", text.lines().take(8).map(|l| format!("{l}\n")).collect::<String>()),
    }
    let (result, stats) = Cdcl::default().solve(&parse_dimacs(&text)?)?;
    let answer = match result {
        SatResult::Sat(_) => "satisfiable (effective)",
        SatResult::Unsat => "unsatisfiable (ineffective)",
        SatResult::Unknown(_) => "unknown",
    };
    println!("{} vars, {} clauses: {answer}, {} conflicts", cnf.num_vars, cnf.clauses.len(), stats.conflicts);
    Ok(())
}
