//! Run a whole fault-injection campaign and print the summary table and
//! the first few effective faults.
//!
//!     cargo run --release --example campaign [-- JOBS]

use netlist_fi::campaign::{load_design, run_models, summarize, CampaignOptions};
use netlist_fi::demos::{demo_library, tmr_counter_demo};
use netlist_fi::fault_spec::parse_fault_spec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let jobs = std::env::args().nth(1).map(|j| j.parse()).transpose()?.unwrap_or(1);
    let demo = tmr_counter_demo();
    let design = load_design(&demo_library(), &demo.netlist, &Default::default(), None)?;
    let options = CampaignOptions { jobs, ..Default::default() };
    let report = run_models(&design, &parse_fault_spec(&demo.spec)?, &options)?;
    print!("{}", summarize(&report));
    for m in &report.models {
        for rec in m.effective_faults.iter().take(3) {
            let faults: Vec<String> = rec.faults.iter().map(|f| format!("{}:{}->{}", f.location, f.cell, f.replacement)).collect();
            println!("{} #{}: {}", m.name, rec.index, faults.join(", "));
        }
    }
    Ok(())
}
