//! Parse a Liberty file (the bundled demo library by default) and list its
//! cells with their functions and areas.
//!
//!     cargo run --example parse_liberty [-- path/to/cells.lib]

use netlist_fi::demos::DEMO_LIBERTY;
use netlist_fi::liberty::parse_liberty;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => DEMO_LIBERTY.to_string(),
    };
    let lib = parse_liberty(&text)?;
    println!("library {} ({} cells, NAND2 area {:?})", lib.name, lib.cells.len(), lib.nand2_area);
    for cell in lib.cells.values() {
        let kind = if cell.is_sequential { "seq " } else { "comb" };
        println!("  {kind} {:<10} area {:>6.3}", cell.name, cell.area.unwrap_or(0.0));
        for (pin, f) in &cell.functions {
            let table = cell.truth_table(pin).map(|t| format!("{t:#x}")).unwrap_or_default();
            println!("         {pin} = {f}  truth table {table}");
        }
    }
    Ok(())
}
