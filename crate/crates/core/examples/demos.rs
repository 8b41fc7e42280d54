//! Describe the bundled demo circuits and write them to a directory.
//!
//!     cargo run --example demos [-- OUT_DIR]

use netlist_fi::demos::{all_demos, generate_demos};

fn main() -> std::io::Result<()> {
    for d in all_demos() {
        println!("{:<12} {}", d.name, d.description);
    }
    if let Some(out) = std::env::args().nth(1) {
        for f in generate_demos(out.as_ref())? {
            println!("wrote {}", f.display());
        }
    }
    Ok(())
}
