pub mod campaign;
pub mod demos;
pub mod diff;
pub mod expr;
pub mod fault_spec;
pub mod graph;
pub mod liberty;
pub mod netlist;
pub mod sat;
pub mod target;
