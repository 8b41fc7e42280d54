use std::io::Write as _;
use std::path::PathBuf;
use std::process::Command;

use super::{emit_dimacs, parse_solver_output, Cnf, SatResult, SatSolver, SolveStats, SolverError};

/// Any solver binary that takes a DIMACS file path as its last argument
/// and answers in the competition output format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalSolver {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl ExternalSolver {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        ExternalSolver { program: program.into(), args: Vec::new() }
    }
}

impl SatSolver for ExternalSolver {
    fn solve(&self, cnf: &Cnf) -> Result<(SatResult, SolveStats), SolverError> {
        let perr = |e: std::io::Error| SolverError::Process(format!("{}: {e}", self.program.display()));
        let mut file = tempfile::Builder::new().prefix("netlist-fi-").suffix(".cnf").tempfile().map_err(perr)?;
        file.write_all(emit_dimacs(cnf).as_bytes()).map_err(perr)?;
        file.flush().map_err(perr)?;
        let out = Command::new(&self.program).args(&self.args).arg(file.path()).output().map_err(perr)?;
        let stdout = String::from_utf8_lossy(&out.stdout);
        let result = parse_solver_output(&stdout, out.status.code(), cnf.num_vars)?;
        if let SatResult::Sat(model) = &result {
            if !cnf.satisfied_by(model) {
                return Err(SolverError::Output("model does not satisfy the formula".into()));
            }
        }
        Ok((result, SolveStats::default()))
    }
}
