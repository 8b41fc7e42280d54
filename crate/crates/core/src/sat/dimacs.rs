use std::fmt::Write as _;

use super::{Cnf, SatResult, SolverError};

/// `p cnf V C` followed by one zero-terminated line per clause.
pub fn emit_dimacs(cnf: &Cnf) -> String {
    let mut s = String::with_capacity(16 + cnf.clauses.len() * 12);
    let _ = writeln!(s, "p cnf {} {}", cnf.num_vars, cnf.clauses.len());
    for c in &cnf.clauses {
        for l in c {
            let _ = write!(s, "{l} ");
        }
        s.push_str("0\n");
    }
    s
}

pub fn parse_dimacs(text: &str) -> Result<Cnf, SolverError> {
    let mut cnf = Cnf::default();
    let mut declared: Option<(usize, usize)> = None;
    let mut current = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let err = |reason: &str| SolverError::Dimacs { line: i + 1, reason: reason.to_string() };
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("p") {
            let f: Vec<&str> = rest.split_whitespace().collect();
            match f.as_slice() {
                ["cnf", v, c] => {
                    let v = v.parse().map_err(|_| err("bad variable count"))?;
                    let c = c.parse().map_err(|_| err("bad clause count"))?;
                    declared = Some((v, c));
                    cnf.num_vars = v;
                }
                _ => return Err(err("expected `p cnf VARS CLAUSES`")),
            }
            continue;
        }
        let Some((nv, _)) = declared else { return Err(err("clause before header")) };
        for tok in line.split_whitespace() {
            let l: i32 = tok.parse().map_err(|_| err("bad literal"))?;
            if l == 0 {
                cnf.clauses.push(std::mem::take(&mut current));
            } else if l.unsigned_abs() as usize > nv {
                return Err(err("literal exceeds the declared variable count"));
            } else {
                current.push(l);
            }
        }
    }
    if !current.is_empty() {
        cnf.clauses.push(current);
    }
    match declared {
        None => Err(SolverError::Dimacs { line: 0, reason: "missing header".into() }),
        Some((_, c)) if c != cnf.clauses.len() => Err(SolverError::Dimacs {
            line: 0,
            reason: format!("header declares {c} clauses, found {}", cnf.clauses.len()),
        }),
        _ => Ok(cnf),
    }
}

/// Read the SAT competition output format (`s ...` and `v ...` lines).
/// Solvers that print no status line are judged by their exit code
/// (10 = SAT, 20 = UNSAT); a satisfiable answer without a model is an
/// error.
pub fn parse_solver_output(stdout: &str, exit_code: Option<i32>, num_vars: usize) -> Result<SatResult, SolverError> {
    let mut status: Option<&str> = None;
    let mut model = vec![false; num_vars];
    let mut saw_values = false;
    for line in stdout.lines() {
        let line = line.trim();
        if let Some(s) = line.strip_prefix("s ") {
            status = Some(s.trim());
        } else if let Some(v) = line.strip_prefix("v ") {
            saw_values = true;
            for tok in v.split_whitespace() {
                let l: i64 = tok.parse().map_err(|_| SolverError::Output(format!("bad model literal `{tok}`")))?;
                let idx = l.unsigned_abs() as usize;
                if l != 0 && idx <= num_vars {
                    model[idx - 1] = l > 0;
                }
            }
        }
    }
    let status = match (status, exit_code) {
        (Some(s), _) => s.to_string(),
        (None, Some(10)) => "SATISFIABLE".into(),
        (None, Some(20)) => "UNSATISFIABLE".into(),
        (None, code) => return Err(SolverError::Output(format!("no status line (exit code {code:?})"))),
    };
    match status.as_str() {
        "SATISFIABLE" if saw_values || num_vars == 0 => Ok(SatResult::Sat(model)),
        "SATISFIABLE" => Err(SolverError::Output("satisfiable but no model printed".into())),
        "UNSATISFIABLE" => Ok(SatResult::Unsat),
        "UNKNOWN" => Ok(SatResult::Unknown("external solver gave up".into())),
        other => Err(SolverError::Output(format!("unknown status `{other}`"))),
    }
}
