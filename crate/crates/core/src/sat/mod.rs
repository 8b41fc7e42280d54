//! CNF formulas, the Tseitin encoding of differential graphs, and the
//! satisfiability procedures behind a common trait.

mod cdcl;
mod dimacs;
mod external;

pub use cdcl::{Cdcl, CdclStats};
pub use dimacs::{emit_dimacs, parse_dimacs, parse_solver_output};
pub use external::ExternalSolver;

use thiserror::Error;

use crate::diff::{DiffGraph, DiffOp};
use crate::expr::BoolExpr;

/// Signed DIMACS literal: `v` or `-v` for variable `v >= 1`.
pub type Lit = i32;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Cnf {
    pub num_vars: usize,
    pub clauses: Vec<Vec<Lit>>,
    /// Variable of each differential-graph node, by node index.
    pub node_vars: Vec<Lit>,
    pub root: Lit,
}

impl Cnf {
    pub fn new_var(&mut self) -> Lit {
        self.num_vars += 1;
        self.num_vars as Lit
    }

    pub fn add_clause(&mut self, clause: Vec<Lit>) {
        debug_assert!(clause.iter().all(|l| *l != 0 && l.unsigned_abs() as usize <= self.num_vars));
        self.clauses.push(clause);
    }

    /// Whether `model` (indexed by variable - 1) satisfies every clause.
    pub fn satisfied_by(&self, model: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|&l| model[l.unsigned_abs() as usize - 1] == (l > 0)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    /// Total model indexed by variable - 1.
    Sat(Vec<bool>),
    Unsat,
    /// Resource limit hit before a decision.
    Unknown(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("solver process: {0}")]
    Process(String),
    #[error("unreadable solver output: {0}")]
    Output(String),
    #[error("malformed DIMACS at line {line}: {reason}")]
    Dimacs { line: usize, reason: String },
}

/// Solver-side counters reported with each verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveStats {
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
}

/// A complete decision procedure for CNF.
pub trait SatSolver: Send + Sync {
    fn solve(&self, cnf: &Cnf) -> Result<(SatResult, SolveStats), SolverError>;
}

struct Encoder {
    cnf: Cnf,
    true_var: Option<Lit>,
}

impl Encoder {
    fn constant(&mut self, b: bool) -> Lit {
        let t = match self.true_var {
            Some(t) => t,
            None => {
                let t = self.cnf.new_var();
                self.cnf.add_clause(vec![t]);
                self.true_var = Some(t);
                t
            }
        };
        if b {
            t
        } else {
            -t
        }
    }

    /// Literal equal to `e`. When `out` is given, the top operator is
    /// defined directly on that literal.
    fn encode(&mut self, e: &BoolExpr<usize>, out: Option<Lit>) -> Lit {
        match e {
            BoolExpr::Not(x) => -self.encode(x, out.map(|o| -o)),
            BoolExpr::Var(_) | BoolExpr::Const(_) => {
                let l = match e {
                    BoolExpr::Var(i) => self.cnf.node_vars[*i],
                    BoolExpr::Const(b) => self.constant(*b),
                    _ => unreachable!(),
                };
                if let Some(o) = out {
                    self.cnf.add_clause(vec![-o, l]);
                    self.cnf.add_clause(vec![o, -l]);
                    return o;
                }
                l
            }
            BoolExpr::And(xs) | BoolExpr::Or(xs) => {
                let is_and = matches!(e, BoolExpr::And(_));
                let lits: Vec<Lit> = xs.iter().map(|x| self.encode(x, None)).collect();
                let y = out.unwrap_or_else(|| self.cnf.new_var());
                // OR is AND with every literal negated.
                let (y, lits): (Lit, Vec<Lit>) = if is_and { (y, lits) } else { (-y, lits.iter().map(|l| -l).collect()) };
                let mut long = vec![y];
                for &l in &lits {
                    self.cnf.add_clause(vec![-y, l]);
                    long.push(-l);
                }
                self.cnf.add_clause(long);
                if is_and {
                    y
                } else {
                    -y
                }
            }
            BoolExpr::Xor(a, b) => {
                let (a, b) = (self.encode(a, None), self.encode(b, None));
                let y = out.unwrap_or_else(|| self.cnf.new_var());
                self.cnf.add_clause(vec![-y, a, b]);
                self.cnf.add_clause(vec![-y, -a, -b]);
                self.cnf.add_clause(vec![y, -a, b]);
                self.cnf.add_clause(vec![y, a, -b]);
                y
            }
        }
    }
}

/// Tseitin encoding: one variable per differential node (plus one per
/// nested operator), constants as unit clauses, inputs unconstrained, and
/// the root asserted.
pub fn tseitin(diff: &DiffGraph) -> Cnf {
    let n = diff.nodes.len();
    let mut enc = Encoder { cnf: Cnf { num_vars: n, node_vars: (1..=n as Lit).collect(), ..Default::default() }, true_var: None };
    for (i, node) in diff.nodes.iter().enumerate() {
        let y = enc.cnf.node_vars[i];
        match &node.op {
            DiffOp::Input => {}
            DiffOp::Const(b) => enc.cnf.add_clause(vec![if *b { y } else { -y }]),
            DiffOp::Expr(e) => {
                enc.encode(e, Some(y));
            }
        }
    }
    enc.cnf.root = enc.cnf.node_vars[diff.root];
    enc.cnf.add_clause(vec![enc.cnf.root]);
    enc.cnf
}
