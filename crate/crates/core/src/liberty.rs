//! Standard-cell library: liberty subset parser, JSON frontend, and the
//! reference cell evaluator.
//!
//! Only `library`, `cell`, `pin`, `ff` and `latch` groups are interpreted.
//! Every other group is skipped by balanced-brace scanning, so timing and
//! power tables never have to be understood.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_bool_expr_with, BoolExpr, ExprError};

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("malformed liberty at line {line}: {reason}")]
    MalformedLiberty { line: usize, reason: String },
    #[error("duplicate cell `{0}`")]
    DuplicateCell(String),
    #[error("invalid cell library JSON: {0}")]
    Json(String),
    #[error("cell `{cell}`: {source}")]
    Function { cell: String, source: ExprError },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("assignment is missing input pin `{0}`")]
    MissingPin(String),
    #[error("no function for output pin `{0}`")]
    NoFunctionForPin(String),
}

/// Raw output functions of a sequential cell, expressed over its internal
/// state variables (`IQ`/`IQN` in liberty terms).
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialState {
    pub state: String,
    pub state_inv: Option<String>,
    pub outputs: BTreeMap<String, BoolExpr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellDefinition {
    pub name: String,
    pub input_pins: Vec<String>,
    pub output_pins: Vec<String>,
    /// Output pin -> function over input pins. For sequential cells this is
    /// the clock-free pass-through semantics (`Q = D`, `QN = !D`), present
    /// only once the data pin is known.
    pub functions: BTreeMap<String, BoolExpr>,
    pub is_sequential: bool,
    pub clock_pin: Option<String>,
    pub data_pin: Option<String>,
    pub area: Option<f64>,
    pub state: Option<SequentialState>,
}

impl CellDefinition {
    /// A combinational cell from `(output, function)` pairs.
    pub fn combinational(
        name: impl Into<String>,
        inputs: &[&str],
        functions: &[(&str, &str)],
    ) -> Result<Self, LibraryError> {
        let name = name.into();
        let input_pins: Vec<String> = inputs.iter().map(|s| s.to_string()).collect();
        let declared: BTreeSet<&str> = inputs.iter().copied().collect();
        let mut out = BTreeMap::new();
        let mut output_pins = Vec::new();
        for (pin, text) in functions {
            let e = parse_bool_expr_with(text, &|p| declared.contains(p))
                .map_err(|source| LibraryError::Function { cell: name.clone(), source })?;
            output_pins.push(pin.to_string());
            out.insert(pin.to_string(), e);
        }
        Ok(CellDefinition {
            name,
            input_pins,
            output_pins,
            functions: out,
            is_sequential: false,
            clock_pin: None,
            data_pin: None,
            area: None,
            state: None,
        })
    }

    pub fn function(&self, output_pin: &str) -> Option<&BoolExpr> {
        self.functions.get(output_pin)
    }

    pub fn input_index(&self, pin: &str) -> Option<usize> {
        self.input_pins.iter().position(|p| p == pin)
    }

    pub fn has_pin(&self, pin: &str) -> bool {
        self.input_pins.iter().chain(&self.output_pins).any(|p| p == pin)
    }

    /// Function of `output_pin` with variables replaced by input-pin indices.
    pub fn indexed_function(&self, output_pin: &str) -> Option<BoolExpr<usize>> {
        let f = self.functions.get(output_pin)?;
        Some(f.map_vars(|v| self.input_index(v).expect("function references declared pins only")))
    }

    /// Truth table of a single output over its inputs (input `i` is bit `i`
    /// of the row index). Only for cells with at most six inputs.
    pub fn truth_table(&self, output_pin: &str) -> Option<u64> {
        let n = self.input_pins.len();
        if n > 6 {
            return None;
        }
        let f = self.indexed_function(output_pin)?;
        let rows = 1u64 << n;
        let mut table = 0;
        for row in 0..rows {
            if f.eval(&|&i| (row >> i) & 1 == 1) {
                table |= 1 << row;
            }
        }
        Some(table)
    }

    /// Select the data pin of a sequential cell and derive its pass-through
    /// functions from the raw state-variable functions.
    pub fn set_data_pin(&mut self, data_pin: &str) -> Result<(), LibraryError> {
        if self.input_index(data_pin).is_none() {
            return Err(LibraryError::MalformedLiberty {
                line: 0,
                reason: format!("cell `{}` has no input pin `{data_pin}`", self.name),
            });
        }
        self.is_sequential = true;
        self.data_pin = Some(data_pin.to_string());
        if let Some(state) = &self.state {
            let data = BoolExpr::Var(data_pin.to_string());
            self.functions = state
                .outputs
                .iter()
                .map(|(pin, f)| {
                    let g = f.substitute(&mut |v: &String| {
                        if *v == state.state {
                            data.clone()
                        } else if Some(v) == state.state_inv.as_ref() {
                            BoolExpr::not(data.clone())
                        } else {
                            BoolExpr::Var(v.clone())
                        }
                    });
                    (pin.clone(), g)
                })
                .collect();
        }
        Ok(())
    }
}

/// Evaluate one output of a cell under a complete input assignment.
pub fn evaluate_cell(
    cell: &CellDefinition,
    output_pin: &str,
    assignment: &BTreeMap<String, bool>,
) -> Result<bool, EvalError> {
    let f = cell.function(output_pin).ok_or_else(|| EvalError::NoFunctionForPin(output_pin.to_string()))?;
    if let Some(missing) = cell.input_pins.iter().find(|p| !assignment.contains_key(*p)) {
        return Err(EvalError::MissingPin(missing.clone()));
    }
    Ok(f.eval(&|v: &String| assignment[v]))
}

/// Configuration for libraries whose sequential cells lack usable `ff`/`latch`
/// groups, or whose data pin cannot be read off `next_state`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SequentialOverride {
    pub data_pin: String,
    #[serde(default)]
    pub clock_pin: Option<String>,
    /// Output pins that carry the inverted state.
    #[serde(default)]
    pub inverted_outputs: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct LibraryOptions {
    pub sequential_overrides: BTreeMap<String, SequentialOverride>,
}

#[derive(Debug, Clone, Default)]
pub struct CellLibrary {
    pub name: String,
    pub cells: BTreeMap<String, CellDefinition>,
    pub nand2_area: Option<f64>,
}

impl CellLibrary {
    pub fn new(name: impl Into<String>) -> Self {
        CellLibrary { name: name.into(), ..Default::default() }
    }

    pub fn get(&self, name: &str) -> Option<&CellDefinition> {
        self.cells.get(name)
    }

    pub fn insert(&mut self, cell: CellDefinition) -> Result<(), LibraryError> {
        if self.cells.contains_key(&cell.name) {
            return Err(LibraryError::DuplicateCell(cell.name));
        }
        self.cells.insert(cell.name.clone(), cell);
        self.refresh_nand2_area();
        Ok(())
    }

    /// Smallest 2-input NAND area; falls back to the smallest positive area
    /// when the library has no NAND2.
    fn refresh_nand2_area(&mut self) {
        const NAND2: u64 = 0b0111;
        let nand = self
            .cells
            .values()
            .filter(|c| !c.is_sequential && c.input_pins.len() == 2 && c.output_pins.len() == 1)
            .filter(|c| c.truth_table(&c.output_pins[0]) == Some(NAND2))
            .filter_map(|c| c.area)
            .filter(|a| *a > 0.0)
            .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.min(a))));
        let any = self
            .cells
            .values()
            .filter_map(|c| c.area)
            .filter(|a| *a > 0.0)
            .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.min(a))));
        self.nand2_area = nand.or(any);
    }

    pub fn apply_overrides(&mut self, options: &LibraryOptions) -> Result<(), LibraryError> {
        for (name, ov) in &options.sequential_overrides {
            let Some(cell) = self.cells.get_mut(name) else { continue };
            if cell.state.is_none() {
                let outputs = cell
                    .output_pins
                    .iter()
                    .map(|p| {
                        let q = BoolExpr::Var("IQ".to_string());
                        let f = if ov.inverted_outputs.contains(p) { BoolExpr::not(q) } else { q };
                        (p.clone(), f)
                    })
                    .collect();
                cell.state = Some(SequentialState { state: "IQ".into(), state_inv: None, outputs });
            }
            if ov.clock_pin.is_some() {
                cell.clock_pin = ov.clock_pin.clone();
            }
            cell.set_data_pin(&ov.data_pin)?;
        }
        self.refresh_nand2_area();
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// liberty text frontend

struct Scanner<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
}

#[derive(Debug, Default)]
struct Group {
    kind: String,
    args: Vec<String>,
    attrs: Vec<(String, String)>,
    groups: Vec<Group>,
    line: usize,
}

impl Group {
    fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().rev().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

const INTERPRETED: &[&str] = &["library", "cell", "pin", "ff", "latch"];

impl<'a> Scanner<'a> {
    fn new(text: &'a str) -> Self {
        Scanner { src: text.as_bytes(), pos: 0, line: 1 }
    }

    fn err<T>(&self, reason: impl Into<String>) -> Result<T, LibraryError> {
        Err(LibraryError::MalformedLiberty { line: self.line, reason: reason.into() })
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
        }
        Some(c)
    }

    /// Skip whitespace, comments and line continuations. Returns whether a
    /// newline was crossed.
    fn skip_trivia(&mut self) -> Result<bool, LibraryError> {
        let mut newline = false;
        loop {
            match self.peek() {
                Some(b'\n') => {
                    newline = true;
                    self.bump();
                }
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'\\') => {
                    self.bump();
                }
                Some(b'/') if self.src.get(self.pos + 1) == Some(&b'*') => {
                    let start = self.line;
                    self.pos += 2;
                    loop {
                        match self.bump() {
                            Some(b'*') if self.peek() == Some(b'/') => {
                                self.pos += 1;
                                break;
                            }
                            Some(_) => {}
                            None => {
                                self.line = start;
                                return self.err("unterminated comment");
                            }
                        }
                    }
                }
                Some(b'/') if self.src.get(self.pos + 1) == Some(&b'/') => {
                    while !matches!(self.peek(), Some(b'\n') | None) {
                        self.bump();
                    }
                }
                _ => return Ok(newline),
            }
        }
    }

    fn is_word_byte(c: u8) -> bool {
        c.is_ascii_alphanumeric() || matches!(c, b'_' | b'.' | b'-' | b'+' | b'!' | b'[' | b']' | b'$' | b'\'')
    }

    fn word(&mut self) -> Option<String> {
        let start = self.pos;
        while self.peek().is_some_and(Self::is_word_byte) {
            self.pos += 1;
        }
        (self.pos > start).then(|| String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn quoted(&mut self) -> Result<String, LibraryError> {
        debug_assert_eq!(self.peek(), Some(b'"'));
        let start_line = self.line;
        self.bump();
        let mut out = Vec::new();
        loop {
            match self.bump() {
                Some(b'"') => break,
                Some(b'\\') if self.peek() == Some(b'\n') => {
                    self.bump();
                }
                Some(c) => out.push(c),
                None => {
                    self.line = start_line;
                    return self.err("unterminated string");
                }
            }
        }
        Ok(String::from_utf8_lossy(&out).into_owned())
    }

    /// Read `( a, b, ... )` after the opening parenthesis has been seen.
    fn args(&mut self) -> Result<Vec<String>, LibraryError> {
        self.bump();
        let mut args = Vec::new();
        let mut cur = String::new();
        loop {
            self.skip_trivia()?;
            match self.peek() {
                Some(b')') => {
                    self.bump();
                    break;
                }
                Some(b',') => {
                    self.bump();
                    args.push(std::mem::take(&mut cur));
                }
                Some(b'"') => cur.push_str(&self.quoted()?),
                Some(b'{') | Some(b'}') | Some(b';') | None => return self.err("unbalanced parentheses"),
                Some(c) => {
                    if let Some(w) = self.word() {
                        if !cur.is_empty() {
                            cur.push(' ');
                        }
                        cur.push_str(&w);
                    } else {
                        cur.push(c as char);
                        self.bump();
                    }
                }
            }
        }
        if !cur.is_empty() || !args.is_empty() {
            args.push(cur);
        }
        Ok(args.into_iter().map(|a| a.trim().to_string()).collect())
    }

    /// Value of a simple attribute, up to `;`, a newline, or a closing brace.
    fn simple_value(&mut self) -> Result<String, LibraryError> {
        let mut out = String::new();
        loop {
            while matches!(self.peek(), Some(b' ' | b'\t' | b'\r')) {
                self.bump();
            }
            match self.peek() {
                Some(b';') => {
                    self.bump();
                    break;
                }
                Some(b'\n') | Some(b'}') | None => break,
                Some(b'"') => out.push_str(&self.quoted()?),
                Some(b'\\') => {
                    self.bump();
                    self.skip_trivia()?;
                }
                Some(c) => {
                    out.push(c as char);
                    self.bump();
                }
            }
        }
        Ok(out.trim().to_string())
    }

    /// Skip a group body after its `{`, honouring nested braces, strings and
    /// comments.
    fn skip_group(&mut self) -> Result<(), LibraryError> {
        let start_line = self.line;
        let mut depth = 1usize;
        while depth > 0 {
            self.skip_trivia()?;
            match self.peek() {
                Some(b'{') => {
                    depth += 1;
                    self.bump();
                }
                Some(b'}') => {
                    depth -= 1;
                    self.bump();
                }
                Some(b'"') => {
                    self.quoted()?;
                }
                Some(_) => {
                    self.bump();
                }
                None => {
                    self.line = start_line;
                    return self.err("unbalanced braces: group is never closed");
                }
            }
        }
        Ok(())
    }

    /// Parse statements until the closing brace of the current group.
    fn group_body(&mut self, group: &mut Group) -> Result<(), LibraryError> {
        loop {
            self.skip_trivia()?;
            match self.peek() {
                Some(b'}') => {
                    self.bump();
                    return Ok(());
                }
                None => {
                    self.line = group.line;
                    return self.err(format!("unbalanced braces: `{}` group is never closed", group.kind));
                }
                Some(b';') => {
                    self.bump();
                }
                _ => self.statement(group)?,
            }
        }
    }

    fn statement(&mut self, parent: &mut Group) -> Result<(), LibraryError> {
        let line = self.line;
        let Some(name) = self.word() else {
            let c = self.peek().map(|c| c as char).unwrap_or(' ');
            return self.err(format!("unexpected character `{c}`"));
        };
        self.skip_trivia()?;
        match self.peek() {
            Some(b':') => {
                self.bump();
                let value = self.simple_value()?;
                parent.attrs.push((name, value));
            }
            Some(b'(') => {
                let args = self.args()?;
                self.skip_trivia()?;
                if self.peek() == Some(b'{') {
                    self.bump();
                    if INTERPRETED.contains(&name.as_str()) {
                        let mut g = Group { kind: name, args, line, ..Default::default() };
                        self.group_body(&mut g)?;
                        parent.groups.push(g);
                    } else {
                        self.skip_group()?;
                    }
                } else if self.peek() == Some(b';') {
                    self.bump();
                }
            }
            Some(b'}') => return self.err(format!("`{name}` is not followed by `:` or `(`")),
            _ => return self.err(format!("expected `:` or `(` after `{name}`")),
        }
        Ok(())
    }
}

fn lib_err<T>(line: usize, reason: impl Into<String>) -> Result<T, LibraryError> {
    Err(LibraryError::MalformedLiberty { line, reason: reason.into() })
}

fn strip_equation(text: &str) -> &str {
    // Some libraries write `function : "ZN = !A"`.
    match text.split_once('=') {
        Some((_, rhs)) => rhs.trim(),
        None => text.trim(),
    }
}

fn interpret_cell(group: &Group, options: &LibraryOptions) -> Result<Option<CellDefinition>, LibraryError> {
    let name = group.args.first().cloned().unwrap_or_default();
    if name.is_empty() {
        return lib_err(group.line, "cell without a name");
    }
    let area = match group.attr("area") {
        Some(a) => Some(a.parse::<f64>().or_else(|_| lib_err(group.line, format!("bad area `{a}`")))?),
        None => None,
    };

    let mut inputs = Vec::new();
    let mut outputs: Vec<(String, Option<String>, usize)> = Vec::new();
    let mut clock_pin = None;
    for pin in group.groups.iter().filter(|g| g.kind == "pin") {
        for pname in &pin.args {
            match pin.attr("direction") {
                Some("input") => {
                    inputs.push(pname.clone());
                    if pin.attr("clock") == Some("true") {
                        clock_pin = Some(pname.clone());
                    }
                }
                Some("output") => outputs.push((pname.clone(), pin.attr("function").map(str::to_string), pin.line)),
                _ => {}
            }
        }
    }
    let mut seen = BTreeSet::new();
    for p in inputs.iter().chain(outputs.iter().map(|o| &o.0)) {
        if !seen.insert(p.as_str()) {
            return lib_err(group.line, format!("cell `{name}` declares pin `{p}` twice"));
        }
    }

    let storage = group.groups.iter().find(|g| g.kind == "ff" || g.kind == "latch");
    let mut cell = CellDefinition {
        name: name.clone(),
        input_pins: inputs.clone(),
        output_pins: Vec::new(),
        functions: BTreeMap::new(),
        is_sequential: storage.is_some(),
        clock_pin: None,
        data_pin: None,
        area,
        state: None,
    };

    let parse_fn = |text: &str, declared: &dyn Fn(&str) -> bool, line: usize| {
        parse_bool_expr_with(strip_equation(text), declared).or_else(|e| lib_err(line, format!("cell `{name}`: {e}")))
    };

    if let Some(ff) = storage {
        let state = ff.args.first().cloned().unwrap_or_else(|| "IQ".into());
        let state_inv = ff.args.get(1).cloned().filter(|s| !s.is_empty());
        let declared = |p: &str| inputs.iter().any(|i| i == p) || p == state || Some(p) == state_inv.as_deref();
        let mut raw = BTreeMap::new();
        for (pin, func, line) in &outputs {
            if let Some(f) = func {
                raw.insert(pin.clone(), parse_fn(f, &declared, *line)?);
                cell.output_pins.push(pin.clone());
            }
        }
        cell.state = Some(SequentialState { state, state_inv, outputs: raw });
        let (data_attr, clock_attr) = if ff.kind == "ff" { ("next_state", "clocked_on") } else { ("data_in", "enable") };
        let single_pin = |attr: &str| {
            ff.attr(attr)
                .map(|v| v.trim().to_string())
                .filter(|v| inputs.contains(v))
        };
        cell.clock_pin = clock_pin.or_else(|| single_pin(clock_attr));
        if let Some(data) = single_pin(data_attr) {
            cell.set_data_pin(&data)?;
        }
    } else {
        let declared = |p: &str| inputs.iter().any(|i| i == p);
        for (pin, func, line) in &outputs {
            if let Some(f) = func {
                cell.functions.insert(pin.clone(), parse_fn(f, &declared, *line)?);
                cell.output_pins.push(pin.clone());
            }
        }
        let overridden = options.sequential_overrides.contains_key(&name);
        if cell.functions.is_empty() && !overridden {
            return Ok(None);
        }
        if overridden {
            cell.output_pins = outputs.iter().map(|o| o.0.clone()).collect();
            cell.functions.clear();
        }
    }
    Ok(Some(cell))
}

/// Parse a liberty-subset document.
pub fn parse_liberty(text: &str) -> Result<CellLibrary, LibraryError> {
    parse_liberty_with(text, &LibraryOptions::default())
}

pub fn parse_liberty_with(text: &str, options: &LibraryOptions) -> Result<CellLibrary, LibraryError> {
    let mut sc = Scanner::new(text);
    let mut root = Group { kind: "<root>".into(), line: 1, ..Default::default() };
    loop {
        sc.skip_trivia()?;
        match sc.peek() {
            None => break,
            Some(b'}') => return sc.err("unbalanced braces: unexpected `}`"),
            Some(b';') => {
                sc.bump();
            }
            _ => sc.statement(&mut root)?,
        }
    }
    let mut lib = CellLibrary::default();
    let libs: Vec<&Group> = root.groups.iter().filter(|g| g.kind == "library").collect();
    if libs.is_empty() {
        return lib_err(1, "no `library` group found");
    }
    lib.name = libs[0].args.first().cloned().unwrap_or_default();
    for l in libs {
        for g in l.groups.iter().filter(|g| g.kind == "cell") {
            if let Some(cell) = interpret_cell(g, options)? {
                lib.insert(cell)?;
            }
        }
    }
    lib.apply_overrides(options)?;
    Ok(lib)
}

// ---------------------------------------------------------------------------
// JSON frontend

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonSequential {
    pub data_pin: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock_pin: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct JsonCell {
    input_pins: Vec<String>,
    output_pins: OneOrMany,
    boolean_function: OneOrMany,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sequential: Option<JsonSequential>,
}

fn cell_from_json(name: &str, jc: JsonCell) -> Result<CellDefinition, LibraryError> {
    let outputs = jc.output_pins.into_vec();
    let mut functions = BTreeMap::new();
    let declared = |p: &str| jc.input_pins.iter().any(|i| i == p);
    for eq in jc.boolean_function.into_vec() {
        let (lhs, rhs) = match eq.split_once('=') {
            Some((l, r)) => (l.trim().to_string(), r),
            None if outputs.len() == 1 => (outputs[0].clone(), eq.as_str()),
            None => return Err(LibraryError::Json(format!("cell `{name}`: function `{eq}` names no output pin"))),
        };
        if !outputs.contains(&lhs) {
            return Err(LibraryError::Json(format!("cell `{name}`: `{lhs}` is not an output pin")));
        }
        let f = parse_bool_expr_with(rhs, &declared)
            .map_err(|source| LibraryError::Function { cell: name.to_string(), source })?;
        functions.insert(lhs, f);
    }
    if let Some(missing) = outputs.iter().find(|o| !functions.contains_key(*o)) {
        return Err(LibraryError::Json(format!("cell `{name}`: output `{missing}` has no function")));
    }
    let mut cell = CellDefinition {
        name: name.to_string(),
        input_pins: jc.input_pins,
        output_pins: outputs,
        functions,
        is_sequential: false,
        clock_pin: None,
        data_pin: None,
        area: jc.area,
        state: None,
    };
    if let Some(seq) = jc.sequential {
        if cell.input_index(&seq.data_pin).is_none() {
            return Err(LibraryError::Json(format!("cell `{name}`: data pin `{}` is not an input", seq.data_pin)));
        }
        cell.is_sequential = true;
        cell.data_pin = Some(seq.data_pin);
        cell.clock_pin = seq.clock_pin;
    }
    Ok(cell)
}

/// Parse the JSON cell-library format: `{"CELL": {"input_pins": [...],
/// "output_pins": ..., "boolean_function": "OUT = EXPR"}}`.
pub fn parse_cell_library_json(text: &str) -> Result<CellLibrary, LibraryError> {
    let raw: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(text).map_err(|e| LibraryError::Json(e.to_string()))?;
    // Accept both a bare cell map and one wrapped in "Cell Library".
    let cells = match raw.get("Cell Library") {
        Some(serde_json::Value::Object(inner)) if raw.len() == 1 => inner.clone(),
        _ => raw,
    };
    let mut lib = CellLibrary::new("json");
    for (name, v) in cells {
        let jc: JsonCell =
            serde_json::from_value(v).map_err(|e| LibraryError::Json(format!("cell `{name}`: {e}")))?;
        lib.insert(cell_from_json(&name, jc)?)?;
    }
    Ok(lib)
}

/// Parse a map of user-supplied submodule functions (same shape as the JSON
/// cell library).
pub fn parse_submodule_functions(text: &str) -> Result<BTreeMap<String, CellDefinition>, LibraryError> {
    Ok(parse_cell_library_json(text)?.cells)
}

pub fn cell_library_to_json(lib: &CellLibrary) -> serde_json::Value {
    let mut out = serde_json::Map::new();
    for (name, c) in &lib.cells {
        let fns: Vec<String> = c
            .output_pins
            .iter()
            .filter_map(|p| c.functions.get(p).map(|f| format!("{p} = {f}")))
            .collect();
        let jc = JsonCell {
            input_pins: c.input_pins.clone(),
            output_pins: if c.output_pins.len() == 1 {
                OneOrMany::One(c.output_pins[0].clone())
            } else {
                OneOrMany::Many(c.output_pins.clone())
            },
            boolean_function: if fns.len() == 1 { OneOrMany::One(fns[0].clone()) } else { OneOrMany::Many(fns) },
            area: c.area,
            sequential: c
                .data_pin
                .clone()
                .filter(|_| c.is_sequential)
                .map(|data_pin| JsonSequential { data_pin, clock_pin: c.clock_pin.clone() }),
        };
        out.insert(name.clone(), serde_json::to_value(jc).expect("cell serializes"));
    }
    serde_json::Value::Object(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const AOI: &str = r#"
    /* header */
    library(tiny) {
      delay_model : table_lookup;
      lu_table_template(delay_template_2x2) {
        variable_1 : input_net_transition;
        index_1 ("1.0, 2.0");
      }
      cell(AOI21_X2) {
        area : 2.128;
        pin(A1) { direction : input; capacitance : 1.0; }
        pin(B1) { direction : input; }
        pin(B2) { direction : input; }
        pin(ZN) {
          direction : output;
          function : "!(A1 & (B1 | B2))";
          timing() {
            related_pin : "A1";
            cell_rise(delay_template_2x2) { values ("0.1, 0.2", \
                                                    "0.3, 0.4"); }
          }
        }
      }
      cell(NAND2_X1) {
        area : 0.798;
        pin(A1) { direction : input; }
        pin(A2) { direction : input; }
        pin(ZN) { direction : output; function : "!(A1 & A2)"; }
      }
      cell(FILLCELL_X1) { area : 0.19; }
      cell(DFF_X1) {
        area : 4.522;
        ff(IQ, IQN) { next_state : "D"; clocked_on : "CK"; }
        pin(D) { direction : input; }
        pin(CK) { direction : input; clock : true; }
        pin(Q) { direction : output; function : "IQ"; }
        pin(QN) { direction : output; function : "IQN"; }
      }
    }
    "#;

    #[test]
    fn parses_aoi21_cell() {
        let lib = parse_liberty(AOI).unwrap();
        let aoi = lib.get("AOI21_X2").unwrap();
        assert_eq!(aoi.input_pins, ["A1", "B1", "B2"]);
        assert_eq!(aoi.output_pins, ["ZN"]);
        assert_eq!(aoi.function("ZN").unwrap().to_string(), "!(A1 & (B1 | B2))");
        assert!(!aoi.is_sequential);
        assert_eq!(aoi.area, Some(2.128));
    }

    #[test]
    fn filler_cells_are_omitted() {
        let lib = parse_liberty(AOI).unwrap();
        assert!(lib.get("FILLCELL_X1").is_none());
        assert_eq!(lib.cells.len(), 3);
    }

    #[test]
    fn flip_flop_classification() {
        let lib = parse_liberty(AOI).unwrap();
        let ff = lib.get("DFF_X1").unwrap();
        assert!(ff.is_sequential);
        assert_eq!(ff.data_pin.as_deref(), Some("D"));
        assert_eq!(ff.clock_pin.as_deref(), Some("CK"));
        assert_eq!(ff.function("Q").unwrap().to_string(), "D");
        assert_eq!(ff.function("QN").unwrap().to_string(), "!D");
    }

    #[test]
    fn nand2_area_is_smallest_nand() {
        let lib = parse_liberty(AOI).unwrap();
        assert_eq!(lib.nand2_area, Some(0.798));
        let empty = parse_liberty("library(x) { cell(INV) { pin(A){direction:input;} pin(Y){direction:output; function:\"!A\";} } }").unwrap();
        assert_eq!(empty.nand2_area, None);
    }

    #[test]
    fn evaluate_aoi21() {
        let lib = parse_liberty(AOI).unwrap();
        let aoi = lib.get("AOI21_X2").unwrap();
        let asg = |a1, b1, b2| BTreeMap::from([("A1".to_string(), a1), ("B1".to_string(), b1), ("B2".to_string(), b2)]);
        assert!(!evaluate_cell(aoi, "ZN", &asg(true, false, true)).unwrap());
        assert!(evaluate_cell(aoi, "ZN", &asg(false, true, true)).unwrap());
        assert_eq!(evaluate_cell(aoi, "Q", &asg(false, true, true)), Err(EvalError::NoFunctionForPin("Q".into())));
        let partial = BTreeMap::from([("A1".to_string(), true)]);
        assert_eq!(evaluate_cell(aoi, "ZN", &partial), Err(EvalError::MissingPin("B1".into())));
    }

    #[test]
    fn malformed_inputs() {
        let unbalanced = "library(x) {\n cell(A) {\n pin(Y) { direction: output; function: \"1\"; }\n";
        assert!(matches!(parse_liberty(unbalanced), Err(LibraryError::MalformedLiberty { line: 2, .. })));
        let bad_fn = "library(x) {\n cell(A) {\n pin(A) { direction: input; }\n pin(Y) { direction: output; function: \"A B\"; }\n } }";
        assert!(matches!(parse_liberty(bad_fn), Err(LibraryError::MalformedLiberty { line: 4, .. })));
        let dup = "library(x) { cell(A) { pin(Y) { direction: output; function: \"1\"; } } cell(A) { pin(Y) { direction: output; function: \"0\"; } } }";
        assert!(matches!(parse_liberty(dup), Err(LibraryError::DuplicateCell(n)) if n == "A"));
    }

    #[test]
    fn scan_flop_needs_override() {
        let text = r#"library(x) { cell(SDFF) {
            ff(IQ, IQN) { next_state : "(D & !SE) | (SI & SE)"; clocked_on : "CK"; }
            pin(D) { direction: input; } pin(SI) { direction: input; } pin(SE) { direction: input; }
            pin(CK) { direction: input; clock: true; }
            pin(Q) { direction: output; function: "IQ"; } } }"#;
        let lib = parse_liberty(text).unwrap();
        let c = lib.get("SDFF").unwrap();
        assert!(c.is_sequential && c.data_pin.is_none() && c.functions.is_empty());
        let mut opts = LibraryOptions::default();
        opts.sequential_overrides
            .insert("SDFF".into(), SequentialOverride { data_pin: "D".into(), ..Default::default() });
        let lib = parse_liberty_with(text, &opts).unwrap();
        assert_eq!(lib.get("SDFF").unwrap().function("Q").unwrap().to_string(), "D");
    }

    #[test]
    fn override_for_library_without_ff_groups() {
        let text = r#"library(x) { cell(REG) {
            pin(D) { direction: input; } pin(C) { direction: input; }
            pin(Q) { direction: output; } pin(QB) { direction: output; } } }"#;
        assert!(parse_liberty(text).unwrap().get("REG").is_none());
        let mut opts = LibraryOptions::default();
        opts.sequential_overrides.insert(
            "REG".into(),
            SequentialOverride { data_pin: "D".into(), clock_pin: Some("C".into()), inverted_outputs: vec!["QB".into()] },
        );
        let lib = parse_liberty_with(text, &opts).unwrap();
        let reg = lib.get("REG").unwrap();
        assert!(reg.is_sequential);
        assert_eq!(reg.clock_pin.as_deref(), Some("C"));
        assert_eq!(reg.function("QB").unwrap().to_string(), "!D");
    }

    #[test]
    fn json_frontend_matches_liberty() {
        let json = r#"{"Cell Library": {"AOI21_X2": {
            "input_pins": ["A1", "B1", "B2"], "output_pins": "ZN",
            "boolean_function": "ZN = !(A1 & (B1 | B2))"}}}"#;
        let lib = parse_cell_library_json(json).unwrap();
        let from_lib = parse_liberty(AOI).unwrap();
        let a = lib.get("AOI21_X2").unwrap();
        let b = from_lib.get("AOI21_X2").unwrap();
        assert_eq!(a.functions, b.functions);
        assert_eq!(a.input_pins, b.input_pins);
        let back = parse_cell_library_json(&cell_library_to_json(&from_lib).to_string()).unwrap();
        assert_eq!(back.get("DFF_X1").unwrap().function("QN"), from_lib.get("DFF_X1").unwrap().function("QN"));
        assert!(back.get("DFF_X1").unwrap().is_sequential);
    }
}
