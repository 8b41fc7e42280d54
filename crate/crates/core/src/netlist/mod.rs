//! Structural gate-level Verilog subset.
//!
//! Accepted: `module`/`endmodule`, ANSI and non-ANSI port lists,
//! `input`/`output`/`wire` declarations with optional `[msb:lsb]` ranges,
//! cell instances with named connections, and `assign` aliases to a net
//! bit or a constant. Anything behavioural is rejected with the name of the
//! construct.

mod build;
mod lexer;

pub use build::{build_graph, DanglingInput};

use thiserror::Error;

use lexer::{Lexer, Tok};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetlistError {
    #[error("syntax error at line {line}: {reason}")]
    SyntaxError { line: usize, reason: String },
    #[error("unsupported construct `{construct}` at line {line}")]
    UnknownConstruct { line: usize, construct: String },
    #[error("unresolved cell or submodule `{0}`")]
    UnresolvedCell(String),
    #[error("net `{0}` has multiple drivers")]
    MultipleDrivers(String),
    #[error("instance `{instance}` ({cell}) has no pin `{pin}`")]
    UnknownPin { instance: String, cell: String, pin: String },
    #[error("duplicate instance or port name `{0}`")]
    DuplicateName(String),
    #[error("no module named `{0}`")]
    UnknownModule(String),
    #[error("cannot choose a top module among {0:?}")]
    AmbiguousTop(Vec<String>),
    #[error("submodule function `{0}` collides with a library cell")]
    SubmoduleCollision(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Port {
    pub name: String,
    pub direction: Direction,
    pub range: Option<(i64, i64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wire {
    pub name: String,
    pub range: Option<(i64, i64)>,
}

/// Width and bit names of a declared net.
fn bit_names(name: &str, range: Option<(i64, i64)>) -> Vec<String> {
    match range {
        None => vec![name.to_string()],
        Some((msb, lsb)) => {
            let (lo, hi) = (msb.min(lsb), msb.max(lsb));
            (lo..=hi).map(|i| format!("{name}[{i}]")).collect()
        }
    }
}

impl Port {
    pub fn width(&self) -> usize {
        self.bits().len()
    }

    /// Bit names, least significant index first.
    pub fn bits(&self) -> Vec<String> {
        bit_names(&self.name, self.range)
    }
}

impl Wire {
    pub fn bits(&self) -> Vec<String> {
        bit_names(&self.name, self.range)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetRef {
    Bit(String),
    Const(bool),
    Unconnected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    pub cell: String,
    pub connections: Vec<(String, NetRef)>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetlistModule {
    pub name: String,
    pub ports: Vec<Port>,
    pub wires: Vec<Wire>,
    pub instances: Vec<Instance>,
    /// `lhs = rhs` aliases and constant ties, bit-blasted.
    pub assigns: Vec<(String, NetRef)>,
}

impl NetlistModule {
    fn range_of(&self, name: &str) -> Option<Option<(i64, i64)>> {
        self.ports
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.range)
            .or_else(|| self.wires.iter().find(|w| w.name == name).map(|w| w.range))
    }
}

const REJECTED: &[&str] = &[
    "always", "always_comb", "always_ff", "initial", "reg", "logic", "generate", "endgenerate", "parameter",
    "localparam", "function", "task", "inout", "supply0", "supply1", "tri", "integer", "genvar", "defparam",
    "specify", "primitive", "if", "case", "for",
];

struct Parser<'a> {
    lex: Lexer<'a>,
}

impl Parser<'_> {
    fn syntax<T>(&self, reason: impl Into<String>) -> Result<T, NetlistError> {
        Err(NetlistError::SyntaxError { line: self.lex.line(), reason: reason.into() })
    }

    fn next(&mut self) -> Result<Tok, NetlistError> {
        self.lex.next()
    }

    fn peek(&mut self) -> Result<Tok, NetlistError> {
        self.lex.peek()
    }

    fn expect(&mut self, want: Tok) -> Result<(), NetlistError> {
        let t = self.next()?;
        if t == want {
            Ok(())
        } else {
            self.syntax(format!("expected {want}, found {t}"))
        }
    }

    fn ident(&mut self) -> Result<String, NetlistError> {
        match self.next()? {
            Tok::Ident(s) => {
                if REJECTED.contains(&s.as_str()) {
                    return Err(NetlistError::UnknownConstruct { line: self.lex.line(), construct: s });
                }
                Ok(s)
            }
            t => self.syntax(format!("expected identifier, found {t}")),
        }
    }

    fn number(&mut self) -> Result<i64, NetlistError> {
        match self.next()? {
            Tok::Number(n) => Ok(n),
            t => self.syntax(format!("expected number, found {t}")),
        }
    }

    fn range(&mut self) -> Result<Option<(i64, i64)>, NetlistError> {
        if self.peek()? != Tok::LBracket {
            return Ok(None);
        }
        self.next()?;
        let msb = self.number()?;
        self.expect(Tok::Colon)?;
        let lsb = self.number()?;
        self.expect(Tok::RBracket)?;
        Ok(Some((msb, lsb)))
    }

    fn modules(&mut self) -> Result<Vec<NetlistModule>, NetlistError> {
        let mut out = Vec::new();
        loop {
            match self.next()? {
                Tok::Eof => return Ok(out),
                Tok::Ident(k) if k == "module" => out.push(self.module()?),
                Tok::Ident(k) if REJECTED.contains(&k.as_str()) || k == "macromodule" => {
                    return Err(NetlistError::UnknownConstruct { line: self.lex.line(), construct: k })
                }
                t => return self.syntax(format!("expected `module`, found {t}")),
            }
        }
    }

    fn module(&mut self) -> Result<NetlistModule, NetlistError> {
        let name = self.ident()?;
        let mut m = NetlistModule { name, ports: vec![], wires: vec![], instances: vec![], assigns: vec![] };
        let mut header_names: Vec<String> = Vec::new();
        if self.peek()? == Tok::Hash {
            return Err(NetlistError::UnknownConstruct { line: self.lex.line(), construct: "#(parameters)".into() });
        }
        if self.peek()? == Tok::LParen {
            self.next()?;
            let mut dir: Option<Direction> = None;
            let mut range = None;
            if self.peek()? == Tok::RParen {
                self.next()?;
            } else {
                loop {
                    let mut word = self.ident()?;
                    if word == "input" || word == "output" {
                        dir = Some(if word == "input" { Direction::Input } else { Direction::Output });
                        if self.peek()? == Tok::Ident("wire".into()) {
                            self.next()?;
                        }
                        range = self.range()?;
                        word = self.ident()?;
                    }
                    match dir {
                        Some(d) => m.ports.push(Port { name: word, direction: d, range }),
                        None => header_names.push(word),
                    }
                    match self.next()? {
                        Tok::Comma => continue,
                        Tok::RParen => break,
                        t => return self.syntax(format!("expected `,` or `)` in port list, found {t}")),
                    }
                }
            }
        }
        self.expect(Tok::Semi)?;

        loop {
            let word = match self.next()? {
                Tok::Ident(w) => w,
                Tok::Eof => return self.syntax(format!("module `{}` is missing `endmodule`", m.name)),
                t => return self.syntax(format!("unexpected {t}")),
            };
            let line = self.lex.line();
            match word.as_str() {
                "endmodule" => break,
                "input" | "output" | "wire" => {
                    if self.peek()? == Tok::Ident("wire".into()) {
                        self.next()?;
                    }
                    let range = self.range()?;
                    loop {
                        let n = self.ident()?;
                        match word.as_str() {
                            "wire" => {
                                if m.ports.iter().all(|p| p.name != n) {
                                    m.wires.push(Wire { name: n, range });
                                }
                            }
                            dir => {
                                let direction = if dir == "input" { Direction::Input } else { Direction::Output };
                                if !header_names.is_empty() && !header_names.contains(&n) {
                                    return self.syntax(format!("`{n}` is not in the port list"));
                                }
                                m.ports.push(Port { name: n, direction, range });
                            }
                        }
                        match self.next()? {
                            Tok::Comma => continue,
                            Tok::Semi => break,
                            t => return self.syntax(format!("expected `,` or `;`, found {t}")),
                        }
                    }
                }
                "assign" => loop {
                    let lhs = self.net_expr(&m)?;
                    self.expect(Tok::Eq)?;
                    let rhs = self.net_expr(&m)?;
                    if lhs.len() != rhs.len() {
                        return self.syntax(format!("width mismatch in assign ({} vs {} bits)", lhs.len(), rhs.len()));
                    }
                    for (l, r) in lhs.into_iter().zip(rhs) {
                        match l {
                            NetRef::Bit(b) => m.assigns.push((b, r)),
                            _ => return self.syntax("left-hand side of assign must be a net"),
                        }
                    }
                    match self.next()? {
                        Tok::Comma => continue,
                        Tok::Semi => break,
                        t => {
                            return Err(NetlistError::UnknownConstruct {
                                line: self.lex.line(),
                                construct: format!("expression in assign ({t})"),
                            })
                        }
                    }
                },
                w if REJECTED.contains(&w) => {
                    return Err(NetlistError::UnknownConstruct { line, construct: word });
                }
                _ => {
                    let cell = word;
                    if self.peek()? == Tok::Hash {
                        return Err(NetlistError::UnknownConstruct { line, construct: "#(parameters)".into() });
                    }
                    let inst = self.ident()?;
                    self.expect(Tok::LParen)?;
                    let mut conns = Vec::new();
                    if self.peek()? != Tok::RParen {
                        loop {
                            match self.next()? {
                                Tok::Dot => {}
                                _ => {
                                    return Err(NetlistError::UnknownConstruct {
                                        line: self.lex.line(),
                                        construct: "positional port connection".into(),
                                    })
                                }
                            }
                            let pin = self.ident()?;
                            self.expect(Tok::LParen)?;
                            let net = if self.peek()? == Tok::RParen {
                                NetRef::Unconnected
                            } else {
                                let bits = self.net_expr(&m)?;
                                if bits.len() != 1 {
                                    return self.syntax(format!(
                                        "pin `{pin}` of `{inst}` connects {} bits; only single bits are supported",
                                        bits.len()
                                    ));
                                }
                                bits.into_iter().next().unwrap()
                            };
                            self.expect(Tok::RParen)?;
                            conns.push((pin, net));
                            match self.next()? {
                                Tok::Comma => continue,
                                Tok::RParen => break,
                                t => return self.syntax(format!("expected `,` or `)`, found {t}")),
                            }
                        }
                    } else {
                        self.next()?;
                    }
                    self.expect(Tok::Semi)?;
                    m.instances.push(Instance { name: inst, cell, connections: conns, line });
                }
            }
        }
        if let Some(missing) = header_names.iter().find(|n| m.ports.iter().all(|p| &p.name != *n)) {
            return self.syntax(format!("port `{missing}` of module `{}` has no direction", m.name));
        }
        Ok(m)
    }

    /// A net bit, a declared bus (all bits, lsb first), a part select, or a
    /// sized constant.
    fn net_expr(&mut self, m: &NetlistModule) -> Result<Vec<NetRef>, NetlistError> {
        match self.next()? {
            Tok::Const(bits) => Ok(bits.into_iter().map(NetRef::Const).collect()),
            Tok::Ident(name) => {
                if REJECTED.contains(&name.as_str()) {
                    return Err(NetlistError::UnknownConstruct { line: self.lex.line(), construct: name });
                }
                if self.peek()? == Tok::LBracket {
                    self.next()?;
                    let hi = self.number()?;
                    let lo = if self.peek()? == Tok::Colon {
                        self.next()?;
                        self.number()?
                    } else {
                        hi
                    };
                    self.expect(Tok::RBracket)?;
                    let (a, b) = (hi.min(lo), hi.max(lo));
                    return Ok((a..=b).map(|i| NetRef::Bit(format!("{name}[{i}]"))).collect());
                }
                Ok(match m.range_of(&name) {
                    Some(r @ Some(_)) => bit_names(&name, r).into_iter().map(NetRef::Bit).collect(),
                    _ => vec![NetRef::Bit(name)],
                })
            }
            Tok::LBrace => {
                Err(NetlistError::UnknownConstruct { line: self.lex.line(), construct: "concatenation".into() })
            }
            t => Err(NetlistError::UnknownConstruct { line: self.lex.line(), construct: format!("expression {t}") }),
        }
    }
}

/// Parse every module of a structural netlist, in file order.
pub fn parse_netlist(text: &str) -> Result<Vec<NetlistModule>, NetlistError> {
    Parser { lex: Lexer::new(text) }.modules()
}

/// Pick the module named `top`, or the unique module no other module
/// instantiates.
pub fn select_top<'a>(modules: &'a [NetlistModule], top: Option<&str>) -> Result<&'a NetlistModule, NetlistError> {
    if let Some(t) = top {
        return modules.iter().find(|m| m.name == t).ok_or_else(|| NetlistError::UnknownModule(t.to_string()));
    }
    let roots: Vec<&NetlistModule> = modules
        .iter()
        .filter(|m| !modules.iter().any(|o| o.instances.iter().any(|i| i.cell == m.name)))
        .collect();
    match roots.as_slice() {
        [one] => Ok(one),
        _ => Err(NetlistError::AmbiguousTop(modules.iter().map(|m| m.name.clone()).collect())),
    }
}
