//! Boolean expression trees used as cell semantics.
//!
//! Function strings follow the liberty convention: `!` prefix and `'` postfix
//! negation bind tightest, then `^`, then `&`/`*`, then `|`/`+`. Adjacent
//! operands without an operator are rejected.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoolExpr<V = String> {
    Const(bool),
    Var(V),
    Not(Box<BoolExpr<V>>),
    And(Vec<BoolExpr<V>>),
    Or(Vec<BoolExpr<V>>),
    Xor(Box<BoolExpr<V>>, Box<BoolExpr<V>>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at position {position}: {reason}")]
    SyntaxError { position: usize, reason: String },
    #[error("undeclared pin `{0}`")]
    UndeclaredPin(String),
}

impl<V> BoolExpr<V> {
    pub fn not(e: BoolExpr<V>) -> Self {
        BoolExpr::Not(Box::new(e))
    }

    pub fn xor(a: BoolExpr<V>, b: BoolExpr<V>) -> Self {
        BoolExpr::Xor(Box::new(a), Box::new(b))
    }

    /// Rebuild the tree with every variable passed through `f`.
    pub fn try_map_vars<W, E>(&self, f: &mut impl FnMut(&V) -> Result<W, E>) -> Result<BoolExpr<W>, E> {
        Ok(match self {
            BoolExpr::Const(b) => BoolExpr::Const(*b),
            BoolExpr::Var(v) => BoolExpr::Var(f(v)?),
            BoolExpr::Not(e) => BoolExpr::Not(Box::new(e.try_map_vars(f)?)),
            BoolExpr::And(es) => BoolExpr::And(es.iter().map(|e| e.try_map_vars(f)).collect::<Result<_, _>>()?),
            BoolExpr::Or(es) => BoolExpr::Or(es.iter().map(|e| e.try_map_vars(f)).collect::<Result<_, _>>()?),
            BoolExpr::Xor(a, b) => BoolExpr::Xor(Box::new(a.try_map_vars(f)?), Box::new(b.try_map_vars(f)?)),
        })
    }

    pub fn map_vars<W>(&self, mut f: impl FnMut(&V) -> W) -> BoolExpr<W> {
        self.try_map_vars::<W, std::convert::Infallible>(&mut |v| Ok(f(v)))
            .unwrap_or_else(|e| match e {})
    }

    /// Replace variables by whole subtrees.
    pub fn substitute<W: Clone>(&self, f: &mut impl FnMut(&V) -> BoolExpr<W>) -> BoolExpr<W> {
        match self {
            BoolExpr::Const(b) => BoolExpr::Const(*b),
            BoolExpr::Var(v) => f(v),
            BoolExpr::Not(e) => BoolExpr::not(e.substitute(f)),
            BoolExpr::And(es) => BoolExpr::And(es.iter().map(|e| e.substitute(f)).collect()),
            BoolExpr::Or(es) => BoolExpr::Or(es.iter().map(|e| e.substitute(f)).collect()),
            BoolExpr::Xor(a, b) => BoolExpr::xor(a.substitute(f), b.substitute(f)),
        }
    }

    pub fn for_each_var<'a>(&'a self, f: &mut impl FnMut(&'a V)) {
        match self {
            BoolExpr::Const(_) => {}
            BoolExpr::Var(v) => f(v),
            BoolExpr::Not(e) => e.for_each_var(f),
            BoolExpr::And(es) | BoolExpr::Or(es) => es.iter().for_each(|e| e.for_each_var(f)),
            BoolExpr::Xor(a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
        }
    }

    /// Bit-parallel evaluation: every `u64` lane is an independent assignment.
    pub fn eval_words(&self, value: &impl Fn(&V) -> u64) -> u64 {
        match self {
            BoolExpr::Const(false) => 0,
            BoolExpr::Const(true) => !0,
            BoolExpr::Var(v) => value(v),
            BoolExpr::Not(e) => !e.eval_words(value),
            BoolExpr::And(es) => es.iter().fold(!0, |acc, e| acc & e.eval_words(value)),
            BoolExpr::Or(es) => es.iter().fold(0, |acc, e| acc | e.eval_words(value)),
            BoolExpr::Xor(a, b) => a.eval_words(value) ^ b.eval_words(value),
        }
    }

    pub fn eval(&self, value: &impl Fn(&V) -> bool) -> bool {
        self.eval_words(&|v| if value(v) { !0 } else { 0 }) & 1 == 1
    }

    /// Number of operator nodes (NOT excluded), used for size bookkeeping.
    pub fn operator_count(&self) -> usize {
        match self {
            BoolExpr::Const(_) | BoolExpr::Var(_) => 0,
            BoolExpr::Not(e) => e.operator_count(),
            BoolExpr::And(es) | BoolExpr::Or(es) => 1 + es.iter().map(|e| e.operator_count()).sum::<usize>(),
            BoolExpr::Xor(a, b) => 1 + a.operator_count() + b.operator_count(),
        }
    }
}

impl<V: Ord + Clone> BoolExpr<V> {
    pub fn vars(&self) -> BTreeSet<V> {
        let mut out = BTreeSet::new();
        self.for_each_var(&mut |v| {
            out.insert(v.clone());
        });
        out
    }
}

/// Fully parenthesised rendering; re-parsing yields the same tree.
impl<V: fmt::Display> fmt::Display for BoolExpr<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoolExpr::Const(b) => write!(f, "{}", *b as u8),
            BoolExpr::Var(v) => write!(f, "{v}"),
            BoolExpr::Not(e) => write!(f, "!{e}"),
            BoolExpr::And(es) | BoolExpr::Or(es) => {
                let op = if matches!(self, BoolExpr::And(_)) { " & " } else { " | " };
                // Unary and empty n-ary nodes have no infix form.
                match es.len() {
                    0 => write!(f, "{}", matches!(self, BoolExpr::And(_)) as u8),
                    1 => write!(f, "{}", es[0]),
                    _ => {
                        f.write_str("(")?;
                        for (i, e) in es.iter().enumerate() {
                            if i > 0 {
                                f.write_str(op)?;
                            }
                            write!(f, "{e}")?;
                        }
                        f.write_str(")")
                    }
                }
            }
            BoolExpr::Xor(a, b) => write!(f, "({a} ^ {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Const(bool),
    Not,
    Tick,
    Xor,
    And,
    Or,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let tok = match c {
            c if c.is_whitespace() || c == '"' => {
                i += 1;
                continue;
            }
            '!' => Tok::Not,
            '\'' => Tok::Tick,
            '^' => Tok::Xor,
            '&' | '*' => Tok::And,
            '|' | '+' => Tok::Or,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            c if c.is_ascii_alphanumeric() || c == '_' || c == '[' || c == ']' || c == '.' => {
                let start = i;
                while i < bytes.len() {
                    let c = bytes[i] as char;
                    if c.is_ascii_alphanumeric() || matches!(c, '_' | '[' | ']' | '.') {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let word = &text[start..i];
                let tok = match word {
                    "0" => Tok::Const(false),
                    "1" => Tok::Const(true),
                    _ if word.as_bytes()[0].is_ascii_digit() => {
                        return Err(ExprError::SyntaxError {
                            position: start,
                            reason: format!("invalid token `{word}`"),
                        })
                    }
                    _ => Tok::Ident(word.to_string()),
                };
                out.push((start, tok));
                continue;
            }
            other => {
                return Err(ExprError::SyntaxError { position: i, reason: format!("unexpected character `{other}`") })
            }
        };
        out.push((i, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    declared: &'a dyn Fn(&str) -> bool,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, reason: &str) -> Result<T, ExprError> {
        Err(ExprError::SyntaxError { position: self.here(), reason: reason.to_string() })
    }

    fn or(&mut self) -> Result<BoolExpr, ExprError> {
        let mut terms = vec![self.and()?];
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            terms.push(self.and()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { BoolExpr::Or(terms) })
    }

    fn and(&mut self) -> Result<BoolExpr, ExprError> {
        let mut terms = vec![self.xor()?];
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            terms.push(self.xor()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { BoolExpr::And(terms) })
    }

    fn xor(&mut self) -> Result<BoolExpr, ExprError> {
        let mut acc = self.unary()?;
        while self.peek() == Some(&Tok::Xor) {
            self.pos += 1;
            let rhs = self.unary()?;
            acc = BoolExpr::xor(acc, rhs);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<BoolExpr, ExprError> {
        let mut e = if self.peek() == Some(&Tok::Not) {
            self.pos += 1;
            BoolExpr::not(self.unary()?)
        } else {
            self.atom()?
        };
        while self.peek() == Some(&Tok::Tick) {
            self.pos += 1;
            e = BoolExpr::not(e);
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<BoolExpr, ExprError> {
        match self.peek().cloned() {
            Some(Tok::Const(b)) => {
                self.pos += 1;
                Ok(BoolExpr::Const(b))
            }
            Some(Tok::Ident(name)) => {
                if !(self.declared)(&name) {
                    return Err(ExprError::UndeclaredPin(name));
                }
                self.pos += 1;
                Ok(BoolExpr::Var(name))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.or()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected `)`");
                }
                self.pos += 1;
                Ok(e)
            }
            Some(_) => self.err("expected operand"),
            None => self.err("unexpected end of expression"),
        }
    }
}

/// Parse a liberty-style function string. Identifiers must satisfy `declared`.
pub fn parse_bool_expr_with(text: &str, declared: &dyn Fn(&str) -> bool) -> Result<BoolExpr, ExprError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, end: text.len(), declared };
    let e = p.or()?;
    if p.pos != p.toks.len() {
        return p.err("unexpected trailing input (operators are required between operands)");
    }
    Ok(e)
}

pub fn parse_bool_expr<S: AsRef<str>>(text: &str, declared_pins: &BTreeSet<S>) -> Result<BoolExpr, ExprError>
where
    S: Ord + std::borrow::Borrow<str>,
{
    parse_bool_expr_with(text, &|name| declared_pins.contains(name))
}
