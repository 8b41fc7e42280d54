use std::fmt;

use super::NetlistError;

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Tok {
    Ident(String),
    Number(i64),
    /// Sized constant, least significant bit first.
    Const(Vec<bool>),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Dot,
    Colon,
    Eq,
    Hash,
    Other(char),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(n) => write!(f, "`{n}`"),
            Tok::Const(_) => f.write_str("constant"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Hash => f.write_str("`#`"),
            Tok::Other(c) => write!(f, "`{c}`"),
            Tok::Eof => f.write_str("end of file"),
        }
    }
}

pub(super) struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    peeked: Option<(Tok, usize)>,
    tok_line: usize,
}

impl<'a> Lexer<'a> {
    pub(super) fn new(text: &'a str) -> Self {
        Lexer { src: text.as_bytes(), pos: 0, line: 1, peeked: None, tok_line: 1 }
    }

    /// Line of the most recently returned token.
    pub(super) fn line(&self) -> usize {
        self.tok_line
    }

    pub(super) fn peek(&mut self) -> Result<Tok, NetlistError> {
        if self.peeked.is_none() {
            let t = self.lex()?;
            self.peeked = Some((t, self.line));
        }
        Ok(self.peeked.as_ref().unwrap().0.clone())
    }

    pub(super) fn next(&mut self) -> Result<Tok, NetlistError> {
        if let Some((t, line)) = self.peeked.take() {
            self.tok_line = line;
            return Ok(t);
        }
        let t = self.lex()?;
        self.tok_line = self.line;
        Ok(t)
    }

    fn err<T>(&self, reason: impl Into<String>) -> Result<T, NetlistError> {
        Err(NetlistError::SyntaxError { line: self.line, reason: reason.into() })
    }

    fn skip_trivia(&mut self) -> Result<(), NetlistError> {
        loop {
            match self.src.get(self.pos) {
                Some(b'\n') => {
                    self.line += 1;
                    self.pos += 1;
                }
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(b'/') if self.src.get(self.pos + 1) == Some(&b'/') => {
                    while !matches!(self.src.get(self.pos), Some(b'\n') | None) {
                        self.pos += 1;
                    }
                }
                Some(b'/') if self.src.get(self.pos + 1) == Some(&b'*') => {
                    self.pos += 2;
                    loop {
                        match self.src.get(self.pos) {
                            Some(b'*') if self.src.get(self.pos + 1) == Some(&b'/') => {
                                self.pos += 2;
                                break;
                            }
                            Some(b'\n') => {
                                self.line += 1;
                                self.pos += 1;
                            }
                            Some(_) => self.pos += 1,
                            None => return self.err("unterminated block comment"),
                        }
                    }
                }
                // Compiler directives such as `timescale are ignored.
                Some(b'`') => {
                    while !matches!(self.src.get(self.pos), Some(b'\n') | None) {
                        self.pos += 1;
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn lex(&mut self) -> Result<Tok, NetlistError> {
        self.skip_trivia()?;
        let Some(&c) = self.src.get(self.pos) else { return Ok(Tok::Eof) };
        let single = |t| Ok(t);
        self.pos += 1;
        match c {
            b'(' => single(Tok::LParen),
            b')' => single(Tok::RParen),
            b'[' => single(Tok::LBracket),
            b']' => single(Tok::RBracket),
            b'{' => single(Tok::LBrace),
            b'}' => single(Tok::RBrace),
            b',' => single(Tok::Comma),
            b';' => single(Tok::Semi),
            b'.' => single(Tok::Dot),
            b':' => single(Tok::Colon),
            b'=' => single(Tok::Eq),
            b'#' => single(Tok::Hash),
            b'\\' => {
                let start = self.pos;
                while self.src.get(self.pos).is_some_and(|c| !c.is_ascii_whitespace()) {
                    self.pos += 1;
                }
                Ok(Tok::Ident(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()))
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos - 1;
                while self.src.get(self.pos).is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_' || *c == b'$') {
                    self.pos += 1;
                }
                Ok(Tok::Ident(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()))
            }
            c if c.is_ascii_digit() || c == b'\'' => {
                let start = self.pos - 1;
                while self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit() || *c == b'_') {
                    self.pos += 1;
                }
                let digits: String =
                    String::from_utf8_lossy(&self.src[start..self.pos]).chars().filter(|c| *c != '_').collect();
                if c != b'\'' && self.src.get(self.pos) != Some(&b'\'') {
                    return digits.parse().map(Tok::Number).or_else(|_| self.err(format!("bad number `{digits}`")));
                }
                if c != b'\'' {
                    self.pos += 1;
                }
                self.sized_constant(if c == b'\'' { None } else { Some(digits) })
            }
            other => single(Tok::Other(other as char)),
        }
    }

    fn sized_constant(&mut self, width: Option<String>) -> Result<Tok, NetlistError> {
        let base = match self.src.get(self.pos).map(|c| c.to_ascii_lowercase()) {
            Some(b) if matches!(b, b'b' | b'h' | b'd' | b'o') => b,
            _ => return self.err("malformed sized constant"),
        };
        self.pos += 1;
        let start = self.pos;
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_') {
            self.pos += 1;
        }
        let digits: String =
            String::from_utf8_lossy(&self.src[start..self.pos]).chars().filter(|c| *c != '_').collect();
        let value = match base {
            b'b' => u128::from_str_radix(&digits, 2),
            b'h' => u128::from_str_radix(&digits, 16),
            b'o' => u128::from_str_radix(&digits, 8),
            _ => digits.parse::<u128>(),
        };
        let Ok(value) = value else {
            return Err(NetlistError::UnknownConstruct { line: self.line, construct: format!("constant digits `{digits}`") });
        };
        let width = match width {
            Some(w) => w.parse::<usize>().or_else(|_| self.err("bad constant width"))?,
            None => 1,
        };
        if width == 0 || width > 128 {
            return self.err("constant width out of range");
        }
        Ok(Tok::Const((0..width).map(|i| (value >> i) & 1 == 1).collect()))
    }
}
