//! Minimal S-expression reader for solver responses and SMT-LIB terms.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg::Rational;

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s) => Some(s),
            Sexp::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(v) => Some(v),
            Sexp::Atom(_) => None,
        }
    }

    /// Symbol text with `|...|` quoting removed.
    pub fn symbol(&self) -> Option<&str> {
        self.as_atom().map(|s| {
            s.strip_prefix('|')
                .and_then(|s| s.strip_suffix('|'))
                .unwrap_or(s)
        })
    }

    /// Interprets a numeric solver value: integer and decimal literals,
    /// `(- v)`, `(/ a b)` and `(to_real v)`.
    pub fn to_rational(&self) -> Option<Rational> {
        match self {
            Sexp::Atom(s) => parse_numeral(s),
            Sexp::List(items) => match items.as_slice() {
                [Sexp::Atom(op), x] if op == "-" => x.to_rational().map(|v| -v),
                [Sexp::Atom(op), x] if op == "to_real" => x.to_rational(),
                [Sexp::Atom(op), a, b] if op == "/" => {
                    let (a, b) = (a.to_rational()?, b.to_rational()?);
                    if b.is_zero() {
                        None
                    } else {
                        Some(a / b)
                    }
                }
                _ => None,
            },
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(s) => write!(f, "{s}"),
            Sexp::List(items) => {
                write!(f, "(")?;
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Parses `12`, `-3`, `1.5`, `2.0`, `1/3`.
pub fn parse_numeral(s: &str) -> Option<Rational> {
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n).ok()?;
        let d = BigInt::from_str(d).ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let neg = int.starts_with('-');
        let whole = BigInt::from_str(int.trim_start_matches('-')).ok()?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let num = whole * &scale + BigInt::from_str(frac).ok()?;
        let v = Rational::new(num, scale);
        return Some(if neg { -v } else { v });
    }
    if s.is_empty() || !s.trim_start_matches('-').bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    BigInt::from_str(s).ok().map(|n| Rational::new(n, BigInt::one()))
}

/// Counts unbalanced parentheses, ignoring quoted symbols, strings and
/// comments. Used to decide when a multi-line response is complete.
pub fn paren_depth(text: &str) -> i64 {
    let mut depth = 0;
    let mut in_bar = false;
    let mut in_str = false;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            _ if in_bar => in_bar = c != '|',
            '"' if in_str => {
                if chars.peek() == Some(&'"') {
                    chars.next();
                } else {
                    in_str = false;
                }
            }
            _ if in_str => {}
            '"' => in_str = true,
            '|' => in_bar = true,
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
    }
    depth
}

struct Reader<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c == b';' {
                while let Some(c) = self.bump() {
                    if c == b'\n' {
                        break;
                    }
                }
            } else if c.is_ascii_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn read(&mut self) -> Result<Sexp> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.peek() {
                        None => return Err(self.err("unclosed parenthesis")),
                        Some(b')') => {
                            self.bump();
                            return Ok(Sexp::List(items));
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            Some(b')') => Err(self.err("unexpected ')'")),
            Some(b'|') => {
                let start = self.pos;
                self.bump();
                loop {
                    match self.bump() {
                        None => return Err(self.err("unterminated quoted symbol")),
                        Some(b'|') => break,
                        Some(_) => {}
                    }
                }
                Ok(Sexp::Atom(self.text(start)))
            }
            Some(b'"') => {
                let start = self.pos;
                self.bump();
                loop {
                    match self.bump() {
                        None => return Err(self.err("unterminated string")),
                        Some(b'"') if self.peek() == Some(b'"') => {
                            self.bump();
                        }
                        Some(b'"') => break,
                        Some(_) => {}
                    }
                }
                Ok(Sexp::Atom(self.text(start)))
            }
            Some(_) => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c.is_ascii_whitespace() || c == b'(' || c == b')' || c == b';' {
                        break;
                    }
                    self.bump();
                }
                Ok(Sexp::Atom(self.text(start)))
            }
        }
    }

    fn text(&self, start: usize) -> String {
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }
}

/// Parses all S-expressions in `src`.
pub fn parse_all(src: &str) -> Result<Vec<Sexp>> {
    let mut r = Reader {
        src: src.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        r.skip_ws();
        if r.peek().is_none() {
            return Ok(out);
        }
        out.push(r.read()?);
    }
}

/// Parses exactly one S-expression.
pub fn parse_one(src: &str) -> Result<Sexp> {
    let mut all = parse_all(src)?;
    match all.len() {
        1 => Ok(all.pop().unwrap()),
        0 => Err(Error::Parse {
            line: 1,
            col: 1,
            msg: "empty input".into(),
        }),
        _ => Err(Error::Parse {
            line: 1,
            col: 1,
            msg: "expected a single expression".into(),
        }),
    }
}
