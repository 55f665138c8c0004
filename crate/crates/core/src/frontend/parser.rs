//! Lexer and recursive-descent parser for `.imp` programs.

use super::ast::{CmpOp, Cond, Expr, Pos, Program, Stmt};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    pos: Pos,
    start: usize,
    end: usize,
}

const SYMBOLS: [&str; 22] = [
    ":=", "<=", ">=", "==", "!=", "&&", "||", ";", "(", ")", "{", "}", "+", "-", "*", "%", "<", ">",
    "!", ",", "=", "/",
];

fn lex(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for &b in &bytes[*i..*i + n] {
            if b == b'\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
        *i += n;
    };
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if src[i..].starts_with("//") {
            let n = src[i..].find('\n').unwrap_or(src.len() - i);
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        if src[i..].starts_with("/*") {
            let Some(n) = src[i + 2..].find("*/") else {
                return Err(Error::Parse { line, col, msg: "unterminated comment".into() });
            };
            advance(&mut i, &mut line, &mut col, n + 4);
            continue;
        }
        let pos = Pos { line, col };
        let start = i;
        if c.is_ascii_alphabetic() || c == b'_' {
            let n = src[i..]
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                .unwrap_or(src.len() - i);
            let name = src[i..i + n].to_string();
            advance(&mut i, &mut line, &mut col, n);
            out.push(Token { tok: Tok::Ident(name), pos, start, end: i });
        } else if c.is_ascii_digit() {
            let n = src[i..].find(|ch: char| !ch.is_ascii_digit()).unwrap_or(src.len() - i);
            let value = src[i..i + n].parse::<i64>().map_err(|_| Error::Parse {
                line,
                col,
                msg: "integer literal out of range".into(),
            })?;
            advance(&mut i, &mut line, &mut col, n);
            out.push(Token { tok: Tok::Int(value), pos, start, end: i });
        } else if let Some(sym) = SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            advance(&mut i, &mut line, &mut col, sym.len());
            out.push(Token { tok: Tok::Sym(sym), pos, start, end: i });
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(Error::Parse { line, col, msg: format!("unexpected character `{ch}`") });
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
        start: src.len(),
        end: src.len(),
    });
    Ok(out)
}

/// Parses a program.
pub fn parse(src: &str) -> Result<Program> {
    let mut p = Parser { src, toks: lex(src)?, at: 0, loops: 0, asserts: 0 };
    let mut body = Vec::new();
    while p.peek() != &Tok::Eof {
        body.push(p.stmt()?);
    }
    Ok(Program { body })
}

/// Parses a standalone condition (used for preconditions given on the
/// command line in program syntax).
pub fn parse_cond(src: &str) -> Result<Cond> {
    let mut p = Parser { src, toks: lex(src)?, at: 0, loops: 0, asserts: 0 };
    let c = p.cond()?;
    p.expect_eof()?;
    Ok(c)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    at: usize,
    loops: usize,
    asserts: usize,
}

const KEYWORDS: [&str; 9] =
    ["if", "else", "while", "assume", "assert", "nondet", "true", "false", "skip"];

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T> {
        let t = &self.toks[self.at];
        let found = match &t.tok {
            Tok::Eof => "end of input".to_string(),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Sym(s) => format!("`{s}`"),
        };
        Err(Error::Parse {
            line: t.pos.line,
            col: t.pos.col,
            msg: format!("{}, found {found}", msg.into()),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected `{s}`"))
        }
    }

    fn expect_eof(&self) -> Result<()> {
        if self.peek() == &Tok::Eof {
            Ok(())
        } else {
            self.error("expected end of input")
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => self.error("expected an identifier"),
        }
    }

    fn int(&mut self) -> Result<i64> {
        let neg = self.eat_sym("-");
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(if neg { -n } else { n })
            }
            _ => self.error("expected an integer"),
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        while !self.is_sym("}") {
            if self.peek() == &Tok::Eof {
                return self.error("expected `}`");
            }
            out.push(self.stmt()?);
        }
        self.bump();
        Ok(out)
    }

    fn paren_cond(&mut self) -> Result<(Cond, String)> {
        self.expect_sym("(")?;
        let start = self.toks[self.at].start;
        let c = self.cond()?;
        let end = self.toks[self.at.saturating_sub(1)].end;
        self.expect_sym(")")?;
        Ok((c, self.src[start..end.max(start)].to_string()))
    }

    fn stmt(&mut self) -> Result<Stmt> {
        let pos = self.pos();
        if self.is_kw("if") {
            self.bump();
            let (c, _) = self.paren_cond()?;
            let then = self.block()?;
            let els = if self.is_kw("else") {
                self.bump();
                if self.is_kw("if") {
                    vec![self.stmt()?]
                } else {
                    self.block()?
                }
            } else {
                Vec::new()
            };
            return Ok(Stmt::If(c, then, els));
        }
        if self.is_kw("while") {
            self.bump();
            let (guard, _) = self.paren_cond()?;
            let id = self.loops;
            self.loops += 1;
            let body = self.block()?;
            return Ok(Stmt::While { id, pos, guard, body });
        }
        if self.is_kw("assume") {
            self.bump();
            let (c, _) = self.paren_cond()?;
            self.expect_sym(";")?;
            return Ok(Stmt::Assume(c));
        }
        if self.is_kw("assert") {
            self.bump();
            let (cond, text) = self.paren_cond()?;
            self.expect_sym(";")?;
            let id = self.asserts;
            self.asserts += 1;
            return Ok(Stmt::Assert { id, pos, cond, text });
        }
        if self.is_kw("skip") {
            self.bump();
            self.expect_sym(";")?;
            return Ok(Stmt::Assume(Cond::Bool(true)));
        }
        let x = self.ident()?;
        self.expect_sym(":=")?;
        let s = if self.is_kw("nondet") {
            self.bump();
            self.expect_sym("(")?;
            self.expect_sym(")")?;
            Stmt::Havoc(x)
        } else {
            Stmt::Assign(x, self.expr()?)
        };
        self.expect_sym(";")?;
        Ok(s)
    }

    fn cond(&mut self) -> Result<Cond> {
        let mut c = self.conj()?;
        while self.eat_sym("||") {
            c = Cond::Or(Box::new(c), Box::new(self.conj()?));
        }
        Ok(c)
    }

    fn conj(&mut self) -> Result<Cond> {
        let mut c = self.catom()?;
        while self.eat_sym("&&") {
            c = Cond::And(Box::new(c), Box::new(self.catom()?));
        }
        Ok(c)
    }

    fn catom(&mut self) -> Result<Cond> {
        if self.is_kw("true") {
            self.bump();
            return Ok(Cond::Bool(true));
        }
        if self.is_kw("false") {
            self.bump();
            return Ok(Cond::Bool(false));
        }
        if self.is_kw("nondet") {
            self.bump();
            self.expect_sym("(")?;
            self.expect_sym(")")?;
            return Ok(Cond::Star);
        }
        if self.is_sym("*") {
            self.bump();
            return Ok(Cond::Star);
        }
        if self.eat_sym("!") {
            return Ok(self.catom()?.negated());
        }
        if self.is_sym("(") {
            let save = self.at;
            self.bump();
            if let Ok(c) = self.cond() {
                if self.eat_sym(")") && !self.continues_expr() {
                    return Ok(c);
                }
            }
            self.at = save;
        }
        let lhs = self.expr()?;
        if self.eat_sym("%") {
            let m = self.int()?;
            if m <= 0 {
                return self.error("modulus must be positive");
            }
            let eq = if self.eat_sym("==") {
                true
            } else if self.eat_sym("!=") {
                false
            } else {
                return self.error("expected `==` or `!=` after modulus");
            };
            let r = self.int()?.rem_euclid(m);
            let c = Cond::Mod(lhs, m, r);
            return Ok(if eq { c } else { c.negated() });
        }
        let op = match self.peek() {
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym("==") => CmpOp::Eq,
            Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym(">=") => CmpOp::Ge,
            Tok::Sym(">") => CmpOp::Gt,
            _ => return self.error("expected a comparison"),
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Cond::Cmp(op, lhs, rhs))
    }

    fn continues_expr(&self) -> bool {
        ["+", "-", "*", "%", "<", "<=", "==", "!=", ">=", ">"]
            .iter()
            .any(|s| self.is_sym(s))
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut e = self.term()?;
        loop {
            if self.eat_sym("+") {
                e = Expr::Add(Box::new(e), Box::new(self.term()?));
            } else if self.eat_sym("-") {
                e = Expr::Sub(Box::new(e), Box::new(self.term()?));
            } else {
                return Ok(e);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        while self.is_sym("*") {
            let pos = self.pos();
            self.bump();
            let rhs = self.unary()?;
            e = match (constant(&e), constant(&rhs)) {
                (Some(c), _) => Expr::Mul(c, Box::new(rhs)),
                (None, Some(c)) => Expr::Mul(c, Box::new(e)),
                (None, None) => {
                    return Err(Error::Parse {
                        line: pos.line,
                        col: pos.col,
                        msg: "non-linear multiplication".into(),
                    })
                }
            };
        }
        if self.is_sym("/") {
            return self.error("division is not supported");
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_sym("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_sym("(") {
            let e = self.expr()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(Expr::Var(s))
            }
            _ => self.error("expected an expression"),
        }
    }
}

fn constant(e: &Expr) -> Option<i64> {
    match e {
        Expr::Int(n) => Some(*n),
        Expr::Var(_) => None,
        Expr::Add(a, b) => constant(a)?.checked_add(constant(b)?),
        Expr::Sub(a, b) => constant(a)?.checked_sub(constant(b)?),
        Expr::Neg(a) => constant(a)?.checked_neg(),
        Expr::Mul(c, a) => c.checked_mul(constant(a)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignment() {
        let p = parse("x := x + 1;").unwrap();
        assert_eq!(
            p.body,
            vec![Stmt::Assign(
                "x".into(),
                Expr::Add(Box::new(Expr::Var("x".into())), Box::new(Expr::Int(1)))
            )]
        );
    }

    #[test]
    fn unterminated_guard_fails_at_end() {
        match parse("while (x") {
            Err(Error::Parse { line: 1, col: 9, msg }) => assert!(msg.contains("end of input")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nonlinear_is_rejected() {
        assert!(matches!(parse("x := x * y;"), Err(Error::Parse { .. })));
        assert!(parse("x := 2 * (x + 1) * 3;").is_ok());
    }

    #[test]
    fn parenthesized_conditions_and_expressions() {
        let p = parse("if ((x + 1) < y && (y > 0 || x == 2)) { x := 0; }").unwrap();
        let Stmt::If(Cond::And(a, b), _, _) = &p.body[0] else { panic!() };
        assert!(matches!(**a, Cond::Cmp(CmpOp::Lt, _, _)));
        assert!(matches!(**b, Cond::Or(_, _)));
    }

    #[test]
    fn modulus_atoms() {
        let c = parse_cond("i % 2 == 0").unwrap();
        assert_eq!(c, Cond::Mod(Expr::Var("i".into()), 2, 0));
        let c = parse_cond("i % 3 != 1").unwrap();
        assert_eq!(c, Cond::Mod(Expr::Var("i".into()), 3, 1).negated());
    }

    #[test]
    fn assert_text_and_ids() {
        let p = parse("assert(x <= 2*y);\nwhile (*) { x := x; }\nassert (true);").unwrap();
        let a = p.asserts();
        assert_eq!(a[0].2, "x <= 2*y");
        assert_eq!(a[1].1, Pos { line: 3, col: 1 });
        assert_eq!(p.loop_count(), 1);
    }
}
