use std::collections::BTreeSet;
use std::fmt;

/// Source position (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Linear integer expression.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Var(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Mul(i64, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn negated(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Gt => CmpOp::Le,
        }
    }

    pub fn holds(self, a: i128, b: i128) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

/// Boolean condition. `Mod(e, m, r)` is `e % m == r` with `0 <= r < m`;
/// `Star` is a nondeterministic choice (its negation is again `Star`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cond {
    Bool(bool),
    Star,
    Cmp(CmpOp, Expr, Expr),
    Mod(Expr, i64, i64),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

impl Cond {
    /// Negation pushed down to the atoms.
    pub fn negated(&self) -> Cond {
        match self {
            Cond::Bool(b) => Cond::Bool(!b),
            Cond::Star => Cond::Star,
            Cond::Cmp(op, a, b) => Cond::Cmp(op.negated(), a.clone(), b.clone()),
            Cond::Mod(e, m, r) => (0..*m)
                .filter(|j| j != r)
                .map(|j| Cond::Mod(e.clone(), *m, j))
                .reduce(|a, b| Cond::Or(Box::new(a), Box::new(b)))
                .unwrap_or(Cond::Bool(false)),
            Cond::And(a, b) => Cond::Or(Box::new(a.negated()), Box::new(b.negated())),
            Cond::Or(a, b) => Cond::And(Box::new(a.negated()), Box::new(b.negated())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Assign(String, Expr),
    Havoc(String),
    If(Cond, Vec<Stmt>, Vec<Stmt>),
    /// The id numbers loops in source order.
    While {
        id: usize,
        pos: Pos,
        guard: Cond,
        body: Vec<Stmt>,
    },
    Assume(Cond),
    /// The id numbers assertions in source order.
    Assert {
        id: usize,
        pos: Pos,
        cond: Cond,
        text: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Program {
    pub body: Vec<Stmt>,
}

impl Program {
    /// All variables, sorted by name.
    pub fn vars(&self) -> Vec<String> {
        let mut out = BTreeSet::new();
        stmts_vars(&self.body, &mut out);
        out.into_iter().collect()
    }

    pub fn loop_count(&self) -> usize {
        let mut n = 0;
        visit(&self.body, &mut |s| {
            if matches!(s, Stmt::While { .. }) {
                n += 1;
            }
        });
        n
    }

    pub fn asserts(&self) -> Vec<(usize, Pos, String)> {
        let mut out = Vec::new();
        visit(&self.body, &mut |s| {
            if let Stmt::Assert { id, pos, text, .. } = s {
                out.push((*id, *pos, text.clone()));
            }
        });
        out
    }
}

fn visit(stmts: &[Stmt], f: &mut dyn FnMut(&Stmt)) {
    for s in stmts {
        f(s);
        match s {
            Stmt::If(_, a, b) => {
                visit(a, f);
                visit(b, f);
            }
            Stmt::While { body, .. } => visit(body, f),
            _ => {}
        }
    }
}

fn stmts_vars(stmts: &[Stmt], out: &mut BTreeSet<String>) {
    for s in stmts {
        match s {
            Stmt::Assign(x, e) => {
                out.insert(x.clone());
                expr_vars(e, out);
            }
            Stmt::Havoc(x) => {
                out.insert(x.clone());
            }
            Stmt::If(c, a, b) => {
                cond_vars(c, out);
                stmts_vars(a, out);
                stmts_vars(b, out);
            }
            Stmt::While { guard, body, .. } => {
                cond_vars(guard, out);
                stmts_vars(body, out);
            }
            Stmt::Assume(c) | Stmt::Assert { cond: c, .. } => cond_vars(c, out),
        }
    }
}

fn expr_vars(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Int(_) => {}
        Expr::Var(x) => {
            out.insert(x.clone());
        }
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            expr_vars(a, out);
            expr_vars(b, out);
        }
        Expr::Neg(a) | Expr::Mul(_, a) => expr_vars(a, out),
    }
}

pub(crate) fn cond_vars(c: &Cond, out: &mut BTreeSet<String>) {
    match c {
        Cond::Bool(_) | Cond::Star => {}
        Cond::Cmp(_, a, b) => {
            expr_vars(a, out);
            expr_vars(b, out);
        }
        Cond::Mod(e, _, _) => expr_vars(e, out),
        Cond::And(a, b) | Cond::Or(a, b) => {
            cond_vars(a, out);
            cond_vars(b, out);
        }
    }
}
