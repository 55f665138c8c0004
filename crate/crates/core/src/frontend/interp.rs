//! Concrete interpreter used to search for assertion violations.

use std::collections::BTreeMap;

use super::ast::{Cond, Expr, Pos, Program, Stmt};

/// Source of nondeterministic choices.
pub trait Chooser {
    /// Value for `x := nondet()`.
    fn value(&mut self) -> i64;
    /// Outcome of a `*` condition.
    fn choose(&mut self) -> bool;
}

pub type State = BTreeMap<String, i128>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunEnd {
    Finished,
    /// An `assume` failed.
    Blocked,
    OutOfFuel,
}

#[derive(Clone, Debug)]
pub struct Run {
    pub end: RunEnd,
    pub state: State,
    /// Assertions that failed, in execution order.
    pub violations: Vec<(usize, Pos)>,
    pub steps: usize,
}

struct Exec<'c> {
    chooser: &'c mut dyn Chooser,
    fuel: usize,
    steps: usize,
    violations: Vec<(usize, Pos)>,
}

enum Stop {
    Blocked,
    OutOfFuel,
}

/// Runs `program` from `init` (missing variables start at 0), executing at
/// most `fuel` statements.
pub fn run(program: &Program, init: &State, chooser: &mut dyn Chooser, fuel: usize) -> Run {
    let mut state: State = program.vars().into_iter().map(|v| (v, 0)).collect();
    for (k, v) in init {
        state.insert(k.clone(), *v);
    }
    let mut ex = Exec { chooser, fuel, steps: 0, violations: Vec::new() };
    let end = match ex.block(&program.body, &mut state) {
        Ok(()) => RunEnd::Finished,
        Err(Stop::Blocked) => RunEnd::Blocked,
        Err(Stop::OutOfFuel) => RunEnd::OutOfFuel,
    };
    Run { end, state, violations: ex.violations, steps: ex.steps }
}

pub fn eval_expr(e: &Expr, s: &State) -> i128 {
    match e {
        Expr::Int(n) => i128::from(*n),
        Expr::Var(x) => s.get(x).copied().unwrap_or(0),
        Expr::Add(a, b) => eval_expr(a, s) + eval_expr(b, s),
        Expr::Sub(a, b) => eval_expr(a, s) - eval_expr(b, s),
        Expr::Neg(a) => -eval_expr(a, s),
        Expr::Mul(c, a) => i128::from(*c) * eval_expr(a, s),
    }
}

impl Exec<'_> {
    fn cond(&mut self, c: &Cond, s: &State) -> bool {
        match c {
            Cond::Bool(b) => *b,
            Cond::Star => self.chooser.choose(),
            Cond::Cmp(op, a, b) => op.holds(eval_expr(a, s), eval_expr(b, s)),
            Cond::Mod(e, m, r) => eval_expr(e, s).rem_euclid(i128::from(*m)) == i128::from(*r),
            Cond::And(a, b) => self.cond(a, s) && self.cond(b, s),
            Cond::Or(a, b) => self.cond(a, s) || self.cond(b, s),
        }
    }

    fn tick(&mut self) -> Result<(), Stop> {
        if self.steps >= self.fuel {
            return Err(Stop::OutOfFuel);
        }
        self.steps += 1;
        Ok(())
    }

    fn block(&mut self, stmts: &[Stmt], s: &mut State) -> Result<(), Stop> {
        stmts.iter().try_for_each(|st| self.stmt(st, s))
    }

    fn stmt(&mut self, st: &Stmt, s: &mut State) -> Result<(), Stop> {
        self.tick()?;
        match st {
            Stmt::Assign(x, e) => {
                let v = eval_expr(e, s);
                s.insert(x.clone(), v);
            }
            Stmt::Havoc(x) => {
                let v = i128::from(self.chooser.value());
                s.insert(x.clone(), v);
            }
            Stmt::If(c, a, b) => {
                if self.cond(c, s) {
                    self.block(a, s)?;
                } else {
                    self.block(b, s)?;
                }
            }
            Stmt::While { guard, body, .. } => {
                while self.cond(guard, s) {
                    self.block(body, s)?;
                    self.tick()?;
                }
            }
            Stmt::Assume(c) => {
                if !self.cond(c, s) {
                    return Err(Stop::Blocked);
                }
            }
            Stmt::Assert { id, pos, cond, .. } => {
                if !self.cond(cond, s) {
                    self.violations.push((*id, *pos));
                }
            }
        }
        Ok(())
    }
}
