//! Transition-formula semantics of `.imp` programs and assertion checking.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use tracing::{info, warn};

use super::ast::{CmpOp, Cond, Expr, Pos, Program, Stmt};
use crate::config::Limits;
use crate::error::Result;
use crate::linalg::rat;
use crate::logic::{compose, is_sat, Formula, Solver, Term, TransitionFormula, Var};
use crate::vasrs::{iterate, IterReport, Method};

/// Integer-sorted vocabulary of a program.
pub fn program_vocab(p: &Program) -> Vec<Var> {
    p.vars().iter().map(Var::int).collect()
}

pub fn expr_term(e: &Expr) -> Term {
    match e {
        Expr::Int(n) => Term::int(*n),
        Expr::Var(x) => Var::int(x).term(),
        Expr::Add(a, b) => expr_term(a).add(expr_term(b)),
        Expr::Sub(a, b) => expr_term(a).sub(expr_term(b)),
        Expr::Neg(a) => expr_term(a).neg(),
        Expr::Mul(c, a) => expr_term(a).scale(rat(*c)),
    }
}

/// Condition over the pre-state. `*` denotes no constraint.
pub fn cond_formula(c: &Cond) -> Formula {
    match c {
        Cond::Bool(true) | Cond::Star => Formula::tt(),
        Cond::Bool(false) => Formula::ff(),
        Cond::Cmp(op, a, b) => {
            let (s, t) = (expr_term(a), expr_term(b));
            match op {
                CmpOp::Lt => Formula::lt(s, t),
                CmpOp::Le => Formula::le(s, t),
                CmpOp::Eq => Formula::eq(s, t),
                CmpOp::Ne => Formula::ne(s, t),
                CmpOp::Ge => Formula::ge(s, t),
                CmpOp::Gt => Formula::gt(s, t),
            }
        }
        Cond::Mod(e, m, r) => {
            if *m == 1 {
                return Formula::tt();
            }
            let k = Var::int("k!mod");
            Formula::exists(
                [k.clone()],
                Formula::eq(
                    expr_term(e).sub(Term::int(*r)),
                    k.term().scale(rat(*m)),
                ),
            )
        }
        Cond::And(a, b) => Formula::and(vec![cond_formula(a), cond_formula(b)]),
        Cond::Or(a, b) => Formula::or(vec![cond_formula(a), cond_formula(b)]),
    }
}

fn frame(vocab: &[Var], except: Option<&str>) -> Vec<Formula> {
    vocab
        .iter()
        .filter(|v| Some(v.name()) != except)
        .map(|v| Formula::eq(v.primed().term(), v.term()))
        .collect()
}

/// Summary of one loop.
#[derive(Clone, Debug)]
pub struct LoopSummary {
    pub id: usize,
    pub pos: Pos,
    /// One iteration: the guard conjoined with the body.
    pub body: TransitionFormula,
    /// Closure of the guarded body.
    pub star: TransitionFormula,
    /// Closure conjoined with the negated guard over the post-state.
    pub summary: TransitionFormula,
    pub report: Option<IterReport>,
    /// Set when the closure could not be computed and the loop was
    /// summarized by havocking every variable.
    pub error: Option<String>,
    pub elapsed: Duration,
}

/// Computes transition formulas bottom-up, caching loop closures.
pub struct Analyzer<'h> {
    h: &'h mut Solver,
    vocab: Vec<Var>,
    method: Method,
    limits: Limits,
    loops: BTreeMap<usize, LoopSummary>,
}

impl<'h> Analyzer<'h> {
    pub fn new(h: &'h mut Solver, program: &Program, method: Method, limits: Limits) -> Self {
        Analyzer {
            h,
            vocab: program_vocab(program),
            method,
            limits,
            loops: BTreeMap::new(),
        }
    }

    pub fn vocab(&self) -> &[Var] {
        &self.vocab
    }

    pub fn solver(&mut self) -> &mut Solver {
        self.h
    }

    pub fn loops(&self) -> impl Iterator<Item = &LoopSummary> {
        self.loops.values()
    }

    pub fn into_loops(self) -> Vec<LoopSummary> {
        self.loops.into_values().collect()
    }

    fn tf(&self, f: Formula) -> TransitionFormula {
        TransitionFormula::new(f, self.vocab.clone())
    }

    fn guard(&self, c: &Cond) -> TransitionFormula {
        let mut parts = vec![cond_formula(c)];
        parts.extend(frame(&self.vocab, None));
        self.tf(Formula::and(parts))
    }

    pub fn block(&mut self, stmts: &[Stmt]) -> Result<TransitionFormula> {
        let mut acc = TransitionFormula::identity(self.vocab.clone());
        for s in stmts {
            let t = self.stmt(s)?;
            acc = compose(&acc, &t)?;
        }
        Ok(acc)
    }

    pub fn stmt(&mut self, s: &Stmt) -> Result<TransitionFormula> {
        match s {
            Stmt::Assign(x, e) => {
                let mut parts = vec![Formula::eq(Var::int(x).primed().term(), expr_term(e))];
                parts.extend(frame(&self.vocab, Some(x)));
                Ok(self.tf(Formula::and(parts)))
            }
            Stmt::Havoc(x) => Ok(self.tf(Formula::and(frame(&self.vocab, Some(x))))),
            Stmt::If(c, a, b) => {
                let ta = compose(&self.guard(c), &self.block(a)?)?;
                let tb = compose(&self.guard(&c.negated()), &self.block(b)?)?;
                Ok(self.tf(Formula::or(vec![ta.formula, tb.formula])))
            }
            Stmt::While { id, pos, guard, body } => {
                Ok(self.summarize_loop(*id, *pos, guard, body)?.summary.clone())
            }
            Stmt::Assume(c) => Ok(self.guard(c)),
            Stmt::Assert { .. } => Ok(TransitionFormula::identity(self.vocab.clone())),
        }
    }

    fn summarize_loop(
        &mut self,
        id: usize,
        pos: Pos,
        guard: &Cond,
        body: &[Stmt],
    ) -> Result<&LoopSummary> {
        if !self.loops.contains_key(&id) {
            let start = Instant::now();
            let inner = self.block(body)?;
            let guarded = compose(&self.guard(guard), &inner)?;
            let (star, report, error) = match iterate(self.h, &guarded, self.method, &self.limits)
            {
                Ok(r) => (r.summary.clone(), Some(r), None),
                Err(e) => {
                    warn!(loop_id = id, %pos, error = %e, "closure failed; havocking loop");
                    (self.tf(Formula::tt()), None, Some(e.to_string()))
                }
            };
            let exit = self.tf(star.prime_state(&cond_formula(&guard.negated())));
            let summary = star.with_formula(Formula::and(vec![
                star.formula.clone(),
                exit.formula,
            ]));
            let elapsed = start.elapsed();
            info!(loop_id = id, %pos, ?elapsed, method = %self.method, "loop summarized");
            self.loops.insert(
                id,
                LoopSummary { id, pos, body: guarded, star, summary, report, error, elapsed },
            );
        }
        Ok(&self.loops[&id])
    }

    /// Transition formula from the entry of `stmts` to the assertion `target`
    /// (assertions elsewhere are treated as skip), or `None` if `target` is
    /// not inside `stmts`.
    pub fn reach_assert(
        &mut self,
        stmts: &[Stmt],
        target: usize,
    ) -> Result<Option<TransitionFormula>> {
        for (i, s) in stmts.iter().enumerate() {
            let Some(inner) = self.reach_in(s, target)? else {
                continue;
            };
            let prefix = self.block(&stmts[..i])?;
            return Ok(Some(compose(&prefix, &inner)?));
        }
        Ok(None)
    }

    fn reach_in(&mut self, s: &Stmt, target: usize) -> Result<Option<TransitionFormula>> {
        match s {
            Stmt::Assert { id, .. } if *id == target => {
                Ok(Some(TransitionFormula::identity(self.vocab.clone())))
            }
            Stmt::If(c, a, b) => {
                let branches = [(c.clone(), a), (c.negated(), b)];
                let mut found = Vec::new();
                for (g, blk) in branches {
                    if let Some(r) = self.reach_assert(blk, target)? {
                        found.push(compose(&self.guard(&g), &r)?.formula);
                    }
                }
                Ok((!found.is_empty()).then(|| self.tf(Formula::or(found))))
            }
            Stmt::While { id, pos, guard, body } => {
                if !contains_assert(body, target) {
                    return Ok(None);
                }
                let star = self.summarize_loop(*id, *pos, guard, body)?.star.clone();
                let enter = self.guard(guard);
                let Some(r) = self.reach_assert(body, target)? else {
                    return Ok(None);
                };
                Ok(Some(compose(&compose(&star, &enter)?, &r)?))
            }
            _ => Ok(None),
        }
    }
}

fn contains_assert(stmts: &[Stmt], target: usize) -> bool {
    stmts.iter().any(|s| match s {
        Stmt::Assert { id, .. } => *id == target,
        Stmt::If(_, a, b) => contains_assert(a, target) || contains_assert(b, target),
        Stmt::While { body, .. } => contains_assert(body, target),
        _ => false,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Proved,
    Unknown,
    /// The check could not be completed; `solver` marks solver failures.
    Error { message: String, solver: bool },
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Proved => f.write_str("proved"),
            Verdict::Unknown => f.write_str("unknown"),
            Verdict::Error { message, .. } => write!(f, "error ({message})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AssertResult {
    pub id: usize,
    pub pos: Pos,
    pub text: String,
    pub verdict: Verdict,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct VerificationResult {
    pub asserts: Vec<AssertResult>,
    pub loops: Vec<LoopSummary>,
    pub elapsed: Duration,
}

impl VerificationResult {
    pub fn all_proved(&self) -> bool {
        self.asserts.iter().all(|a| a.verdict == Verdict::Proved)
    }

    pub fn verdict(&self, id: usize) -> Option<&Verdict> {
        self.asserts.iter().find(|a| a.id == id).map(|a| &a.verdict)
    }
}

/// Checks every assertion of `program` under the entry precondition `pre`
/// (a formula over the program variables).
pub fn verify(
    h: &mut Solver,
    program: &Program,
    pre: &Formula,
    method: Method,
    limits: Limits,
) -> VerificationResult {
    let start = Instant::now();
    let mut an = Analyzer::new(h, program, method, limits);
    let mut asserts = Vec::new();
    for (id, pos, text) in program.asserts() {
        let t0 = Instant::now();
        let verdict = match check_assert(&mut an, program, pre, id) {
            Ok(true) => Verdict::Proved,
            Ok(false) => Verdict::Unknown,
            Err(e) => Verdict::Error { solver: e.is_solver_failure(), message: e.to_string() },
        };
        info!(%pos, %verdict, "assertion checked");
        asserts.push(AssertResult { id, pos, text, verdict, elapsed: t0.elapsed() });
    }
    VerificationResult { asserts, loops: an.into_loops(), elapsed: start.elapsed() }
}

fn check_assert(an: &mut Analyzer<'_>, program: &Program, pre: &Formula, id: usize) -> Result<bool> {
    let cond = find_assert(&program.body, id).expect("assertion id from this program");
    let Some(r) = an.reach_assert(&program.body, id)? else {
        return Ok(false);
    };
    let bad = r.prime_state(&cond_formula(&cond.negated()));
    let query = Formula::and(vec![pre.clone(), r.formula, bad]);
    Ok(is_sat(an.solver(), &query)?.is_none())
}

fn find_assert(stmts: &[Stmt], target: usize) -> Option<Cond> {
    stmts.iter().find_map(|s| match s {
        Stmt::Assert { id, cond, .. } if *id == target => Some(cond.clone()),
        Stmt::If(_, a, b) => find_assert(a, target).or_else(|| find_assert(b, target)),
        Stmt::While { body, .. } => find_assert(body, target),
        _ => None,
    })
}

/// Summaries of every loop of `program`, in source order.
pub fn summarize(
    h: &mut Solver,
    program: &Program,
    method: Method,
    limits: Limits,
) -> Result<Vec<LoopSummary>> {
    let mut an = Analyzer::new(h, program, method, limits);
    an.block(&program.body)?;
    Ok(an.into_loops())
}
