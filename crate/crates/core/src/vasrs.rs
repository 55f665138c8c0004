//! Predicate Q-VASRS abstractions, control-state inference and the
//! transitive-closure operators built on them.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use num_traits::{Signed, Zero};
use tracing::{debug, warn};

use crate::config::Limits;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rational};
use crate::logic::{
    compose, formula_to_smt, is_sat, negate, skolemize_formula, Formula, Model, Solver, Term,
    TransitionFormula, Var,
};
use crate::reach::{reach_vasrs_with, QVasrs, ReachFormula};
use crate::vas::{abstract_vasr_with, gamma_formula, image, lub, VasrAbstraction};

/// Control states (pairwise inconsistent predicates over the pre-state
/// vocabulary) with edges between their indices.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PredicateVasrs {
    pub predicates: Vec<Formula>,
    pub machine: QVasrs,
}

/// `(S, V)` where `V` is a predicate Q-VASRS of dimension `rows(S)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VasrsAbstraction {
    pub sim: Matrix,
    pub vasrs: PredicateVasrs,
}

impl VasrsAbstraction {
    pub fn dim(&self) -> usize {
        self.sim.rows()
    }

    /// `gamma` restricted to the edges from `p` to `q`.
    pub fn gamma_between(&self, p: usize, q: usize, vocab: &[Var]) -> Formula {
        let ts = self
            .vasrs
            .machine
            .edges
            .iter()
            .filter(|e| e.src == p && e.dst == q)
            .map(|e| &e.transformer);
        gamma_formula(&self.sim, ts, vocab)
    }

    /// Normality with respect to the union of all edge transformers.
    pub fn is_normal(&self) -> bool {
        let classes = crate::vas::coherence_of(
            self.dim(),
            self.vasrs.machine.edges.iter().map(|e| &e.transformer),
        );
        classes
            .classes
            .iter()
            .all(|c| self.sim.select_rows(c).has_independent_rows())
    }
}

impl fmt::Display for VasrsAbstraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "states:")?;
        for (i, p) in self.vasrs.predicates.iter().enumerate() {
            writeln!(f, "  {i}: {}", formula_to_smt(p))?;
        }
        writeln!(f, "S ({}x{}):", self.sim.rows(), self.sim.cols())?;
        for row in self.sim.row_iter() {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(f, "  [{}]", cells.join(" "))?;
        }
        writeln!(f, "edges:")?;
        for e in &self.vasrs.machine.edges {
            writeln!(f, "  {} -> {}: {}", e.src, e.dst, e.transformer)?;
        }
        Ok(())
    }
}

/// Best predicate Q-VASRS abstraction of `f` with control states `preds`.
pub fn abstract_vasrs(
    h: &mut Solver,
    f: &TransitionFormula,
    preds: &[Formula],
) -> Result<VasrsAbstraction> {
    abstract_vasrs_with(h, f, preds, &Limits::default())
}

pub fn abstract_vasrs_with(
    h: &mut Solver,
    f: &TransitionFormula,
    preds: &[Formula],
    limits: &Limits,
) -> Result<VasrsAbstraction> {
    let n = f.dim();
    let mut parts: Vec<((usize, usize), VasrAbstraction)> = Vec::new();
    for (p, pp) in preds.iter().enumerate() {
        for (q, qq) in preds.iter().enumerate() {
            let g = f.with_formula(Formula::and(vec![
                pp.clone(),
                f.formula.clone(),
                f.prime_state(qq),
            ]));
            let a = abstract_vasr_with(h, &g, limits)?;
            if a.vasr.is_empty() {
                continue;
            }
            parts.push(((p, q), a));
        }
    }

    let mut acc = VasrAbstraction::bottom(n);
    let mut sims: Vec<Matrix> = Vec::with_capacity(parts.len());
    for (_, a) in &parts {
        if sims.is_empty() {
            acc = a.clone();
            sims.push(Matrix::identity(a.dim()));
            continue;
        }
        let (joined, t1, t2) = lub(&acc, a)?;
        for t in sims.iter_mut() {
            *t = t1.mul(t);
        }
        sims.push(t2);
        acc = joined;
    }

    let mut machine = QVasrs::new(preds.len(), acc.dim());
    for (((p, q), a), t) in parts.iter().zip(&sims) {
        for tr in image(&a.vasr, t)?.iter() {
            machine.add_edge(*p, tr.clone(), *q);
        }
    }
    debug!(
        states = preds.len(),
        dim = acc.dim(),
        edges = machine.edges.len(),
        "abstract-VASRS done"
    );
    Ok(VasrsAbstraction {
        sim: acc.sim,
        vasrs: PredicateVasrs {
            predicates: preds.to_vec(),
            machine,
        },
    })
}

/// Control states for `f`: the topologically closed cubes of a DNF of the
/// projection of `f` onto its pre-state, with overlapping regions merged
/// until the predicates are pairwise inconsistent.
pub fn control_states(h: &mut Solver, f: &TransitionFormula) -> Result<Vec<Formula>> {
    control_states_with(h, f, &Limits::default())
}

pub fn control_states_with(
    h: &mut Solver,
    f: &TransitionFormula,
    limits: &Limits,
) -> Result<Vec<Formula>> {
    let pre: BTreeSet<Var> = f.vocab().iter().cloned().collect();
    let mut avoid: HashSet<Arc<str>> = f.vocab().iter().map(|v| Arc::from(v.name())).collect();
    avoid.extend(f.post_vocab().iter().map(|v| Arc::from(v.name())));
    let (sk, _) = skolemize_formula(&f.formula, &mut avoid);

    let mut cubes: Vec<Formula> = Vec::new();
    let mut blocking: Vec<Formula> = Vec::new();
    loop {
        let mut query = vec![sk.clone()];
        query.extend(blocking.iter().cloned());
        let Some(model) = h.check_formula(&Formula::and(query))? else {
            break;
        };
        if cubes.len() >= limits.cube_cap {
            return Err(Error::IterationCap(limits.cube_cap));
        }
        let mut units = Vec::new();
        pre_cube(&f.formula, &sk, &model, &pre, &mut units)?;
        let mut kept = Vec::new();
        let mut negs = Vec::new();
        for u in units {
            match negate_unit(&u) {
                Some(n) => {
                    negs.push(n);
                    kept.push(u);
                }
                None => debug!("dropping non-negatable unit {u}"),
            }
        }
        blocking.push(Formula::or(negs));
        cubes.push(Formula::and(kept));
    }

    let mut preds: Vec<Formula> = cubes.iter().map(closure).collect();
    let mut merged = true;
    while merged {
        merged = false;
        'outer: for i in 0..preds.len() {
            for j in i + 1..preds.len() {
                let both = Formula::and(vec![preds[i].clone(), preds[j].clone()]);
                if is_sat(h, &both)?.is_some() {
                    let pj = preds.remove(j);
                    let pi = std::mem::replace(&mut preds[i], Formula::tt());
                    preds[i] = Formula::or(vec![pi, pj]);
                    merged = true;
                    break 'outer;
                }
            }
        }
    }
    if preds.len() > limits.predicate_cap {
        warn!(
            count = preds.len(),
            cap = limits.predicate_cap,
            "too many control states; using a single state"
        );
        return Ok(vec![Formula::tt()]);
    }
    debug!(cubes = cubes.len(), states = preds.len(), "control states");
    Ok(preds)
}

/// Collects, along the model-selected path through `f` (walked in parallel
/// with its Skolemization `sk`), the atoms and existential subformulas whose
/// free variables are all pre-state variables.
fn pre_cube(
    f: &Formula,
    sk: &Formula,
    m: &Model,
    pre: &BTreeSet<Var>,
    out: &mut Vec<Formula>,
) -> Result<()> {
    let only_pre = |g: &Formula| g.free_vars().iter().all(|v| pre.contains(v));
    match (f, sk) {
        (Formula::Exists(_, body), _) => {
            if only_pre(f) {
                out.push(f.clone());
                Ok(())
            } else {
                pre_cube(body, sk, m, pre, out)
            }
        }
        (Formula::Lt(..) | Formula::Eq(..), _) => {
            if only_pre(f) {
                out.push(f.clone());
            }
            Ok(())
        }
        (Formula::And(fs), Formula::And(ss)) => fs
            .iter()
            .zip(ss)
            .try_for_each(|(a, b)| pre_cube(a, b, m, pre, out)),
        (Formula::Or(fs), Formula::Or(ss)) => {
            let i = ss
                .iter()
                .position(|s| s.eval(m) == Some(true))
                .ok_or(Error::ModelMismatch)?;
            pre_cube(&fs[i], &ss[i], m, pre, out)
        }
        _ => Err(Error::Invalid("formula and its Skolemization differ in shape".into())),
    }
}

/// Negation of a cube unit within the negation-free grammar. Atoms are
/// negated directly; a divisibility constraint `exists k:Z. e + c k = r`
/// over integer terms is negated by the disjunction of the other residues.
fn negate_unit(u: &Formula) -> Option<Formula> {
    match u {
        Formula::Exists(k, body) => {
            let Formula::Eq(s, t) = body.as_ref() else {
                return None;
            };
            if k.sort() != crate::logic::Sort::Int {
                return None;
            }
            let lin = s.clone().sub(t.clone()).to_lin();
            let c = lin.coeff(k);
            if c.is_zero() || !c.is_integer() {
                return None;
            }
            let integral = lin.constant.is_integer()
                && lin.coeffs.iter().all(|(v, a)| {
                    a.is_integer() && (v == k || v.sort() == crate::logic::Sort::Int)
                });
            if !integral {
                return None;
            }
            // u is `rest + c k = 0`, i.e. rest = 0 (mod |c|).
            let m = c.abs().to_integer();
            let m: i64 = m.try_into().ok()?;
            let mut rest = lin.clone();
            rest.coeffs.remove(k);
            let rest_term = Term::linear(
                &rest.coeffs.values().cloned().collect::<Vec<_>>(),
                &rest.coeffs.keys().cloned().collect::<Vec<_>>(),
                rest.constant.clone(),
            );
            Some(Formula::or(
                (1..m)
                    .map(|j| {
                        Formula::exists(
                            [k.clone()],
                            Formula::eq(
                                rest_term.clone().add(k.term().scale(Rational::from_integer(m.into()))),
                                Term::int(j),
                            ),
                        )
                    })
                    .collect(),
            ))
        }
        _ => negate(u).ok(),
    }
}

/// Topological closure of a cube: strict inequalities become non-strict.
fn closure(cube: &Formula) -> Formula {
    match cube {
        Formula::Lt(s, t) => Formula::le(s.clone(), t.clone()),
        Formula::And(fs) => Formula::and(fs.iter().map(closure).collect()),
        other => other.clone(),
    }
}

/// Closure operator used for loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Q-VASR abstraction (single control state).
    Vasr,
    /// Predicate Q-VASRS abstraction.
    Vasrs,
    /// Predicate Q-VASRS abstraction with begin/end states tied to the
    /// control-state predicates.
    VasrsPrecise,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Vasr => "vasr",
            Method::Vasrs => "vasrs",
            Method::VasrsPrecise => "vasrs-prec",
        })
    }
}

/// Intermediate results of one closure computation.
#[derive(Clone, Debug)]
pub struct IterReport {
    pub method: Method,
    pub abstraction: Option<VasrsAbstraction>,
    pub reach: Option<ReachFormula>,
    pub summary: TransitionFormula,
}

/// Over-approximation of the reflexive transitive closure of `f`.
pub fn iter_vasrs(h: &mut Solver, f: &TransitionFormula) -> Result<TransitionFormula> {
    Ok(iterate(h, f, Method::Vasrs, &Limits::default())?.summary)
}

/// As [`iter_vasrs`], constraining the begin and end states of the
/// abstract run by their predicates.
pub fn iter_vasrs_precise(h: &mut Solver, f: &TransitionFormula) -> Result<TransitionFormula> {
    Ok(iterate(h, f, Method::VasrsPrecise, &Limits::default())?.summary)
}

/// The same pipeline with the single control state `true`.
pub fn iter_vasr(h: &mut Solver, f: &TransitionFormula) -> Result<TransitionFormula> {
    Ok(iterate(h, f, Method::Vasr, &Limits::default())?.summary)
}

pub fn iterate(
    h: &mut Solver,
    f: &TransitionFormula,
    method: Method,
    limits: &Limits,
) -> Result<IterReport> {
    let vocab = f.vocab().to_vec();
    let identity = TransitionFormula::identity(vocab.clone());
    if is_sat(h, &f.formula)?.is_none() {
        return Ok(IterReport {
            method,
            abstraction: None,
            reach: None,
            summary: identity,
        });
    }
    let preds = match method {
        Method::Vasr => vec![Formula::tt()],
        Method::Vasrs | Method::VasrsPrecise => control_states_with(h, f, limits)?,
    };
    let restricted = f.with_formula(Formula::and(vec![
        f.formula.clone(),
        f.prime_state(&Formula::or(preds.clone())),
    ]));
    let abs = abstract_vasrs_with(h, &restricted, &preds, limits)?;
    let reach = reach_vasrs_with(&abs.vasrs.machine, limits, None)?;
    let mut body = vec![reach.instantiate(&abs.sim, &vocab)];
    if method == Method::VasrsPrecise {
        for (p, pred) in preds.iter().enumerate() {
            body.push(Formula::or(vec![
                Formula::eq(reach.begin[p].term(), Term::zero()),
                pred.clone(),
            ]));
            body.push(Formula::or(vec![
                Formula::eq(reach.end[p].term(), Term::zero()),
                f.prime_state(pred),
            ]));
        }
    }
    let closed = f.with_formula(Formula::exists(reach.selectors(), Formula::and(body)));
    let step = f.with_formula(Formula::or(vec![identity.formula.clone(), f.formula.clone()]));
    let mut summary = compose(&closed, &step)?;
    if method == Method::VasrsPrecise {
        summary = summary.with_formula(Formula::or(vec![identity.formula, summary.formula.clone()]));
    }
    Ok(IterReport {
        method,
        abstraction: Some(abs),
        reach: Some(reach),
        summary,
    })
}
