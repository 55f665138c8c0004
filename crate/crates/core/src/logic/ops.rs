//! Negation, Skolemization, cube selection, composition, satisfiability and
//! affine-equality extraction.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use tracing::trace;

use super::smt::Solver;
use num_traits::{One, Signed, Zero};

use super::syntax::{Formula, LinExpr, Model, Sort, Term, TransitionFormula, Var};
use crate::error::{Error, Result};
use crate::linalg::{nullspace, rat, Matrix, Rational};

/// Negation-free formula equivalent to the negation of a quantifier-free `f`.
pub fn negate(f: &Formula) -> Result<Formula> {
    Ok(match f {
        Formula::Lt(s, t) => Formula::or(vec![
            Formula::Lt(t.clone(), s.clone()),
            Formula::Eq(t.clone(), s.clone()),
        ]),
        Formula::Eq(s, t) => Formula::or(vec![
            Formula::Lt(s.clone(), t.clone()),
            Formula::Lt(t.clone(), s.clone()),
        ]),
        Formula::And(fs) => Formula::or(fs.iter().map(negate).collect::<Result<_>>()?),
        Formula::Or(fs) => Formula::and(fs.iter().map(negate).collect::<Result<_>>()?),
        Formula::Exists(..) => return Err(Error::QuantifiedNegation),
    })
}

/// First `stem!{tag}{i}` not in `avoid`; the chosen name is added to `avoid`.
pub fn fresh_tagged(base: &Var, tag: &str, avoid: &mut HashSet<Arc<str>>) -> Var {
    let stem = base.name().split('!').next().unwrap_or(base.name());
    let v = (0..)
        .map(|i| Var::new(format!("{stem}!{tag}{i}"), base.sort()))
        .find(|v| !avoid.contains(v.name()))
        .expect("unbounded search");
    avoid.insert(Arc::from(v.name()));
    v
}

/// Replaces every existential by a fresh free constant of the same sort.
/// The tree shape is otherwise preserved: each `Exists(v, body)` node is
/// replaced by the Skolemized body. Returns the new constants in order.
pub fn skolemize_formula(f: &Formula, avoid: &mut HashSet<Arc<str>>) -> (Formula, Vec<Var>) {
    f.collect_names(avoid);
    let mut consts = Vec::new();
    let g = skolem_rec(f, avoid, &mut consts);
    (g, consts)
}

fn skolem_rec(f: &Formula, avoid: &mut HashSet<Arc<str>>, consts: &mut Vec<Var>) -> Formula {
    match f {
        Formula::Lt(..) | Formula::Eq(..) => f.clone(),
        Formula::And(fs) => Formula::And(fs.iter().map(|g| skolem_rec(g, avoid, consts)).collect()),
        Formula::Or(fs) => Formula::Or(fs.iter().map(|g| skolem_rec(g, avoid, consts)).collect()),
        Formula::Exists(v, body) => {
            let k = fresh_tagged(v, "s", avoid);
            consts.push(k.clone());
            let mut map = BTreeMap::new();
            map.insert(v.clone(), k.term());
            skolem_rec(&body.substitute(&map), avoid, consts)
        }
    }
}

pub fn skolemize(tf: &TransitionFormula) -> TransitionFormula {
    let mut avoid: HashSet<Arc<str>> = tf.vocab().iter().map(|v| Arc::from(v.name())).collect();
    avoid.extend(tf.post_vocab().iter().map(|v| Arc::from(v.name())));
    let (g, _) = skolemize_formula(&tf.formula, &mut avoid);
    tf.with_formula(g)
}

/// Conjunction of atoms of the quantifier-free `f` satisfied by `m` and
/// entailing `f`: both children of a conjunction are kept, and for a
/// disjunction the leftmost child satisfied by `m`.
pub fn select_cube(f: &Formula, m: &Model) -> Result<Formula> {
    let mut atoms = Vec::new();
    cube_rec(f, m, &mut atoms)?;
    Ok(Formula::and(atoms))
}

fn cube_rec(f: &Formula, m: &Model, out: &mut Vec<Formula>) -> Result<()> {
    match f {
        Formula::Lt(..) | Formula::Eq(..) => {
            if f.eval(m) != Some(true) {
                return Err(Error::ModelMismatch);
            }
            out.push(f.clone());
            Ok(())
        }
        Formula::And(fs) => fs.iter().try_for_each(|g| cube_rec(g, m, out)),
        Formula::Or(fs) => {
            let g = fs
                .iter()
                .find(|g| g.eval(m) == Some(true))
                .ok_or(Error::ModelMismatch)?;
            cube_rec(g, m, out)
        }
        Formula::Exists(..) => Err(Error::Invalid("select_cube on a quantified formula".into())),
    }
}

/// Relational composition `exists X. f[x' := X] /\ g[x := X]`.
pub fn compose(f: &TransitionFormula, g: &TransitionFormula) -> Result<TransitionFormula> {
    if f.vocab() != g.vocab() {
        return Err(Error::VocabularyMismatch);
    }
    let mut avoid = f.formula.names();
    g.formula.collect_names(&mut avoid);
    avoid.extend(f.vocab().iter().map(|v| Arc::from(v.name())));
    avoid.extend(f.post_vocab().iter().map(|v| Arc::from(v.name())));
    let mids: Vec<Var> = f
        .vocab()
        .iter()
        .map(|v| fresh_tagged(v, "m", &mut avoid))
        .collect();
    let mid_terms: Vec<Term> = mids.iter().map(Var::term).collect();
    let left = f.formula.substitute(&f.post_map(&mid_terms));
    let right = g.formula.substitute(&g.pre_map(&mid_terms));
    Ok(f.with_formula(exists_eliminating(mids, Formula::and(vec![left, right]))))
}

/// `exists vars. body`, first substituting away every variable that a
/// top-level equality of `body` defines. An integer variable is only
/// eliminated by a unit-coefficient equality over integer terms.
pub fn exists_eliminating(vars: Vec<Var>, body: Formula) -> Formula {
    let mut remaining = vars;
    let mut conjuncts = body.into_conjuncts();
    'search: loop {
        for (vi, v) in remaining.iter().enumerate() {
            for (ci, c) in conjuncts.iter().enumerate() {
                let Formula::Eq(s, t) = c else { continue };
                let Some(def) = solve_for(v, &s.clone().sub(t.clone()).to_lin()) else {
                    continue;
                };
                let v = remaining.remove(vi);
                conjuncts.remove(ci);
                let map = BTreeMap::from([(v, def)]);
                conjuncts = Formula::and(conjuncts.iter().map(|c| c.substitute(&map)).collect())
                    .into_conjuncts();
                continue 'search;
            }
        }
        break;
    }
    Formula::exists(remaining, Formula::and(conjuncts))
}

fn solve_for(v: &Var, lin: &LinExpr) -> Option<Term> {
    let c = lin.coeff(v);
    if c.is_zero() {
        return None;
    }
    if v.sort() == Sort::Int {
        let unit = c.abs().is_one();
        let integral = lin.constant.is_integer()
            && lin
                .coeffs
                .iter()
                .all(|(w, a)| a.is_integer() && w.sort() == Sort::Int);
        if !(unit && integral) {
            return None;
        }
    }
    let mut rest = lin.clone();
    rest.coeffs.remove(v);
    let scale = -c.recip();
    let coeffs: Vec<Rational> = rest.coeffs.values().map(|a| a * &scale).collect();
    let vars: Vec<Var> = rest.coeffs.keys().cloned().collect();
    Some(Term::linear(&coeffs, &vars, &rest.constant * &scale))
}

/// Model of `f` (over its free symbols and Skolem constants), or `None`.
pub fn is_sat(h: &mut Solver, f: &Formula) -> Result<Option<Model>> {
    let (sk, _) = skolemize_formula(f, &mut HashSet::new());
    h.check_formula(&sk)
}

/// Whether `f` entails `g`.
pub fn entails(h: &mut Solver, f: &Formula, g: &Formula) -> Result<bool> {
    let mut avoid = g.names();
    let (f_sk, _) = skolemize_formula(f, &mut avoid);
    if g.is_quantifier_free() {
        let q = Formula::and(vec![f_sk, negate(g)?]);
        return Ok(h.check_formula(&q)?.is_none());
    }
    h.push()?;
    let r = (|| {
        h.assert(&f_sk)?;
        h.assert_not(g)?;
        h.check()
    })();
    h.pop()?;
    Ok(!r?)
}

/// Mutual entailment.
pub fn equivalent(h: &mut Solver, f: &Formula, g: &Formula) -> Result<bool> {
    Ok(entails(h, f, g)? && entails(h, g, f)?)
}

/// Basis of the affine equalities `c.x + c'.x' = b` entailed by a formula,
/// one row `(c, c', b)` per equality, in reduced row echelon form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EqualitySpace {
    pub basis: Matrix,
    pub n: usize,
}

impl EqualitySpace {
    /// The equalities as a conjunction over `vocab` and its primed copy.
    pub fn to_formula(&self, vocab: &[Var]) -> Formula {
        let vars: Vec<Var> = vocab.iter().cloned().chain(vocab.iter().map(Var::primed)).collect();
        Formula::and(
            (0..self.basis.rows())
                .map(|i| equality_row(self.basis.row(i), &vars))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }
}

fn equality_row(row: &[Rational], vars: &[Var]) -> Formula {
    let k = vars.len();
    Formula::eq(
        Term::linear(&row[..k], vars, rat(0)),
        Term::Const(row[k].clone()),
    )
}

/// Computes the affine hull of the `(x, x')`-projection of `c` by sampling:
/// the candidate equalities are those satisfied by every sample so far, and
/// the solver is asked for a model violating one of them until none exists.
pub fn affine_equalities(h: &mut Solver, c: &Formula, vocab: &[Var]) -> Result<EqualitySpace> {
    let n = vocab.len();
    let coords: Vec<Var> = vocab.iter().cloned().chain(vocab.iter().map(Var::primed)).collect();
    let mut avoid: HashSet<Arc<str>> = coords.iter().map(|v| Arc::from(v.name())).collect();
    let (c_sk, _) = skolemize_formula(c, &mut avoid);

    h.push()?;
    let result = (|| {
        h.declare_all(&coords)?;
        h.assert(&c_sk)?;
        if !h.check()? {
            return Err(Error::Unsat);
        }
        let mut points = vec![point(&h.values(&coords)?, &coords)];
        for _ in 0..=2 * n + 1 {
            let basis = hull_equalities(&points, 2 * n);
            if basis.rows() == 0 {
                return Ok(basis);
            }
            let violated = Formula::or(
                (0..basis.rows())
                    .map(|i| {
                        let Formula::Eq(s, t) = equality_row(basis.row(i), &coords) else {
                            unreachable!()
                        };
                        Formula::ne(s, t)
                    })
                    .collect(),
            );
            h.push()?;
            let found = (|| {
                h.assert(&violated)?;
                if h.check()? {
                    Ok(Some(point(&h.values(&coords)?, &coords)))
                } else {
                    Ok(None)
                }
            })();
            h.pop()?;
            match found? {
                Some(p) => {
                    trace!(samples = points.len() + 1, "affine hull grew");
                    points.push(p);
                }
                None => return Ok(basis),
            }
        }
        Err(Error::Solver("affine hull sampling did not converge".into()))
    })();
    h.pop()?;
    Ok(EqualitySpace {
        basis: result?,
        n,
    })
}

fn point(m: &Model, coords: &[Var]) -> Vec<Rational> {
    coords.iter().map(|v| m.value(v)).collect()
}

/// Equalities `(w, b)` with `w . p = b` for every sample `p`.
fn hull_equalities(points: &[Vec<Rational>], k: usize) -> Matrix {
    let rows: Vec<Vec<Rational>> = points
        .iter()
        .map(|p| p.iter().cloned().chain(std::iter::once(rat(-1))).collect())
        .collect();
    nullspace(&Matrix::from_rows(k + 1, rows))
}
