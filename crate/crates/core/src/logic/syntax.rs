//! Terms and negation-free formulas of existential linear integer/rational
//! arithmetic.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::linalg::{rat, Rational};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Sort {
    Int,
    Real,
}

/// A sorted symbol. Two variables are equal iff name and sort agree.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    name: Arc<str>,
    sort: Sort,
}

impl Var {
    pub fn new(name: impl AsRef<str>, sort: Sort) -> Self {
        Var {
            name: Arc::from(name.as_ref()),
            sort,
        }
    }

    pub fn int(name: impl AsRef<str>) -> Self {
        Var::new(name, Sort::Int)
    }

    pub fn real(name: impl AsRef<str>) -> Self {
        Var::new(name, Sort::Real)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sort(&self) -> Sort {
        self.sort
    }

    /// Post-state copy: `x` becomes `x'`.
    pub fn primed(&self) -> Var {
        Var::new(format!("{}'", self.name), self.sort)
    }

    pub fn term(&self) -> Term {
        Term::Var(self.clone())
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// Returns `base!i` for the smallest `i` whose name is not in `avoid`.
pub fn fresh_var(base: &Var, avoid: &HashSet<Arc<str>>) -> Var {
    let stem = base.name().split('!').next().unwrap_or(base.name());
    (0..)
        .map(|i| Var::new(format!("{stem}!{i}"), base.sort()))
        .find(|v| !avoid.contains(v.name()))
        .expect("unbounded search")
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Term {
    Const(Rational),
    Var(Var),
    Add(Vec<Term>),
    Scale(Rational, Box<Term>),
}

#[allow(clippy::should_implement_trait)]
impl Term {
    pub fn constant(c: Rational) -> Term {
        Term::Const(c)
    }

    pub fn int(c: i64) -> Term {
        Term::Const(rat(c))
    }

    pub fn zero() -> Term {
        Term::int(0)
    }

    pub fn add(self, other: Term) -> Term {
        Term::Add(vec![self, other])
    }

    pub fn sub(self, other: Term) -> Term {
        Term::Add(vec![self, other.neg()])
    }

    pub fn neg(self) -> Term {
        self.scale(-Rational::one())
    }

    pub fn scale(self, c: Rational) -> Term {
        Term::Scale(c, Box::new(self))
    }

    pub fn sum(terms: Vec<Term>) -> Term {
        match terms.len() {
            0 => Term::zero(),
            1 => terms.into_iter().next().unwrap(),
            _ => Term::Add(terms),
        }
    }

    /// `sum_i coeffs[i] * vars[i] + constant`, dropping zero coefficients.
    pub fn linear(coeffs: &[Rational], vars: &[Var], constant: Rational) -> Term {
        assert_eq!(coeffs.len(), vars.len());
        let mut parts: Vec<Term> = coeffs
            .iter()
            .zip(vars)
            .filter(|(c, _)| !c.is_zero())
            .map(|(c, v)| {
                if c.is_one() {
                    v.term()
                } else {
                    v.term().scale(c.clone())
                }
            })
            .collect();
        if !constant.is_zero() || parts.is_empty() {
            parts.push(Term::Const(constant));
        }
        Term::sum(parts)
    }

    pub fn to_lin(&self) -> LinExpr {
        let mut out = LinExpr::default();
        self.accumulate(&Rational::one(), &mut out);
        out.coeffs.retain(|_, c| !c.is_zero());
        out
    }

    fn accumulate(&self, factor: &Rational, out: &mut LinExpr) {
        match self {
            Term::Const(c) => out.constant += factor * c,
            Term::Var(v) => {
                *out.coeffs.entry(v.clone()).or_insert_with(Rational::zero) += factor;
            }
            Term::Add(ts) => ts.iter().for_each(|t| t.accumulate(factor, out)),
            Term::Scale(c, t) => t.accumulate(&(factor * c), out),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Const(_) => {}
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Add(ts) => ts.iter().for_each(|t| t.collect_vars(out)),
            Term::Scale(_, t) => t.collect_vars(out),
        }
    }

    pub fn substitute(&self, map: &BTreeMap<Var, Term>) -> Term {
        match self {
            Term::Const(_) => self.clone(),
            Term::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Add(ts) => Term::Add(ts.iter().map(|t| t.substitute(map)).collect()),
            Term::Scale(c, t) => Term::Scale(c.clone(), Box::new(t.substitute(map))),
        }
    }

    pub fn eval(&self, model: &Model) -> Rational {
        self.to_lin().eval(model)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_lin())
    }
}

/// Linear normal form `sum c_v * v + constant`.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct LinExpr {
    pub coeffs: BTreeMap<Var, Rational>,
    pub constant: Rational,
}

impl LinExpr {
    pub fn eval(&self, model: &Model) -> Rational {
        self.coeffs
            .iter()
            .fold(self.constant.clone(), |acc, (v, c)| acc + c * model.value(v))
    }

    pub fn coeff(&self, v: &Var) -> Rational {
        self.coeffs.get(v).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.coeffs {
            let neg = c < &Rational::zero();
            let mag = if neg { -c.clone() } else { c.clone() };
            match (first, neg) {
                (true, true) => write!(f, "-")?,
                (true, false) => {}
                (false, true) => write!(f, " - ")?,
                (false, false) => write!(f, " + ")?,
            }
            if mag.is_one() {
                write!(f, "{v}")?;
            } else {
                write!(f, "{mag}*{v}")?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant > Rational::zero() {
            write!(f, " + {}", self.constant)
        } else if self.constant < Rational::zero() {
            write!(f, " - {}", -self.constant.clone())
        } else {
            Ok(())
        }
    }
}

/// Negation-free formula. `And([])` is true and `Or([])` is false.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Formula {
    Lt(Term, Term),
    Eq(Term, Term),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Exists(Var, Box<Formula>),
}

impl Formula {
    pub fn tt() -> Formula {
        Formula::And(vec![])
    }

    pub fn ff() -> Formula {
        Formula::Or(vec![])
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Formula::And(v) if v.is_empty())
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Formula::Or(v) if v.is_empty())
    }

    pub fn lt(s: Term, t: Term) -> Formula {
        Formula::Lt(s, t)
    }

    pub fn eq(s: Term, t: Term) -> Formula {
        Formula::Eq(s, t)
    }

    pub fn gt(s: Term, t: Term) -> Formula {
        Formula::Lt(t, s)
    }

    /// `s <= t` as `s < t \/ s = t`.
    pub fn le(s: Term, t: Term) -> Formula {
        Formula::Or(vec![Formula::Lt(s.clone(), t.clone()), Formula::Eq(s, t)])
    }

    pub fn ge(s: Term, t: Term) -> Formula {
        Formula::le(t, s)
    }

    pub fn ne(s: Term, t: Term) -> Formula {
        Formula::Or(vec![Formula::Lt(s.clone(), t.clone()), Formula::Lt(t, s)])
    }

    /// `t >= c` for an integer-valued term, written as the single atom
    /// `c - 1 < t`.
    pub fn int_ge(t: Term, c: i64) -> Formula {
        Formula::Lt(Term::int(c - 1), t)
    }

    /// Conjunction; flattens nested conjunctions and absorbs constants.
    pub fn and(parts: Vec<Formula>) -> Formula {
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Formula::And(inner) => out.extend(inner),
                p if p.is_false() => return Formula::ff(),
                p => out.push(p),
            }
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else {
            Formula::And(out)
        }
    }

    /// Disjunction; flattens nested disjunctions and absorbs constants.
    pub fn or(parts: Vec<Formula>) -> Formula {
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Formula::Or(inner) => out.extend(inner),
                p if p.is_true() => return Formula::tt(),
                p => out.push(p),
            }
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else {
            Formula::Or(out)
        }
    }

    /// Top-level conjuncts (a single element for non-conjunctions).
    pub fn into_conjuncts(self) -> Vec<Formula> {
        match self {
            Formula::And(parts) => parts,
            other => vec![other],
        }
    }

    pub fn exists(vars: impl IntoIterator<Item = Var>, body: Formula) -> Formula {
        let vars: Vec<Var> = vars.into_iter().collect();
        vars.into_iter()
            .rev()
            .fold(body, |acc, v| Formula::Exists(v, Box::new(acc)))
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::Lt(..) | Formula::Eq(..) => true,
            Formula::And(fs) | Formula::Or(fs) => fs.iter().all(Formula::is_quantifier_free),
            Formula::Exists(..) => false,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
        match self {
            Formula::Lt(s, t) | Formula::Eq(s, t) => {
                let mut vs = BTreeSet::new();
                s.collect_vars(&mut vs);
                t.collect_vars(&mut vs);
                out.extend(vs.into_iter().filter(|v| !bound.contains(v)));
            }
            Formula::And(fs) | Formula::Or(fs) => {
                fs.iter().for_each(|f| f.collect_free(bound, out));
            }
            Formula::Exists(v, body) => {
                bound.push(v.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    /// Every symbol name occurring in the formula, free or bound.
    pub fn names(&self) -> HashSet<Arc<str>> {
        let mut out = HashSet::new();
        self.collect_names(&mut out);
        out
    }

    pub fn collect_names(&self, out: &mut HashSet<Arc<str>>) {
        match self {
            Formula::Lt(s, t) | Formula::Eq(s, t) => {
                let mut vs = BTreeSet::new();
                s.collect_vars(&mut vs);
                t.collect_vars(&mut vs);
                out.extend(vs.into_iter().map(|v| v.name));
            }
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_names(out)),
            Formula::Exists(v, body) => {
                out.insert(v.name.clone());
                body.collect_names(out);
            }
        }
    }

    /// Capture-avoiding simultaneous substitution of free variables.
    pub fn substitute(&self, map: &BTreeMap<Var, Term>) -> Formula {
        if map.is_empty() {
            return self.clone();
        }
        let mut range_names = HashSet::new();
        for t in map.values() {
            let mut vs = BTreeSet::new();
            t.collect_vars(&mut vs);
            range_names.extend(vs.into_iter().map(|v| v.name));
        }
        self.subst_rec(map, &range_names)
    }

    fn subst_rec(&self, map: &BTreeMap<Var, Term>, range_names: &HashSet<Arc<str>>) -> Formula {
        match self {
            Formula::Lt(s, t) => Formula::Lt(s.substitute(map), t.substitute(map)),
            Formula::Eq(s, t) => Formula::Eq(s.substitute(map), t.substitute(map)),
            Formula::And(fs) => Formula::And(fs.iter().map(|f| f.subst_rec(map, range_names)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|f| f.subst_rec(map, range_names)).collect()),
            Formula::Exists(v, body) => {
                let mut inner = map.clone();
                inner.remove(v);
                if inner.is_empty() {
                    return self.clone();
                }
                if range_names.contains(v.name()) {
                    let mut avoid = body.names();
                    avoid.extend(range_names.iter().cloned());
                    for t in inner.values() {
                        let mut vs = BTreeSet::new();
                        t.collect_vars(&mut vs);
                        avoid.extend(vs.into_iter().map(|v| v.name));
                    }
                    let fresh = fresh_var(v, &avoid);
                    let mut rename = BTreeMap::new();
                    rename.insert(v.clone(), fresh.term());
                    let renamed = body.substitute(&rename);
                    Formula::Exists(fresh, Box::new(renamed.subst_rec(&inner, range_names)))
                } else {
                    Formula::Exists(v.clone(), Box::new(body.subst_rec(&inner, range_names)))
                }
            }
        }
    }

    /// Truth value under `model` (unassigned symbols read as 0). `None` for
    /// quantified subformulas that the model cannot decide.
    pub fn eval(&self, model: &Model) -> Option<bool> {
        match self {
            Formula::Lt(s, t) => Some(s.eval(model) < t.eval(model)),
            Formula::Eq(s, t) => Some(s.eval(model) == t.eval(model)),
            Formula::And(fs) => {
                let mut all = true;
                for f in fs {
                    match f.eval(model) {
                        Some(false) => return Some(false),
                        Some(true) => {}
                        None => all = false,
                    }
                }
                if all {
                    Some(true)
                } else {
                    None
                }
            }
            Formula::Or(fs) => {
                let mut all = true;
                for f in fs {
                    match f.eval(model) {
                        Some(true) => return Some(true),
                        Some(false) => {}
                        None => all = false,
                    }
                }
                if all {
                    Some(false)
                } else {
                    None
                }
            }
            Formula::Exists(..) => None,
        }
    }

    /// Atoms in left-to-right order.
    pub fn atoms(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Formula>) {
        match self {
            Formula::Lt(..) | Formula::Eq(..) => out.push(self),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_atoms(out)),
            Formula::Exists(_, body) => body.collect_atoms(out),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Formula::Lt(..) | Formula::Eq(..) => 1,
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(Formula::size).sum::<usize>(),
            Formula::Exists(_, body) => 1 + body.size(),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Lt(s, t) => write!(f, "{s} < {t}"),
            Formula::Eq(s, t) => write!(f, "{s} = {t}"),
            Formula::And(fs) if fs.is_empty() => write!(f, "true"),
            Formula::Or(fs) if fs.is_empty() => write!(f, "false"),
            Formula::And(fs) | Formula::Or(fs) => {
                let sep = if matches!(self, Formula::And(_)) { " /\\ " } else { " \\/ " };
                write!(f, "(")?;
                for (i, g) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "{sep}")?;
                    }
                    write!(f, "{g}")?;
                }
                write!(f, ")")
            }
            Formula::Exists(v, body) => {
                let s = if v.sort() == Sort::Int { "Z" } else { "Q" };
                write!(f, "(exists {v}:{s}. {body})")
            }
        }
    }
}

/// Assignment of rational values to symbol names.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Model {
    values: BTreeMap<String, Rational>,
}

impl Model {
    pub fn new() -> Self {
        Model::default()
    }

    pub fn insert(&mut self, var: &Var, value: Rational) {
        self.values.insert(var.name().to_string(), value);
    }

    pub fn with(mut self, var: &Var, value: Rational) -> Self {
        self.insert(var, value);
        self
    }

    /// Value of `var`; symbols the model does not mention read as 0.
    pub fn value(&self, var: &Var) -> Rational {
        self.values.get(var.name()).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn get(&self, name: &str) -> Option<&Rational> {
        self.values.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Rational)> {
        self.values.iter()
    }
}

/// A formula over a vocabulary `x` and its primed copy `x'`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TransitionFormula {
    pub formula: Formula,
    vocab: Vec<Var>,
}

impl TransitionFormula {
    pub fn new(formula: Formula, vocab: Vec<Var>) -> Self {
        TransitionFormula { formula, vocab }
    }

    pub fn vocab(&self) -> &[Var] {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.vocab.len()
    }

    pub fn post_vocab(&self) -> Vec<Var> {
        self.vocab.iter().map(Var::primed).collect()
    }

    /// `x' = x`.
    pub fn identity(vocab: Vec<Var>) -> Self {
        let f = Formula::and(
            vocab
                .iter()
                .map(|v| Formula::eq(v.primed().term(), v.term()))
                .collect(),
        );
        TransitionFormula::new(f, vocab)
    }

    pub fn falsum(vocab: Vec<Var>) -> Self {
        TransitionFormula::new(Formula::ff(), vocab)
    }

    pub fn with_formula(&self, formula: Formula) -> Self {
        TransitionFormula::new(formula, self.vocab.clone())
    }

    /// Renames pre-state variables to the given terms.
    pub fn pre_map(&self, terms: &[Term]) -> BTreeMap<Var, Term> {
        self.vocab.iter().cloned().zip(terms.iter().cloned()).collect()
    }

    /// Renames post-state variables to the given terms.
    pub fn post_map(&self, terms: &[Term]) -> BTreeMap<Var, Term> {
        self.vocab.iter().map(Var::primed).zip(terms.iter().cloned()).collect()
    }

    /// State predicate over `x` moved to `x'`.
    pub fn prime_state(&self, pred: &Formula) -> Formula {
        let map = self.pre_map(&self.post_vocab().iter().map(Var::term).collect::<Vec<_>>());
        pred.substitute(&map)
    }
}

impl fmt::Display for TransitionFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.formula)
    }
}
