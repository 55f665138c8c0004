//! Rational vector addition systems with resets (Q-VASR), linear
//! simulations, best abstractions of conjunctive formulas, least upper
//! bounds and the abstract-VASR procedure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::Zero;
use tracing::{debug, trace};

use crate::config::Limits;
use crate::error::{Error, Result};
use crate::linalg::{left_nullspace, pushout, rref, Matrix, Rational, RationalVector};
use crate::logic::{
    affine_equalities, entails, negate, select_cube, skolemize, Formula, Solver, Term,
    TransitionFormula, Var,
};

/// A reset/add pair. `keep[i]` is the reset entry `r_i`: `true` for 1
/// (the dimension keeps its value), `false` for 0 (it is reset).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Transformer {
    pub keep: Vec<bool>,
    pub add: RationalVector,
}

impl Transformer {
    pub fn new(keep: Vec<bool>, add: RationalVector) -> Self {
        assert_eq!(keep.len(), add.len(), "reset and add vectors differ in length");
        Transformer { keep, add }
    }

    /// From 0/1 reset entries and integer additions.
    pub fn from_ints(reset: &[u8], add: &[i64]) -> Self {
        assert!(reset.iter().all(|&r| r <= 1), "reset entries must be 0 or 1");
        Transformer::new(
            reset.iter().map(|&r| r == 1).collect(),
            add.iter().map(|&a| crate::linalg::rat(a)).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.keep.len()
    }

    /// `r * u + a`.
    pub fn apply(&self, u: &[Rational]) -> RationalVector {
        u.iter()
            .zip(&self.keep)
            .zip(&self.add)
            .map(|((x, &k), a)| if k { x + a } else { a.clone() })
            .collect()
    }

    pub fn resets(&self, i: usize) -> bool {
        !self.keep[i]
    }
}

impl fmt::Display for Transformer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r: Vec<&str> = self.keep.iter().map(|&k| if k { "1" } else { "0" }).collect();
        let a: Vec<String> = self.add.iter().map(|x| x.to_string()).collect();
        write!(f, "r=({}) a=({})", r.join(","), a.join(","))
    }
}

/// A finite set of transformers of a common dimension.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct QVasr {
    dim: usize,
    transformers: BTreeSet<Transformer>,
}

impl QVasr {
    pub fn new(dim: usize) -> Self {
        QVasr {
            dim,
            transformers: BTreeSet::new(),
        }
    }

    pub fn from_transformers(dim: usize, ts: impl IntoIterator<Item = Transformer>) -> Self {
        let mut v = QVasr::new(dim);
        for t in ts {
            v.insert(t);
        }
        v
    }

    pub fn insert(&mut self, t: Transformer) {
        assert_eq!(t.dim(), self.dim, "transformer dimension mismatch");
        self.transformers.insert(t);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.transformers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transformers.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transformer> {
        self.transformers.iter()
    }

    pub fn contains(&self, t: &Transformer) -> bool {
        self.transformers.contains(t)
    }

    pub fn is_subset(&self, other: &QVasr) -> bool {
        self.transformers.is_subset(&other.transformers)
    }

    pub fn union(&self, other: &QVasr) -> QVasr {
        assert_eq!(self.dim, other.dim);
        QVasr {
            dim: self.dim,
            transformers: self.transformers.union(&other.transformers).cloned().collect(),
        }
    }

    pub fn coherence_classes(&self) -> CoherencePartition {
        coherence_of(self.dim, self.iter())
    }
}

/// Partition of `0..d` into coherence classes, each sorted, ordered by
/// their minimum element.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CoherencePartition {
    pub classes: Vec<Vec<usize>>,
}

impl CoherencePartition {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_of(&self, i: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(&i))
    }
}

/// Coherence classes of dimension `d` with respect to a set of
/// transformers: `i` and `j` share a class iff every transformer resets
/// both or neither.
pub fn coherence_of<'a>(d: usize, ts: impl Iterator<Item = &'a Transformer>) -> CoherencePartition {
    let ts: Vec<&Transformer> = ts.collect();
    let mut groups: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
    for i in 0..d {
        let sig: Vec<bool> = ts.iter().map(|t| t.keep[i]).collect();
        groups.entry(sig).or_default().push(i);
    }
    let mut classes: Vec<Vec<usize>> = groups.into_values().collect();
    classes.sort_by_key(|c| c[0]);
    CoherencePartition { classes }
}

/// A Q-VASR abstraction `(S, V)`: `S` is `d x n`, `V` has dimension `d`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VasrAbstraction {
    pub sim: Matrix,
    pub vasr: QVasr,
}

impl VasrAbstraction {
    pub fn new(sim: Matrix, vasr: QVasr) -> Result<Self> {
        if sim.rows() != vasr.dim() {
            return Err(Error::DimensionMismatch(format!(
                "simulation has {} rows but the Q-VASR has dimension {}",
                sim.rows(),
                vasr.dim()
            )));
        }
        Ok(VasrAbstraction { sim, vasr })
    }

    /// `(I_n, {})`, simulating only the empty relation.
    pub fn bottom(n: usize) -> Self {
        VasrAbstraction {
            sim: Matrix::identity(n),
            vasr: QVasr::new(n),
        }
    }

    /// The zero-dimensional abstraction with one transformer; simulates
    /// every relation.
    pub fn top(n: usize) -> Self {
        VasrAbstraction {
            sim: Matrix::zeros(0, n),
            vasr: QVasr::from_transformers(0, [Transformer::new(vec![], vec![])]),
        }
    }

    pub fn dim(&self) -> usize {
        self.sim.rows()
    }

    pub fn concrete_dim(&self) -> usize {
        self.sim.cols()
    }

    /// For every coherence class `C`, the rows of `S` indexed by `C` are
    /// linearly independent.
    pub fn is_normal(&self) -> bool {
        is_normal(&self.sim, &self.vasr.coherence_classes())
    }

    /// `\/_{(r,a) in V} S x' = r * S x + a`.
    pub fn gamma(&self, vocab: &[Var]) -> TransitionFormula {
        assert_eq!(vocab.len(), self.concrete_dim(), "vocabulary size mismatch");
        TransitionFormula::new(gamma_formula(&self.sim, self.vasr.iter(), vocab), vocab.to_vec())
    }
}

pub(crate) fn is_normal(sim: &Matrix, classes: &CoherencePartition) -> bool {
    classes
        .classes
        .iter()
        .all(|c| sim.select_rows(c).has_independent_rows())
}

/// `S x' = r * S x + a` conjoined over dimensions, disjoined over `ts`.
pub fn gamma_formula<'a>(
    sim: &Matrix,
    ts: impl Iterator<Item = &'a Transformer>,
    vocab: &[Var],
) -> Formula {
    let post: Vec<Var> = vocab.iter().map(Var::primed).collect();
    let zero = Rational::zero();
    Formula::or(
        ts.map(|t| {
            Formula::and(
                (0..sim.rows())
                    .map(|i| {
                        let lhs = Term::linear(sim.row(i), &post, zero.clone());
                        let rhs = if t.keep[i] {
                            Term::linear(sim.row(i), vocab, t.add[i].clone())
                        } else {
                            Term::Const(t.add[i].clone())
                        };
                        Formula::eq(lhs, rhs)
                    })
                    .collect(),
            )
        })
        .collect(),
    )
}

impl fmt::Display for VasrAbstraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "S ({}x{}):", self.dim(), self.concrete_dim())?;
        for row in self.sim.row_iter() {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(f, "  [{}]", cells.join(" "))?;
        }
        writeln!(f, "V ({} transformers):", self.vasr.len())?;
        for t in self.vasr.iter() {
            writeln!(f, "  {t}")?;
        }
        Ok(())
    }
}

/// Image of `V` under a coherent simulation `T` (`e x d`): each row `i` of
/// `T` inherits the reset behavior of the dimensions it reads, and the
/// addition vector becomes `T a`.
pub fn image(v: &QVasr, t: &Matrix) -> Result<QVasr> {
    let ts: Vec<&Transformer> = v.iter().collect();
    image_of(v.dim(), &ts, t).map(|ts| QVasr::from_transformers(t.rows(), ts))
}

pub(crate) fn image_of(d: usize, ts: &[&Transformer], t: &Matrix) -> Result<Vec<Transformer>> {
    if t.cols() != d {
        return Err(Error::DimensionMismatch(format!(
            "image matrix has {} columns, Q-VASR has dimension {d}",
            t.cols()
        )));
    }
    let mut support = Vec::with_capacity(t.rows());
    for i in 0..t.rows() {
        let cols: Vec<usize> = (0..d).filter(|&j| !t.get(i, j).is_zero()).collect();
        if cols.is_empty() {
            return Err(Error::ZeroRow(i));
        }
        for tr in ts {
            if cols.iter().any(|&j| tr.keep[j] != tr.keep[cols[0]]) {
                return Err(Error::Incoherent(i));
            }
        }
        support.push(cols[0]);
    }
    Ok(ts
        .iter()
        .map(|tr| {
            Transformer::new(
                support.iter().map(|&j| tr.keep[j]).collect(),
                t.apply(&tr.add),
            )
        })
        .collect())
}

/// Best abstraction of a satisfiable conjunctive formula: reset rows come
/// from the functionals the formula sets to a constant, increment rows from
/// the functionals it shifts by a constant.
pub fn alpha_hat(h: &mut Solver, cube: &Formula, vocab: &[Var]) -> Result<VasrAbstraction> {
    let n = vocab.len();
    let e = affine_equalities(h, cube, vocab)?.basis;
    let pre = e.col_range(0, n);
    let post = e.col_range(n, 2 * n);
    let tail = e.col_range(n, 2 * n + 1);

    let res = rref(&left_nullspace(&pre).mul(&tail)).0;
    let sum = Matrix::new(
        pre.rows(),
        n,
        pre.row_iter()
            .zip(post.row_iter())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>())
            .collect(),
    );
    let inc = rref(&left_nullspace(&sum).mul(&tail)).0;

    let mut sim = Matrix::zeros(0, n);
    let mut keep = Vec::new();
    let mut add = Vec::new();
    for (block, k) in [(&res, false), (&inc, true)] {
        for row in block.row_iter() {
            sim.push_row(row[..n].to_vec());
            keep.push(k);
            add.push(row[n].clone());
        }
    }
    trace!(resets = res.rows(), increments = inc.rows(), "alpha-hat");
    let d = keep.len();
    VasrAbstraction::new(sim, QVasr::from_transformers(d, [Transformer::new(keep, add)]))
}

/// Least upper bound of two normal abstractions. Returns `(A, T1, T2)` with
/// `T1 S1 = S = T2 S2` and `image(V_i, T_i)` contained in `A`'s Q-VASR.
pub fn lub(
    a1: &VasrAbstraction,
    a2: &VasrAbstraction,
) -> Result<(VasrAbstraction, Matrix, Matrix)> {
    if a1.concrete_dim() != a2.concrete_dim() {
        return Err(Error::DimensionMismatch(format!(
            "abstractions over {} and {} variables",
            a1.concrete_dim(),
            a2.concrete_dim()
        )));
    }
    let classes1 = a1.vasr.coherence_classes();
    let classes2 = a2.vasr.coherence_classes();
    if !is_normal(&a1.sim, &classes1) || !is_normal(&a2.sim, &classes2) {
        return Err(Error::NotNormal);
    }
    let (d1, d2) = (a1.dim(), a2.dim());
    let mut t1 = Matrix::zeros(0, d1);
    let mut t2 = Matrix::zeros(0, d2);
    for c1 in &classes1.classes {
        for c2 in &classes2.classes {
            let (u1, u2) = pushout(&a1.sim.select_rows(c1), &a2.sim.select_rows(c2));
            for i in 0..u1.rows() {
                t1.push_row(embed(u1.row(i), c1, d1));
                t2.push_row(embed(u2.row(i), c2, d2));
            }
        }
    }
    let sim = t1.mul(&a1.sim);
    let vasr = image(&a1.vasr, &t1)?.union(&image(&a2.vasr, &t2)?);
    Ok((VasrAbstraction::new(sim, vasr)?, t1, t2))
}

fn embed(u: &[Rational], class: &[usize], d: usize) -> RationalVector {
    let mut row = vec![Rational::zero(); d];
    for (x, &j) in u.iter().zip(class) {
        row[j] = x.clone();
    }
    row
}

/// Best Q-VASR abstraction of a transition formula (for the rational
/// fragment; sound in general).
pub fn abstract_vasr(h: &mut Solver, f: &TransitionFormula) -> Result<VasrAbstraction> {
    abstract_vasr_with(h, f, &Limits::default())
}

pub fn abstract_vasr_with(
    h: &mut Solver,
    f: &TransitionFormula,
    limits: &Limits,
) -> Result<VasrAbstraction> {
    let vocab = f.vocab().to_vec();
    let sk = skolemize(f).formula;
    let mut abs = VasrAbstraction::bottom(vocab.len());
    let mut cubes = 0;
    loop {
        let uncovered = negate(&abs.gamma(&vocab).formula)?;
        let query = Formula::and(vec![sk.clone(), uncovered]);
        let Some(model) = h.check_formula(&query)? else {
            break;
        };
        cubes += 1;
        if cubes > limits.cube_cap {
            return Err(Error::IterationCap(limits.cube_cap));
        }
        let cube = select_cube(&sk, &model)?;
        let local = alpha_hat(h, &cube, &vocab)?;
        abs = lub(&abs, &local)?.0;
        trace!(cubes, dim = abs.dim(), transformers = abs.vasr.len(), "joined cube");
    }
    debug!(cubes, dim = abs.dim(), transformers = abs.vasr.len(), "abstract-VASR done");
    Ok(abs)
}

/// Whether `f` entails `gamma(a)`.
pub fn check_simulation(h: &mut Solver, f: &TransitionFormula, a: &VasrAbstraction) -> Result<bool> {
    if f.dim() != a.concrete_dim() {
        return Err(Error::DimensionMismatch(format!(
            "formula over {} variables, abstraction over {}",
            f.dim(),
            a.concrete_dim()
        )));
    }
    entails(h, &f.formula, &a.gamma(f.vocab()).formula)
}

/// Some `T` with `T S1 = S2`, coherent with respect to `V1`, without zero
/// rows, and with `image(V1, T)` contained in `V2`; `None` if there is none.
/// Each row of `T` is supported on a single coherence class of `V1`; the
/// search tries every class assignment.
pub fn find_simulation(a1: &VasrAbstraction, a2: &VasrAbstraction) -> Option<Matrix> {
    let classes = a1.vasr.coherence_classes();
    let candidates: Vec<Vec<RationalVector>> = (0..a2.dim())
        .map(|i| {
            let target = a2.sim.row(i);
            classes
                .classes
                .iter()
                .filter_map(|c| {
                    let coeffs = crate::linalg::in_rowspace(target, &a1.sim.select_rows(c))?;
                    let row = embed(&coeffs, c, a1.dim());
                    (!row.iter().all(Zero::is_zero)).then_some(row)
                })
                .collect()
        })
        .collect();
    if candidates.iter().any(Vec::is_empty) {
        return None;
    }
    let mut choice = vec![0usize; candidates.len()];
    loop {
        let t = Matrix::from_rows(
            a1.dim(),
            choice.iter().zip(&candidates).map(|(&k, c)| c[k].clone()).collect(),
        );
        if image(&a1.vasr, &t).is_ok_and(|img| img.is_subset(&a2.vasr)) {
            return Some(t);
        }
        let mut i = 0;
        loop {
            if i == choice.len() {
                return None;
            }
            choice[i] += 1;
            if choice[i] < candidates[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rat_vec;

    fn tr(r: &[u8], a: &[i64]) -> Transformer {
        Transformer::from_ints(r, a)
    }

    #[test]
    fn coherence_examples() {
        let v = QVasr::from_transformers(2, [tr(&[0, 1], &[0, 0])]);
        assert_eq!(v.coherence_classes().classes, vec![vec![0], vec![1]]);
        let v = QVasr::from_transformers(2, [tr(&[0, 0], &[1, 2]), tr(&[1, 1], &[0, 0])]);
        assert_eq!(v.coherence_classes().classes, vec![vec![0, 1]]);
        let v = QVasr::from_transformers(3, [tr(&[0, 1, 1], &[0; 3]), tr(&[0, 0, 1], &[0; 3])]);
        assert_eq!(v.coherence_classes().classes, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(QVasr::new(3).coherence_classes().classes, vec![vec![0, 1, 2]]);
        assert!(QVasr::new(0).coherence_classes().is_empty());
    }

    #[test]
    fn image_examples() {
        let v = QVasr::from_transformers(2, [tr(&[1, 0], &[2, 3])]);
        assert_eq!(image(&v, &Matrix::identity(2)).unwrap(), v);
        let img = image(&v, &Matrix::from_i64(2, &[&[0, 1]])).unwrap();
        assert_eq!(img, QVasr::from_transformers(1, [tr(&[0], &[3])]));
        let v = QVasr::from_transformers(2, [tr(&[1, 1], &[1, -1])]);
        let img = image(&v, &Matrix::from_i64(2, &[&[1, 1]])).unwrap();
        assert_eq!(img, QVasr::from_transformers(1, [tr(&[1], &[0])]));
    }

    #[test]
    fn image_rejects_bad_matrices() {
        let v = QVasr::from_transformers(2, [tr(&[1, 0], &[2, 3])]);
        assert!(matches!(image(&v, &Matrix::from_i64(2, &[&[1, 1]])), Err(Error::Incoherent(0))));
        assert!(matches!(image(&v, &Matrix::from_i64(2, &[&[0, 0]])), Err(Error::ZeroRow(0))));
    }

    #[test]
    fn image_merges_duplicates() {
        let v = QVasr::from_transformers(2, [tr(&[1, 1], &[1, 0]), tr(&[1, 1], &[0, 1])]);
        let img = image(&v, &Matrix::from_i64(2, &[&[1, 1]])).unwrap();
        assert_eq!(img.len(), 1);
    }

    #[test]
    fn transformer_semantics() {
        let t = tr(&[1, 0], &[1, 4]);
        assert_eq!(t.apply(&rat_vec(&[2, 3])), rat_vec(&[3, 4]));
    }

    #[test]
    fn lub_worked_example() {
        let a1 = VasrAbstraction::new(
            Matrix::identity(2),
            QVasr::from_transformers(2, [tr(&[1, 1], &[1, 0])]),
        )
        .unwrap();
        let a2 = VasrAbstraction::new(
            Matrix::from_i64(2, &[&[1, 0], &[1, 1]]),
            QVasr::from_transformers(2, [tr(&[0, 1], &[0, 0])]),
        )
        .unwrap();
        let (a, t1, t2) = lub(&a1, &a2).unwrap();
        assert_eq!(t1.mul(&a1.sim), a.sim);
        assert_eq!(t2.mul(&a2.sim), a.sim);
        assert!(a.is_normal());
        assert_eq!(a.sim, Matrix::from_i64(2, &[&[1, 0], &[1, 1]]));
        assert_eq!(
            a.vasr,
            QVasr::from_transformers(2, [tr(&[1, 1], &[1, 1]), tr(&[0, 1], &[0, 0])])
        );
    }

    #[test]
    fn lub_with_top_is_top() {
        let a1 = VasrAbstraction::new(
            Matrix::identity(2),
            QVasr::from_transformers(2, [tr(&[1, 1], &[1, 0])]),
        )
        .unwrap();
        let (a, t1, t2) = lub(&a1, &VasrAbstraction::top(2)).unwrap();
        assert_eq!(a, VasrAbstraction::top(2));
        assert_eq!((t1.rows(), t2.rows()), (0, 0));
    }

    #[test]
    fn lub_rejects_non_normal() {
        let bad = VasrAbstraction::new(
            Matrix::from_i64(2, &[&[1, 0], &[2, 0]]),
            QVasr::from_transformers(2, [tr(&[1, 1], &[0, 0])]),
        )
        .unwrap();
        assert!(matches!(lub(&bad, &bad), Err(Error::NotNormal)));
    }

    #[test]
    fn gamma_of_empty_and_top() {
        let vocab = vec![Var::int("x")];
        assert!(VasrAbstraction::bottom(1).gamma(&vocab).formula.is_false());
        assert!(VasrAbstraction::top(1).gamma(&vocab).formula.is_true());
    }

    #[test]
    fn find_simulation_recovers_lub_witness() {
        let a1 = VasrAbstraction::new(
            Matrix::identity(2),
            QVasr::from_transformers(2, [tr(&[1, 1], &[1, 0])]),
        )
        .unwrap();
        let a2 = VasrAbstraction::new(
            Matrix::from_i64(2, &[&[1, 0], &[1, 1]]),
            QVasr::from_transformers(2, [tr(&[0, 1], &[0, 0])]),
        )
        .unwrap();
        let (a, _, _) = lub(&a1, &a2).unwrap();
        let t = find_simulation(&a1, &a).unwrap();
        assert_eq!(t.mul(&a1.sim), a.sim);
        assert!(find_simulation(&a, &a1).is_none());
    }
}
