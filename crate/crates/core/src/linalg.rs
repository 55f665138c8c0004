//! Exact rational linear algebra.
//!
//! Every basis returned from this module is in reduced row echelon form
//! with unit pivots and no zero rows, so two bases span the same space iff
//! they are structurally equal. The empty basis is a `0 x n` matrix.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rational = BigRational;
pub type RationalVector = Vec<Rational>;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_vec(xs: &[i64]) -> RationalVector {
    xs.iter().map(|&x| rat(x)).collect()
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

/// Dense row-major matrix over the rationals.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Rational>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has wrong length");
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::new(rows, cols, vec![Rational::zero(); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    /// Builds a matrix from its rows. `cols` is needed to represent `0 x n`.
    pub fn from_rows(cols: usize, rows: Vec<RationalVector>) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "row has wrong length");
            data.extend(r);
        }
        Matrix::new(n, cols, data)
    }

    pub fn from_i64(cols: usize, rows: &[&[i64]]) -> Self {
        Matrix::from_rows(cols, rows.iter().map(|r| rat_vec(r)).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vec(&self, i: usize) -> RationalVector {
        self.row(i).to_vec()
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[Rational]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn is_zero_row(&self, i: usize) -> bool {
        self.row(i).iter().all(Zero::is_zero)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matrix product dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        let idx = i * out.cols + j;
                        out.data[idx] += a * b;
                    }
                }
            }
        }
        out
    }

    /// `M v` for a column vector `v`.
    pub fn apply(&self, v: &[Rational]) -> RationalVector {
        assert_eq!(v.len(), self.cols);
        self.row_iter().map(|r| dot(r, v)).collect()
    }

    /// `t M` for a row vector `t`.
    pub fn left_apply(&self, t: &[Rational]) -> RationalVector {
        assert_eq!(t.len(), self.rows);
        let mut out = vec![Rational::zero(); self.cols];
        for (i, ti) in t.iter().enumerate() {
            if ti.is_zero() {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += ti * self.get(i, j);
            }
        }
        out
    }

    pub fn neg(&self) -> Matrix {
        Matrix::new(self.rows, self.cols, self.data.iter().map(|x| -x).collect())
    }

    /// Stacks `self` above `other`.
    pub fn vstack(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "vstack column mismatch");
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        Matrix::new(self.rows + other.rows, self.cols, data)
    }

    /// Places `self` to the left of `other`.
    pub fn hstack(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "hstack row mismatch");
        let rows = (0..self.rows)
            .map(|i| {
                let mut r = self.row_vec(i);
                r.extend(other.row(i).iter().cloned());
                r
            })
            .collect();
        Matrix::from_rows(self.cols + other.cols, rows)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        Matrix::from_rows(self.cols, idx.iter().map(|&i| self.row_vec(i)).collect())
    }

    /// Columns `range.start .. range.end`.
    pub fn col_range(&self, start: usize, end: usize) -> Matrix {
        Matrix::from_rows(
            end - start,
            self.row_iter().map(|r| r[start..end].to_vec()).collect(),
        )
    }

    pub fn push_row(&mut self, row: RationalVector) {
        assert_eq!(row.len(), self.cols);
        self.data.extend(row);
        self.rows += 1;
    }

    pub fn rank(&self) -> usize {
        rref(self).1.len()
    }

    /// Rank equals row count.
    pub fn has_independent_rows(&self) -> bool {
        self.rank() == self.rows
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rows == 0 {
            return write!(f, "[] (0x{})", self.cols);
        }
        for i in 0..self.rows {
            let cells: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            write!(f, "[{}]", cells.join(" "))?;
            if i + 1 < self.rows {
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

/// Reduced row echelon form with zero rows dropped, plus the pivot columns.
pub fn rref(m: &Matrix) -> (Matrix, Vec<usize>) {
    let mut rows: Vec<RationalVector> = m.row_iter().map(|r| r.to_vec()).collect();
    let mut pivots = Vec::new();
    let mut lead = 0;
    for col in 0..m.cols() {
        if lead == rows.len() {
            break;
        }
        let Some(p) = (lead..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(lead, p);
        let inv = rows[lead][col].recip();
        for x in rows[lead].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = rows[lead].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r == lead || row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for (x, p) in row.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *x -= &factor * p;
                }
            }
        }
        pivots.push(col);
        lead += 1;
    }
    rows.truncate(lead);
    (Matrix::from_rows(m.cols(), rows), pivots)
}

/// Canonical basis of the rowspace of `m`.
pub fn rowspace_basis(m: &Matrix) -> Matrix {
    rref(m).0
}

/// Basis (in rref) of `{ v : m v = 0 }`; `0 x cols` when trivial.
pub fn nullspace(m: &Matrix) -> Matrix {
    let (r, pivots) = rref(m);
    let n = m.cols();
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    let mut basis = Vec::with_capacity(free.len());
    for &f in &free {
        let mut v = vec![Rational::zero(); n];
        v[f] = Rational::one();
        for (i, &p) in pivots.iter().enumerate() {
            v[p] = -r.get(i, f).clone();
        }
        basis.push(v);
    }
    rref(&Matrix::from_rows(n, basis)).0
}

/// Basis of `{ t : t m = 0 }`.
pub fn left_nullspace(m: &Matrix) -> Matrix {
    nullspace(&m.transpose())
}

/// Best solution to `T1 S1 = T2 S2`: the row pairs `(T1_i, T2_i)` form a
/// basis (in rref) of `{ (t1, t2) : t1 S1 = t2 S2 }`.
pub fn pushout(s1: &Matrix, s2: &Matrix) -> (Matrix, Matrix) {
    assert_eq!(s1.cols(), s2.cols(), "pushout requires equal column counts");
    let stacked = s1.vstack(&s2.neg());
    let basis = left_nullspace(&stacked);
    let d1 = s1.rows();
    (
        basis.col_range(0, d1),
        basis.col_range(d1, d1 + s2.rows()),
    )
}

/// Some `t` with `t m = v`, or `None` when `v` is outside the rowspace.
/// Unique when the rows of `m` are independent.
pub fn in_rowspace(v: &[Rational], m: &Matrix) -> Option<RationalVector> {
    assert_eq!(v.len(), m.cols(), "vector length must equal column count");
    // Solve m^T t = v via the augmented system [m^T | v].
    let vt = Matrix::from_rows(1, v.iter().map(|x| vec![x.clone()]).collect());
    let aug = m.transpose().hstack(&vt);
    let (r, pivots) = rref(&aug);
    let k = m.rows();
    if pivots.last() == Some(&k) {
        return None;
    }
    let mut t = vec![Rational::zero(); k];
    for (i, &p) in pivots.iter().enumerate() {
        t[p] = r.get(i, k).clone();
    }
    Some(t)
}

/// Scales a vector so its entries are coprime integers with a positive
/// leading nonzero entry. Used only for display.
pub fn primitive(v: &[Rational]) -> Vec<BigInt> {
    use num_integer::Integer;
    let lcm = v
        .iter()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| (x * &lcm).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if g.is_zero() {
        return ints;
    }
    let sign = ints
        .iter()
        .find(|x| !x.is_zero())
        .map(|x| if x.is_negative() { -BigInt::one() } else { BigInt::one() })
        .unwrap_or_else(BigInt::one);
    ints.into_iter().map(|x| x / &g * &sign).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(cols: usize, rows: &[&[i64]]) -> Matrix {
        Matrix::from_i64(cols, rows)
    }

    #[test]
    fn rref_identity() {
        let (r, p) = rref(&Matrix::identity(2));
        assert_eq!(r, Matrix::identity(2));
        assert_eq!(p, vec![0, 1]);
    }

    #[test]
    fn rref_rank_one() {
        let (r, p) = rref(&m(2, &[&[2, 4], &[1, 2]]));
        assert_eq!(r, m(2, &[&[1, 2]]));
        assert_eq!(p, vec![0]);
    }

    #[test]
    fn rref_zero_matrix() {
        let (r, p) = rref(&m(2, &[&[0, 0]]));
        assert_eq!((r.rows(), r.cols()), (0, 2));
        assert!(p.is_empty());
    }

    #[test]
    fn nullspace_examples() {
        let ns = nullspace(&Matrix::identity(2));
        assert_eq!((ns.rows(), ns.cols()), (0, 2));

        let ns = nullspace(&m(2, &[&[1, 1]]));
        assert_eq!(ns, m(2, &[&[1, -1]]));

        let ns = nullspace(&m(2, &[&[0, 0]]));
        assert_eq!(ns, Matrix::identity(2));
    }

    #[test]
    fn pushout_examples() {
        let (t1, t2) = pushout(&Matrix::identity(2), &Matrix::identity(2));
        assert_eq!(t1.rows(), 2);
        assert_eq!(t1.mul(&Matrix::identity(2)), t2.mul(&Matrix::identity(2)));
        assert_eq!(t1, t2);

        let (t1, t2) = pushout(&Matrix::identity(2), &m(2, &[&[1, 1]]));
        assert_eq!(t1, m(2, &[&[1, 1]]));
        assert_eq!(t2, m(1, &[&[1]]));

        let (t1, t2) = pushout(&m(2, &[&[1, 0]]), &m(2, &[&[0, 1]]));
        assert_eq!((t1.rows(), t1.cols()), (0, 1));
        assert_eq!((t2.rows(), t2.cols()), (0, 1));
    }

    #[test]
    fn in_rowspace_examples() {
        assert_eq!(
            in_rowspace(&rat_vec(&[1, 1]), &Matrix::identity(2)),
            Some(rat_vec(&[1, 1]))
        );
        assert_eq!(
            in_rowspace(&rat_vec(&[2, 4]), &m(2, &[&[1, 2]])),
            Some(rat_vec(&[2]))
        );
        assert_eq!(in_rowspace(&rat_vec(&[1, 0]), &m(2, &[&[0, 1]])), None);
    }

    #[test]
    fn in_rowspace_of_empty_basis() {
        let empty = Matrix::zeros(0, 3);
        assert_eq!(in_rowspace(&rat_vec(&[0, 0, 0]), &empty), Some(vec![]));
        assert_eq!(in_rowspace(&rat_vec(&[0, 1, 0]), &empty), None);
    }

    #[test]
    fn fractions_stay_exact() {
        let a = m(2, &[&[3, 1], &[1, 3]]);
        let (r, _) = rref(&a);
        assert_eq!(r, Matrix::identity(2));
        let t = in_rowspace(&rat_vec(&[1, 0]), &a).unwrap();
        assert_eq!(t, vec![ratio(3, 8), ratio(-1, 8)]);
    }

    #[test]
    fn primitive_scaling() {
        let v = vec![ratio(1, 2), ratio(-3, 4), rat(0)];
        let p = primitive(&v);
        assert_eq!(p, vec![BigInt::from(2), BigInt::from(-3), BigInt::from(0)]);
    }
}
