use num_traits::Zero;
use proptest::prelude::*;
use vasr_core::linalg::{in_rowspace, nullspace, pushout, rat, rat_vec, rref, Matrix, Rational};

/// Plain Gaussian elimination used as an independent oracle: returns a
/// basis of the solution space of `rows . v = 0` (vectors of length `n`).
fn oracle_kernel(rows: &[Vec<Rational>], n: usize) -> Vec<Vec<Rational>> {
    let mut a: Vec<Vec<Rational>> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..n {
        let Some(p) = (r..a.len()).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(r, p);
        let inv = a[r][c].clone();
        for x in a[r].iter_mut() {
            *x = &*x / &inv;
        }
        for i in 0..a.len() {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                let pivot_row = a[r].clone();
                for (x, p) in a[i].iter_mut().zip(&pivot_row) {
                    *x -= &f * p;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (0..n)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = vec![Rational::zero(); n];
            v[free] = rat(1);
            for (i, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[i][free].clone();
            }
            v
        })
        .collect()
}

fn oracle_rank(rows: &[Vec<Rational>], n: usize) -> usize {
    n - oracle_kernel(rows, n).len()
}

fn rows_of(m: &Matrix) -> Vec<Vec<Rational>> {
    m.row_iter().map(|r| r.to_vec()).collect()
}

fn matrix_pair() -> impl Strategy<Value = (Matrix, Matrix)> {
    (0..=3usize, 0..=3usize, 1..=3usize).prop_flat_map(|(r1, r2, c)| {
        (
            prop::collection::vec(-3i64..=3, r1 * c),
            prop::collection::vec(-3i64..=3, r2 * c),
        )
            .prop_map(move |(a, b)| {
                (
                    Matrix::new(r1, c, a.into_iter().map(rat).collect()),
                    Matrix::new(r2, c, b.into_iter().map(rat).collect()),
                )
            })
    })
}

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Matrix> {
    (0..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-3i64..=3, r * c)
            .prop_map(move |xs| Matrix::new(r, c, xs.into_iter().map(rat).collect()))
    })
}

#[test]
fn rref_examples() {
    let (m, p) = rref(&Matrix::identity(2));
    assert_eq!(m, Matrix::identity(2));
    assert_eq!(p, vec![0, 1]);
    let (m, p) = rref(&Matrix::from_i64(2, &[&[2, 4], &[1, 2]]));
    assert_eq!(m, Matrix::from_i64(2, &[&[1, 2]]));
    assert_eq!(p, vec![0]);
    let (m, p) = rref(&Matrix::from_i64(2, &[&[0, 0]]));
    assert_eq!((m.rows(), m.cols()), (0, 2));
    assert!(p.is_empty());
}

#[test]
fn nullspace_examples() {
    assert_eq!(nullspace(&Matrix::identity(2)).rows(), 0);
    let k = nullspace(&Matrix::from_i64(2, &[&[1, 1]]));
    assert_eq!(k.rows(), 1);
    assert_eq!(&k.row(0)[0] + &k.row(0)[1], rat(0));
    assert_eq!(nullspace(&Matrix::zeros(1, 2)), Matrix::identity(2));
}

#[test]
fn pushout_examples() {
    let (t1, t2) = pushout(&Matrix::identity(2), &Matrix::identity(2));
    assert_eq!(t1.rows(), 2);
    assert_eq!(t1, t2);
    let (t1, t2) = pushout(&Matrix::identity(2), &Matrix::from_i64(2, &[&[1, 1]]));
    assert_eq!(t1.rows(), 1);
    let scale = t2.get(0, 0).clone();
    assert_eq!(t1.row_vec(0), vec![scale.clone(), scale]);
    let (t1, _) = pushout(&Matrix::from_i64(2, &[&[1, 0]]), &Matrix::from_i64(2, &[&[0, 1]]));
    assert_eq!(t1.rows(), 0);
}

#[test]
fn in_rowspace_examples() {
    assert_eq!(in_rowspace(&rat_vec(&[1, 1]), &Matrix::identity(2)), Some(rat_vec(&[1, 1])));
    assert_eq!(in_rowspace(&rat_vec(&[2, 4]), &Matrix::from_i64(2, &[&[1, 2]])), Some(rat_vec(&[2])));
    assert_eq!(in_rowspace(&rat_vec(&[1, 0]), &Matrix::from_i64(2, &[&[0, 1]])), None);
}

proptest! {
    #[test]
    fn rref_preserves_rowspace(m in matrix(4, 4)) {
        let (r, pivots) = rref(&m);
        prop_assert_eq!(r.rows(), pivots.len());
        prop_assert_eq!(r.rows(), oracle_rank(&rows_of(&m), m.cols()));
        for row in m.row_iter() {
            prop_assert!(in_rowspace(row, &r).is_some());
        }
        for row in r.row_iter() {
            prop_assert!(in_rowspace(row, &m).is_some());
        }
        for (i, &p) in pivots.iter().enumerate() {
            prop_assert_eq!(r.get(i, p), &rat(1));
        }
    }

    #[test]
    fn nullspace_rank_nullity(m in matrix(4, 5)) {
        let k = nullspace(&m);
        prop_assert_eq!(m.rank() + k.rows(), m.cols());
        for v in k.row_iter() {
            prop_assert!(m.apply(v).iter().all(Zero::is_zero));
        }
    }

    #[test]
    fn pushout_spans_all_commuting_pairs(
        (s1, s2) in matrix_pair(),
        coeffs in prop::collection::vec(-4i64..=4, 6),
    ) {
        let (t1, t2) = pushout(&s1, &s2);
        prop_assert_eq!(t1.mul(&s1), t2.mul(&s2));
        let stacked = t1.hstack(&t2);

        // Oracle: (t1, t2) commutes iff the stacked vector solves
        // [S1; -S2]^T (t1, t2) = 0.
        let d1 = s1.rows();
        let system: Vec<Vec<Rational>> = (0..s1.cols())
            .map(|c| {
                (0..d1)
                    .map(|i| s1.get(i, c).clone())
                    .chain((0..s2.rows()).map(|i| -s2.get(i, c).clone()))
                    .collect()
            })
            .collect();
        let kernel = oracle_kernel(&system, d1 + s2.rows());
        prop_assert_eq!(stacked.rows(), kernel.len());
        let width = d1 + s2.rows();
        let mut v = vec![Rational::zero(); width];
        for (b, c) in kernel.iter().zip(coeffs.iter().cycle()) {
            for (x, y) in v.iter_mut().zip(b) {
                *x += y * rat(*c);
            }
        }
        prop_assert!(in_rowspace(&v, &stacked).is_some());
        let mut with_v = rows_of(&stacked);
        with_v.push(v);
        prop_assert_eq!(oracle_rank(&with_v, width), stacked.rows());
    }
}
