//! Gaussian elimination over a [`Coeff`] field.
//!
//! Exact fields pivot on the first nonzero entry; floats use partial pivoting
//! and treat entries below `FLOAT_ZERO_TOL` times the column scale as zero.

use crate::error::{Error, Result};
use crate::field::Coeff;

/// Dense row-major matrix.
pub type Matrix<C> = Vec<Vec<C>>;

/// Solves `A X = B` for an overdetermined but consistent system with a
/// unique solution. `a` is `rows × n`, `b` is `rows × m`; returns `n × m`.
///
/// Fails with [`Error::Singular`] when `rank A < n` and with
/// [`Error::Inconsistent`] when a row reduces to `0 = nonzero`.
pub fn solve<C: Coeff>(a: &Matrix<C>, b: &Matrix<C>) -> Result<Matrix<C>> {
    let rows = a.len();
    if b.len() != rows {
        return Err(Error::DimensionMismatch { expected: rows, got: b.len() });
    }
    let n = a.first().map_or(0, |r| r.len());
    let m = b.first().map_or(0, |r| r.len());
    let mut aug: Matrix<C> = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().chain(rb.iter()).cloned().collect())
        .collect();
    let scale = aug
        .iter()
        .flat_map(|r| r.iter().map(|c| c.magnitude()))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let is_zero = |c: &C| if C::EXACT { c.is_zero() } else { c.negligible(scale) };

    let mut rank = 0;
    for col in 0..n {
        let pivot = if C::EXACT {
            (rank..rows).find(|&r| !aug[r][col].is_zero())
        } else {
            (rank..rows)
                .filter(|&r| !is_zero(&aug[r][col]))
                .max_by(|&x, &y| aug[x][col].magnitude().total_cmp(&aug[y][col].magnitude()))
        };
        let Some(p) = pivot else {
            return Err(Error::Singular { rank, unknowns: n });
        };
        aug.swap(rank, p);
        let inv = aug[rank][col].inv().expect("pivot is nonzero");
        for c in col..n + m {
            let v = aug[rank][c].clone() * inv.clone();
            aug[rank][c] = v;
        }
        for r in 0..rows {
            if r == rank || aug[r][col].is_zero() {
                continue;
            }
            let f = aug[r][col].clone();
            for c in col..n + m {
                let delta = f.clone() * aug[rank][c].clone();
                aug[r][c] -= delta;
            }
        }
        rank += 1;
    }
    for row in aug.iter().skip(rank) {
        if row[n..].iter().any(|c| !is_zero(c)) {
            return Err(Error::Inconsistent);
        }
    }
    Ok(aug.into_iter().take(n).map(|r| r[n..].to_vec()).collect())
}

pub fn identity<C: Coeff>(n: usize) -> Matrix<C> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { C::one() } else { C::zero() }).collect())
        .collect()
}

pub fn inverse<C: Coeff>(a: &Matrix<C>) -> Result<Matrix<C>> {
    if a.iter().any(|r| r.len() != a.len()) {
        return Err(Error::InvalidArgument("inverse of a non-square matrix".into()));
    }
    solve(a, &identity(a.len()))
}

pub fn matmul<C: Coeff>(a: &Matrix<C>, b: &Matrix<C>) -> Matrix<C> {
    let m = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..m)
                .map(|j| row.iter().zip(b).fold(C::zero(), |acc, (x, brow)| acc + x.clone() * brow[j].clone()))
                .collect()
        })
        .collect()
}

pub fn transpose<C: Coeff>(a: &Matrix<C>) -> Matrix<C> {
    let n = a.first().map_or(0, |r| r.len());
    (0..n).map(|j| a.iter().map(|r| r[j].clone()).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::QSqrt2;

    fn q(n: i64) -> QSqrt2 {
        QSqrt2::int(n)
    }

    #[test]
    fn exact_inverse_roundtrip() {
        let a = vec![vec![q(2), QSqrt2::sqrt2_frac(1, 1)], vec![q(1), q(3)]];
        let inv = inverse(&a).unwrap();
        assert_eq!(matmul(&a, &inv), identity(2));
    }

    #[test]
    fn overdetermined_consistent() {
        // x + y = 3, x - y = 1, 2x = 4
        let a = vec![vec![q(1), q(1)], vec![q(1), q(-1)], vec![q(2), q(0)]];
        let b = vec![vec![q(3)], vec![q(1)], vec![q(4)]];
        assert_eq!(solve(&a, &b).unwrap(), vec![vec![q(2)], vec![q(1)]]);
        let bad = vec![vec![q(3)], vec![q(1)], vec![q(5)]];
        assert_eq!(solve(&a, &bad), Err(Error::Inconsistent));
    }

    #[test]
    fn singular_detected() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(matches!(inverse(&a), Err(Error::Singular { rank: 1, unknowns: 2 })));
    }
}
