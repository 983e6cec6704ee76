//! Small dense matrices and rank computation.
//!
//! Rank is computed exactly by fraction-free Gaussian elimination whenever
//! every entry is rational, and by singular values otherwise. The numeric
//! threshold is relative: a singular value counts as nonzero when it exceeds
//! `tol` times the largest one.

use crate::rational::Rational;
use crate::scalar::Scalar;

/// Row-major dense matrix; either dimension may be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Mat<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape does not match data length");
        Mat { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Side-by-side concatenation; both operands must have the same row count.
    pub fn hstack(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.rows, other.rows, "hstack row mismatch");
        let mut data = Vec::with_capacity((self.cols + other.cols) * self.rows);
        for r in 0..self.rows {
            data.extend_from_slice(&self.data[r * self.cols..(r + 1) * self.cols]);
            data.extend_from_slice(&other.data[r * other.cols..(r + 1) * other.cols]);
        }
        Mat {
            rows: self.rows,
            cols: self.cols + other.cols,
            data,
        }
    }
}

impl Mat<Scalar> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat::from_fn(rows, cols, |_, _| Scalar::zero())
    }

    pub fn identity(n: usize) -> Self {
        Mat::from_fn(n, n, |r, c| {
            if r == c {
                Scalar::from_int(1)
            } else {
                Scalar::zero()
            }
        })
    }

    pub fn is_exact(&self) -> bool {
        self.data.iter().all(Scalar::is_exact)
    }

    pub fn matmul(&self, other: &Mat<Scalar>) -> Mat<Scalar> {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        Mat::from_fn(self.rows, other.cols, |r, c| {
            let mut acc = Scalar::zero();
            for k in 0..self.cols {
                acc = acc.add(&self.at(r, k).mul(other.at(k, c)));
            }
            acc
        })
    }

    pub fn to_f64(&self) -> Mat<f64> {
        self.map(Scalar::to_f64)
    }

    /// Exact rank when every entry is rational, singular-value rank otherwise.
    pub fn rank(&self, tol: f64) -> usize {
        if self.is_exact() {
            let exact = self.map(|s| s.as_exact().expect("checked exact").clone());
            rank_exact(&exact)
        } else {
            rank_numeric(&self.to_f64(), tol)
        }
    }
}

/// Rank over the rationals by Gaussian elimination; no rounding involved.
pub fn rank_exact(m: &Mat<Rational>) -> usize {
    if m.rows == 0 || m.cols == 0 {
        return 0;
    }
    let mut a: Vec<Vec<Rational>> = (0..m.rows)
        .map(|r| (0..m.cols).map(|c| m.at(r, c).clone()).collect())
        .collect();
    let mut rank = 0;
    for col in 0..m.cols {
        let Some(pivot) = (rank..m.rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, pivot);
        let inv = a[rank][col].recip().expect("pivot is nonzero");
        for r in rank + 1..m.rows {
            if a[r][col].is_zero() {
                continue;
            }
            let factor = &a[r][col] * &inv;
            for c in col..m.cols {
                let delta = &a[rank][c] * &factor;
                a[r][c] = &a[r][c] - &delta;
            }
        }
        rank += 1;
        if rank == m.rows {
            break;
        }
    }
    rank
}

/// Rank from singular values with a relative threshold.
pub fn rank_numeric(m: &Mat<f64>, tol: f64) -> usize {
    if m.rows == 0 || m.cols == 0 {
        return 0;
    }
    let dm = nalgebra::DMatrix::from_fn(m.rows, m.cols, |r, c| *m.at(r, c));
    let sv = dm.singular_values();
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}
