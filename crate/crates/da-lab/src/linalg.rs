//! Dense matrices and vector helpers sized for desk-scale problems.
//!
//! Everything is row-major on plain slices; the largest matrices in the lab
//! are a few hundred rows, so a cyclic Jacobi eigensolver and an unblocked
//! Cholesky are all the factorization machinery needed.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm_sq<T: Real>(a: &[T]) -> T {
    dot(a, a)
}

pub fn norm<T: Real>(a: &[T]) -> T {
    norm_sq(a).sqrt()
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m.data[i * d.len() + i] = v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::InvalidInput("matrix needs at least one row".into()));
        }
        let c = rows[0].len();
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Aᵀ x`.
    pub fn tr_matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + xi * a;
            }
        }
        out
    }

    /// `AᵀA`, the Gram matrix of the rows' columns.
    pub fn gram(&self) -> Matrix<T> {
        let n = self.cols;
        let mut g = Self::zeros(n, n);
        for i in 0..self.rows {
            let r = self.row(i);
            for j in 0..n {
                for k in j..n {
                    let v = g.data[j * n + k] + r[j] * r[k];
                    g.data[j * n + k] = v;
                }
            }
        }
        for j in 0..n {
            for k in 0..j {
                g.data[j * n + k] = g.data[k * n + j];
            }
        }
        g
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self.at(i, j) - self.at(j, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
    /// ascending. Quadratically convergent; intended for n up to ~10³.
    pub fn symmetric_eigenvalues(&self) -> Result<Vec<T>> {
        if self.rows != self.cols {
            return Err(Error::InvalidInput("eigenvalues need a square matrix".into()));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut a = self.data.clone();
        let idx = |i: usize, j: usize| i * n + j;
        let eps = T::from_f64(f64::EPSILON);
        // Off-diagonal Frobenius mass relative to the whole matrix decides
        // convergence; 64 sweeps is far beyond what Jacobi ever needs.
        for _sweep in 0..64 {
            let mut off = T::zero();
            let mut total = T::zero();
            for i in 0..n {
                for j in 0..n {
                    let v = a[idx(i, j)] * a[idx(i, j)];
                    total = total + v;
                    if i != j {
                        off = off + v;
                    }
                }
            }
            if off.sqrt() <= eps * total.sqrt().max(T::min_positive_value()) {
                break;
            }
            for p in 0..n - 1 {
                for q in (p + 1)..n {
                    let apq = a[idx(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let app = a[idx(p, p)];
                    let aqq = a[idx(q, q)];
                    let theta = (aqq - app) / (T::from_f64(2.0) * apq);
                    let t = {
                        let s = if theta >= T::zero() { T::one() } else { -T::one() };
                        s / (theta.abs() + (theta * theta + T::one()).sqrt())
                    };
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[idx(k, p)];
                        let akq = a[idx(k, q)];
                        a[idx(k, p)] = c * akp - s * akq;
                        a[idx(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[idx(p, k)];
                        let aqk = a[idx(q, k)];
                        a[idx(p, k)] = c * apk - s * aqk;
                        a[idx(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eig: Vec<T> = (0..n).map(|i| a[idx(i, i)]).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalues are finite"));
        Ok(eig)
    }

    /// Solves `A x = b` for symmetric positive definite `A` via Cholesky.
    pub fn cholesky_solve(&self, b: &[T]) -> Result<Vec<T>> {
        if self.rows != self.cols {
            return Err(Error::InvalidInput("cholesky needs a square matrix".into()));
        }
        if b.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: b.len(),
            });
        }
        let n = self.rows;
        let mut l = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.at(i, j);
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= T::zero() {
                        return Err(Error::InvalidInput(
                            "matrix is not positive definite".into(),
                        ));
                    }
                    l[i * n + j] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        // L z = b, then Lᵀ x = z.
        let mut z = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                z[i] = z[i] - l[i * n + k] * z[k];
            }
            z[i] = z[i] / l[i * n + i];
        }
        let mut x = z;
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] = x[i] - l[k * n + i] * x[k];
            }
            x[i] = x[i] / l[i * n + i];
        }
        Ok(x)
    }
}
