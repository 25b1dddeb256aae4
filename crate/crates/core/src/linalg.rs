//! Small dense linear algebra used by the solvers and the variance estimators.
//!
//! Systems here are `p x p` with `p` the number of covariates, so a straightforward
//! row-major matrix and a pivoted Cholesky factorization are all that is needed.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix data has {} entries, expected {rows} x {cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = T> + '_ {
        self.row_iter().map(move |r| r[j])
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "cannot stack {} columns on {} columns",
                other.cols, self.cols
            )));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// Rows `start..end` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        Self {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        self.row_iter().map(|r| dot(r, v)).collect()
    }

    /// `self += scale * v v^T` on a square matrix.
    pub fn add_outer(&mut self, v: &[T], scale: T) {
        let p = self.cols;
        for (i, &vi) in v.iter().enumerate() {
            let s = scale * vi;
            let row = &mut self.data[i * p..(i + 1) * p];
            for (dst, &vj) in row.iter_mut().zip(v) {
                *dst = *dst + s * vj;
            }
        }
    }

    /// `v^T self v`.
    pub fn quad_form(&self, v: &[T]) -> T {
        dot(&self.mul_vec(v), v)
    }

    pub fn scale(&mut self, s: T) {
        for x in &mut self.data {
            *x = *x * s;
        }
    }

    pub fn max_abs_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

pub fn norm2<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

/// Pivoted Cholesky factorization `P A P^T = L L^T` of a symmetric positive definite matrix.
///
/// A pivot is rejected when it falls below a small multiple of machine epsilon relative to
/// the original diagonal entry of the same column, so badly scaled but full-rank covariates
/// are not mistaken for collinear ones.
#[derive(Debug, Clone)]
pub struct PivotedCholesky<T> {
    factor: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> PivotedCholesky<T> {
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        let n = a.rows();
        if n != a.cols() {
            return Err(Error::Shape(format!("matrix is {n} x {}, not square", a.cols())));
        }
        let mut w = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let original_diag: Vec<T> = (0..n).map(|i| a.get(i, i)).collect();
        let rel_tol = T::epsilon() * T::count(n.max(1)) * T::lit(64.0);

        for k in 0..n {
            // largest remaining diagonal
            let mut j = k;
            for i in k + 1..n {
                if w.get(i, i) > w.get(j, j) {
                    j = i;
                }
            }
            if j != k {
                swap_sym(&mut w, k, j);
                perm.swap(k, j);
            }
            let pivot = w.get(k, k);
            let scale = original_diag[perm[k]].abs();
            if !(pivot > rel_tol * scale) || !pivot.is_finite() || scale == T::zero() {
                return Err(Error::SingularSystem { pivot: k, dim: n });
            }
            let l = pivot.sqrt();
            w.set(k, k, l);
            for i in k + 1..n {
                let v = w.get(i, k) / l;
                w.set(i, k, v);
                w.set(k, i, v);
            }
            for c in k + 1..n {
                let lck = w.get(c, k);
                for i in c..n {
                    let v = w.get(i, c) - w.get(i, k) * lck;
                    w.set(i, c, v);
                    w.set(c, i, v);
                }
            }
        }
        Ok(Self { factor: w, perm })
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.perm.len();
        let l = &self.factor;
        let mut y: Vec<T> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - l.get(i, k) * y[k];
            }
            y[i] = s / l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s = s - l.get(k, i) * y[k];
            }
            y[i] = s / l.get(i, i);
        }
        let mut x = vec![T::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }
}

fn swap_sym<T: Scalar>(w: &mut Matrix<T>, a: usize, b: usize) {
    let n = w.rows();
    for c in 0..n {
        let (va, vb) = (w.get(a, c), w.get(b, c));
        w.set(a, c, vb);
        w.set(b, c, va);
    }
    for r in 0..n {
        let (va, vb) = (w.get(r, a), w.get(r, b));
        w.set(r, a, vb);
        w.set(r, b, va);
    }
}

/// Solves `A x = rhs` for symmetric positive definite `A`.
pub fn solve_spd<T: Scalar>(a: &Matrix<T>, rhs: &[T]) -> Result<Vec<T>> {
    if rhs.len() != a.rows() {
        return Err(Error::Shape(format!(
            "right-hand side has length {}, system has {} rows",
            rhs.len(),
            a.rows()
        )));
    }
    Ok(PivotedCholesky::factor(a)?.solve(rhs))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Scalar>(a: &Matrix<T>) -> Vec<T> {
    let n = a.rows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in 0..i {
                off = off + m.get(i, j) * m.get(i, j);
            }
        }
        if off.sqrt() <= T::epsilon() * T::lit(1e-3) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == T::zero() {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m.get(k, p), m.get(k, q));
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let (mpk, mqk) = (m.get(p, k), m.get(q, k));
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| m.get(i, i)).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}
