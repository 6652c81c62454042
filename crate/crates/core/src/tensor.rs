//! Small dense containers generic over [`Scalar`].
//!
//! nalgebra is used wherever plain `f64` suffices (SVD, least squares); the
//! types here carry AD scalars through the model callbacks.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let nr = rows.len();
        let nc = rows.first().map_or(0, |r| r.len());
        Self::from_fn(nr, nc, |r, c| T::cst(rows[r][c]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                let row = &self.data[r * self.cols..(r + 1) * self.cols];
                row.iter().zip(v).fold(T::zero(), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    /// `selfᵀ · v`.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (r, vr) in v.iter().enumerate() {
            for (c, o) in out.iter_mut().enumerate() {
                *o += self[(r, c)] * *vr;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                for c in 0..other.cols {
                    out[(r, c)] += a * other[(k, c)];
                }
            }
        }
        out
    }

    /// `selfᵀ · self`.
    pub fn gram(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.cols);
        for k in 0..self.cols {
            for l in k..self.cols {
                let mut acc = T::zero();
                for i in 0..self.rows {
                    acc += self[(i, k)] * self[(i, l)];
                }
                out[(k, l)] = acc;
                out[(l, k)] = acc;
            }
        }
        out
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| f(*x)).collect() }
    }

    pub fn values(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |r, c| self[(r, c)].value())
    }

    /// Induced 1-norm on the values.
    fn norm1(&self) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self[(r, c)].value().abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Inverse by Gauss–Jordan elimination with partial pivoting on the
    /// values, returned together with the 1-norm condition number.
    pub fn inverse_with_condition(&self) -> Result<(Self, f64)> {
        assert_eq!(self.rows, self.cols, "inverse of non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[(x, col)].value().abs().total_cmp(&a[(y, col)].value().abs()))
                .unwrap_or(col);
            if a[(pivot, col)].value() == 0.0 || !a[(pivot, col)].value().is_finite() {
                return Err(Error::Singular { condition: f64::INFINITY });
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let p = T::one() / a[(col, col)];
            for c in 0..n {
                a[(col, c)] *= p;
                inv[(col, c)] *= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                for c in 0..n {
                    let ac = a[(col, c)];
                    let ic = inv[(col, c)];
                    a[(r, c)] -= f * ac;
                    inv[(r, c)] -= f * ic;
                }
            }
        }
        let cond = self.norm1() * inv.norm1();
        Ok((inv, cond))
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

/// Dense rank-3 array indexed `[i][k][l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3<T> {
    dims: [usize; 3],
    data: Vec<T>,
}

impl<T: Scalar> Tensor3<T> {
    pub fn zeros(d0: usize, d1: usize, d2: usize) -> Self {
        Self { dims: [d0, d1, d2], data: vec![T::zero(); d0 * d1 * d2] }
    }

    pub fn from_fn(d0: usize, d1: usize, d2: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(d0 * d1 * d2);
        for i in 0..d0 {
            for k in 0..d1 {
                for l in 0..d2 {
                    data.push(f(i, k, l));
                }
            }
        }
        Self { dims: [d0, d1, d2], data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }
}

impl<T> std::ops::Index<(usize, usize, usize)> for Tensor3<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, k, l): (usize, usize, usize)) -> &T {
        &self.data[(i * self.dims[1] + k) * self.dims[2] + l]
    }
}

impl<T> std::ops::IndexMut<(usize, usize, usize)> for Tensor3<T> {
    #[inline]
    fn index_mut(&mut self, (i, k, l): (usize, usize, usize)) -> &mut T {
        &mut self.data[(i * self.dims[1] + k) * self.dims[2] + l]
    }
}

/// Dense rank-4 array indexed `[i][k][l][m]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4<T> {
    dims: [usize; 4],
    data: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn zeros(d0: usize, d1: usize, d2: usize, d3: usize) -> Self {
        Self { dims: [d0, d1, d2, d3], data: vec![T::zero(); d0 * d1 * d2 * d3] }
    }

    pub fn from_fn(
        d0: usize,
        d1: usize,
        d2: usize,
        d3: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(d0 * d1 * d2 * d3);
        for i in 0..d0 {
            for k in 0..d1 {
                for l in 0..d2 {
                    for m in 0..d3 {
                        data.push(f(i, k, l, m));
                    }
                }
            }
        }
        Self { dims: [d0, d1, d2, d3], data }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }
}

impl<T> std::ops::Index<(usize, usize, usize, usize)> for Tensor4<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, k, l, m): (usize, usize, usize, usize)) -> &T {
        &self.data[((i * self.dims[1] + k) * self.dims[2] + l) * self.dims[3] + m]
    }
}

impl<T> std::ops::IndexMut<(usize, usize, usize, usize)> for Tensor4<T> {
    #[inline]
    fn index_mut(&mut self, (i, k, l, m): (usize, usize, usize, usize)) -> &mut T {
        &mut self.data[((i * self.dims[1] + k) * self.dims[2] + l) * self.dims[3] + m]
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Dual64;

    #[test]
    fn inverse_of_3x3() {
        let a: Matrix<f64> = Matrix::from_rows(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, -1.0], &[0.5, -1.0, 2.0]]);
        let (inv, cond) = a.inverse_with_condition().unwrap();
        let id = a.matmul(&inv);
        for r in 0..3 {
            for c in 0..3 {
                let e = if r == c { 1.0 } else { 0.0 };
                assert!((id[(r, c)] - e).abs() < 1e-14);
            }
        }
        assert!(cond > 1.0 && cond < 20.0);
    }

    #[test]
    fn singular_matrix_rejected() {
        let a: Matrix<f64> = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(a.inverse_with_condition(), Err(Error::Singular { .. })));
    }

    #[test]
    fn inverse_derivative_by_dual() {
        // d/ds (A + sE)⁻¹ = -A⁻¹ E A⁻¹
        let a = [[2.0, 1.0], [0.5, 3.0]];
        let e = [[0.3, -0.2], [1.0, 0.1]];
        let m: Matrix<Dual64> = Matrix::from_fn(2, 2, |r, c| Dual64::new(a[r][c], e[r][c]));
        let (inv, _) = m.inverse_with_condition().unwrap();
        let ai = m.map(|x| x.re).inverse_with_condition().unwrap().0;
        let em: Matrix<f64> = Matrix::from_fn(2, 2, |r, c| e[r][c]);
        let expect = ai.matmul(&em).matmul(&ai);
        for r in 0..2 {
            for c in 0..2 {
                assert!((inv[(r, c)].eps + expect[(r, c)]).abs() < 1e-14);
            }
        }
    }
}
