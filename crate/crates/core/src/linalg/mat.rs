use std::ops::{Index, IndexMut};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::scalar::Scalar;

/// Work (multiply-adds) above which products are split across threads.
const PAR_WORK: usize = 1 << 16;

/// Dense real matrix, column-major (row index fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        ensure_dims!(
            data.len() == rows * cols,
            "{} values supplied for a {rows}x{cols} matrix",
            data.len()
        );
        Ok(Mat { rows, cols, data })
    }

    /// Builds a matrix from row slices; all rows must share a length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            ensure_dims!(
                r.len() == ncols,
                "row {i} has {} entries, expected {ncols}",
                r.len()
            );
            for (j, &v) in r.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        let r = self.rows;
        &mut self.data[j * r..(j + 1) * r]
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    /// Copy of the `len` columns starting at `start`.
    pub fn columns(&self, start: usize, len: usize) -> Self {
        assert!(start + len <= self.cols, "column range out of bounds");
        Mat {
            rows: self.rows,
            cols: len,
            data: self.data[start * self.rows..(start + len) * self.rows].to_vec(),
        }
    }

    pub fn set_columns(&mut self, start: usize, block: &Mat<T>) {
        assert_eq!(block.rows, self.rows);
        assert!(
            start + block.cols <= self.cols,
            "column range out of bounds"
        );
        let r = self.rows;
        self.data[start * r..(start + block.cols) * r].copy_from_slice(&block.data);
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for (i, &v) in self.col(j).iter().enumerate() {
                t.data[i * self.cols + j] = v;
            }
        }
        t
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &Mat<T>) -> Result<Self> {
        ensure_dims!(
            self.cols == rhs.rows,
            "cannot multiply {}x{} by {}x{}",
            self.rows,
            self.cols,
            rhs.rows,
            rhs.cols
        );
        let mut out = Self::zeros(self.rows, rhs.cols);
        if self.rows == 0 || rhs.cols == 0 {
            return Ok(out);
        }
        let kernel = |(j, out_col): (usize, &mut [T])| {
            for (p, &b) in rhs.col(j).iter().enumerate() {
                if b == T::zero() {
                    continue;
                }
                for (o, &a) in out_col.iter_mut().zip(self.col(p)) {
                    *o += a * b;
                }
            }
        };
        if self.rows * self.cols * rhs.cols >= PAR_WORK {
            out.data
                .par_chunks_mut(self.rows)
                .enumerate()
                .for_each(kernel);
        } else {
            out.data.chunks_mut(self.rows).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Mat<T>) -> Result<Self> {
        ensure_dims!(
            self.rows == rhs.rows,
            "cannot form ({}x{})ᵀ · {}x{}",
            self.rows,
            self.cols,
            rhs.rows,
            rhs.cols
        );
        let mut out = Self::zeros(self.cols, rhs.cols);
        if self.cols == 0 || rhs.cols == 0 {
            return Ok(out);
        }
        let kernel = |(j, out_col): (usize, &mut [T])| {
            let b = rhs.col(j);
            for (i, o) in out_col.iter_mut().enumerate() {
                *o = dot(self.col(i), b);
            }
        };
        if self.rows * self.cols * rhs.cols >= PAR_WORK {
            out.data
                .par_chunks_mut(self.cols)
                .enumerate()
                .for_each(kernel);
        } else {
            out.data.chunks_mut(self.cols).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    /// Gram matrix `selfᵀ · self`, exactly symmetric.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut g = Self::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = dot(self.col(i), self.col(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    pub fn add(&self, rhs: &Mat<T>) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Mat<T>) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn zip_with(&self, rhs: &Mat<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        ensure_dims!(
            self.shape() == rhs.shape(),
            "shape {:?} does not match {:?}",
            self.shape(),
            rhs.shape()
        );
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Adds `s` to every diagonal entry (square matrices).
    pub fn add_diag(&mut self, s: T) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += s;
        }
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frob_norm_sq(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn frob_norm(&self) -> T {
        self.frob_norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Symmetric within `tol` relative to the largest entry.
    pub fn is_symmetric(&self, tol: T) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(T::one());
        (0..self.rows).all(|j| (0..j).all(|i| (self[(i, j)] - self[(j, i)]).abs() <= tol * scale))
    }

    /// Returns `c` when the matrix is exactly `c·I`.
    pub fn scaled_identity_factor(&self) -> Option<T> {
        if !self.is_square() || self.rows == 0 {
            return None;
        }
        let c = self[(0, 0)];
        for j in 0..self.cols {
            for i in 0..self.rows {
                let expect = if i == j { c } else { T::zero() };
                if self[(i, j)] != expect {
                    return None;
                }
            }
        }
        Some(c)
    }

    /// Nonnegative part, `[x]_+` entrywise.
    pub fn positive_part(&self) -> Self {
        self.map(|v| v.max(T::zero()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Relative Frobenius distance `‖a − b‖ / max(‖b‖, tiny)`.
pub fn rel_diff<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Result<T> {
    let diff = a.sub(b)?.frob_norm();
    let den = b.frob_norm().max(T::min_positive_value());
    Ok(diff / den)
}

impl<T: Scalar> Mat<T> {
    /// Fails unless the matrix is square with side `n`.
    pub(crate) fn expect_square(&self, n: usize, what: &str) -> Result<()> {
        if self.rows != n || self.cols != n {
            return Err(Error::Dimension(format!(
                "{what} must be {n}x{n}, got {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Mat::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c, Mat::from_rows(&[[2.0, 1.0], [4.0, 3.0]]).unwrap());
        assert_eq!(a.t_matmul(&b).unwrap(), a.transpose().matmul(&b).unwrap());
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let a = Mat::<f64>::zeros(2, 3);
        assert!(matches!(a.matmul(&a), Err(Error::Dimension(_))));
    }

    #[test]
    fn large_product_matches_serial_order() {
        let a = Mat::from_fn(70, 40, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let b = Mat::from_fn(40, 30, |i, j| ((i * 5 + j) % 7) as f64 * 0.5);
        let c = a.matmul(&b).unwrap();
        for j in 0..30 {
            for i in 0..70 {
                let v: f64 = (0..40).map(|p| a[(i, p)] * b[(p, j)]).sum();
                assert!((c[(i, j)] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scaled_identity_detection() {
        assert_eq!(
            Mat::<f64>::identity(3).scale(2.5).scaled_identity_factor(),
            Some(2.5)
        );
        let mut m = Mat::<f64>::identity(3);
        m[(0, 1)] = 1e-300;
        assert_eq!(m.scaled_identity_factor(), None);
    }
}
