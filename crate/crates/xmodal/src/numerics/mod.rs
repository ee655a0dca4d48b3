//! Dense real linear algebra, spectral decompositions, PCA, and seeded
//! random number generation underlying all other modules.

mod pca;
mod rng;
mod svd;

pub use pca::{pca_fit_project, Pca};
pub use rng::{gaussian_sample, RngStream};
pub use svd::{svd, Svd};

use crate::{Error, Result, Scalar};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F: Scalar> {
    rows: usize,
    cols: usize,
    entries: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    /// Build a matrix from row-major entries, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, entries: Vec<F>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                entries.len()
            )));
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::Argument("matrix entries must be finite".into()));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    /// Internal constructor for computed results; skips the finiteness scan.
    pub(crate) fn from_vec(rows: usize, cols: usize, entries: Vec<F>) -> Self {
        debug_assert_eq!(entries.len(), rows * cols);
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_vec(rows, cols, vec![F::zero(); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, F::one());
        }
        m
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Matrix::new(r, c, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> F {
        self.entries[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: F) {
        self.entries[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[F] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [F] {
        &mut self.entries[row * self.cols..(row + 1) * self.cols]
    }

    pub fn entries(&self) -> &[F] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [F] {
        &mut self.entries
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == F::zero() {
                    continue;
                }
                let src = other.row(k);
                let dst = out.row_mut(i);
                for j in 0..other.cols {
                    dst[j] = dst[j] + a * src[j];
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ * other` without materializing the transpose.
    pub fn matmul_tn(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply ({}x{})ᵀ by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let lhs = self.row(k);
            let rhs = other.row(k);
            for i in 0..self.cols {
                let a = lhs[i];
                if a == F::zero() {
                    continue;
                }
                let dst = out.row_mut(i);
                for j in 0..rhs.len() {
                    dst[j] = dst[j] + a * rhs[j];
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ x` for a column vector `x` of length `rows`.
    pub fn vec_mul_t(&self, x: &[F]) -> Result<Vec<F>> {
        if x.len() != self.rows {
            return Err(Error::Dimension(format!(
                "vector length {} does not match {} rows",
                x.len(),
                self.rows
            )));
        }
        let mut out = vec![F::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == F::zero() {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(i)) {
                *o = *o + xi * w;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, factor: F) -> Self {
        Self::from_vec(
            self.rows,
            self.cols,
            self.entries.iter().map(|&e| e * factor).collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension("matrix addition shape mismatch".into()));
        }
        Ok(Self::from_vec(
            self.rows,
            self.cols,
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| a + b)
                .collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-F::one()))
    }

    pub fn frobenius_norm(&self) -> F {
        self.entries
            .iter()
            .map(|&e| e * e)
            .fold(F::zero(), |a, b| a + b)
            .sqrt()
    }

    pub fn column_means(&self) -> Vec<F> {
        let mut means = vec![F::zero(); self.cols];
        for i in 0..self.rows {
            for (m, &v) in means.iter_mut().zip(self.row(i)) {
                *m = *m + v;
            }
        }
        let n = F::of(self.rows as f64);
        for m in &mut means {
            *m = *m / n;
        }
        means
    }

    /// Subtract per-column means; returns `(centered, means)`.
    pub fn center_columns(&self) -> (Self, Vec<F>) {
        let means = self.column_means();
        let mut out = self.clone();
        for i in 0..self.rows {
            for (v, &m) in out.row_mut(i).iter_mut().zip(&means) {
                *v = *v - m;
            }
        }
        (out, means)
    }

    /// Select whole rows by index, in the order given.
    pub fn select_rows(&self, indexes: &[usize]) -> Self {
        let mut entries = Vec::with_capacity(indexes.len() * self.cols);
        for &i in indexes {
            entries.extend_from_slice(self.row(i));
        }
        Self::from_vec(indexes.len(), self.cols, entries)
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|e| e.is_finite())
    }
}

pub(crate) fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).fold(F::zero(), |s, v| s + v)
}

pub(crate) fn norm<F: Scalar>(a: &[F]) -> F {
    dot(a, a).sqrt()
}
