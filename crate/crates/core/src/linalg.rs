//! Dense real vectors and matrices.
//!
//! Both types validate on construction: a [`Vector`] is non-empty and every
//! entry is finite, a [`Matrix`] is rectangular with at least one row and one
//! column. Deserialization goes through the same checks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of R^n.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("vector must have at least one component"));
        }
        if let Some(bad) = components.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("vector component {bad}")));
        }
        Ok(Vector(components))
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(vec![value])
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "zero-dimensional vector");
        Vector(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; dim])
    }

    /// Wraps raw arithmetic output, rejecting NaN and infinities.
    pub(crate) fn from_raw(components: Vec<f64>) -> Result<Self> {
        debug_assert!(!components.is_empty());
        if let Some(bad) = components.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("component {bad}")));
        }
        Ok(Vector(components))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        other.check_dim(self.dim())?;
        Ok(dot(&self.0, &other.0))
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        other.check_dim(self.dim())?;
        Ok(Vector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        other.check_dim(self.dim())?;
        Ok(Vector(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn scale(&self, factor: f64) -> Result<Vector> {
        Vector::from_raw(self.0.iter().map(|v| factor * v).collect())
    }

    /// `(1 - t) * self + t * other`.
    pub fn lerp(&self, other: &Vector, t: f64) -> Result<Vector> {
        other.check_dim(self.dim())?;
        Vector::from_raw(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
        )
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Vector) -> Result<Vector> {
        other.check_dim(self.dim())?;
        Vector::from_raw(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        )
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Vector::new(value)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    // hypot-style scaling is unnecessary at the magnitudes we iterate on
    dot(a, a).sqrt()
}

/// Dense row-major matrix. Serializes as an array of rows.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nrows = rows.len();
        if nrows == 0 {
            return Err(Error::invalid("matrix must have at least one row"));
        }
        let ncols = rows[0].len();
        if ncols == 0 {
            return Err(Error::invalid("matrix rows must be non-empty"));
        }
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::invalid(format!(
                    "matrix row {i} has {} entries, expected {ncols}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("matrix row {i}")));
            }
            data.extend(row);
        }
        Ok(Matrix {
            rows: nrows,
            cols: ncols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        assert!(n > 0);
        let mut data = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            data[i * n + i] = *d;
        }
        Matrix {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }

    pub fn mul_vec(&self, x: &Vector) -> Result<Vector> {
        x.check_dim(self.cols)?;
        Vector::from_raw(self.mul_slice(x.as_slice()))
    }

    /// `Aᵀ y`.
    pub fn mul_transpose_vec(&self, y: &Vector) -> Result<Vector> {
        y.check_dim(self.rows)?;
        Vector::from_raw(self.mul_transpose_slice(y.as_slice()))
    }

    pub(crate) fn mul_slice(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub(crate) fn mul_transpose_slice(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }

    /// The Gram matrix `AᵀA` (cols × cols).
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut data = vec![0.0; n * n];
        for i in 0..self.rows {
            let r = self.row(i);
            for p in 0..n {
                for q in 0..n {
                    data[p * n + q] += r[p] * r[q];
                }
            }
        }
        Matrix {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;

    fn try_from(value: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(value)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries((0..self.rows).map(|i| self.row(i)))
            .finish()
    }
}
