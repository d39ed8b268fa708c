//! Dense rank-3 arrays and a few symmetric-matrix helpers.

use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// An `n × n × n` array indexed as `t[(i, j, k)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    t[(i, j, k)] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `max |t(i,j,k) - t(i,k,j)|`.
    pub fn lower_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    m = m.max((self[(i, j, k)] - self[(i, k, j)]).abs());
                }
            }
        }
        m
    }

    /// Largest deviation from full symmetry under index permutations.
    pub fn full_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = self[(i, j, k)];
                    for w in [self[(j, i, k)], self[(k, j, i)], self[(i, k, j)]] {
                        m = m.max((v - w).abs());
                    }
                }
            }
        }
        m
    }

    /// `t(i, j, k) v^k`.
    pub fn contract_last(&self, v: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| (0..n).map(|k| self[(i, j, k)] * v[k]).sum())
    }

    /// Raises the first index with `inv`: `inv^{il} t(l, j, k)`.
    pub fn raise_first(&self, inv: &DMatrix<f64>) -> Tensor3 {
        let n = self.n;
        Tensor3::from_fn(n, |i, j, k| (0..n).map(|l| inv[(i, l)] * self[(l, j, k)]).sum())
    }

    pub fn scaled(&self, s: f64) -> Tensor3 {
        Tensor3 {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &Tensor3) -> Tensor3 {
        Tensor3 {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[(i * self.n + j) * self.n + k]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        &mut self.data[(i * self.n + j) * self.n + k]
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Symmetrises and inverts an SPD matrix, failing with the smallest
/// eigenvalue when it is not positive definite.
pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    match sym.clone().cholesky() {
        Some(c) => Ok(c.inverse()),
        None => Err(Error::NotPositiveDefinite {
            what: what.to_string(),
            min_eigenvalue: min_eigenvalue(&sym),
        }),
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}
