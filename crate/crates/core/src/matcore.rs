//! Dense symmetric matrices and the handful of spectral kernels the
//! estimator needs: eigendecomposition, Cholesky log-determinant and the
//! operator norm.
//!
//! [`SymMatrix`] stores only the upper triangle, so symmetry holds by
//! construction. The numeric kernels convert to `nalgebra` storage on the way
//! in; at the problem sizes targeted here (p up to a few hundred) the copy is
//! negligible next to the O(p³) factorization.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A symmetric `dim × dim` matrix backed by its packed upper triangle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix<T = f64> {
    dim: usize,
    upper: Vec<T>,
}

#[inline]
fn packed_index(dim: usize, i: usize, j: usize) -> usize {
    let (r, c) = if i <= j { (i, j) } else { (j, i) };
    // row r starts at r*dim - r(r-1)/2
    r * dim - r * r.saturating_sub(1) / 2 + (c - r)
}

impl<T: Copy> SymMatrix<T> {
    /// Every entry set to `value`.
    pub fn filled(dim: usize, value: T) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be at least 1");
        SymMatrix {
            dim,
            upper: vec![value; dim * (dim + 1) / 2],
        }
    }

    /// Builds the matrix from `f(i, j)` evaluated on the upper triangle only.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be at least 1");
        let mut upper = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                upper.push(f(i, j));
            }
        }
        SymMatrix { dim, upper }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        debug_assert!(i < self.dim && j < self.dim);
        self.upper[packed_index(self.dim, i, j)]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        debug_assert!(i < self.dim && j < self.dim);
        let idx = packed_index(self.dim, i, j);
        self.upper[idx] = value;
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> SymMatrix<U> {
        SymMatrix {
            dim: self.dim,
            upper: self.upper.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Principal submatrix on `indices` (in the given order).
    pub fn submatrix(&self, indices: &[usize]) -> Self {
        SymMatrix::from_fn(indices.len(), |a, b| self.get(indices[a], indices[b]))
    }

    /// Iterates the strict upper triangle as `(i, j, value)`.
    pub fn upper_pairs(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.dim).flat_map(move |i| ((i + 1)..self.dim).map(move |j| (i, j, self.get(i, j))))
    }
}

impl SymMatrix<f64> {
    pub fn zeros(dim: usize) -> Self {
        Self::filled(dim, 0.0)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![1.0; dim])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), |i, j| if i == j { diag[i] } else { 0.0 })
    }

    /// Takes the upper triangle of a square dense matrix. The lower triangle
    /// is ignored.
    pub fn from_upper(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "expected a nonempty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::from_fn(m.nrows(), |i, j| m[(i, j)]))
    }

    /// Builds from a dense matrix, rejecting asymmetry beyond `tol`.
    pub fn from_dense_checked(m: &DMatrix<f64>, tol: f64) -> Result<Self> {
        let out = Self::from_upper(m)?;
        for i in 0..m.nrows() {
            for j in 0..i {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if (a - b).abs() > tol * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::Invalid(format!(
                        "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.upper.iter().all(|x| x.is_finite())
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    /// Trace inner product `Σ_ij a_ij b_ij` over the full matrix.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut acc = 0.0;
        for i in 0..self.dim {
            acc += self.get(i, i) * other.get(i, i);
            for j in (i + 1)..self.dim {
                acc += 2.0 * self.get(i, j) * other.get(i, j);
            }
        }
        acc
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Inverse via Cholesky. Fails with [`Error::NotPositiveDefinite`].
    pub fn inverse_pd(&self) -> Result<Self> {
        let chol = cholesky(self)?;
        Ok(Self::from_upper(&chol.inverse()).expect("square"))
    }
}

fn cholesky(m: &SymMatrix) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    if !m.is_finite() {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    Cholesky::new(m.to_dense()).ok_or(Error::NotPositiveDefinite)
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors
/// (one per column).
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    /// `V diag(g(λ)) Vᵀ`.
    pub fn reconstruct_with(&self, g: impl Fn(f64) -> f64) -> SymMatrix {
        let p = self.values.len();
        let mapped: Vec<f64> = self.values.iter().map(|&l| g(l)).collect();
        let v = &self.vectors;
        SymMatrix::from_fn(p, |i, j| {
            let mut acc = 0.0;
            for (k, &l) in mapped.iter().enumerate() {
                acc += v[(i, k)] * l * v[(j, k)];
            }
            acc
        })
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|l| l)
    }
}

pub fn sym_eigen(m: &SymMatrix) -> Result<SymEigen> {
    if !m.is_finite() {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(m.to_dense());
    let mut order: Vec<usize> = (0..m.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.dim(), m.dim(), |i, c| eig.eigenvectors[(i, order[c])]);
    Ok(SymEigen { values, vectors })
}

/// `log det(m)`, or [`Error::NotPositiveDefinite`] when a Cholesky pivot is
/// not strictly positive.
pub fn chol_logdet(m: &SymMatrix) -> Result<f64> {
    let chol = cholesky(m)?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..m.dim() {
        let d = l[(i, i)];
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        acc += d.ln();
    }
    Ok(2.0 * acc)
}

/// Largest absolute eigenvalue.
pub fn operator_norm(m: &SymMatrix) -> Result<f64> {
    let eig = sym_eigen(m)?;
    Ok(eig.values.iter().fold(0.0_f64, |acc, l| acc.max(l.abs())))
}

/// Lower Cholesky factor as a dense matrix.
pub fn cholesky_lower(m: &SymMatrix) -> Result<DMatrix<f64>> {
    Ok(cholesky(m)?.l())
}
