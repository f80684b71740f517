//! Symmetric matrices in packed `svec` storage.
//!
//! The packed vector holds the upper triangle column by column,
//! `(0,0), (0,1), (1,1), (0,2), (1,2), (2,2), …`, with every off-diagonal
//! entry multiplied by √2. With that scaling the Euclidean inner product of
//! two packed vectors equals the Frobenius inner product `tr(XY)` of the
//! matrices, which is the coordinate system the Kronecker-type solvers and
//! the LMI optimizer work in.

use std::f64::consts::SQRT_2;

use super::{LinalgError, Matrix};

/// Number of packed entries of a `dim × dim` symmetric matrix.
#[inline]
pub fn svec_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Packed index of entry `(i, j)`; order of the arguments does not matter.
#[inline]
pub fn svec_index(i: usize, j: usize) -> usize {
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

/// Inverse of [`svec_index`]: packed position to `(row, col)` with `row <= col`.
pub fn svec_position(k: usize) -> (usize, usize) {
    let mut j = ((((8 * k + 1) as f64).sqrt() - 1.0) / 2.0) as usize;
    while j * (j + 1) / 2 > k {
        j -= 1;
    }
    while (j + 1) * (j + 2) / 2 <= k {
        j += 1;
    }
    (k - j * (j + 1) / 2, j)
}

/// Dimension `d` with `d(d+1)/2 == len`, if any.
pub fn dim_from_svec_len(len: usize) -> Option<usize> {
    let d = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (svec_len(d) == len).then_some(d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    packed: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            packed: vec![0.0; svec_len(dim)],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![1.0; dim])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut s = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            s.packed[svec_index(i, i)] = d;
        }
        s
    }

    /// Symmetric part `(X + Xᵀ)/2` of a square dense matrix.
    pub fn from_dense(x: &Matrix) -> Self {
        assert!(x.is_square(), "from_dense: matrix must be square");
        let n = x.rows();
        let mut packed = Vec::with_capacity(svec_len(n));
        for j in 0..n {
            for i in 0..=j {
                if i == j {
                    packed.push(x[(i, i)]);
                } else {
                    packed.push(SQRT_2 * 0.5 * (x[(i, j)] + x[(j, i)]));
                }
            }
        }
        Self { dim: n, packed }
    }

    /// Like [`from_dense`](Self::from_dense) but refuses matrices that are not symmetric to `tol` (absolute).
    pub fn try_from_dense(x: &Matrix, tol: f64) -> Result<Self, LinalgError> {
        if !x.is_square() {
            return Err(LinalgError::DimensionMismatch(format!(
                "expected a square matrix, got {}x{}",
                x.rows(),
                x.cols()
            )));
        }
        let asym = x.max_abs_diff(&x.transpose());
        if asym > tol {
            return Err(LinalgError::NotSymmetric(asym));
        }
        Ok(Self::from_dense(x))
    }

    /// Wraps a packed vector (the `smat` operation).
    pub fn from_svec(v: Vec<f64>) -> Result<Self, LinalgError> {
        let dim = dim_from_svec_len(v.len()).ok_or_else(|| {
            LinalgError::DimensionMismatch(format!(
                "svec length {} is not a triangular number",
                v.len()
            ))
        })?;
        Ok(Self { dim, packed: v })
    }

    /// The packed vector (the `svec` operation).
    pub fn svec(&self) -> &[f64] {
        &self.packed
    }

    pub fn into_svec(self) -> Vec<f64> {
        self.packed
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Matrix entry `X[i][j]`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let v = self.packed[svec_index(i, j)];
        if i == j {
            v
        } else {
            v / SQRT_2
        }
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = svec_index(i, j);
        self.packed[k] = if i == j { value } else { value * SQRT_2 };
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.dim;
        let mut m = Matrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = self.get(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Frobenius inner product `tr(XY)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        super::dot(&self.packed, &other.packed)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.packed[svec_index(i, i)]).sum()
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            packed: self.packed.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            packed: self
                .packed
                .iter()
                .zip(&other.packed)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            packed: self
                .packed
                .iter()
                .zip(&other.packed)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.packed.iter().all(|x| x.is_finite())
    }

    /// Largest absolute matrix entry.
    pub fn max_abs(&self) -> f64 {
        self.to_dense().max_abs()
    }

    /// `Mᵀ X M` for a dense `M` with `M.rows() == dim`.
    pub fn congruence(&self, m: &Matrix) -> SymMatrix {
        let x = self.to_dense();
        SymMatrix::from_dense(&m.tr_matmul(&x.matmul(m)))
    }

    /// Principal submatrix on `start..start+len`.
    pub fn principal_block(&self, start: usize, len: usize) -> SymMatrix {
        let mut s = SymMatrix::zeros(len);
        for j in 0..len {
            for i in 0..=j {
                s.packed[svec_index(i, j)] = self.packed[svec_index(start + i, start + j)];
            }
        }
        s
    }
}

/// `svec` of a symmetric matrix (free-function form).
pub fn svec(x: &SymMatrix) -> Vec<f64> {
    x.svec().to_vec()
}

/// `smat` of a packed vector (free-function form).
pub fn smat(v: &[f64]) -> Result<SymMatrix, LinalgError> {
    SymMatrix::from_svec(v.to_vec())
}
