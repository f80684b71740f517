//! Dense real linear algebra: factorizations, symmetric eigenvalues, SVD
//! and the symmetric-vectorization calculus.

mod chol;
mod eig;
mod lu;
mod matrix;
mod svd;
mod sym;

pub use chol::{cholesky, cholesky_with_tol, default_pd_tol, Cholesky};
pub use eig::{sym_eig, sym_eig_dense, SymEigen};
pub use lu::{inverse, solve, Lu};
pub use matrix::{dot, Matrix};
pub use svd::{svd, Svd};
pub use sym::{dim_from_svec_len, smat, svec, svec_index, svec_len, svec_position, SymMatrix};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {} is {value:.3e})", .pivot + 1)]
    NotPd { pivot: usize, value: f64 },
    #[error("matrix is numerically singular (pivot {} is {value:.3e})", .pivot + 1)]
    Singular { pivot: usize, value: f64 },
    #[error("{0} did not converge")]
    NonConvergence(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix has non-finite entries")]
    NonFinite,
}

/// Sign class of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    Pd,
    Psd,
    Indefinite,
    Nsd,
    Nd,
}

/// Result of [`classify_definiteness`]: the class plus the spectrum extremes it was read from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub class: Definiteness,
    pub min_eig: f64,
    pub max_eig: f64,
    /// Dead-band half width used for the decision.
    pub band: f64,
}

impl Classification {
    pub fn is_psd(&self) -> bool {
        self.min_eig >= -self.band
    }

    pub fn is_nsd(&self) -> bool {
        self.max_eig <= self.band
    }

    pub fn is_pd(&self) -> bool {
        self.class == Definiteness::Pd
    }

    pub fn is_nd(&self) -> bool {
        self.class == Definiteness::Nd
    }
}

/// Classifies `x` from its spectrum with dead band `±tol · max(1, ‖X‖₂)`.
/// The zero matrix classifies as `Psd` (and [`Classification::is_nsd`] is also true).
pub fn classify_definiteness(x: &SymMatrix, tol: f64) -> Result<Classification, LinalgError> {
    let e = sym_eig(x)?;
    let norm = e.min().abs().max(e.max().abs());
    Ok(classify_spectrum(e.min(), e.max(), tol * norm.max(1.0)))
}

/// Classification with an absolute dead band.
pub fn classify_with_band(x: &SymMatrix, band: f64) -> Result<Classification, LinalgError> {
    let e = sym_eig(x)?;
    Ok(classify_spectrum(e.min(), e.max(), band))
}

fn classify_spectrum(min_eig: f64, max_eig: f64, band: f64) -> Classification {
    let class = if min_eig > band {
        Definiteness::Pd
    } else if min_eig >= -band {
        Definiteness::Psd
    } else if max_eig < -band {
        Definiteness::Nd
    } else if max_eig <= band {
        Definiteness::Nsd
    } else {
        Definiteness::Indefinite
    };
    Classification {
        class,
        min_eig,
        max_eig,
        band,
    }
}

/// A square factor `F` with `F Fᵀ = X₊` for symmetric positive semidefinite `X`.
///
/// Cholesky when it succeeds; otherwise `V diag(√max(λ, 0))` from the
/// eigendecomposition, which tolerates numerically singular Gramians.
pub fn psd_factor(x: &SymMatrix) -> Result<Matrix, LinalgError> {
    let dense = x.to_dense();
    if let Ok(ch) = Cholesky::new(&dense, 0.0) {
        return Ok(ch.into_l());
    }
    let e = sym_eig_dense(&dense)?;
    let n = x.dim();
    Ok(Matrix::from_fn(n, n, |i, j| {
        e.vectors[(i, j)] * e.values[j].max(0.0).sqrt()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_examples() {
        let nd = SymMatrix::from_dense(&Matrix::from_rows(&[
            [-1.0 / 6.0, 1.0 / 8.0],
            [1.0 / 8.0, -5.0 / 48.0],
        ]));
        assert_eq!(
            classify_definiteness(&nd, 1e-12).unwrap().class,
            Definiteness::Nd
        );

        let zero = classify_definiteness(&SymMatrix::zeros(4), 1e-12).unwrap();
        assert_eq!(zero.class, Definiteness::Psd);
        assert!(zero.is_psd() && zero.is_nsd());

        let ind = classify_definiteness(&SymMatrix::from_diag(&[1.0, -1.0]), 1e-12).unwrap();
        assert_eq!(ind.class, Definiteness::Indefinite);

        let nsd = classify_definiteness(&SymMatrix::from_diag(&[0.0, -1.0]), 1e-12).unwrap();
        assert_eq!(nsd.class, Definiteness::Nsd);
        assert!(nsd.is_nsd() && !nsd.is_psd());
    }

    #[test]
    fn cholesky_success_implies_pd() {
        let x = SymMatrix::from_dense(&Matrix::from_rows(&[
            [4.0, 1.0, 0.5],
            [1.0, 3.0, 0.2],
            [0.5, 0.2, 2.0],
        ]));
        let tol = default_pd_tol(&x.to_dense());
        assert!(cholesky_with_tol(&x, tol).is_ok());
        assert!(classify_definiteness(&x, 1e-10).unwrap().is_pd());
    }

    #[test]
    fn psd_factor_handles_singular() {
        let x = SymMatrix::from_dense(&Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]));
        let f = psd_factor(&x).unwrap();
        assert!(f.matmul_tr(&f).max_abs_diff(&x.to_dense()) < 1e-14);
    }
}
