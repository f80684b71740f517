use super::{LinalgError, Matrix, SymMatrix};

/// Default pivot tolerance: `1e-10 · max(1, ‖X‖∞)`.
pub fn default_pd_tol(x: &Matrix) -> f64 {
    1e-10 * x.row_sum_norm().max(1.0)
}

/// Cholesky factor `L` (lower triangular) with `L Lᵀ = X`.
pub fn cholesky(x: &SymMatrix) -> Result<Matrix, LinalgError> {
    let dense = x.to_dense();
    let tol = default_pd_tol(&dense);
    Cholesky::new(&dense, tol).map(Cholesky::into_l)
}

/// Cholesky factor with an explicit pivot tolerance.
pub fn cholesky_with_tol(x: &SymMatrix, tol: f64) -> Result<Matrix, LinalgError> {
    Cholesky::new(&x.to_dense(), tol).map(Cholesky::into_l)
}

/// A Cholesky factorization of a dense symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factors `x`, reading only its lower triangle. A pivot `≤ tol` aborts with `NotPd`.
    pub fn new(x: &Matrix, tol: f64) -> Result<Self, LinalgError> {
        if !x.is_square() {
            return Err(LinalgError::DimensionMismatch(format!(
                "cholesky of a {}x{} matrix",
                x.rows(),
                x.cols()
            )));
        }
        let n = x.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let lj = l.row(j)[..j].to_vec();
            let d = x[(j, j)] - lj.iter().map(|v| v * v).sum::<f64>();
            if !(d > tol) {
                return Err(LinalgError::NotPd { pivot: j, value: d });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let s = x[(i, j)] - super::dot(&l.row(i)[..j], &lj);
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn l(&self) -> &Matrix {
        &self.l
    }

    pub fn into_l(self) -> Matrix {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// `log det X = 2 Σ log Lᵢᵢ`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let s = super::dot(&self.l.row(i)[..i], &y[..i]);
            y[i] = (y[i] - s) / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// `L⁻¹` (lower triangular).
    pub fn l_inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        for c in 0..n {
            inv[(c, c)] = 1.0 / self.l[(c, c)];
            for i in c + 1..n {
                let mut s = 0.0;
                for k in c..i {
                    s += self.l[(i, k)] * inv[(k, c)];
                }
                inv[(i, c)] = -s / self.l[(i, i)];
            }
        }
        inv
    }

    /// `X⁻¹ = L⁻ᵀ L⁻¹`, exactly symmetric.
    pub fn inverse(&self) -> Matrix {
        let li = self.l_inverse();
        li.tr_matmul(&li).symmetrized()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_factor() {
        let l = cholesky(&SymMatrix::identity(3)).unwrap();
        assert_eq!(l, Matrix::identity(3));
    }

    #[test]
    fn example_gramian_factor() {
        let l = cholesky(&SymMatrix::from_diag(&[0.5, 1.0 / 16.0])).unwrap();
        assert!((l[(0, 0)] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((l[(1, 1)] - 0.25).abs() < 1e-15);
        assert_eq!(l[(1, 0)], 0.0);
    }

    #[test]
    fn indefinite_fails_on_second_pivot() {
        let x = SymMatrix::from_dense(&Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]));
        match cholesky(&x) {
            Err(LinalgError::NotPd { pivot, value }) => {
                assert_eq!(pivot, 1);
                assert!((value + 3.0).abs() < 1e-12);
            }
            other => panic!("expected NotPd, got {other:?}"),
        }
    }

    #[test]
    fn residual_and_inverse() {
        let a = Matrix::from_fn(5, 5, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let x = &a.matmul_tr(&a) + &Matrix::identity(5);
        let ch = Cholesky::new(&x, 1e-12).unwrap();
        let rec = ch.l().matmul_tr(ch.l());
        assert!(rec.max_abs_diff(&x) <= 1e-12 * x.frobenius_norm());
        let prod = ch.inverse().matmul(&x);
        assert!(prod.max_abs_diff(&Matrix::identity(5)) < 1e-12);
        let sol = ch.solve_vec(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let back = x.mul_vec(&sol);
        for (b, e) in back.iter().zip([1.0, 2.0, 3.0, 4.0, 5.0]) {
            assert!((b - e).abs() < 1e-12);
        }
    }
}
