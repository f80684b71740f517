//! Symmetric eigendecomposition by the cyclic Jacobi method.

use super::{LinalgError, Matrix, SymMatrix};

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `V diag(f(λ)) Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let fl: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let scaled = Matrix::from_fn(n, n, |i, j| self.vectors[(i, j)] * fl[j]);
        scaled.matmul_tr(&self.vectors).symmetrized()
    }
}

pub fn sym_eig(x: &SymMatrix) -> Result<SymEigen, LinalgError> {
    sym_eig_dense(&x.to_dense())
}

/// Jacobi on a dense matrix; only the symmetric part is used.
pub fn sym_eig_dense(x: &Matrix) -> Result<SymEigen, LinalgError> {
    assert!(x.is_square(), "sym_eig of a non-square matrix");
    let n = x.rows();
    let mut a = x.symmetrized();
    let mut v = Matrix::identity(n);
    let total = a.frobenius_norm();

    if n > 1 && total > 0.0 {
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum::<f64>()
                .sqrt();
            if off <= 1e-15 * total {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= f64::MIN_POSITIVE {
                        continue;
                    }
                    let app = a[(p, p)];
                    let aqq = a[(q, q)];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    rotate(&mut a, &mut v, p, q, c, s);
                }
            }
        }
        if !converged {
            return Err(LinalgError::NonConvergence("Jacobi eigenvalue sweeps"));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag = a.diagonal();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(SymEigen { values, vectors })
}

/// Applies the rotation `Jᵀ A J` in the `(p, q)` plane and accumulates `V J`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn check_decomposition(x: &Matrix, e: &SymEigen) {
        let n = x.rows();
        let lam = Matrix::from_diag(&e.values);
        let xv = x.matmul(&e.vectors);
        let vl = e.vectors.matmul(&lam);
        assert!(xv.max_abs_diff(&vl) <= 1e-10 * x.frobenius_norm().max(1e-300));
        let vtv = e.vectors.tr_matmul(&e.vectors);
        assert!(vtv.max_abs_diff(&Matrix::identity(n)) <= 1e-12);
    }

    #[test]
    fn diagonal_sorted() {
        let e = sym_eig(&SymMatrix::from_diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn congruence_route_for_product_spectrum() {
        // eig(PQ) through Lᵀ Q L with L Lᵀ = P.
        let p = SymMatrix::from_dense(&Matrix::from_rows(&[[3.0, 3.0], [3.0, 6.0]]));
        let q = SymMatrix::from_dense(&Matrix::from_rows(&[[6.0, 3.0], [3.0, 3.0]]));
        let l = super::super::cholesky(&p).unwrap();
        let e = sym_eig(&q.congruence(&l)).unwrap();
        let disc = (54.0f64 * 54.0 - 4.0 * 81.0).sqrt();
        assert!((e.values[0] - (54.0 - disc) / 2.0).abs() < 1e-12);
        assert!((e.values[1] - (54.0 + disc) / 2.0).abs() < 1e-12);
        assert!((e.values[0] - 1.5442).abs() < 1e-4);
        assert!((e.values[1] - 52.4558).abs() < 1e-4);
    }

    #[test]
    fn negative_definite_block() {
        let x = Matrix::from_rows(&[
            [-1.0 / 6.0, 1.0 / 8.0],
            [1.0 / 8.0, -1.0 / 6.0 + 1.0 / 16.0],
        ]);
        let e = sym_eig_dense(&x).unwrap();
        assert!(e.values.iter().all(|&l| l < 0.0));
        check_decomposition(&x, &e);
    }

    #[test]
    fn repeated_eigenvalues() {
        let e = sym_eig(&SymMatrix::identity(4)).unwrap();
        assert_eq!(e.values, vec![1.0; 4]);
        let z = sym_eig(&SymMatrix::zeros(3)).unwrap();
        assert_eq!(z.values, vec![0.0; 3]);
    }

    fn cofactor_det(m: &Matrix) -> f64 {
        let n = m.rows();
        if n == 1 {
            return m[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let minor = Matrix::from_fn(n - 1, n - 1, |r, c| {
                    m[(r + 1, if c < j { c } else { c + 1 })]
                });
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[(0, j)] * cofactor_det(&minor)
            })
            .sum()
    }

    proptest! {
        #[test]
        fn trace_and_determinant(n in 1usize..=4, seed in proptest::collection::vec(-5.0f64..5.0, 16)) {
            let x = Matrix::from_fn(n, n, |i, j| seed[i * 4 + j] + seed[j * 4 + i]);
            let e = sym_eig_dense(&x).unwrap();
            check_decomposition(&x, &e);
            let sum: f64 = e.values.iter().sum();
            prop_assert!((sum - x.trace()).abs() <= 1e-10 * (1.0 + x.frobenius_norm()));
            let prod: f64 = e.values.iter().product();
            let det = cofactor_det(&x);
            let scale = x.frobenius_norm().powi(n as i32).max(1.0);
            prop_assert!((prod - det).abs() <= 1e-10 * scale);
        }
    }
}
