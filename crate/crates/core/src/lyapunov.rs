//! Generalized Lyapunov operators `X ↦ AᵀX + XA + Σ NⱼᵀXNⱼ` and their adjoints,
//! solved directly in symmetric-vectorized coordinates.

use rayon::prelude::*;

use crate::linalg::{cholesky, svec_len, LinalgError, Lu, Matrix, SymMatrix};
use crate::Error;

/// Pivot threshold, relative to the largest entry of the svec matrix.
const SINGULAR_TOL: f64 = 1e-13;
const MAX_REFINE: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `X ↦ AᵀX + XA + Σ NⱼᵀXNⱼ`
    Primal,
    /// `X ↦ AX + XAᵀ + Σ NⱼXNⱼᵀ`
    Adjoint,
}

#[derive(Clone, Debug)]
pub struct GenLyapOperator {
    a: Matrix,
    n_list: Vec<Matrix>,
    direction: Direction,
}

fn check_dims(a: &Matrix, n_list: &[Matrix]) -> Result<(), Error> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if let Some(bad) = n_list.iter().find(|nj| nj.shape() != a.shape()) {
        return Err(Error::DimensionMismatch(format!(
            "noise matrix is {}x{}, A is {}x{}",
            bad.rows(),
            bad.cols(),
            a.rows(),
            a.cols()
        )));
    }
    Ok(())
}

impl GenLyapOperator {
    pub fn new(a: &Matrix, n_list: &[Matrix], direction: Direction) -> Result<Self, Error> {
        check_dims(a, n_list)?;
        Ok(Self {
            a: a.clone(),
            n_list: n_list.to_vec(),
            direction,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn with_direction(&self, direction: Direction) -> Self {
        Self {
            direction,
            ..self.clone()
        }
    }

    pub fn apply(&self, x: &SymMatrix) -> Result<SymMatrix, Error> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "operator of order {} applied to a {}x{} matrix",
                self.dim(),
                x.dim(),
                x.dim()
            )));
        }
        let xd = x.to_dense();
        Ok(match self.direction {
            Direction::Primal => apply_primal(&self.a, &self.n_list, &xd),
            Direction::Adjoint => apply_adjoint(&self.a, &self.n_list, &xd),
        })
    }

    /// Matrix of the primal operator in svec coordinates, stored transposed
    /// (row `c` holds the image of the `c`-th orthonormal basis element).
    /// The adjoint's svec matrix is the transpose of the primal's.
    fn primal_svec_matrix_transposed(&self) -> Matrix {
        let n = self.dim();
        let d = svec_len(n);
        let mut mt = Matrix::zeros(d, d);
        mt.as_mut_slice()
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(col, row)| {
                let (a_idx, b_idx) = crate::linalg::svec_position(col);
                self.basis_image(a_idx, b_idx, row);
            });
        mt
    }

    /// svec of the primal image of the basis element `E_ab`.
    fn basis_image(&self, a_idx: usize, b_idx: usize, out: &mut [f64]) {
        let n = self.dim();
        let a = &self.a;
        let sqrt2 = std::f64::consts::SQRT_2;
        let same = a_idx == b_idx;
        let mut k = 0;
        for j in 0..n {
            for i in 0..=j {
                let mut y = 0.0;
                if same {
                    if j == a_idx {
                        y += a[(a_idx, i)];
                    }
                    if i == a_idx {
                        y += a[(a_idx, j)];
                    }
                    for nm in &self.n_list {
                        y += nm[(a_idx, i)] * nm[(a_idx, j)];
                    }
                } else {
                    if j == b_idx {
                        y += a[(a_idx, i)];
                    }
                    if i == a_idx {
                        y += a[(b_idx, j)];
                    }
                    if j == a_idx {
                        y += a[(b_idx, i)];
                    }
                    if i == b_idx {
                        y += a[(a_idx, j)];
                    }
                    for nm in &self.n_list {
                        y += nm[(a_idx, i)] * nm[(b_idx, j)] + nm[(b_idx, i)] * nm[(a_idx, j)];
                    }
                    y /= sqrt2;
                }
                out[k] = if i == j { y } else { y * sqrt2 };
                k += 1;
            }
        }
    }

    /// Assembles and factors the svec system once; the factorization serves both directions.
    pub fn factorize(&self) -> Result<LyapFactorization, Error> {
        self.factorize_shifted(0.0)
    }

    /// Factors the operator of the shifted pair `(A − sI, N)`, i.e. `op − 2s·id`.
    pub fn factorize_shifted(&self, shift: f64) -> Result<LyapFactorization, Error> {
        let mut mt = self.primal_svec_matrix_transposed();
        if shift != 0.0 {
            for i in 0..mt.rows() {
                mt[(i, i)] -= 2.0 * shift;
            }
        }
        let lu = Lu::new(mt, SINGULAR_TOL).map_err(|e| match e {
            LinalgError::Singular { pivot, value } => Error::SingularOperator { pivot, value },
            other => Error::Linalg(other),
        })?;
        let mut a = self.a.clone();
        for i in 0..a.rows() {
            a[(i, i)] -= shift;
        }
        Ok(LyapFactorization {
            a,
            n_list: self.n_list.clone(),
            lu,
        })
    }

    /// Solves `op(X) = rhs` in this operator's direction.
    pub fn solve(&self, rhs: &SymMatrix) -> Result<SymMatrix, Error> {
        self.factorize()?.solve(self.direction, rhs)
    }
}

fn apply_primal(a: &Matrix, n_list: &[Matrix], x: &Matrix) -> SymMatrix {
    let t = a.tr_matmul(x);
    let mut y = &t + &t.transpose();
    for nj in n_list {
        y.axpy(1.0, &nj.tr_matmul(&x.matmul(nj)));
    }
    SymMatrix::from_dense(&y)
}

fn apply_adjoint(a: &Matrix, n_list: &[Matrix], x: &Matrix) -> SymMatrix {
    let t = a.matmul(x);
    let mut y = &t + &t.transpose();
    for nj in n_list {
        y.axpy(1.0, &nj.matmul(x).matmul_tr(nj));
    }
    SymMatrix::from_dense(&y)
}

/// LU factorization of a generalized Lyapunov operator in svec coordinates.
#[derive(Clone, Debug)]
pub struct LyapFactorization {
    a: Matrix,
    n_list: Vec<Matrix>,
    /// Factors the transpose of the primal svec matrix.
    lu: Lu,
}

impl LyapFactorization {
    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    fn op_scale(&self) -> f64 {
        2.0 * self.a.frobenius_norm()
            + self
                .n_list
                .iter()
                .map(|nj| nj.frobenius_norm().powi(2))
                .sum::<f64>()
    }

    fn apply(&self, direction: Direction, x: &SymMatrix) -> SymMatrix {
        let xd = x.to_dense();
        match direction {
            Direction::Primal => apply_primal(&self.a, &self.n_list, &xd),
            Direction::Adjoint => apply_adjoint(&self.a, &self.n_list, &xd),
        }
    }

    fn raw_solve(&self, direction: Direction, rhs: &[f64]) -> Vec<f64> {
        match direction {
            Direction::Primal => self.lu.solve_transpose(rhs),
            Direction::Adjoint => self.lu.solve(rhs),
        }
    }

    /// Solves `op(X) = rhs` with iterative refinement until
    /// `‖op(X) − rhs‖_F ≤ 1e-9·max(1, ‖rhs‖_F)`.
    pub fn solve(&self, direction: Direction, rhs: &SymMatrix) -> Result<SymMatrix, Error> {
        if rhs.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side is {}x{}, operator order {}",
                rhs.dim(),
                rhs.dim(),
                self.dim()
            )));
        }
        if !rhs.is_finite() {
            return Err(Error::Linalg(LinalgError::NonFinite));
        }
        let bound = 1e-9 * rhs.frobenius_norm().max(1.0);
        let mut x = SymMatrix::from_svec(self.raw_solve(direction, rhs.svec()))?;
        let mut residual = rhs.sub(&self.apply(direction, &x));
        let mut res_norm = residual.frobenius_norm();
        for _ in 0..MAX_REFINE {
            if res_norm <= 0.01 * bound {
                break;
            }
            let dx = SymMatrix::from_svec(self.raw_solve(direction, residual.svec()))?;
            let candidate = x.add(&dx);
            let cand_res = rhs.sub(&self.apply(direction, &candidate));
            let cand_norm = cand_res.frobenius_norm();
            if !(cand_norm < res_norm) {
                break;
            }
            x = candidate;
            residual = cand_res;
            res_norm = cand_norm;
        }
        // For huge solutions the residual cannot be evaluated more accurately
        // than the rounding in op(X) itself; accept that backward-stable level.
        let floor =
            64.0 * f64::EPSILON * (self.dim() as f64) * self.op_scale() * x.frobenius_norm();
        if !(res_norm <= bound.max(floor)) {
            return Err(Error::LyapunovResidual {
                residual: res_norm,
                bound,
            });
        }
        Ok(x)
    }

    /// Solves the primal equation with right-hand side `−I` and returns the
    /// solution when it is positive definite, which certifies mean-square
    /// stability of the factored pair.
    pub fn stability_certificate(&self) -> Option<SymMatrix> {
        let x = self
            .solve(
                Direction::Primal,
                &SymMatrix::identity(self.dim()).scale(-1.0),
            )
            .ok()?;
        cholesky(&x).ok()?;
        Some(x)
    }
}

/// Outcome of the mean-square stability test.
#[derive(Clone, Debug)]
pub struct StabilityVerdict {
    pub stable: bool,
    /// Positive definite `X` with `AᵀX + XA + Σ NⱼᵀXNⱼ = −I`, when stable.
    pub certificate: Option<SymMatrix>,
    /// The operator was numerically singular (stability margin zero).
    pub marginal: bool,
}

/// Mean-square stability via a positive definite solution of `op(X) = −I`.
pub fn is_ms_stable(a: &Matrix, n_list: &[Matrix]) -> Result<StabilityVerdict, Error> {
    let op = GenLyapOperator::new(a, n_list, Direction::Primal)?;
    stability_of(&op, 0.0)
}

fn stability_of(op: &GenLyapOperator, shift: f64) -> Result<StabilityVerdict, Error> {
    match op.factorize_shifted(shift) {
        Ok(f) => {
            let certificate = f.stability_certificate();
            Ok(StabilityVerdict {
                stable: certificate.is_some(),
                certificate,
                marginal: false,
            })
        }
        Err(Error::SingularOperator { .. }) => Ok(StabilityVerdict {
            stable: false,
            certificate: None,
            marginal: true,
        }),
        Err(e) => Err(e),
    }
}

/// Largest real part `α` of the spectrum of `I⊗A + A⊗I + Σ Nⱼ⊗Nⱼ`, to within `±tol`.
///
/// Bisects on a shift `s`: `(A − sI, N)` is mean-square stable iff `α < 2s`.
pub fn spectral_abscissa(a: &Matrix, n_list: &[Matrix], tol: f64) -> Result<f64, Error> {
    let op = GenLyapOperator::new(a, n_list, Direction::Primal)?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let stable_at = |s: f64| -> Result<bool, Error> { Ok(stability_of(&op, s)?.stable) };

    let guess = 2.0 * a.frobenius_norm()
        + n_list
            .iter()
            .map(|nj| nj.frobenius_norm().powi(2))
            .sum::<f64>();
    let mut width = 0.5 * guess.max(1.0);
    let mut lo = -width;
    let mut hi = width;
    while !stable_at(hi)? {
        width *= 2.0;
        hi = width;
        if width > 1e16 {
            return Err(Error::BracketFailure("spectral abscissa (no stable shift)"));
        }
    }
    while stable_at(lo)? {
        hi = lo;
        width *= 2.0;
        lo = -width;
        if width > 1e16 {
            return Err(Error::BracketFailure(
                "spectral abscissa (no unstable shift)",
            ));
        }
    }
    // α ∈ (2·lo, 2·hi]
    while 2.0 * (hi - lo) > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if stable_at(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo + hi)
}
