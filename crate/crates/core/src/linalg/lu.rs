//! Dense LU factorization with partial pivoting.
//!
//! Blocked right-looking variant: panels of `BLOCK` columns are factored
//! unblocked, then the trailing submatrix receives one rank-`BLOCK` update,
//! tiled over columns so the active rows stay in cache. The Kronecker-type
//! Lyapunov systems reach a few thousand unknowns, where this matters.

use super::{LinalgError, Matrix};

const BLOCK: usize = 48;
const TILE: usize = 256;

#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    /// Unit-lower `L` below the diagonal, `U` on and above it.
    lu: Vec<f64>,
    /// Row `i` of the factored matrix is row `perm[i]` of the input.
    perm: Vec<usize>,
    min_pivot: f64,
}

impl Lu {
    /// Factors `a`. A pivot with magnitude `≤ rel_tol · max|aᵢⱼ|` is reported as singular.
    pub fn new(a: Matrix, rel_tol: f64) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::DimensionMismatch(format!(
                "LU of a {}x{} matrix",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let scale = a.max_abs();
        let threshold = rel_tol * scale;
        let mut lu = a.into_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;

        if n > 0 && scale == 0.0 {
            return Err(LinalgError::Singular {
                pivot: 0,
                value: 0.0,
            });
        }

        let mut k0 = 0;
        while k0 < n {
            let kb = BLOCK.min(n - k0);
            let kend = k0 + kb;

            // Panel factorization over rows k0.., columns k0..kend.
            for k in k0..kend {
                let mut p = k;
                let mut best = lu[k * n + k].abs();
                for i in k + 1..n {
                    let v = lu[i * n + k].abs();
                    if v > best {
                        best = v;
                        p = i;
                    }
                }
                if !(best > threshold) {
                    return Err(LinalgError::Singular {
                        pivot: k,
                        value: best,
                    });
                }
                min_pivot = min_pivot.min(best);
                if p != k {
                    swap_rows(&mut lu, n, k, p);
                    perm.swap(k, p);
                }
                let piv = lu[k * n + k];
                let (head, tail) = lu.split_at_mut((k + 1) * n);
                let pivot_row = &head[k * n + k + 1..k * n + kend];
                for row in tail.chunks_exact_mut(n) {
                    let l = row[k] / piv;
                    row[k] = l;
                    if l != 0.0 {
                        for (x, &u) in row[k + 1..kend].iter_mut().zip(pivot_row) {
                            *x -= l * u;
                        }
                    }
                }
            }

            if kend < n {
                // U12 = L11⁻¹ A12
                for k in k0..kend {
                    let (head, tail) = lu.split_at_mut((k + 1) * n);
                    let src = &head[k * n + kend..(k + 1) * n];
                    for row in tail.chunks_exact_mut(n).take(kend - k - 1) {
                        let l = row[k];
                        if l != 0.0 {
                            for (x, &u) in row[kend..].iter_mut().zip(src) {
                                *x -= l * u;
                            }
                        }
                    }
                }
                // A22 -= L21 U12, tiled over columns.
                let (head, tail) = lu.split_at_mut(kend * n);
                let panel = &head[k0 * n..];
                for c0 in (kend..n).step_by(TILE) {
                    let c1 = (c0 + TILE).min(n);
                    for row in tail.chunks_exact_mut(n) {
                        let (lpart, rest) = row.split_at_mut(kend);
                        let target = &mut rest[c0 - kend..c1 - kend];
                        for (kk, &l) in lpart[k0..kend].iter().enumerate() {
                            if l != 0.0 {
                                let u = &panel[kk * n + c0..kk * n + c1];
                                for (x, &uv) in target.iter_mut().zip(u) {
                                    *x -= l * uv;
                                }
                            }
                        }
                    }
                }
            }
            k0 = kend;
        }

        Ok(Self {
            n,
            lu,
            perm,
            min_pivot,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Smallest pivot magnitude encountered.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s = super::dot(row, &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s = super::dot(row, &x[i + 1..]);
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        // Uᵀ y = b, column-oriented sweeps keep the row-major access contiguous.
        let mut y = b.to_vec();
        for i in 0..n {
            y[i] /= self.lu[i * n + i];
            let yi = y[i];
            if yi != 0.0 {
                let row = &self.lu[i * n + i + 1..(i + 1) * n];
                for (t, &u) in y[i + 1..].iter_mut().zip(row) {
                    *t -= u * yi;
                }
            }
        }
        // Lᵀ z = y
        for i in (0..n).rev() {
            let zi = y[i];
            if zi != 0.0 {
                let row = &self.lu[i * n..i * n + i];
                for (t, &l) in y[..i].iter_mut().zip(row) {
                    *t -= l * zi;
                }
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }
}

fn swap_rows(a: &mut [f64], n: usize, i: usize, j: usize) {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    let (head, tail) = a.split_at_mut(hi * n);
    head[lo * n..(lo + 1) * n].swap_with_slice(&mut tail[..n]);
}

/// Solves `A x = b` for a single right-hand side.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    Ok(Lu::new(a.clone(), 1e-14)?.solve(b))
}

/// General inverse via LU.
pub fn inverse(a: &Matrix) -> Result<Matrix, LinalgError> {
    let n = a.rows();
    let lu = Lu::new(a.clone(), 1e-14)?;
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[j] = 1.0;
        inv.set_column(j, &lu.solve(&e));
    }
    Ok(inv)
}
