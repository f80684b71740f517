//! Singular value decomposition by one-sided (Hestenes) Jacobi.
//!
//! Columns of the taller orientation are orthogonalised pairwise; singular
//! values come out with high relative accuracy, which the balancing step
//! relies on for the small trailing values.

use super::{dot, LinalgError, Matrix};

const MAX_SWEEPS: usize = 80;

/// `M = U diag(s) Vᵀ` with `s` descending, `U` of size `m × k`, `V` of size `n × k`, `k = min(m, n)`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let k = self.s.len();
        let us = Matrix::from_fn(self.u.rows(), k, |i, j| self.u[(i, j)] * self.s[j]);
        us.matmul_tr(&self.v)
    }
}

pub fn svd(m: &Matrix) -> Result<Svd, LinalgError> {
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if m.rows() >= m.cols() {
        svd_tall(m)
    } else {
        let t = svd_tall(&m.transpose())?;
        Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        })
    }
}

fn svd_tall(m: &Matrix) -> Result<Svd, LinalgError> {
    let (rows, n) = m.shape();
    // Working columns stored contiguously: w[j] is column j of M.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let tol = (rows as f64).sqrt() * f64::EPSILON;
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                // Columns this small have lost their precision to gradual underflow.
                if alpha.min(beta) < f64::MIN_POSITIVE / f64::EPSILON {
                    continue;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (wp, wq) = pair_mut(&mut w, p, q);
                rotate_pair(wp, wq, c, s);
                let (vp, vq) = pair_mut(&mut v, p, q);
                rotate_pair(vp, vq, c, s);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(LinalgError::NonConvergence("one-sided Jacobi SVD"));
    }

    let norms: Vec<f64> = w.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let tiny = s.first().copied().unwrap_or(0.0) * f64::EPSILON * (rows.max(n) as f64);

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut s_out = Vec::with_capacity(n);
    for (&j, &sj) in order.iter().zip(&s) {
        if sj > tiny && sj > 0.0 {
            u_cols.push(w[j].iter().map(|x| x / sj).collect());
            s_out.push(sj);
        } else {
            u_cols.push(Vec::new());
            s_out.push(if sj > 0.0 { sj } else { 0.0 });
        }
        v_cols.push(v[j].clone());
    }
    complete_orthonormal(&mut u_cols, rows);

    // First nonzero entry of each U column positive.
    for (uc, vc) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
        if let Some(&first) = uc.iter().find(|x| x.abs() > 1e-14) {
            if first < 0.0 {
                uc.iter_mut().for_each(|x| *x = -*x);
                vc.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }

    let u = Matrix::from_fn(rows, n, |i, j| u_cols[j][i]);
    let vm = Matrix::from_fn(n, n, |i, j| v_cols[j][i]);
    Ok(Svd { u, s: s_out, v: vm })
}

fn pair_mut<T>(v: &mut [T], p: usize, q: usize) -> (&mut T, &mut T) {
    debug_assert!(p < q);
    let (a, b) = v.split_at_mut(q);
    (&mut a[p], &mut b[0])
}

fn rotate_pair(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let xa = *a;
        let yb = *b;
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Fills empty columns with unit vectors orthogonal to the filled ones.
fn complete_orthonormal(cols: &mut [Vec<f64>], dim: usize) {
    let missing: Vec<usize> = (0..cols.len()).filter(|&j| cols[j].is_empty()).collect();
    if missing.is_empty() {
        return;
    }
    let mut basis: Vec<Vec<f64>> = cols.iter().filter(|c| !c.is_empty()).cloned().collect();
    let mut candidate = 0;
    for j in missing {
        loop {
            assert!(candidate < dim, "cannot complete an orthonormal basis");
            let mut e = vec![0.0; dim];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for b in &basis {
                    let proj = dot(&e, b);
                    e.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 1e-8 {
                e.iter_mut().for_each(|x| *x /= norm);
                basis.push(e.clone());
                cols[j] = e;
                break;
            }
        }
    }
}
