//! Primal log-barrier path following for the reachability LMI
//!
//! ```text
//! G(P) = [ AP + PAᵀ + BBᵀ   PN₁ᵀ  …  PN_kᵀ ]
//!        [ N₁P              −P            ]
//!        [ ⋮                      ⋱       ]
//!        [ N_kP                        −P ]  ⪯ 0,   P ≻ 0,
//! ```
//! minimizing a linear objective `⟨c, svec(P)⟩`.
//!
//! The linear part of `G` is written as `𝒜(X) = Σₛ (UₛXVₛᵀ + VₛXUₛᵀ)` where
//! each `Uₛ`, `Vₛ` is an `n`-column block selector (optionally times an
//! `n×n` factor). Gradient and Hessian of `−log det(−G)` then reduce to
//! sums of `L X R` products of `n×n` blocks of `W = (−G)⁻¹`.

use rayon::prelude::*;

use crate::linalg::{svec_len, svec_position, Cholesky, LinalgError, Lu, Matrix, SymMatrix};
use crate::system::StochasticSystem;
use crate::Error;

/// Which linear functional of `P` is minimized.
#[derive(Clone, Debug, PartialEq)]
pub enum LmiObjective {
    TraceP,
    /// `tr(PQ)` for the given observability Gramian.
    TracePQ(SymMatrix),
}

/// Barrier-method controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IpParams {
    /// Initial barrier weight `t`.
    pub t0: f64,
    /// Factor applied to `t` after each centering stage.
    pub mu: f64,
    /// Stop when `(size of G + n) / t` falls below this.
    pub ip_tol: f64,
    pub max_newton: usize,
    pub max_stages: usize,
}

impl Default for IpParams {
    fn default() -> Self {
        Self {
            t0: 1.0,
            mu: 10.0,
            ip_tol: 1e-7,
            max_newton: 50,
            max_stages: 60,
        }
    }
}

/// Result of [`LmiProblem::solve`].
#[derive(Clone, Debug)]
pub struct LmiSolution {
    pub p: SymMatrix,
    pub objective: f64,
    /// Objective value at the end of every centering stage.
    pub history: Vec<f64>,
    /// `(m + √(m·λ²))/t` with `λ²` the last Newton decrement: the
    /// duality-gap bound at an approximately centered point.
    pub kkt_residual: f64,
    pub stages: usize,
    pub newton_steps: usize,
    pub t_final: f64,
}

struct Term {
    u_block: usize,
    u_mat: Matrix,
    v_block: usize,
}

/// The LMI `G(P) ⪯ 0` of a system.
pub struct LmiProblem {
    n: usize,
    k: usize,
    bbt: Matrix,
    terms: Vec<Term>,
    a: Matrix,
    n_list: Vec<Matrix>,
}

const ARMIJO_C: f64 = 0.01;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-14;
/// Centering stops once half the squared Newton decrement falls below this.
const CENTERING_TOL: f64 = 1e-10;
/// Looser level accepted once rounding stalls the full Newton step.
const NOISE_CENTERING_TOL: f64 = 1e-5;

impl LmiProblem {
    pub fn new(sys: &StochasticSystem) -> Self {
        let n = sys.order();
        let k = sys.n_list.len();
        let mut terms = vec![Term {
            u_block: 0,
            u_mat: sys.a.clone(),
            v_block: 0,
        }];
        for (j, nj) in sys.n_list.iter().enumerate() {
            terms.push(Term {
                u_block: j + 1,
                u_mat: nj.clone(),
                v_block: 0,
            });
            terms.push(Term {
                u_block: j + 1,
                u_mat: Matrix::identity(n).scale(-0.5),
                v_block: j + 1,
            });
        }
        Self {
            n,
            k,
            bbt: sys.b.matmul_tr(&sys.b),
            terms,
            a: sys.a.clone(),
            n_list: sys.n_list.clone(),
        }
    }

    /// Side length `(k+1)·n` of `G`.
    pub fn block_size(&self) -> usize {
        (self.k + 1) * self.n
    }

    /// Barrier complexity `(k+1)·n + n`.
    pub fn barrier_degree(&self) -> usize {
        self.block_size() + self.n
    }

    /// Evaluates `G(P)` directly from its block definition.
    pub fn g(&self, p: &SymMatrix) -> SymMatrix {
        let n = self.n;
        let pd = p.to_dense();
        let mut g = Matrix::zeros(self.block_size(), self.block_size());
        let ap = self.a.matmul(&pd);
        let top = &(&ap + &ap.transpose()) + &self.bbt;
        g.set_block(0, 0, &top);
        for (j, nj) in self.n_list.iter().enumerate() {
            let np = nj.matmul(&pd);
            g.set_block((j + 1) * n, 0, &np);
            g.set_block(0, (j + 1) * n, &np.transpose());
            g.set_block((j + 1) * n, (j + 1) * n, &pd.scale(-1.0));
        }
        SymMatrix::from_dense(&g)
    }

    /// `𝒜*(W) = Σₛ (UₛᵀWVₛ + VₛᵀWUₛ)` for symmetric `W` of block size.
    fn adjoint_map(&self, w: &Matrix) -> Matrix {
        let n = self.n;
        let blk = |i: usize, j: usize| w.submatrix(i * n, j * n, n, n);
        let mut out = Matrix::zeros(n, n);
        for t in &self.terms {
            let m = t.u_mat.tr_matmul(&blk(t.u_block, t.v_block));
            out.axpy(1.0, &m);
            out.axpy(1.0, &m.transpose());
        }
        out
    }

    /// Cholesky factors of `−G(P)` and `P`, or `None` outside the strict interior.
    fn interior(&self, p: &SymMatrix) -> Option<(Cholesky, Cholesky)> {
        if !p.is_finite() {
            return None;
        }
        let f = Cholesky::new(&self.g(p).to_dense().scale(-1.0), 0.0).ok()?;
        let pc = Cholesky::new(&p.to_dense(), 0.0).ok()?;
        Some((f, pc))
    }

    /// Whether `P ≻ 0` and `G(P) ≺ 0`.
    pub fn is_strictly_feasible(&self, p: &SymMatrix) -> bool {
        self.interior(p).is_some()
    }

    /// Dense svec Hessian of `−log det(−G(P)) − log det P`.
    fn barrier_hessian(&self, w: &Matrix, p_inv: &Matrix) -> Matrix {
        let n = self.n;
        let blk = |i: usize, j: usize| w.submatrix(i * n, j * n, n, n);
        let mut pairs: Vec<(Matrix, Matrix)> = Vec::new();
        for s in &self.terms {
            for t in &self.terms {
                let w_uu = blk(s.u_block, t.u_block);
                let w_uv = blk(s.u_block, t.v_block);
                let w_vu = blk(s.v_block, t.u_block);
                let w_vv = blk(s.v_block, t.v_block);
                // UₛᵀWUₜ, UₛᵀWVₜ, VₛᵀWUₜ, VₛᵀWVₜ and their (t, s) counterparts.
                let us_w_ut = s.u_mat.tr_matmul(&w_uu).matmul(&t.u_mat);
                let us_w_vt = s.u_mat.tr_matmul(&w_uv);
                let vs_w_ut = w_vu.matmul(&t.u_mat);
                let vs_w_vt = w_vv;
                let vt_w_vs = blk(t.v_block, s.v_block);
                let ut_w_vs = t.u_mat.tr_matmul(&blk(t.u_block, s.v_block));
                let vt_w_us = blk(t.v_block, s.u_block).matmul(&s.u_mat);
                let ut_w_us = t
                    .u_mat
                    .tr_matmul(&blk(t.u_block, s.u_block))
                    .matmul(&s.u_mat);
                pairs.push((us_w_ut, vt_w_vs));
                pairs.push((us_w_vt, ut_w_vs));
                pairs.push((vs_w_ut, vt_w_us));
                pairs.push((vs_w_vt, ut_w_us));
            }
        }
        pairs.push((p_inv.clone(), p_inv.clone()));
        let pairs: Vec<(Matrix, Matrix)> =
            pairs.into_iter().map(|(l, r)| (l, r.transpose())).collect();

        let d = svec_len(n);
        let weight = |a: usize, b: usize| {
            if a == b {
                0.5
            } else {
                std::f64::consts::FRAC_1_SQRT_2
            }
        };
        let mut h = Matrix::zeros(d, d);
        h.as_mut_slice()
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(row, out)| {
                let (c, dd) = svec_position(row);
                let wr = weight(c, dd);
                for (l, rt) in &pairs {
                    let lc = l.row(c);
                    let ld = l.row(dd);
                    let rc = rt.row(c);
                    let rd = rt.row(dd);
                    for (col, o) in out.iter_mut().enumerate() {
                        let (a, b) = svec_position(col);
                        let v = lc[a] * rd[b] + lc[b] * rd[a] + ld[a] * rc[b] + ld[b] * rc[a];
                        *o += wr * weight(a, b) * v;
                    }
                }
            });
        h.symmetrized()
    }

    /// Barrier path following from a strictly feasible `start`.
    pub fn solve(
        &self,
        objective: &LmiObjective,
        start: &SymMatrix,
        params: &IpParams,
    ) -> Result<LmiSolution, Error> {
        let n = self.n;
        if start.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "start point is {}x{}, system order {n}",
                start.dim(),
                start.dim()
            )));
        }
        if !(params.t0 > 0.0 && params.mu > 1.0 && params.ip_tol > 0.0) {
            return Err(Error::Domain(
                "barrier parameters need t0 > 0, mu > 1, ip_tol > 0".into(),
            ));
        }
        let c: Vec<f64> = match objective {
            LmiObjective::TraceP => SymMatrix::identity(n).into_svec(),
            LmiObjective::TracePQ(q) => {
                if q.dim() != n {
                    return Err(Error::DimensionMismatch(
                        "Q does not match the system order".into(),
                    ));
                }
                q.svec().to_vec()
            }
        };
        let obj = |p: &SymMatrix| crate::linalg::dot(p.svec(), &c);

        let Some(mut factors) = self.interior(start) else {
            return Err(Error::InfeasibleStart);
        };
        let mut p = start.clone();
        let m = self.barrier_degree() as f64;
        let mut t = params.t0;
        let mut history = Vec::new();
        let mut newton_steps = 0;
        let mut last_decrement;

        for stage in 1..=params.max_stages {
            let mut centered = false;
            last_decrement = f64::INFINITY;
            for _ in 0..params.max_newton {
                let (f_ch, p_ch) = &factors;
                let w = f_ch.inverse();
                let p_inv = p_ch.inverse();
                let mut grad = SymMatrix::from_dense(&self.adjoint_map(&w))
                    .sub(&SymMatrix::from_dense(&p_inv))
                    .into_svec();
                for (g, ci) in grad.iter_mut().zip(&c) {
                    *g += t * ci;
                }

                let h = self.barrier_hessian(&w, &p_inv);
                let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
                let step = match Cholesky::new(&h, 0.0) {
                    Ok(hc) => hc.solve_vec(&neg_grad),
                    Err(_) => Lu::new(h, 1e-15)
                        .map_err(|_| {
                            Error::Linalg(LinalgError::NonConvergence("barrier Newton system"))
                        })?
                        .solve(&neg_grad),
                };
                let slope: f64 = crate::linalg::dot(&grad, &step);
                let decrement = -slope;
                last_decrement = decrement;
                if decrement / 2.0 <= CENTERING_TOL {
                    centered = true;
                    break;
                }
                newton_steps += 1;

                let logdet_f = factors.0.log_det();
                let logdet_p = factors.1.log_det();
                let lin_step = t * crate::linalg::dot(&c, &step);
                let full_step_ok = decrement.sqrt() < 0.25;
                let mut s = 1.0;
                loop {
                    if s < MIN_STEP {
                        return Err(Error::LineSearchStall { t });
                    }
                    let trial: Vec<f64> = p
                        .svec()
                        .iter()
                        .zip(&step)
                        .map(|(x, dx)| x + s * dx)
                        .collect();
                    let trial = SymMatrix::from_svec(trial)?;
                    if let Some(new_factors) = self.interior(&trial) {
                        // φ(new) − φ(old), computed as differences to avoid cancellation in t·obj.
                        let change = s * lin_step
                            - (new_factors.0.log_det() - logdet_f)
                            - (new_factors.1.log_det() - logdet_p);
                        // Near the center a full step that misses most of its
                        // predicted decrease means rounding dominates the model.
                        if s == 1.0
                            && decrement / 2.0 <= NOISE_CENTERING_TOL
                            && change > 0.25 * slope
                        {
                            centered = true;
                            break;
                        }
                        if full_step_ok || change <= ARMIJO_C * s * slope {
                            p = trial;
                            factors = new_factors;
                            break;
                        }
                    }
                    s *= BACKTRACK;
                }
                if centered {
                    break;
                }
            }
            if !centered {
                return Err(Error::MaxIterations("barrier centering"));
            }
            history.push(obj(&p));
            if m / t <= params.ip_tol {
                return Ok(LmiSolution {
                    objective: obj(&p),
                    p,
                    history,
                    kkt_residual: (m + (m * last_decrement.max(0.0)).sqrt()) / t,
                    stages: stage,
                    newton_steps,
                    t_final: t,
                });
            }
            t *= params.mu;
        }
        Err(Error::MaxIterations("barrier stages"))
    }
}
