//! Stochastic H∞ norm by bisection over `γ`, with a Newton–Kleinman
//! feasibility oracle for the bounded-real Riccati equation
//! `AᵀX + XA + ΣNⱼᵀXNⱼ + CᵀC + γ⁻²XBBᵀX = 0`.

use crate::balancing::ReductionResult;
use crate::linalg::{sym_eig, Matrix, SymMatrix};
use crate::lyapunov::{is_ms_stable, Direction, GenLyapOperator};
use crate::system::StochasticSystem;
use crate::Error;

/// Smallest `γ` the bisection will try to certify.
pub const GAMMA_FLOOR: f64 = 1e-7;
pub const MAX_NEWTON: usize = 100;
const DIVERGENCE: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InfeasibleReason {
    /// `A + γ⁻²BBᵀX_k` is no longer mean-square stable.
    ClosedLoopUnstable,
    Divergence,
    MaxIterations,
    /// A Lyapunov solve along the way failed its residual check.
    Numerical,
}

#[derive(Clone, Debug)]
pub enum Feasibility {
    Feasible { x: SymMatrix, iterations: usize },
    Infeasible(InfeasibleReason),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

/// `AᵀX + XA + ΣNⱼᵀXNⱼ + CᵀC + γ⁻²XBBᵀX`.
pub fn riccati_residual(sys: &StochasticSystem, gamma: f64, x: &SymMatrix) -> SymMatrix {
    residual_with_scale(sys, gamma, x).0
}

/// Residual and the summed Frobenius norms of its terms.
fn residual_with_scale(sys: &StochasticSystem, gamma: f64, x: &SymMatrix) -> (SymMatrix, f64) {
    let xd = x.to_dense();
    let t = sys.a.tr_matmul(&xd);
    let mut scale = 2.0 * t.frobenius_norm();
    let mut r = &t + &t.transpose();
    for nj in &sys.n_list {
        let term = nj.tr_matmul(&xd.matmul(nj));
        scale += term.frobenius_norm();
        r.axpy(1.0, &term);
    }
    let ctc = sys.c.tr_matmul(&sys.c);
    scale += ctc.frobenius_norm();
    r.axpy(1.0, &ctc);
    let xb = xd.matmul(&sys.b);
    let g2 = gamma.powi(-2);
    let quad = xb.matmul_tr(&xb);
    scale += g2
        * (quad.frobenius_norm()
            + 2.0 * xb.frobenius_norm() * xd.frobenius_norm() * sys.b.frobenius_norm());
    r.axpy(g2, &quad);
    (SymMatrix::from_dense(&r), scale)
}

fn newton_kleinman(
    sys: &StochasticSystem,
    gamma: f64,
    max_iter: usize,
    mut visit: impl FnMut(&SymMatrix),
) -> Result<Feasibility, Error> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let n = sys.order();
    let g2 = gamma.powi(-2);
    let bbt = sys.b.matmul_tr(&sys.b);
    let ctc = sys.c.tr_matmul(&sys.c);
    let ctc_norm = ctc.frobenius_norm();
    let mut x = SymMatrix::zeros(n);

    for it in 1..=max_iter {
        let xd = x.to_dense();
        let mut a_k = sys.a.clone();
        a_k.axpy(g2, &bbt.matmul(&xd));
        let fact = match GenLyapOperator::new(&a_k, &sys.n_list, Direction::Primal)?.factorize() {
            Ok(f) => f,
            Err(Error::SingularOperator { .. }) => {
                return Ok(Feasibility::Infeasible(
                    InfeasibleReason::ClosedLoopUnstable,
                ))
            }
            Err(e) => return Err(e),
        };
        if fact.stability_certificate().is_none() {
            return Ok(Feasibility::Infeasible(
                InfeasibleReason::ClosedLoopUnstable,
            ));
        }
        let xb = xd.matmul(&sys.b);
        let mut rhs = xb.matmul_tr(&xb).scale(g2);
        rhs.axpy(-1.0, &ctc);
        let next = match fact.solve(Direction::Primal, &SymMatrix::from_dense(&rhs)) {
            Ok(v) => v,
            Err(Error::LyapunovResidual { .. }) => {
                return Ok(Feasibility::Infeasible(InfeasibleReason::Numerical))
            }
            Err(e) => return Err(e),
        };
        let x_norm = next.frobenius_norm();
        if x_norm > DIVERGENCE * ctc_norm || !x_norm.is_finite() {
            return Ok(Feasibility::Infeasible(InfeasibleReason::Divergence));
        }
        x = next;
        visit(&x);

        let (res, scale) = residual_with_scale(sys, gamma, &x);
        let res = res.frobenius_norm();
        let floor = 64.0 * f64::EPSILON * n as f64 * scale;
        if res <= (1e-9 * (1.0 + ctc_norm)).max(floor) {
            let min_eig = sym_eig(&x)?.min();
            if min_eig >= -1e-9 * x_norm.max(1.0) {
                return Ok(Feasibility::Feasible { x, iterations: it });
            }
        }
    }
    Ok(Feasibility::Infeasible(InfeasibleReason::MaxIterations))
}

/// Decides whether the Riccati equation at level `γ` has a stabilizing
/// solution `X ⪰ 0`, which certifies `‖L‖ ≤ γ`.
pub fn riccati_feasible(sys: &StochasticSystem, gamma: f64) -> Result<Feasibility, Error> {
    if !is_ms_stable(&sys.a, &sys.n_list)?.stable {
        return Err(Error::NotStable);
    }
    newton_kleinman(sys, gamma, MAX_NEWTON, |_| {})
}

/// All Newton iterates at level `γ`, for inspection.
pub fn riccati_iterates(
    sys: &StochasticSystem,
    gamma: f64,
    max_iter: usize,
) -> Result<(Feasibility, Vec<SymMatrix>), Error> {
    let mut iterates = Vec::new();
    let verdict = newton_kleinman(sys, gamma, max_iter, |x| iterates.push(x.clone()))?;
    Ok((verdict, iterates))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HinfStatus {
    Converged,
    /// Feasible below [`GAMMA_FLOOR`]; the norm is only known to be `≤ gamma_hi`.
    FloorReached,
    /// `C` annihilates every reachable direction and the floor level is
    /// feasible; the norm is zero to working precision.
    ZeroOutput,
}

/// A certified bracket `‖L‖ ∈ [gamma_lo, gamma_hi]`.
#[derive(Clone, Debug)]
pub struct HinfResult {
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    /// Riccati solution at `gamma_hi`.
    pub x_cert: SymMatrix,
    /// Number of feasibility probes.
    pub iterations: usize,
    pub status: HinfStatus,
}

impl HinfResult {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.gamma_lo + self.gamma_hi)
    }
}

/// Stochastic H∞ norm to relative bracket width `tol_rel`.
pub fn hinf_norm(sys: &StochasticSystem, tol_rel: f64) -> Result<HinfResult, Error> {
    if !(tol_rel > 0.0 && tol_rel < 1.0) {
        return Err(Error::Domain(format!(
            "tol_rel must lie in (0, 1), got {tol_rel}"
        )));
    }
    let verdict = is_ms_stable(&sys.a, &sys.n_list)?;
    let Some(cert) = verdict.certificate else {
        return Err(Error::NotStable);
    };

    let c_norm = sys.c.frobenius_norm();
    let mut probes = 0;
    let mut probe = |g: f64| -> Result<Feasibility, Error> {
        probes += 1;
        newton_kleinman(sys, g, MAX_NEWTON, |_| {})
    };

    // Zero output on the reachable subspace: C P Cᵀ vanishes to working
    // precision for the reachability Gramian, and the floor level is feasible.
    let p = GenLyapOperator::new(&sys.a, &sys.n_list, Direction::Adjoint)?
        .solve(&SymMatrix::from_dense(&sys.b.matmul_tr(&sys.b).scale(-1.0)))?;
    let cpc = sys.c.matmul(&p.to_dense()).matmul_tr(&sys.c);
    let exact = f64::EPSILON * f64::EPSILON;
    if cpc.frobenius_norm() <= exact * c_norm * c_norm * p.frobenius_norm() {
        if let Feasibility::Feasible { x, .. } = probe(GAMMA_FLOOR)? {
            return Ok(HinfResult {
                gamma_lo: 0.0,
                gamma_hi: 0.0,
                x_cert: x,
                iterations: probes,
                status: HinfStatus::ZeroOutput,
            });
        }
    }

    // Decay-rate proxy from the certificate `op(Y) = −I`: |α| ≈ 1/(2λmax(Y)).
    let decay = 1.0 / (2.0 * sym_eig(&cert)?.max());

    let guess = (c_norm * sys.b.frobenius_norm() / decay).max(GAMMA_FLOOR);
    let (mut lo, mut hi, mut x_hi);
    match probe(guess)? {
        Feasibility::Feasible { x, .. } => {
            hi = guess;
            x_hi = x;
            loop {
                let g = 0.5 * hi;
                if g < GAMMA_FLOOR {
                    return Ok(HinfResult {
                        gamma_lo: 0.0,
                        gamma_hi: hi,
                        x_cert: x_hi,
                        iterations: probes,
                        status: HinfStatus::FloorReached,
                    });
                }
                match probe(g)? {
                    Feasibility::Feasible { x, .. } => {
                        hi = g;
                        x_hi = x;
                    }
                    Feasibility::Infeasible(_) => {
                        lo = g;
                        break;
                    }
                }
            }
        }
        Feasibility::Infeasible(_) => {
            lo = guess;
            let mut g = 2.0 * guess;
            loop {
                if g > 1e300 {
                    return Err(Error::BracketFailure("H-infinity norm (no feasible level)"));
                }
                match probe(g)? {
                    Feasibility::Feasible { x, .. } => {
                        hi = g;
                        x_hi = x;
                        break;
                    }
                    Feasibility::Infeasible(_) => {
                        lo = g;
                        g *= 2.0;
                    }
                }
            }
        }
    }

    while hi - lo > tol_rel * hi {
        let mid = 0.5 * (lo + hi);
        match probe(mid)? {
            Feasibility::Feasible { x, .. } => {
                hi = mid;
                x_hi = x;
            }
            Feasibility::Infeasible(_) => lo = mid,
        }
    }
    Ok(HinfResult {
        gamma_lo: lo,
        gamma_hi: hi,
        x_cert: x_hi,
        iterations: probes,
        status: HinfStatus::Converged,
    })
}

/// Full and reduced system run in parallel, with output `y − y_r`.
#[derive(Clone, Debug)]
pub struct ErrorSystem {
    pub system: StochasticSystem,
    pub full_order: usize,
}

/// `A_e = diag(A, A_r)`, `N_e = diag(N, N_r)`, `B_e = [B; B_r]`, `C_e = [C, −C_r]`.
pub fn build_error_system(
    full: &StochasticSystem,
    reduced: &StochasticSystem,
) -> Result<ErrorSystem, Error> {
    let (df, dr) = (full.dims(), reduced.dims());
    if (df.k, df.m, df.p) != (dr.k, dr.m, dr.p) {
        return Err(Error::DimensionMismatch(format!(
            "full system has (k, m, p) = ({}, {}, {}), reduced has ({}, {}, {})",
            df.k, df.m, df.p, dr.k, dr.m, dr.p
        )));
    }
    let system = StochasticSystem::new(
        Matrix::block_diag(&[&full.a, &reduced.a]),
        full.n_list
            .iter()
            .zip(&reduced.n_list)
            .map(|(nf, nr)| Matrix::block_diag(&[nf, nr]))
            .collect(),
        Matrix::vstack(&[&full.b, &reduced.b]),
        Matrix::hstack(&[&full.c, &reduced.c.scale(-1.0)]),
    )?;
    Ok(ErrorSystem {
        system,
        full_order: df.n,
    })
}

/// Norm of the truncation error together with the a-priori bound, if any.
#[derive(Clone, Debug)]
pub struct TruncationError {
    pub norm: HinfResult,
    pub bound: Option<f64>,
    /// `gamma_lo ≤ bound + 1e-6`, for type II reductions.
    pub bound_holds: Option<bool>,
}

/// The error system of a Petrov–Galerkin reduction in the coordinates
/// `(x − S₁x_r, x_r)`, which is similar to [`build_error_system`] but keeps the
/// output free of cancellation: `C_e = [C, 0]` because `C_r = CS₁`.
pub fn difference_error_system(
    full: &StochasticSystem,
    reduction: &ReductionResult,
) -> Result<ErrorSystem, Error> {
    let red = &reduction.reduced;
    let s1 = &reduction.s1;
    let n = full.order();
    if s1.rows() != n || s1.cols() != red.order() || full.n_list.len() != red.n_list.len() {
        return Err(Error::DimensionMismatch(
            "reduction does not belong to this system".into(),
        ));
    }
    let couple = |m: &Matrix, mr: &Matrix| -> Matrix {
        let mut top_right = m.matmul(s1);
        top_right.axpy(-1.0, &s1.matmul(mr));
        let mut out = Matrix::zeros(n + mr.rows(), n + mr.rows());
        out.set_block(0, 0, m);
        out.set_block(0, n, &top_right);
        out.set_block(n, n, mr);
        out
    };
    let mut b_top = full.b.clone();
    b_top.axpy(-1.0, &s1.matmul(&red.b));
    let system = StochasticSystem::new(
        couple(&full.a, &red.a),
        full.n_list
            .iter()
            .zip(&red.n_list)
            .map(|(m, mr)| couple(m, mr))
            .collect(),
        Matrix::vstack(&[&b_top, &red.b]),
        Matrix::hstack(&[&full.c, &Matrix::zeros(full.c.rows(), red.order())]),
    )?;
    Ok(ErrorSystem {
        system,
        full_order: n,
    })
}

/// `‖L − L_r‖` for a truncation, evaluated on [`difference_error_system`].
pub fn truncation_error_norm(
    full: &StochasticSystem,
    reduction: &ReductionResult,
    tol_rel: f64,
) -> Result<TruncationError, Error> {
    let err = difference_error_system(full, reduction)?;
    let norm = hinf_norm(&err.system, tol_rel)?;
    let bound_holds = reduction.bound.map(|b| norm.gamma_lo <= b + 1e-6);
    Ok(TruncationError {
        norm,
        bound: reduction.bound,
        bound_holds,
    })
}

/// Error system of a balanced realization in the coordinates
/// `(x₁ − x_r, x₂, x₁ + x_r)`, where `x₁` holds the first `r_state` states.
///
/// In these coordinates `B̃ = [0; B₂; 2B₁]` and `C̃ = [C₁, C₂, 0]`.
pub fn split_error_system(
    balanced: &StochasticSystem,
    r_state: usize,
) -> Result<StochasticSystem, Error> {
    let n = balanced.order();
    if r_state == 0 || r_state >= n {
        return Err(Error::Domain(format!(
            "r_state must satisfy 1 <= r < {n}, got {r_state}"
        )));
    }
    let q = n - r_state;
    let lift = |m: &Matrix| -> Matrix {
        let m11 = m.submatrix(0, 0, r_state, r_state);
        let m12 = m.submatrix(0, r_state, r_state, q);
        let m21h = m.submatrix(r_state, 0, q, r_state).scale(0.5);
        let m22 = m.submatrix(r_state, r_state, q, q);
        let mut out = Matrix::zeros(n + r_state, n + r_state);
        out.set_block(0, 0, &m11);
        out.set_block(0, r_state, &m12);
        out.set_block(r_state, 0, &m21h);
        out.set_block(r_state, r_state, &m22);
        out.set_block(r_state, n, &m21h);
        out.set_block(n, r_state, &m12);
        out.set_block(n, n, &m11);
        out
    };
    let m_in = balanced.b.cols();
    let b1 = balanced.b.submatrix(0, 0, r_state, m_in);
    let b2 = balanced.b.submatrix(r_state, 0, q, m_in);
    let b = Matrix::vstack(&[&Matrix::zeros(r_state, m_in), &b2, &b1.scale(2.0)]);
    let p_out = balanced.c.rows();
    let c = Matrix::hstack(&[&balanced.c, &Matrix::zeros(p_out, r_state)]);
    StochasticSystem::new(
        lift(&balanced.a),
        balanced.n_list.iter().map(lift).collect(),
        b,
        c,
    )
}

/// `X = diag(Σ₁, 2σI, σ²Σ₁⁻¹)` and `γ = 2σ` for a truncation whose
/// discarded singular values all equal `σ = sigma[r_state]`.
pub fn split_certificate(sigma: &[f64], r_state: usize) -> (SymMatrix, f64) {
    let s = sigma[r_state];
    let mut diag: Vec<f64> = sigma[..r_state].to_vec();
    diag.extend(std::iter::repeat_n(2.0 * s, sigma.len() - r_state));
    diag.extend(sigma[..r_state].iter().map(|v| s * s / v));
    (SymMatrix::from_diag(&diag), 2.0 * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{example_noerrbound, example_two_state};

    fn scalar(a: f64, n: f64, b: f64, c: f64) -> StochasticSystem {
        StochasticSystem::new(
            Matrix::from_rows(&[[a]]),
            vec![Matrix::from_rows(&[[n]])],
            Matrix::from_rows(&[[b]]),
            Matrix::from_rows(&[[c]]),
        )
        .unwrap()
    }

    #[test]
    fn example1_feasibility() {
        let sys = example_noerrbound(2.0).unwrap();
        assert!(riccati_feasible(&sys, 0.5).unwrap().is_feasible());
        assert!(!riccati_feasible(&sys, 0.3).unwrap().is_feasible());
    }

    #[test]
    fn zero_output_feasible_everywhere() {
        let mut sys = example_two_state();
        sys.c = Matrix::zeros(1, 2);
        for g in [1e-3, 1.0, 10.0] {
            match riccati_feasible(&sys, g).unwrap() {
                Feasibility::Feasible { x, .. } => assert_eq!(x.max_abs(), 0.0),
                other => panic!("{other:?}"),
            }
        }
        let res = hinf_norm(&sys, 1e-6).unwrap();
        assert_eq!(res.status, HinfStatus::ZeroOutput);
    }

    #[test]
    fn example1_norm() {
        for a in [2.0, 5.0] {
            let sys = example_noerrbound(a).unwrap();
            let res = hinf_norm(&sys, 1e-7).unwrap();
            let exact = 1.0 / (2f64.sqrt() * a);
            assert_eq!(res.status, HinfStatus::Converged);
            assert!(
                res.gamma_lo <= exact + 1e-7 && exact <= res.gamma_hi + 1e-7,
                "{res:?}"
            );
            assert!((res.midpoint() - exact).abs() < 1e-5 * exact);
        }
    }

    #[test]
    fn deterministic_first_order_lag() {
        let sys = scalar(-1.0, 0.0, 1.0, 1.0);
        let res = hinf_norm(&sys, 1e-6).unwrap();
        assert!((res.midpoint() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn scaling_law() {
        let sys = example_two_state();
        let base = hinf_norm(&sys, 1e-7).unwrap().midpoint();
        let scaled = hinf_norm(&sys.with_scaled_output(-3.0), 1e-7)
            .unwrap()
            .midpoint();
        assert!((scaled - 3.0 * base).abs() < 1e-6 * scaled);
    }

    #[test]
    fn newton_iterates_increase() {
        let sys = example_noerrbound(2.0).unwrap();
        let (verdict, iterates) = riccati_iterates(&sys, 0.5, MAX_NEWTON).unwrap();
        assert!(verdict.is_feasible());
        for w in iterates.windows(2) {
            let diff = w[1].sub(&w[0]);
            assert!(sym_eig(&diff).unwrap().min() >= -1e-12);
        }
    }

    #[test]
    fn unstable_rejected() {
        let sys = scalar(1.0, 0.0, 1.0, 1.0);
        assert!(matches!(hinf_norm(&sys, 1e-6), Err(Error::NotStable)));
        assert!(matches!(riccati_feasible(&sys, 1.0), Err(Error::NotStable)));
    }

    #[test]
    fn identical_systems_have_zero_error() {
        let sys = example_two_state();
        let err = build_error_system(&sys, &sys).unwrap();
        let res = hinf_norm(&err.system, 1e-6).unwrap();
        assert!(res.gamma_hi <= 1e-8, "{res:?}");
    }

    #[test]
    fn error_system_layout() {
        let sys = example_two_state();
        let red = scalar(-2.0, 0.5, 1.0, 4.0);
        let err = build_error_system(&sys, &red).unwrap().system;
        assert_eq!(err.order(), 3);
        assert_eq!(err.a[(2, 2)], -2.0);
        assert_eq!(err.a[(0, 1)], 1.0);
        assert_eq!(err.n_list[0][(2, 2)], 0.5);
        assert_eq!(err.c.as_slice(), &[3.0, 0.0, -4.0]);
        assert_eq!(err.b.as_slice(), &[0.0, 3.0, 1.0]);
        let mut two_noise = red.clone();
        two_noise.n_list.push(Matrix::zeros(1, 1));
        assert!(build_error_system(&sys, &two_noise).is_err());
    }

    #[test]
    fn split_system_output_matches_difference() {
        let sys = example_two_state();
        let split = split_error_system(&sys, 1).unwrap();
        assert_eq!(split.order(), 3);
        assert_eq!(split.c.as_slice(), &[3.0, 0.0, 0.0]);
        assert_eq!(split.b.as_slice(), &[0.0, 3.0, 0.0]);
        let (x, gamma) = split_certificate(&[4.0, 1.0], 1);
        assert_eq!(gamma, 2.0);
        assert_eq!(x.get(2, 2), 0.25);
        assert_eq!(x.get(1, 1), 2.0);
    }
}
