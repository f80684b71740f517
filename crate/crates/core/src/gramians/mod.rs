//! Type I and type II Gramian pairs.
//!
//! Type I: `AᵀQ + QA + ΣNⱼᵀQNⱼ = −CᵀC` and `AP + PAᵀ + ΣNⱼPNⱼᵀ = −BBᵀ`.
//! Type II keeps the same `Q` but asks `P⁻¹` to satisfy the primal
//! inequality `AᵀP⁻¹ + P⁻¹A + ΣNⱼᵀP⁻¹Nⱼ ⪯ −P⁻¹BBᵀP⁻¹`, handled in its
//! inversion-free LMI form (see [`lmi`]).

pub mod lmi;

pub use lmi::{IpParams, LmiObjective, LmiProblem, LmiSolution};

use crate::linalg::{cholesky, classify_with_band, sym_eig, Classification, Matrix, SymMatrix};
use crate::lyapunov::{Direction, GenLyapOperator, LyapFactorization};
use crate::system::StochasticSystem;
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GramianKind {
    TypeI,
    TypeII,
}

impl std::fmt::Display for GramianKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GramianKind::TypeI => "I",
            GramianKind::TypeII => "II",
        })
    }
}

/// A reachability/observability pair with its inequality slacks.
#[derive(Clone, Debug)]
pub struct GramianPair {
    pub p: SymMatrix,
    pub q: SymMatrix,
    pub kind: GramianKind,
    /// `−CᵀC − (AᵀQ + QA + ΣNⱼᵀQNⱼ)`
    pub slack_q: SymMatrix,
    /// Type I: `−BBᵀ − (AP + PAᵀ + ΣNⱼPNⱼᵀ)`; type II: `−G(P)`.
    pub slack_p: SymMatrix,
}

impl GramianPair {
    /// Builds the pair and evaluates both slacks.
    pub fn new(
        sys: &StochasticSystem,
        p: SymMatrix,
        q: SymMatrix,
        kind: GramianKind,
    ) -> Result<Self, Error> {
        let n = sys.order();
        if p.dim() != n || q.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "Gramians of order {}/{} for a system of order {n}",
                p.dim(),
                q.dim()
            )));
        }
        let slack_q = observability_slack(sys, &q)?;
        let slack_p = match kind {
            GramianKind::TypeI => {
                let op = GenLyapOperator::new(&sys.a, &sys.n_list, Direction::Adjoint)?;
                bbt(sys).scale(-1.0).sub(&op.apply(&p)?)
            }
            GramianKind::TypeII => LmiProblem::new(sys).g(&p).scale(-1.0),
        };
        Ok(Self {
            p,
            q,
            kind,
            slack_q,
            slack_p,
        })
    }
}

fn ctc(sys: &StochasticSystem) -> SymMatrix {
    SymMatrix::from_dense(&sys.c.tr_matmul(&sys.c))
}

fn bbt(sys: &StochasticSystem) -> SymMatrix {
    SymMatrix::from_dense(&sys.b.matmul_tr(&sys.b))
}

fn observability_slack(sys: &StochasticSystem, q: &SymMatrix) -> Result<SymMatrix, Error> {
    let op = GenLyapOperator::new(&sys.a, &sys.n_list, Direction::Primal)?;
    Ok(ctc(sys).scale(-1.0).sub(&op.apply(q)?))
}

/// Factors the primal operator of `sys` and checks mean-square stability.
fn stable_factorization(sys: &StochasticSystem) -> Result<LyapFactorization, Error> {
    let op = GenLyapOperator::new(&sys.a, &sys.n_list, Direction::Primal)?;
    let f = match op.factorize() {
        Ok(f) => f,
        Err(Error::SingularOperator { .. }) => return Err(Error::NotStable),
        Err(e) => return Err(e),
    };
    if f.stability_certificate().is_none() {
        return Err(Error::NotStable);
    }
    Ok(f)
}

fn require_pd(x: &SymMatrix, which: &'static str) -> Result<(), Error> {
    if cholesky(x).is_err() {
        let min_eig = sym_eig(x)?.min();
        return Err(Error::SingularGramian { which, min_eig });
    }
    Ok(())
}

/// Type I pair from the two Lyapunov equations, required positive definite.
pub fn type1_gramians(sys: &StochasticSystem) -> Result<GramianPair, Error> {
    let pair = type1_gramians_semidefinite(sys)?;
    require_pd(&pair.p, "reachability")?;
    require_pd(&pair.q, "observability")?;
    Ok(pair)
}

/// Type I pair without the definiteness requirement; for systems that are
/// only numerically reachable/observable (e.g. fine discretizations).
pub fn type1_gramians_semidefinite(sys: &StochasticSystem) -> Result<GramianPair, Error> {
    let f = stable_factorization(sys)?;
    let q = f.solve(Direction::Primal, &ctc(sys).scale(-1.0))?;
    let p = f.solve(Direction::Adjoint, &bbt(sys).scale(-1.0))?;
    GramianPair::new(sys, p, q, GramianKind::TypeI)
}

/// Observability Gramian shared by both types.
pub fn type2_q(sys: &StochasticSystem) -> Result<SymMatrix, Error> {
    stable_factorization(sys)?.solve(Direction::Primal, &ctc(sys).scale(-1.0))
}

/// Feasible type II reachability Gramian by the ε-scaling construction:
/// `Z` solves `AᵀZ + ZA + ΣNⱼᵀZNⱼ = −I`, and `P = ε⁻¹Z⁻¹` with the largest
/// `ε ∈ {1, s, s², …}` such that `ε·λ_max(ZBBᵀZ) < 1`.
pub fn type2_p_baseline(sys: &StochasticSystem, eps_shrink: f64) -> Result<SymMatrix, Error> {
    if !(eps_shrink > 0.0 && eps_shrink < 1.0) {
        return Err(Error::Domain(format!(
            "eps_shrink must lie in (0, 1), got {eps_shrink}"
        )));
    }
    let f = stable_factorization(sys)?;
    let z = f.stability_certificate().ok_or(Error::NotStable)?;
    let zb = z.to_dense().matmul(&sys.b);
    let lam = sym_eig(&SymMatrix::from_dense(&zb.matmul_tr(&zb)))?.max();
    let mut eps = 1.0;
    while eps * lam >= 1.0 {
        eps *= eps_shrink;
        if eps < 1e-300 {
            return Err(Error::InfeasibleStart);
        }
    }
    let z_inv = crate::linalg::Cholesky::new(&z.to_dense(), 0.0)?.inverse();
    Ok(SymMatrix::from_dense(&z_inv.scale(1.0 / eps)))
}

/// Which objective the pipeline minimizes over feasible type II `P`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ObjectiveChoice {
    TraceP,
    TracePQ,
    /// `tr(PQ)` when `Q` is numerically definite, otherwise `tr P`.
    #[default]
    Auto,
}

/// Minimizes `objective` over the type II LMI, starting from the baseline
/// Gramian pushed into the strict interior.
pub fn type2_p_optimize(
    sys: &StochasticSystem,
    objective: &LmiObjective,
    params: &IpParams,
) -> Result<LmiSolution, Error> {
    if let LmiObjective::TracePQ(q) = objective {
        let e = sym_eig(q)?;
        if !(e.min() > 1e-12 * e.max().abs()) {
            return Err(Error::ObjectiveNotCoercive);
        }
    }
    let baseline = type2_p_baseline(sys, 0.5).map_err(|e| match e {
        Error::NotStable => Error::NotStable,
        _ => Error::InfeasibleStart,
    })?;
    let start = baseline.scale(1.0 / 0.99);
    let lmi = LmiProblem::new(sys);
    if !lmi.is_strictly_feasible(&start) {
        return Err(Error::InfeasibleStart);
    }
    lmi.solve(objective, &start, params)
}

/// Resolves [`ObjectiveChoice`] against `q` and runs [`type2_p_optimize`].
pub fn type2_p_optimize_choice(
    sys: &StochasticSystem,
    q: &SymMatrix,
    choice: ObjectiveChoice,
    params: &IpParams,
) -> Result<LmiSolution, Error> {
    match choice {
        ObjectiveChoice::TraceP => type2_p_optimize(sys, &LmiObjective::TraceP, params),
        ObjectiveChoice::TracePQ => {
            type2_p_optimize(sys, &LmiObjective::TracePQ(q.clone()), params)
        }
        ObjectiveChoice::Auto => {
            match type2_p_optimize(sys, &LmiObjective::TracePQ(q.clone()), params) {
                Err(Error::ObjectiveNotCoercive) => {
                    type2_p_optimize(sys, &LmiObjective::TraceP, params)
                }
                other => other,
            }
        }
    }
}

/// Per-inequality verdict of [`check_pair`].
#[derive(Clone, Debug)]
pub struct CheckReport {
    pub kind: GramianKind,
    pub p_pd: bool,
    pub q_pd: bool,
    pub slack_q: Classification,
    pub slack_p: Classification,
    pub failures: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Relative dead band for slack classification.
pub const SLACK_TOL: f64 = 1e-7;

/// Recomputes both slacks and classifies them. Type II is checked in the LMI
/// form, so `P` is never inverted.
pub fn check_pair(sys: &StochasticSystem, pair: &GramianPair) -> Result<CheckReport, Error> {
    let fresh = GramianPair::new(sys, pair.p.clone(), pair.q.clone(), pair.kind)?;
    let q_scale = ctc(sys)
        .frobenius_norm()
        .max(fresh.slack_q.add(&ctc(sys)).frobenius_norm())
        .max(1.0);
    let p_scale = match pair.kind {
        GramianKind::TypeI => bbt(sys)
            .frobenius_norm()
            .max(fresh.slack_p.add(&bbt(sys)).frobenius_norm()),
        GramianKind::TypeII => fresh.slack_p.frobenius_norm(),
    }
    .max(1.0);
    let slack_q = classify_with_band(&fresh.slack_q, SLACK_TOL * q_scale)?;
    let slack_p = classify_with_band(&fresh.slack_p, SLACK_TOL * p_scale)?;
    let p_pd = cholesky(&pair.p).is_ok();
    let q_pd = cholesky(&pair.q).is_ok();

    let mut failures = Vec::new();
    if !p_pd {
        failures.push("P is not positive definite".to_string());
    }
    if !q_pd {
        failures.push("Q is not positive definite".to_string());
    }
    if !slack_q.is_psd() {
        failures.push(format!(
            "observability inequality violated (slack eigenvalue {:.3e})",
            slack_q.min_eig
        ));
    }
    if !slack_p.is_psd() {
        failures.push(format!(
            "reachability inequality violated (slack eigenvalue {:.3e})",
            slack_p.min_eig
        ));
    }
    Ok(CheckReport {
        kind: pair.kind,
        p_pd,
        q_pd,
        slack_q,
        slack_p,
        failures,
    })
}

/// Outcome of Newton's method on the type II reachability *equation*
/// `AᵀX + XA + ΣNⱼᵀXNⱼ + XBBᵀX = 0`, `X = P⁻¹`.
#[derive(Clone, Debug)]
pub struct EquationOutcome {
    pub converged: bool,
    pub x: SymMatrix,
    pub residual: f64,
    pub iterations: usize,
    /// Whether the limit is positive definite, i.e. an admissible `P⁻¹`.
    pub positive_definite: bool,
    pub min_eig: f64,
}

/// Newton iteration for the type II equation started at the inverse of the
/// baseline Gramian. Each step solves
/// `(A + BBᵀXₖ)ᵀX + X(A + BBᵀXₖ) + ΣNⱼᵀXNⱼ = XₖBBᵀXₖ`.
pub fn type2_p_equation(sys: &StochasticSystem, max_iter: usize) -> Result<EquationOutcome, Error> {
    let p0 = type2_p_baseline(sys, 0.5)?;
    let mut x =
        SymMatrix::from_dense(&crate::linalg::Cholesky::new(&p0.to_dense(), 0.0)?.inverse());
    let bbt_d = sys.b.matmul_tr(&sys.b);
    let residual_of = |x: &SymMatrix| -> Result<f64, Error> {
        let op = GenLyapOperator::new(&sys.a, &sys.n_list, Direction::Primal)?;
        let xd = x.to_dense();
        let quad = SymMatrix::from_dense(&xd.matmul(&bbt_d).matmul(&xd));
        Ok(op.apply(x)?.add(&quad).frobenius_norm())
    };
    let scale = 1.0 + bbt_d.frobenius_norm();
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let xd = x.to_dense();
        let a_k = &sys.a + &bbt_d.matmul(&xd);
        let rhs = SymMatrix::from_dense(&xd.matmul(&bbt_d).matmul(&xd));
        let next = match GenLyapOperator::new(&a_k, &sys.n_list, Direction::Primal)?.solve(&rhs) {
            Ok(v) => v,
            Err(Error::SingularOperator { .. }) | Err(Error::LyapunovResidual { .. }) => break,
            Err(e) => return Err(e),
        };
        let change = next.sub(&x).frobenius_norm();
        x = next;
        if change <= 1e-12 * (1.0 + x.frobenius_norm()) {
            converged = true;
            break;
        }
    }
    let residual = residual_of(&x)?;
    converged &= residual <= 1e-9 * scale * (1.0 + x.frobenius_norm().powi(2));
    let e = sym_eig(&x)?;
    Ok(EquationOutcome {
        converged,
        positive_definite: cholesky(&x).is_ok(),
        min_eig: e.min(),
        x,
        residual,
        iterations,
    })
}

/// `G(P)` of the type II LMI as a dense matrix.
pub fn lmi_matrix(sys: &StochasticSystem, p: &SymMatrix) -> Matrix {
    LmiProblem::new(sys).g(p).to_dense()
}
