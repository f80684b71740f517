//! Square-root balancing, singular-value grouping and truncation.

use std::ops::Range;

use crate::gramians::{
    type1_gramians, type1_gramians_semidefinite, type2_p_baseline, type2_p_optimize_choice,
    type2_q, GramianKind, GramianPair, IpParams, LmiSolution, ObjectiveChoice,
};
use crate::linalg::{cholesky, psd_factor, svd, Matrix, SymMatrix};
use crate::lyapunov::is_ms_stable;
use crate::system::StochasticSystem;
use crate::Error;

/// Default relative tolerance for merging equal singular values.
pub const DEFAULT_GROUP_TOL: f64 = 1e-8;
/// Singular values below this fraction of `σ₁` are treated as zero.
pub const SIGMA_FLOOR: f64 = 1e-13;

/// Contragredient transformation with its singular-value spectrum.
///
/// `s` is `n × n_eff` and `s_inv` is `n_eff × n` with `s_inv · s = I`;
/// `n_eff < n` only for semidefinite Gramians.
#[derive(Clone, Debug)]
pub struct BalancedForm {
    pub s: Matrix,
    pub s_inv: Matrix,
    /// All `n` singular values, descending.
    pub sigma: Vec<f64>,
    /// Consecutive index ranges of (numerically) equal singular values.
    pub groups: Vec<Range<usize>>,
    pub n_eff: usize,
}

impl BalancedForm {
    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    /// Number of states kept by truncating after `r_groups` groups.
    pub fn states_in_groups(&self, r_groups: usize) -> usize {
        self.groups[..r_groups].iter().map(|g| g.len()).sum()
    }

    /// Largest group count whose state dimension does not exceed `r_state`.
    pub fn groups_for_states(&self, r_state: usize) -> usize {
        let mut total = 0;
        let mut count = 0;
        for g in &self.groups {
            if total + g.len() > r_state {
                break;
            }
            total += g.len();
            count += 1;
        }
        count
    }
}

/// Greedy clustering: neighbours join a group when
/// `|σᵢ₋₁ − σᵢ| ≤ max(tol·σᵢ₋₁, 1000ε·σ₁)`.
pub fn group_sigma(sigma: &[f64], tol: f64) -> Vec<Range<usize>> {
    let mut groups = Vec::new();
    if sigma.is_empty() {
        return groups;
    }
    let floor = 1e3 * f64::EPSILON * sigma[0];
    let mut start = 0;
    for i in 1..sigma.len() {
        if (sigma[i - 1] - sigma[i]).abs() > (tol * sigma[i - 1]).max(floor) {
            groups.push(start..i);
            start = i;
        }
    }
    groups.push(start..sigma.len());
    groups
}

fn build_form(l: &Matrix, r: &Matrix, group_tol: f64, strict: bool) -> Result<BalancedForm, Error> {
    let n = l.rows();
    let dec = svd(&r.matmul(l))?;
    let sigma = dec.s.clone();
    let s1 = sigma[0];
    if !(s1 > 0.0) {
        return Err(Error::NearZeroSigma {
            sigma_min: 0.0,
            sigma_max: s1,
        });
    }
    let n_eff = sigma.iter().take_while(|&&s| s > SIGMA_FLOOR * s1).count();
    if strict && n_eff < n {
        return Err(Error::NearZeroSigma {
            sigma_min: sigma[n - 1],
            sigma_max: s1,
        });
    }
    let inv_sqrt: Vec<f64> = sigma[..n_eff].iter().map(|s| 1.0 / s.sqrt()).collect();
    let lv = l.matmul(&dec.v);
    let s = Matrix::from_fn(n, n_eff, |i, j| lv[(i, j)] * inv_sqrt[j]);
    let ut_r = dec.u.tr_matmul(r);
    let s_inv = Matrix::from_fn(n_eff, n, |i, j| ut_r[(i, j)] * inv_sqrt[i]);
    let groups = group_sigma(&sigma, group_tol);
    Ok(BalancedForm {
        s,
        s_inv,
        sigma,
        groups,
        n_eff,
    })
}

/// `S = LVΣ^{-1/2}`, `S⁻¹ = Σ^{-1/2}UᵀR` from `LLᵀ = P`, `RᵀR = Q`, `RL = UΣVᵀ`.
pub fn balance(p: &SymMatrix, q: &SymMatrix, group_tol: f64) -> Result<BalancedForm, Error> {
    let l = cholesky(p).map_err(|_| Error::NotPd { what: "P" })?;
    let r = cholesky(q)
        .map_err(|_| Error::NotPd { what: "Q" })?
        .transpose();
    build_form(&l, &r, group_tol, true)
}

/// Balancing from semidefinite Gramians. Directions with negligible
/// singular values are dropped from `S`, so the balanced realization has
/// order `n_eff`.
pub fn balance_semidefinite(
    p: &SymMatrix,
    q: &SymMatrix,
    group_tol: f64,
) -> Result<BalancedForm, Error> {
    let l = psd_factor(p)?;
    let r = psd_factor(q)?.transpose();
    build_form(&l, &r, group_tol, false)
}

/// A truncated system with its bookkeeping.
#[derive(Clone, Debug)]
pub struct ReductionResult {
    pub reduced: StochasticSystem,
    pub kind: GramianKind,
    pub r_groups: usize,
    pub r_state: usize,
    pub kept_sigma: Vec<f64>,
    pub truncated_sigma: Vec<f64>,
    /// `2·Σ` of the distinct truncated singular values (type II only).
    pub bound: Option<f64>,
    /// Leading columns of `S`.
    pub s1: Matrix,
    /// Leading rows of `S⁻¹`.
    pub t1: Matrix,
}

/// Keeps the first `r_groups` singular-value groups.
pub fn truncate(
    sys: &StochasticSystem,
    form: &BalancedForm,
    r_groups: usize,
    kind: GramianKind,
) -> Result<ReductionResult, Error> {
    let nu = form.group_count();
    if r_groups == 0 || r_groups >= nu {
        return Err(Error::Domain(format!(
            "number of kept groups must satisfy 1 <= r < {nu}, got {r_groups}"
        )));
    }
    let r_state = form.states_in_groups(r_groups);
    if r_state > form.n_eff {
        return Err(Error::Domain(format!(
            "cannot keep {r_state} states: only {} singular values are numerically nonzero",
            form.n_eff
        )));
    }
    let n = sys.order();
    let s1 = form.s.submatrix(0, 0, n, r_state);
    let t1 = form.s_inv.submatrix(0, 0, r_state, n);
    let reduced = StochasticSystem {
        a: t1.matmul(&sys.a).matmul(&s1),
        n_list: sys
            .n_list
            .iter()
            .map(|nj| t1.matmul(nj).matmul(&s1))
            .collect(),
        b: t1.matmul(&sys.b),
        c: sys.c.matmul(&s1),
        name: sys
            .name
            .as_ref()
            .map(|s| format!("{s} reduced to {r_state}")),
    };
    let bound = (kind == GramianKind::TypeII).then(|| {
        2.0 * form.groups[r_groups..]
            .iter()
            .map(|g| form.sigma[g.start])
            .sum::<f64>()
    });
    Ok(ReductionResult {
        reduced,
        kind,
        r_groups,
        r_state,
        kept_sigma: form.sigma[..r_state].to_vec(),
        truncated_sigma: form.sigma[r_state..].to_vec(),
        bound,
        s1,
        t1,
    })
}

/// Where the type II reachability Gramian comes from.
#[derive(Clone, Debug, Default)]
pub enum PSource {
    /// Barrier optimization over the LMI.
    #[default]
    Optimize,
    /// The ε-scaling construction, without optimization.
    Baseline,
    /// A user-supplied feasible matrix.
    Given(SymMatrix),
}

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    pub group_tol: f64,
    pub p_source: PSource,
    pub objective: ObjectiveChoice,
    pub ip: IpParams,
    /// Require positive definite Gramians and nonnegligible σ.
    pub strict: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            group_tol: DEFAULT_GROUP_TOL,
            p_source: PSource::Optimize,
            objective: ObjectiveChoice::Auto,
            ip: IpParams::default(),
            strict: false,
        }
    }
}

/// Gramians and balancing of one system, reusable across truncation orders.
#[derive(Clone, Debug)]
pub struct Balanced {
    pub pair: GramianPair,
    pub form: BalancedForm,
    pub lmi: Option<LmiSolution>,
}

/// Everything produced by [`reduce_pipeline`].
#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub balanced: Balanced,
    pub reduction: ReductionResult,
    pub reduced_stable: bool,
    /// `(σ_last_kept − σ_first_truncated)/σ₁`.
    pub separation: f64,
}

/// Computes the Gramian pair of the requested kind and balances it.
pub fn balance_system(
    sys: &StochasticSystem,
    kind: GramianKind,
    options: &PipelineOptions,
) -> Result<Balanced, Error> {
    let (pair, lmi) = match kind {
        GramianKind::TypeI => {
            let pair = if options.strict {
                type1_gramians(sys)?
            } else {
                type1_gramians_semidefinite(sys)?
            };
            (pair, None)
        }
        GramianKind::TypeII => {
            let q = type2_q(sys)?;
            let (p, lmi) = match &options.p_source {
                PSource::Optimize => {
                    let sol = type2_p_optimize_choice(sys, &q, options.objective, &options.ip)?;
                    (sol.p.clone(), Some(sol))
                }
                PSource::Baseline => (type2_p_baseline(sys, 0.5)?, None),
                PSource::Given(p) => (p.clone(), None),
            };
            (GramianPair::new(sys, p, q, GramianKind::TypeII)?, lmi)
        }
    };
    let form = if options.strict {
        balance(&pair.p, &pair.q, options.group_tol)?
    } else {
        balance_semidefinite(&pair.p, &pair.q, options.group_tol)?
    };
    Ok(Balanced { pair, form, lmi })
}

/// Truncation of an already balanced system plus the stability check of the result.
pub fn reduce_balanced(
    sys: &StochasticSystem,
    balanced: &Balanced,
    r_groups: usize,
) -> Result<PipelineResult, Error> {
    let reduction = truncate(sys, &balanced.form, r_groups, balanced.pair.kind)?;
    let reduced_stable = is_ms_stable(&reduction.reduced.a, &reduction.reduced.n_list)?.stable;
    let sigma = &balanced.form.sigma;
    let separation = (sigma[reduction.r_state - 1] - sigma[reduction.r_state]) / sigma[0];
    Ok(PipelineResult {
        balanced: balanced.clone(),
        reduction,
        reduced_stable,
        separation,
    })
}

/// Gramians, balancing and truncation to `r_groups` groups in one call.
pub fn reduce_pipeline(
    sys: &StochasticSystem,
    kind: GramianKind,
    r_groups: usize,
    options: &PipelineOptions,
) -> Result<PipelineResult, Error> {
    let balanced = balance_system(sys, kind, options)?;
    reduce_balanced(sys, &balanced, r_groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{example_noerrbound, example_two_state, two_state_type2_p};

    #[test]
    fn already_balanced_diagonal() {
        let p = SymMatrix::from_diag(&[2.0, 1.0]);
        let form = balance(&p, &p, DEFAULT_GROUP_TOL).unwrap();
        assert!((form.sigma[0] - 2.0).abs() < 1e-14 && (form.sigma[1] - 1.0).abs() < 1e-14);
        let st_q_s = p.congruence(&form.s);
        assert!(st_q_s.sub(&SymMatrix::from_diag(&[2.0, 1.0])).max_abs() < 1e-14);
        assert!(form.s[(0, 1)].abs() < 1e-15 && form.s[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn example1_balancing() {
        let a: f64 = 2.0;
        let sys = example_noerrbound(a).unwrap();
        let pair = type1_gramians(&sys).unwrap();
        let form = balance(&pair.p, &pair.q, DEFAULT_GROUP_TOL).unwrap();
        let s8 = 8f64.sqrt();
        assert!((form.sigma[0] - 1.0 / (s8 * a)).abs() < 1e-14);
        assert!((form.sigma[1] - 1.0 / (s8 * a * a)).abs() < 1e-14);
        let expected = [(2.0 * a * a).powf(0.25), 0.5f64.powf(0.25)];
        for i in 0..2 {
            assert!((form.s[(i, i)].abs() - expected[i]).abs() < 1e-14);
        }
        let red = truncate(&sys, &form, 1, GramianKind::TypeI).unwrap();
        assert!(red.reduced.c.max_abs() <= 1e-15);
        assert!(red.bound.is_none());
        assert!(truncate(&sys, &form, 2, GramianKind::TypeI).is_err());
        assert!(truncate(&sys, &form, 0, GramianKind::TypeI).is_err());
    }

    #[test]
    fn two_state_type2_bound() {
        let sys = example_two_state();
        let opts = PipelineOptions {
            p_source: PSource::Given(two_state_type2_p()),
            ..Default::default()
        };
        let res = reduce_pipeline(&sys, GramianKind::TypeII, 1, &opts).unwrap();
        let sigma = &res.balanced.form.sigma;
        assert!((sigma[0] - 72f64.sqrt()).abs() < 1e-12);
        assert!((sigma[1] - 12f64.sqrt()).abs() < 1e-12);
        assert!((res.reduction.bound.unwrap() - 6.9282).abs() < 1e-4);
        assert!(res.reduced_stable);
    }

    #[test]
    fn contragredience() {
        let sys = example_two_state();
        let pair = type1_gramians(&sys).unwrap();
        let form = balance(&pair.p, &pair.q, DEFAULT_GROUP_TOL).unwrap();
        let sq = pair.q.congruence(&form.s);
        let sp = pair.p.congruence(&form.s_inv.transpose());
        let diag = SymMatrix::from_diag(&form.sigma);
        assert!(sq.sub(&diag).max_abs() < 1e-12 * form.sigma[0]);
        assert!(sp.sub(&diag).max_abs() < 1e-12 * form.sigma[0]);
        assert!(
            form.s_inv
                .matmul(&form.s)
                .max_abs_diff(&Matrix::identity(2))
                < 1e-12
        );
    }

    #[test]
    fn grouping() {
        let g = group_sigma(&[3.0, 3.0, 2.0, 1.0 + 1e-10, 1.0], 1e-8);
        assert_eq!(g, vec![0..2, 2..3, 3..5]);
        assert_eq!(group_sigma(&[1.0], 1e-8), vec![0..1]);
    }

    #[test]
    fn semidefinite_drops_null_directions() {
        let p = SymMatrix::from_diag(&[2.0, 1.0, 0.0]);
        let q = SymMatrix::from_diag(&[1.0, 1.0, 1.0]);
        assert!(balance(&p, &q, DEFAULT_GROUP_TOL).is_err());
        let form = balance_semidefinite(&p, &q, DEFAULT_GROUP_TOL).unwrap();
        assert_eq!(form.n_eff, 2);
        assert_eq!(form.s.shape(), (3, 2));
        assert!(
            form.s_inv
                .matmul(&form.s)
                .max_abs_diff(&Matrix::identity(2))
                < 1e-14
        );
    }

    #[test]
    fn state_snapping() {
        let p = SymMatrix::from_diag(&[3.0, 3.0, 2.0, 1.0]);
        let form = balance(&p, &p, DEFAULT_GROUP_TOL).unwrap();
        assert_eq!(form.groups_for_states(1), 0);
        assert_eq!(form.groups_for_states(2), 1);
        assert_eq!(form.groups_for_states(3), 2);
        assert_eq!(form.states_in_groups(2), 3);
    }
}
