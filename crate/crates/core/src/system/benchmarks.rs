//! Generators for the analytic examples and the two physical benchmarks.

use super::StochasticSystem;
use crate::linalg::{Matrix, SymMatrix};
use crate::Error;

/// Two-state system whose type I truncation has no H∞ error bound:
/// `A = −diag(1, a²)`, `N = [[0,0],[1,0]]`, `B = e₁`, `C = e₂ᵀ`.
pub fn example_noerrbound(a: f64) -> Result<StochasticSystem, Error> {
    if !(a > 1.0) || !a.is_finite() {
        return Err(Error::Domain(format!("example1 requires a > 1, got {a}")));
    }
    let sys = StochasticSystem::new(
        Matrix::from_diag(&[-1.0, -a * a]),
        vec![Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0]])],
        Matrix::column_vector(&[1.0, 0.0]),
        Matrix::row_vector(&[0.0, 1.0]),
    )?;
    Ok(sys.with_name(format!("example1(a={a})")))
}

/// Two-state example on which type II truncation beats type I.
pub fn example_two_state() -> StochasticSystem {
    StochasticSystem::new(
        Matrix::from_rows(&[[-1.0, 1.0], [0.0, -1.0]]),
        vec![Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0]])],
        Matrix::column_vector(&[0.0, 3.0]),
        Matrix::row_vector(&[3.0, 0.0]),
    )
    .expect("static example is valid")
    .with_name("two_state")
}

/// The hand-picked type II reachability Gramian `diag(8, 12)` for [`example_two_state`].
pub fn two_state_type2_p() -> SymMatrix {
    SymMatrix::from_diag(&[8.0, 12.0])
}

/// The family `P = diag(1 + √(1−p), p)⁻¹`, `0 < p ≤ 1`, of type II reachability
/// Gramians for [`example_noerrbound`].
pub fn example2_p(p: f64) -> Result<SymMatrix, Error> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!(
            "example2 requires 0 < p <= 1, got {p}"
        )));
    }
    Ok(SymMatrix::from_diag(&[
        1.0 / (1.0 + (1.0 - p).sqrt()),
        1.0 / p,
    ]))
}

/// Element values of the RLC ladder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadderParams {
    pub r: f64,
    pub l: f64,
    pub c_tilde: f64,
    pub r_tilde: f64,
}

impl Default for LadderParams {
    fn default() -> Self {
        Self {
            r: 0.1,
            l: 0.1,
            c_tilde: 0.1,
            r_tilde: 1.0,
        }
    }
}

/// RLC ladder of `n/2` sections whose inductances carry multiplicative noise.
///
/// State ordering alternates capacitor voltage and inductor current. The
/// last section is terminated by `R̃` alone, so its current row reads
/// `[…, 1/L, −R̃/L]`.
pub fn build_ladder(n: usize, params: LadderParams) -> Result<StochasticSystem, Error> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "ladder order must be even and >= 4, got {n}"
        )));
    }
    let LadderParams {
        r,
        l,
        c_tilde: ct,
        r_tilde: rt,
    } = params;
    if [r, l, ct, rt].iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("ladder parameters must be positive".into()));
    }
    let rs = r + rt;
    let mut a = Matrix::zeros(n, n);
    let mut noise = Matrix::zeros(n, n);

    a[(0, 0)] = -1.0 / (ct * r);
    a[(0, 1)] = -1.0 / ct;
    for row in (2..n).step_by(2) {
        a[(row, row - 1)] = rt / (ct * rs);
        a[(row, row)] = -1.0 / (ct * rs);
        a[(row, row + 1)] = -1.0 / ct;
    }
    // Inductor rows: the noise matrix is the same pattern with 1/L replaced by 1.
    for row in (1..n - 1).step_by(2) {
        let coeffs = [1.0, -r * rt / rs, -rt / rs];
        for (off, c) in coeffs.iter().enumerate() {
            a[(row, row - 1 + off)] = c / l;
            noise[(row, row - 1 + off)] = *c;
        }
    }
    a[(n - 1, n - 2)] = 1.0 / l;
    a[(n - 1, n - 1)] = -rt / l;
    noise[(n - 1, n - 2)] = 1.0;
    noise[(n - 1, n - 1)] = -rt;

    let mut b = Matrix::zeros(n, 1);
    b[(0, 0)] = 1.0 / (ct * r);
    let mut c = Matrix::zeros(1, n);
    c[(0, 0)] = -1.0 / r;

    Ok(StochasticSystem::new(a, vec![noise], b, c)?.with_name(format!("ladder(n={n})")))
}

/// Discretization parameters of the heat benchmark.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatParams {
    /// Deterministic part of the Robin coefficient.
    pub robin_mean: f64,
    pub noise_intensity: f64,
}

impl Default for HeatParams {
    fn default() -> Self {
        Self {
            robin_mean: 0.5,
            noise_intensity: 1.0,
        }
    }
}

/// Heat equation on the unit square, 5-point stencil on a `g × g` interior grid.
///
/// Node `(ix, iy)` has index `iy·g + ix`. The left, bottom and top edges
/// carry Dirichlet inputs `u₁, u₂, u₃`. On the right edge the stencil keeps
/// its full diagonal and the noisy Robin flux `(robin_mean + noise_intensity·ẇ)x`
/// enters with weight `1/h`. The output is the mean temperature.
pub fn build_heat(g: usize, params: HeatParams) -> Result<StochasticSystem, Error> {
    if g < 3 {
        return Err(Error::Domain(format!(
            "heat grid must be at least 3, got {g}"
        )));
    }
    let n = g * g;
    let h = 1.0 / (g as f64 + 1.0);
    let inv_h2 = 1.0 / (h * h);
    let idx = |ix: usize, iy: usize| iy * g + ix;

    let mut a = Matrix::zeros(n, n);
    let mut noise = Matrix::zeros(n, n);
    let mut b = Matrix::zeros(n, 3);
    for iy in 0..g {
        for ix in 0..g {
            let i = idx(ix, iy);
            a[(i, i)] = -4.0 * inv_h2;
            if ix > 0 {
                a[(i, idx(ix - 1, iy))] = inv_h2;
            } else {
                b[(i, 0)] += inv_h2;
            }
            if iy > 0 {
                a[(i, idx(ix, iy - 1))] = inv_h2;
            } else {
                b[(i, 1)] += inv_h2;
            }
            if iy + 1 < g {
                a[(i, idx(ix, iy + 1))] = inv_h2;
            } else {
                b[(i, 2)] += inv_h2;
            }
            if ix + 1 < g {
                a[(i, idx(ix + 1, iy))] = inv_h2;
            } else {
                a[(i, i)] += params.robin_mean / h;
                noise[(i, i)] = params.noise_intensity / h;
            }
        }
    }
    let c = Matrix::from_fn(1, n, |_, _| 1.0 / n as f64);
    Ok(StochasticSystem::new(a, vec![noise], b, c)?.with_name(format!("heat(grid={g})")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_matrices() {
        let sys = example_noerrbound(2.0).unwrap();
        assert_eq!(sys.a, Matrix::from_diag(&[-1.0, -4.0]));
        assert!(example_noerrbound(1.0).is_err());
        assert!(example_noerrbound(f64::NAN).is_err());
    }

    #[test]
    fn ladder_n6_entries() {
        let sys = build_ladder(6, LadderParams::default()).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() < 1e-12;
        assert!(close(sys.a[(1, 0)], 10.0));
        assert!(close(sys.a[(0, 0)], -100.0));
        let expected = [1.0, -1.0 / 11.0, -10.0 / 11.0, 0.0, 0.0, 0.0];
        for (j, e) in expected.iter().enumerate() {
            assert!(close(sys.n_list[0][(1, j)], *e));
        }
        assert!(close(sys.a[(5, 4)], 10.0));
        assert!(close(sys.a[(5, 5)], -10.0));
        assert!(close(sys.n_list[0][(5, 5)], -1.0));
        assert!(close(sys.a[(2, 1)], 1.0 / (0.1 * 1.1)));
        assert!(close(sys.a[(4, 5)], -10.0));
        let mut e1 = [0.0; 6];
        e1[0] = 1.0;
        for i in 0..6 {
            assert!(close(sys.b[(i, 0)], 100.0 * e1[i]));
            assert!(close(sys.c[(0, i)], -10.0 * e1[i]));
        }
        assert!(build_ladder(7, LadderParams::default()).is_err());
        assert!(build_ladder(2, LadderParams::default()).is_err());
    }

    #[test]
    fn ladder_band_profile() {
        for n in [6, 10, 20] {
            let sys = build_ladder(n, LadderParams::default()).unwrap();
            let (lo, up) = sys.a.bandwidth();
            assert_eq!(lo, 1);
            assert!(up <= 2);
            let (nlo, nup) = sys.n_list[0].bandwidth();
            assert!(nlo <= 1 && nup <= 2);
            // even rows of N vanish
            for i in (0..n).step_by(2) {
                assert!(sys.n_list[0].row(i).iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn heat_structure() {
        let sys = build_heat(10, HeatParams::default()).unwrap();
        let d = sys.dims();
        assert_eq!((d.n, d.m, d.p), (100, 3, 1));
        assert!(sys.c.as_slice().iter().all(|&x| x == 0.01));
        let noise = &sys.n_list[0];
        let nnz: Vec<(usize, usize)> = (0..100)
            .flat_map(|i| (0..100).map(move |j| (i, j)))
            .filter(|&(i, j)| noise[(i, j)] != 0.0)
            .collect();
        assert_eq!(nnz.len(), 10);
        assert!(nnz.iter().all(|(i, j)| i == j));
        assert!(build_heat(2, HeatParams::default()).is_err());
    }

    #[test]
    fn heat_b_columns_sum_edge_couplings() {
        let g = 5;
        let sys = build_heat(g, HeatParams::default()).unwrap();
        let inv_h2 = ((g + 1) * (g + 1)) as f64;
        for col in 0..3 {
            let sum: f64 = sys.b.column(col).iter().sum();
            assert!((sum - g as f64 * inv_h2).abs() < 1e-9);
        }
    }

    #[test]
    fn heat_is_stable_with_and_without_noise() {
        for g in [4, 6] {
            let sys = build_heat(g, HeatParams::default()).unwrap();
            assert!(
                crate::lyapunov::is_ms_stable(&sys.a, &sys.n_list)
                    .unwrap()
                    .stable
            );
            let det = sys.without_noise();
            assert!(
                crate::lyapunov::is_ms_stable(&det.a, &det.n_list)
                    .unwrap()
                    .stable
            );
            let h = 1.0 / (g as f64 + 1.0);
            let i = g - 1;
            assert!((sys.a[(i, i)] - (-4.0 / (h * h) + 0.5 / h)).abs() < 1e-9);
            assert!((sys.n_list[0][(i, i)] - 1.0 / h).abs() < 1e-12);
        }
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(
            build_heat(4, HeatParams::default()).unwrap(),
            build_heat(4, HeatParams::default()).unwrap()
        );
        assert_eq!(
            build_ladder(20, LadderParams::default()).unwrap(),
            build_ladder(20, LadderParams::default()).unwrap()
        );
        assert_eq!(example_two_state(), example_two_state());
    }
}
