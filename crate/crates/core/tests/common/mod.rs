#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use stochbt::lyapunov::spectral_abscissa;
use stochbt::{Matrix, StochasticSystem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        scale * rng.sample::<f64, _>(StandardNormal)
    })
}

/// Random mean-square stable system whose operator abscissa is `−2·margin`
/// with `margin` drawn from `[0.2, 1]`.
pub fn random_stable(
    rng: &mut ChaCha8Rng,
    n: usize,
    k: usize,
    m: usize,
    p: usize,
) -> StochasticSystem {
    let mut a = gaussian(rng, n, n, 1.0 / (n as f64).sqrt());
    let n_list: Vec<Matrix> = (0..k)
        .map(|_| gaussian(rng, n, n, 0.5 / (n as f64).sqrt()))
        .collect();
    let alpha = spectral_abscissa(&a, &n_list, 1e-10).unwrap();
    let margin = rng.random_range(0.2..1.0);
    for i in 0..n {
        a[(i, i)] -= 0.5 * alpha + margin;
    }
    let b = gaussian(rng, n, m, 1.0);
    let c = gaussian(rng, p, n, 1.0);
    StochasticSystem::new(a, n_list, b, c).unwrap()
}

pub fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> stochbt::SymMatrix {
    stochbt::SymMatrix::from_dense(&gaussian(rng, n, n, 1.0).symmetrized())
}

/// Largest real part of the spectrum of `I⊗A + A⊗I + ΣNⱼ⊗Nⱼ`, from
/// nalgebra's nonsymmetric eigensolver on the explicit Kronecker matrix.
pub fn kronecker_abscissa(a: &Matrix, n_list: &[Matrix]) -> f64 {
    let n = a.rows();
    let eye = Matrix::identity(n);
    let mut k = eye.kron(a);
    k.axpy(1.0, &a.kron(&eye));
    for nj in n_list {
        k.axpy(1.0, &nj.kron(nj));
    }
    let dm = nalgebra::DMatrix::from_fn(n * n, n * n, |i, j| k[(i, j)]);
    dm.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest eigenvalue of the Riccati residual of the certificate
/// `diag(Σ₁, 2σI, σ²Σ₁⁻¹)` on the split error system of a type II
/// truncation that discards the last singular-value group, and the scale
/// of the residual's terms.
pub fn split_certificate_margin(sys: &StochasticSystem) -> stochbt::Result<(f64, f64)> {
    use stochbt::balancing::{balance_system, PipelineOptions};
    use stochbt::gramians::GramianKind;
    use stochbt::hinf::{riccati_residual, split_certificate, split_error_system};

    let opts = PipelineOptions {
        strict: true,
        ..Default::default()
    };
    let bal = balance_system(sys, GramianKind::TypeII, &opts)?;
    let form = &bal.form;
    let r_state = form.states_in_groups(form.group_count() - 1);
    let balanced = sys.transformed(&form.s, &form.s_inv);
    let split = split_error_system(&balanced, r_state)?;
    let (x, gamma) = split_certificate(&form.sigma, r_state);
    let res = riccati_residual(&split, gamma, &x);
    let xd = x.to_dense();
    let xb = xd.matmul(&split.b);
    let scale = 2.0 * split.a.tr_matmul(&xd).frobenius_norm()
        + split
            .n_list
            .iter()
            .map(|nj| nj.tr_matmul(&xd.matmul(nj)).frobenius_norm())
            .sum::<f64>()
        + split.c.tr_matmul(&split.c).frobenius_norm()
        + xb.matmul_tr(&xb).frobenius_norm() / (gamma * gamma);
    Ok((stochbt::linalg::sym_eig(&res)?.max(), scale))
}
