mod common;

use stochbt::balancing::{balance_system, reduce_balanced, truncate, PSource, PipelineOptions};
use stochbt::gramians::GramianKind;
use stochbt::sim::{
    mc_second_moment, moment_propagate, simulate_pair, trajectory_csv, InitialState, InputSpec,
    SimConfig,
};
use stochbt::system::{example_two_state, two_state_type2_p};
use stochbt::{Matrix, SymMatrix};

fn two_state_type2_reduction() -> (
    stochbt::StochasticSystem,
    stochbt::balancing::ReductionResult,
) {
    let sys = example_two_state();
    let opts = PipelineOptions {
        p_source: PSource::Given(two_state_type2_p()),
        strict: true,
        ..Default::default()
    };
    let bal = balance_system(&sys, GramianKind::TypeII, &opts).unwrap();
    let red = truncate(&sys, &bal.form, 1, GramianKind::TypeII).unwrap();
    (sys, red)
}

fn cfg(t_final: f64, dt: f64, n_paths: usize, seed: u64) -> SimConfig {
    SimConfig {
        t_final,
        dt,
        n_paths,
        seed,
        input: InputSpec::Constant(vec![1.0]),
        record_stride: None,
    }
}

#[test]
fn same_seed_gives_identical_results() {
    let (sys, red) = two_state_type2_reduction();
    let c = cfg(2.0, 1e-2, 300, 42);
    let a = simulate_pair(&sys, &red.reduced, &c).unwrap();
    let b = simulate_pair(&sys, &red.reduced, &c).unwrap();
    assert_eq!(trajectory_csv(&a), trajectory_csv(&b));
    assert_eq!(a.error_norm, b.error_norm);
}

#[test]
fn two_state_type2_gain_below_bound() {
    let (sys, red) = two_state_type2_reduction();
    let bound = red.bound.unwrap();
    let res = simulate_pair(
        &sys,
        &red.reduced,
        &SimConfig {
            input: InputSpec::Constant(vec![1.0]),
            ..Default::default()
        },
    )
    .unwrap();
    let gain = res.gain().unwrap();
    assert!(
        gain.value <= bound + 4.0 * gain.half_width,
        "{gain:?} vs {bound}"
    );
}

#[test]
fn random_type2_reductions_respect_bound() {
    let mut rng = common::rng(21);
    for _ in 0..4 {
        let sys = common::random_stable(&mut rng, 4, 1, 1, 1);
        let bal = balance_system(&sys, GramianKind::TypeII, &PipelineOptions::default()).unwrap();
        let res = reduce_balanced(&sys, &bal, 1).unwrap();
        let bound = res.reduction.bound.unwrap();
        let sim = simulate_pair(&sys, &res.reduction.reduced, &cfg(5.0, 1e-3, 1000, 3)).unwrap();
        let gain = sim.gain().unwrap();
        assert!(
            gain.value <= bound + 4.0 * gain.half_width,
            "{gain:?} vs {bound}"
        );
    }
}

#[test]
fn halving_dt_stays_within_statistical_error() {
    let (sys, red) = two_state_type2_reduction();
    let coarse = simulate_pair(&sys, &red.reduced, &cfg(5.0, 2e-3, 4000, 9)).unwrap();
    let fine = simulate_pair(&sys, &red.reduced, &cfg(5.0, 1e-3, 4000, 9)).unwrap();
    let (a, b) = (coarse.error_norm, fine.error_norm);
    let tol = 3.0 * a.half_width.hypot(b.half_width);
    assert!((a.value - b.value).abs() <= tol, "{a:?} vs {b:?}");
}

#[test]
fn half_width_shrinks_with_paths() {
    let (sys, red) = two_state_type2_reduction();
    let small = simulate_pair(&sys, &red.reduced, &cfg(2.0, 1e-2, 400, 5)).unwrap();
    let large = simulate_pair(&sys, &red.reduced, &cfg(2.0, 1e-2, 6400, 5)).unwrap();
    let ratio = small.error_norm.half_width / large.error_norm.half_width;
    assert!((2.5..6.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn monte_carlo_moment_matches_ode() {
    for (seed, n) in [(1u64, 2usize), (2, 3), (3, 4)] {
        let mut rng = common::rng(200 + seed);
        let sys = common::random_stable(&mut rng, n, 2, 1, 1);
        let x0 = common::gaussian(&mut rng, n, 1, 1.0);
        let c = SimConfig {
            t_final: 2.0,
            dt: 1e-3,
            n_paths: 4000,
            seed,
            input: InputSpec::Zero,
            record_stride: Some(200),
        };
        let mc =
            mc_second_moment(&sys.a, &sys.n_list, &InitialState::Fixed(x0.column(0)), &c).unwrap();
        let p0 = SymMatrix::from_dense(&x0.matmul_tr(&x0));
        let ode = moment_propagate(&sys.a, &sys.n_list, &p0, c.t_final, c.dt).unwrap();
        let h = ode.times[1];
        for ((t, m), se) in mc.times.iter().zip(&mc.mean).zip(&mc.std_err).skip(1) {
            let exact = ode.trace[(t / h).round() as usize];
            assert!(
                (m - exact).abs() <= 4.0 * se,
                "n={n} t={t}: {m} vs {exact} (se {se})"
            );
        }
    }
}

#[test]
fn moment_ode_decays_for_stable_system() {
    let sys = example_two_state();
    let traj = moment_propagate(&sys.a, &sys.n_list, &SymMatrix::identity(2), 10.0, 1e-2).unwrap();
    assert!(traj.trace.last().unwrap() < &(1e-3 * traj.trace[0]));
    let unstable = Matrix::from_rows(&[[0.1]]);
    let grow = moment_propagate(
        &unstable,
        &[Matrix::zeros(1, 1)],
        &SymMatrix::identity(1),
        1.0,
        1e-2,
    )
    .unwrap();
    assert!((grow.trace.last().unwrap() - 0.2f64.exp()).abs() < 1e-8);
}
