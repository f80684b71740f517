//! Euler–Maruyama Monte Carlo for full/reduced pairs under common noise,
//! and the second-moment ODE `dP/dt = AP + PAᵀ + ΣNⱼPNⱼᵀ`.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::linalg::{Matrix, SymMatrix};
use crate::system::{write_atomic, StochasticSystem};
use crate::Error;

/// States beyond this norm count as a blow-up.
pub const BLOW_UP: f64 = 1e12;
/// Default upper limit on recorded time points per path.
pub const DEFAULT_RECORDS: usize = 1000;

/// Deterministic input signal.
#[derive(Clone, Debug, PartialEq)]
pub enum InputSpec {
    Zero,
    Constant(Vec<f64>),
    /// Piecewise linear through `(times[i], values[i])`, held constant outside.
    Table {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl InputSpec {
    fn width(&self) -> Option<usize> {
        match self {
            InputSpec::Zero => None,
            InputSpec::Constant(v) => Some(v.len()),
            InputSpec::Table { values, .. } => values.first().map(|v| v.len()),
        }
    }

    /// `u(t)` for an `m`-input system.
    pub fn eval(&self, t: f64, m: usize) -> Vec<f64> {
        match self {
            InputSpec::Zero => vec![0.0; m],
            InputSpec::Constant(v) => v.clone(),
            InputSpec::Table { times, values } => {
                let k = times.partition_point(|&s| s <= t);
                if k == 0 {
                    return values[0].clone();
                }
                if k == times.len() {
                    return values[k - 1].clone();
                }
                let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                values[k - 1]
                    .iter()
                    .zip(&values[k])
                    .map(|(a, b)| a + w * (b - a))
                    .collect()
            }
        }
    }

    fn validate(&self, m: usize) -> Result<(), Error> {
        if let Some(w) = self.width() {
            if w != m {
                return Err(Error::DimensionMismatch(format!(
                    "input has {w} channels, system has {m}"
                )));
            }
        }
        if let InputSpec::Table { times, values } = self {
            if times.is_empty() || times.len() != values.len() {
                return Err(Error::Domain(
                    "input table needs matching, nonempty times and values".into(),
                ));
            }
            if values.iter().any(|v| v.len() != m) || times.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Domain(
                    "input table rows must have equal width and increasing times".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub t_final: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub input: InputSpec,
    /// Record every `record_stride`-th step; `None` keeps about [`DEFAULT_RECORDS`] points.
    pub record_stride: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            t_final: 20.0,
            dt: 1e-3,
            n_paths: 10_000,
            seed: 0,
            input: InputSpec::Zero,
            record_stride: None,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<(), Error> {
        if !(self.dt > 0.0) || !(self.t_final >= self.dt) || !self.t_final.is_finite() {
            return Err(Error::Domain(format!(
                "need dt > 0 and t_final >= dt, got dt = {}, t_final = {}",
                self.dt, self.t_final
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::Domain("n_paths must be at least 1".into()));
        }
        if self.record_stride == Some(0) {
            return Err(Error::Domain("record_stride must be positive".into()));
        }
        Ok(())
    }

    /// Step count and the step that divides `t_final` exactly.
    pub fn grid(&self) -> (usize, f64) {
        let steps = (self.t_final / self.dt).round().max(1.0) as usize;
        (steps, self.t_final / steps as f64)
    }

    fn stride(&self, steps: usize) -> usize {
        self.record_stride
            .unwrap_or_else(|| steps.div_ceil(DEFAULT_RECORDS).max(1))
    }
}

/// A Monte Carlo estimate with the half-width of one standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    pub times: Vec<f64>,
    /// Mean of `‖y(t) − y_r(t)‖` over surviving paths.
    pub mean_error: Vec<f64>,
    pub q05: Vec<f64>,
    pub q50: Vec<f64>,
    pub q95: Vec<f64>,
    /// `‖u‖_{L²[0,T]}`; deterministic, so its half-width is zero.
    pub input_norm: Estimate,
    /// `(E∫₀ᵀ‖y − y_r‖²dt)^{1/2}`.
    pub error_norm: Estimate,
    /// Indices of paths whose state exceeded [`BLOW_UP`].
    pub blown_up: Vec<usize>,
    pub n_paths: usize,
}

impl SimResult {
    /// Empirical gain `‖y − y_r‖/‖u‖` with its half-width.
    pub fn gain(&self) -> Option<Estimate> {
        (self.input_norm.value > 0.0).then(|| Estimate {
            value: self.error_norm.value / self.input_norm.value,
            half_width: self.error_norm.half_width / self.input_norm.value,
        })
    }
}

/// Sparse row storage; the benchmarks' `A` and `N` are banded or diagonal.
#[derive(Clone, Debug)]
struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn from_dense(m: &Matrix) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            row_ptr,
            cols,
            vals,
        }
    }

    /// `out += s·Mx`
    fn mul_add(&self, x: &[f64], s: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o += s * acc;
        }
    }
}

struct Stepper {
    a: Csr,
    n_list: Vec<Csr>,
    c: Csr,
    order: usize,
    outputs: usize,
    /// `B·u(tᵢ)` for every grid point.
    forcing: Vec<Vec<f64>>,
}

impl Stepper {
    fn new(sys: &StochasticSystem, inputs: &[Vec<f64>]) -> Self {
        let forcing = inputs.iter().map(|u| sys.b.mul_vec(u)).collect();
        Self {
            a: Csr::from_dense(&sys.a),
            n_list: sys.n_list.iter().map(Csr::from_dense).collect(),
            c: Csr::from_dense(&sys.c),
            order: sys.order(),
            outputs: sys.c.rows(),
            forcing,
        }
    }

    /// One Euler–Maruyama step `x ← x + (Ax + Bu)dt + ΣNⱼx ΔWⱼ`.
    fn step(&self, x: &mut Vec<f64>, scratch: &mut Vec<f64>, i: usize, dt: f64, dw: &[f64]) {
        scratch.clear();
        scratch.extend_from_slice(x);
        self.a.mul_add(x, dt, scratch);
        for (s, f) in scratch.iter_mut().zip(&self.forcing[i]) {
            *s += dt * f;
        }
        for (nj, w) in self.n_list.iter().zip(dw) {
            nj.mul_add(x, *w, scratch);
        }
        std::mem::swap(x, scratch);
    }

    fn output(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.c.mul_add(x, 1.0, out);
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

struct PathRecord {
    samples: Vec<f64>,
    integral: f64,
    blown: bool,
}

/// Sample mean and its standard error.
fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Square root of a mean with the delta-method half-width.
fn sqrt_estimate(mean: f64, se: f64) -> Estimate {
    let value = mean.max(0.0).sqrt();
    let half_width = if value > 0.0 {
        se / (2.0 * value)
    } else {
        se.sqrt()
    };
    Estimate { value, half_width }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Simulates `full` and `reduced` from zero initial states with the same
/// Wiener increments and input, recording `‖y − y_r‖`.
pub fn simulate_pair(
    full: &StochasticSystem,
    reduced: &StochasticSystem,
    cfg: &SimConfig,
) -> Result<SimResult, Error> {
    cfg.validate()?;
    let (df, dr) = (full.dims(), reduced.dims());
    if (df.k, df.m, df.p) != (dr.k, dr.m, dr.p) {
        return Err(Error::DimensionMismatch(format!(
            "full system has (k, m, p) = ({}, {}, {}), reduced has ({}, {}, {})",
            df.k, df.m, df.p, dr.k, dr.m, dr.p
        )));
    }
    cfg.input.validate(df.m)?;
    let (steps, dt) = cfg.grid();
    let stride = cfg.stride(steps);
    let inputs: Vec<Vec<f64>> = (0..=steps)
        .map(|i| cfg.input.eval(i as f64 * dt, df.m))
        .collect();
    let sf = Stepper::new(full, &inputs);
    let sr = Stepper::new(reduced, &inputs);
    let sqrt_dt = dt.sqrt();

    let records: Vec<PathRecord> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(cfg.seed, path);
            let mut x = vec![0.0; sf.order];
            let mut xr = vec![0.0; sr.order];
            let mut scratch = Vec::with_capacity(sf.order.max(sr.order));
            let mut dw = vec![0.0; df.k];
            let mut y = vec![0.0; sf.outputs];
            let mut yr = vec![0.0; sr.outputs];
            let mut samples = Vec::with_capacity(steps / stride + 2);
            let mut integral = 0.0;
            let mut prev = 0.0;
            samples.push(0.0);
            for i in 0..steps {
                for w in dw.iter_mut() {
                    *w = sqrt_dt * rng.sample::<f64, _>(StandardNormal);
                }
                sf.step(&mut x, &mut scratch, i, dt, &dw);
                sr.step(&mut xr, &mut scratch, i, dt, &dw);
                if !(norm(&x) <= BLOW_UP && norm(&xr) <= BLOW_UP) {
                    return PathRecord {
                        samples,
                        integral,
                        blown: true,
                    };
                }
                sf.output(&x, &mut y);
                sr.output(&xr, &mut yr);
                let e2: f64 = y.iter().zip(&yr).map(|(a, b)| (a - b).powi(2)).sum();
                integral += 0.5 * dt * (prev + e2);
                prev = e2;
                if (i + 1) % stride == 0 || i + 1 == steps {
                    samples.push(e2.sqrt());
                }
            }
            PathRecord {
                samples,
                integral,
                blown: false,
            }
        })
        .collect();

    let blown_up: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.blown)
        .map(|(i, _)| i)
        .collect();
    let alive: Vec<&PathRecord> = records.iter().filter(|r| !r.blown).collect();
    if alive.is_empty() {
        return Err(Error::SimulationBlowUp { paths: cfg.n_paths });
    }

    let mut times: Vec<f64> = (0..=steps).step_by(stride).map(|i| i as f64 * dt).collect();
    if steps % stride != 0 {
        times.push(steps as f64 * dt);
    }
    let n_rec = times.len();
    let (mut mean_error, mut q05, mut q50, mut q95) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut column = Vec::with_capacity(alive.len());
    for j in 0..n_rec {
        column.clear();
        column.extend(alive.iter().map(|r| r.samples[j]));
        mean_error.push(column.iter().sum::<f64>() / column.len() as f64);
        column.sort_by(f64::total_cmp);
        q05.push(quantile(&column, 0.05));
        q50.push(quantile(&column, 0.5));
        q95.push(quantile(&column, 0.95));
    }

    let integrals: Vec<f64> = alive.iter().map(|r| r.integral).collect();
    let (m, se) = mean_se(&integrals);
    let u2: Vec<f64> = inputs
        .iter()
        .map(|u| u.iter().map(|v| v * v).sum())
        .collect();
    let input_sq: f64 = u2.windows(2).map(|w| 0.5 * dt * (w[0] + w[1])).sum();

    Ok(SimResult {
        times,
        mean_error,
        q05,
        q50,
        q95,
        input_norm: Estimate {
            value: input_sq.sqrt(),
            half_width: 0.0,
        },
        error_norm: sqrt_estimate(m, se),
        blown_up,
        n_paths: cfg.n_paths,
    })
}

/// CSV with columns `t, mean_error, q05, q50, q95` at 17 significant digits.
pub fn trajectory_csv(res: &SimResult) -> String {
    let mut out = String::from("t,mean_error,q05,q50,q95\n");
    for i in 0..res.times.len() {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            res.times[i], res.mean_error[i], res.q05[i], res.q50[i], res.q95[i]
        );
    }
    out
}

pub fn write_trajectory_csv(res: &SimResult, path: impl AsRef<Path>) -> Result<(), Error> {
    write_atomic(path, trajectory_csv(res).as_bytes())
}

/// Samples of `E‖x(t)‖² = tr P(t)` and the final second moment.
#[derive(Clone, Debug)]
pub struct MomentTrajectory {
    pub times: Vec<f64>,
    pub trace: Vec<f64>,
    pub final_moment: SymMatrix,
}

fn moment_rhs(a: &Matrix, n_list: &[Matrix], p: &Matrix) -> Matrix {
    let ap = a.matmul(p);
    let mut out = &ap + &ap.transpose();
    for nj in n_list {
        out.axpy(1.0, &nj.matmul(p).matmul_tr(nj));
    }
    out
}

fn rk4_traces(
    a: &Matrix,
    n_list: &[Matrix],
    p0: &Matrix,
    steps: usize,
    dt: f64,
    every: usize,
) -> (Vec<f64>, Matrix) {
    let mut p = p0.clone();
    let mut traces = vec![p.trace()];
    for i in 0..steps {
        let k1 = moment_rhs(a, n_list, &p);
        let mut tmp = p.clone();
        tmp.axpy(0.5 * dt, &k1);
        let k2 = moment_rhs(a, n_list, &tmp);
        let mut tmp = p.clone();
        tmp.axpy(0.5 * dt, &k2);
        let k3 = moment_rhs(a, n_list, &tmp);
        let mut tmp = p.clone();
        tmp.axpy(dt, &k3);
        let k4 = moment_rhs(a, n_list, &tmp);
        p.axpy(dt / 6.0, &k1);
        p.axpy(dt / 3.0, &k2);
        p.axpy(dt / 3.0, &k3);
        p.axpy(dt / 6.0, &k4);
        if (i + 1) % every == 0 {
            traces.push(p.trace());
        }
    }
    (traces, p.symmetrized())
}

/// Classical RK4 on the second-moment equation, checked against a run with
/// half the step.
pub fn moment_propagate(
    a: &Matrix,
    n_list: &[Matrix],
    p0: &SymMatrix,
    t_final: f64,
    dt: f64,
) -> Result<MomentTrajectory, Error> {
    if !(dt > 0.0) || !(t_final >= dt) {
        return Err(Error::Domain(format!(
            "need dt > 0 and t_final >= dt, got dt = {dt}, t_final = {t_final}"
        )));
    }
    if p0.dim() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "P0 has order {}, A has order {}",
            p0.dim(),
            a.rows()
        )));
    }
    let steps = (t_final / dt).round().max(1.0) as usize;
    let h = t_final / steps as f64;
    let p0d = p0.to_dense();
    let (trace, p) = rk4_traces(a, n_list, &p0d, steps, h, 1);
    let (half, _) = rk4_traces(a, n_list, &p0d, 2 * steps, 0.5 * h, 2);
    let scale = trace.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let consistent = trace
        .iter()
        .zip(&half)
        .all(|(t, s)| t.is_finite() && (t - s).abs() <= 1e-6 * scale);
    if !consistent {
        return Err(Error::StepInstability { dt: h });
    }
    Ok(MomentTrajectory {
        times: (0..=steps).map(|i| i as f64 * h).collect(),
        trace,
        final_moment: SymMatrix::from_dense(&p),
    })
}

/// Monte Carlo estimate of `E‖x(t)‖²` at the recorded times.
#[derive(Clone, Debug)]
pub struct MomentEstimate {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
}

/// Initial states for moment estimation.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    Fixed(Vec<f64>),
    /// Uniform on the unit sphere, so `E x₀x₀ᵀ = I/n`.
    UniformSphere,
}

/// `E‖x(t)‖²` for `dx = Ax dt + ΣNⱼx dwⱼ`; `cfg.input` is ignored.
pub fn mc_second_moment(
    a: &Matrix,
    n_list: &[Matrix],
    x0: &InitialState,
    cfg: &SimConfig,
) -> Result<MomentEstimate, Error> {
    cfg.validate()?;
    let n = a.rows();
    if let InitialState::Fixed(v) = x0 {
        if v.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "initial state has length {}, system order {n}",
                v.len()
            )));
        }
    }
    let sys = StochasticSystem::new(
        a.clone(),
        n_list.to_vec(),
        Matrix::zeros(n, 1),
        Matrix::zeros(1, n),
    )?;
    let (steps, dt) = cfg.grid();
    let stride = cfg.stride(steps);
    let stepper = Stepper::new(&sys, &vec![vec![0.0]; steps + 1]);
    let k = n_list.len();
    let sqrt_dt = dt.sqrt();

    let paths: Vec<Option<Vec<f64>>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(cfg.seed, path);
            let mut x = match x0 {
                InitialState::Fixed(v) => v.clone(),
                InitialState::UniformSphere => loop {
                    let v: Vec<f64> = (0..n)
                        .map(|_| rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    let r = norm(&v);
                    if r > 0.0 {
                        break v.iter().map(|c| c / r).collect();
                    }
                },
            };
            let mut scratch = Vec::with_capacity(n);
            let mut dw = vec![0.0; k];
            let mut samples = vec![norm(&x).powi(2)];
            for i in 0..steps {
                for w in dw.iter_mut() {
                    *w = sqrt_dt * rng.sample::<f64, _>(StandardNormal);
                }
                stepper.step(&mut x, &mut scratch, i, dt, &dw);
                let r = norm(&x);
                if !(r <= BLOW_UP) {
                    return None;
                }
                if (i + 1) % stride == 0 || i + 1 == steps {
                    samples.push(r * r);
                }
            }
            Some(samples)
        })
        .collect();
    let alive: Vec<&Vec<f64>> = paths.iter().flatten().collect();
    if alive.is_empty() {
        return Err(Error::SimulationBlowUp { paths: cfg.n_paths });
    }
    let mut times: Vec<f64> = (0..=steps).step_by(stride).map(|i| i as f64 * dt).collect();
    if steps % stride != 0 {
        times.push(steps as f64 * dt);
    }
    let mut mean = Vec::with_capacity(times.len());
    let mut std_err = Vec::with_capacity(times.len());
    let mut column = Vec::with_capacity(alive.len());
    for j in 0..times.len() {
        column.clear();
        column.extend(alive.iter().map(|s| s[j]));
        let (m, se) = mean_se(&column);
        mean.push(m);
        std_err.push(se);
    }
    Ok(MomentEstimate {
        times,
        mean,
        std_err,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmpiricalVerdict {
    Stable,
    Unstable,
}

#[derive(Clone, Debug)]
pub struct EmpiricalStability {
    pub verdict: EmpiricalVerdict,
    /// Slope of `log E‖x(t)‖²` against `t`.
    pub slope: f64,
    pub r_squared: f64,
    pub moments: MomentEstimate,
}

/// Mean-square stability from the sign of a log-linear fit of the Monte Carlo
/// second moment started on the unit sphere.
///
/// Fits with `R² < 0.5` or a total change `|slope|·T < 1` are inconclusive.
pub fn empirical_ms_stable(
    a: &Matrix,
    n_list: &[Matrix],
    cfg: &SimConfig,
) -> Result<EmpiricalStability, Error> {
    let moments = mc_second_moment(a, n_list, &InitialState::UniformSphere, cfg)?;
    let pts: Vec<(f64, f64)> = moments
        .times
        .iter()
        .zip(&moments.mean)
        .filter(|(_, m)| **m > 0.0 && m.is_finite())
        .map(|(t, m)| (*t, m.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InconclusiveFit {
            slope: f64::NAN,
            r_squared: 0.0,
        });
    }
    let np = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / np;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / np;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - ym).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        0.0
    };
    let span = pts.last().unwrap().0 - pts[0].0;
    if r_squared < 0.5 || slope.abs() * span < 1.0 {
        return Err(Error::InconclusiveFit { slope, r_squared });
    }
    let verdict = if slope < 0.0 {
        EmpiricalVerdict::Stable
    } else {
        EmpiricalVerdict::Unstable
    };
    Ok(EmpiricalStability {
        verdict,
        slope,
        r_squared,
        moments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{example_noerrbound, example_two_state};

    fn cfg(t_final: f64, dt: f64, n_paths: usize) -> SimConfig {
        SimConfig {
            t_final,
            dt,
            n_paths,
            seed: 7,
            input: InputSpec::Constant(vec![1.0]),
            record_stride: None,
        }
    }

    #[test]
    fn identical_pair_has_zero_error() {
        let sys = example_two_state();
        let res = simulate_pair(&sys, &sys, &cfg(2.0, 1e-2, 50)).unwrap();
        assert!(res.mean_error.iter().all(|&e| e == 0.0));
        assert_eq!(res.error_norm.value, 0.0);
        assert!((res.input_norm.value - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let sys = example_two_state();
        let mut red = sys.clone();
        red.c = red.c.scale(0.5);
        let mut c = cfg(1.0, 1e-2, 20);
        c.input = InputSpec::Zero;
        let res = simulate_pair(&sys, &red, &c).unwrap();
        assert!(res.q95.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn reproducible_and_schedule_independent() {
        let sys = example_two_state();
        let mut red = sys.clone();
        red.a[(0, 0)] = -1.5;
        let c = cfg(1.0, 1e-2, 64);
        let r1 = simulate_pair(&sys, &red, &c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let r2 = pool.install(|| simulate_pair(&sys, &red, &c).unwrap());
        assert_eq!(r1, r2);
        assert_eq!(trajectory_csv(&r1), trajectory_csv(&r2));
        let mut other = c.clone();
        other.seed = 8;
        assert_ne!(simulate_pair(&sys, &red, &other).unwrap(), r1);
    }

    #[test]
    fn single_path_and_records() {
        let sys = example_two_state();
        let mut c = cfg(1.0, 0.1, 1);
        c.record_stride = Some(3);
        let res = simulate_pair(&sys, &sys, &c).unwrap();
        assert_eq!(res.times.len(), 5);
        assert!((res.times[4] - 1.0).abs() < 1e-12);
        assert_eq!(res.error_norm.half_width, 0.0);
        assert_eq!(trajectory_csv(&res).lines().count(), 6);
    }

    #[test]
    fn table_input_interpolates() {
        let u = InputSpec::Table {
            times: vec![0.0, 1.0],
            values: vec![vec![0.0], vec![2.0]],
        };
        assert_eq!(u.eval(0.5, 1), vec![1.0]);
        assert_eq!(u.eval(-1.0, 1), vec![0.0]);
        assert_eq!(u.eval(3.0, 1), vec![2.0]);
        assert!(InputSpec::Constant(vec![1.0, 2.0]).validate(1).is_err());
    }

    #[test]
    fn invalid_configs() {
        let sys = example_two_state();
        assert!(simulate_pair(&sys, &sys, &cfg(1.0, 0.0, 1)).is_err());
        assert!(simulate_pair(&sys, &sys, &cfg(1e-3, 1e-2, 1)).is_err());
        assert!(simulate_pair(&sys, &sys, &cfg(1.0, 1e-2, 0)).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let sys = StochasticSystem::new(
            Matrix::from_rows(&[[50.0]]),
            vec![Matrix::zeros(1, 1)],
            Matrix::from_rows(&[[1.0]]),
            Matrix::from_rows(&[[1.0]]),
        )
        .unwrap();
        assert!(matches!(
            simulate_pair(&sys, &sys, &cfg(2.0, 1e-2, 3)),
            Err(Error::SimulationBlowUp { paths: 3 })
        ));
    }

    #[test]
    fn moments_decay_for_example1() {
        let sys = example_noerrbound(2.0).unwrap();
        let traj =
            moment_propagate(&sys.a, &sys.n_list, &SymMatrix::identity(2), 20.0, 1e-2).unwrap();
        assert!(traj.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(*traj.trace.last().unwrap() < 1e-6);
    }

    #[test]
    fn marginal_moment_is_constant() {
        let a = Matrix::from_diag(&[-1.0, -1.0]);
        let n = Matrix::from_diag(&[2f64.sqrt(), 2f64.sqrt()]);
        let traj = moment_propagate(&a, &[n], &SymMatrix::identity(2), 5.0, 1e-2).unwrap();
        assert!(traj.trace.iter().all(|t| (t - 2.0).abs() < 1e-12));
    }

    #[test]
    fn deterministic_moment_matches_exponential() {
        let a = Matrix::from_rows(&[[-1.0, 2.0], [0.0, -3.0]]);
        let traj = moment_propagate(
            &a,
            &[Matrix::zeros(2, 2)],
            &SymMatrix::identity(2),
            1.0,
            1e-3,
        )
        .unwrap();
        // e^{At} = [[e^{-t}, e^{-t} − e^{-3t}], [0, e^{-3t}]]
        let (e1, e3) = ((-1f64).exp(), (-3f64).exp());
        let m = Matrix::from_rows(&[[e1, e1 - e3], [0.0, e3]]);
        let exact = m.matmul_tr(&m);
        assert!(traj.final_moment.to_dense().max_abs_diff(&exact) < 1e-10);
    }

    #[test]
    fn coarse_step_is_rejected() {
        let a = Matrix::from_diag(&[-100.0]);
        let r = moment_propagate(
            &a,
            &[Matrix::zeros(1, 1)],
            &SymMatrix::identity(1),
            1.0,
            0.1,
        );
        assert!(matches!(r, Err(Error::StepInstability { .. })));
    }

    #[test]
    fn empirical_verdicts() {
        let sys = example_noerrbound(2.0).unwrap();
        let c = SimConfig {
            t_final: 3.0,
            dt: 1e-3,
            n_paths: 500,
            seed: 1,
            input: InputSpec::Zero,
            record_stride: Some(50),
        };
        let st = empirical_ms_stable(&sys.a, &sys.n_list, &c).unwrap();
        assert_eq!(st.verdict, EmpiricalVerdict::Stable);
        let up =
            empirical_ms_stable(&Matrix::from_rows(&[[1.0]]), &[Matrix::zeros(1, 1)], &c).unwrap();
        assert_eq!(up.verdict, EmpiricalVerdict::Unstable);
        assert!((up.slope - 2.0).abs() < 0.05);
    }

    #[test]
    fn marginal_is_inconclusive() {
        let a = Matrix::from_diag(&[-1.0, -1.0]);
        let n = Matrix::from_diag(&[2f64.sqrt(), 2f64.sqrt()]);
        let c = SimConfig {
            t_final: 1.0,
            dt: 1e-3,
            n_paths: 4000,
            seed: 3,
            input: InputSpec::Zero,
            record_stride: Some(20),
        };
        match empirical_ms_stable(&a, &[n], &c) {
            Err(Error::InconclusiveFit { .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
