use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Result};
use clap::ValueEnum;
use stochbt::balancing::{
    balance_system, reduce_balanced, Balanced, PSource, PipelineOptions, PipelineResult,
};
use stochbt::gramians::{check_pair, type1_gramians, GramianKind, ObjectiveChoice};
use stochbt::hinf::{build_error_system, hinf_norm, truncation_error_norm, HinfResult};
use stochbt::lyapunov::{is_ms_stable, spectral_abscissa};
use stochbt::sim::{simulate_pair, trajectory_csv, InputSpec, SimConfig};
use stochbt::system::{build_ladder, load, to_json_string, LadderParams};
use stochbt::StochasticSystem;

use crate::output::{matrix_csv, num, sigma_csv, Run};
use crate::source::{Source, SystemArgs};
use crate::{GramianArgs, KindArg, ObjectiveArg, OrderArgs, PSourceArg};

pub struct Context {
    pub out: PathBuf,
    pub seed: u64,
    pub tol: f64,
}

pub struct SimArgs {
    pub t_final: f64,
    pub dt: f64,
    pub paths: usize,
    pub input: Option<Vec<f64>>,
    pub stride: Option<usize>,
}

fn kind_of(arg: KindArg) -> GramianKind {
    match arg {
        KindArg::One => GramianKind::TypeI,
        KindArg::Two => GramianKind::TypeII,
    }
}

fn pipeline_options(src: &Source, gram: &GramianArgs) -> Result<(PipelineOptions, &'static str)> {
    let choice = gram.p_source.unwrap_or(if src.reference_p.is_some() {
        PSourceArg::Given
    } else {
        PSourceArg::Optimize
    });
    let (p_source, label) = match choice {
        PSourceArg::Optimize => (PSource::Optimize, "optimize"),
        PSourceArg::Baseline => (PSource::Baseline, "baseline"),
        PSourceArg::Given => match &src.reference_p {
            Some(p) => (PSource::Given(p.clone()), "given"),
            None => {
                bail!("--p-source given needs a builtin that carries a Gramian (sec4a, example2)")
            }
        },
    };
    let objective = match gram.objective {
        ObjectiveArg::Auto => ObjectiveChoice::Auto,
        ObjectiveArg::TraceP => ObjectiveChoice::TraceP,
        ObjectiveArg::TracePq => ObjectiveChoice::TracePQ,
    };
    let opts = PipelineOptions {
        group_tol: gram.group_tol,
        p_source,
        objective,
        strict: gram.strict,
        ..Default::default()
    };
    Ok((opts, label))
}

fn record_gramian_config(run: &mut Run, src: &Source, gram: &GramianArgs, p_label: &str) {
    run.set("system", &src.label);
    run.set("kind", kind_of(gram.kind));
    if gram.kind == KindArg::Two {
        run.set("p_source", p_label);
        run.set("objective", value_name(gram.objective));
    }
    run.set("group_tol", num(gram.group_tol));
    run.set("strict", gram.strict);
}

fn value_name(v: impl ValueEnum) -> String {
    v.to_possible_value()
        .map(|p| p.get_name().to_string())
        .unwrap_or_default()
}

fn bracket(h: &HinfResult) -> String {
    format!("[{}, {}]", num(h.gamma_lo), num(h.gamma_hi))
}

pub fn stability(ctx: &Context, args: &SystemArgs) -> Result<u8> {
    let src = args.resolve()?;
    let sys = &src.system;
    let mut run = Run::new(&ctx.out, "stability")?;
    run.set("system", &src.label);
    let verdict = is_ms_stable(&sys.a, &sys.n_list)?;
    let alpha = spectral_abscissa(&sys.a, &sys.n_list, 1e-8)?;
    let mut report = String::new();
    let _ = writeln!(report, "system: {}", src.label);
    let _ = writeln!(report, "mean-square stable: {}", verdict.stable);
    let _ = writeln!(report, "spectral abscissa: {}", num(alpha));
    match &verdict.certificate {
        Some(x) => {
            let _ = writeln!(report, "certificate norm: {}", num(x.frobenius_norm()));
        }
        None if verdict.marginal => {
            report.push_str("operator is singular: stability margin zero\n")
        }
        None => report.push_str("no positive definite certificate\n"),
    }
    print!("{report}");
    run.write("stability.txt", &report)?;
    run.finish()?;
    Ok(if verdict.stable { 0 } else { 2 })
}

pub fn gramians(ctx: &Context, args: &SystemArgs, gram: &GramianArgs) -> Result<u8> {
    let src = args.resolve()?;
    let (opts, p_label) = pipeline_options(&src, gram)?;
    let mut run = Run::new(&ctx.out, "gramians")?;
    record_gramian_config(&mut run, &src, gram, p_label);
    let bal = balance_system(&src.system, kind_of(gram.kind), &opts)?;
    let check = check_pair(&src.system, &bal.pair)?;
    run.write("P.csv", &matrix_csv(&bal.pair.p.to_dense()))?;
    run.write("Q.csv", &matrix_csv(&bal.pair.q.to_dense()))?;
    run.write("sigma.csv", &sigma_csv(&bal.form.sigma))?;

    let mut report = String::new();
    let _ = writeln!(report, "system: {}", src.label);
    let _ = writeln!(report, "kind: {}", bal.pair.kind);
    let _ = writeln!(report, "P positive definite: {}", check.p_pd);
    let _ = writeln!(report, "Q positive definite: {}", check.q_pd);
    let _ = writeln!(
        report,
        "observability slack: {:?} (min eig {})",
        check.slack_q.class,
        num(check.slack_q.min_eig)
    );
    let _ = writeln!(
        report,
        "reachability slack: {:?} (min eig {})",
        check.slack_p.class,
        num(check.slack_p.min_eig)
    );
    let _ = writeln!(report, "groups: {}", bal.form.group_count());
    let _ = writeln!(report, "numerical rank: {}", bal.form.n_eff);
    if let Some(lmi) = &bal.lmi {
        let _ = writeln!(report, "lmi objective: {}", num(lmi.objective));
        let _ = writeln!(
            report,
            "lmi stages: {}, newton steps: {}",
            lmi.stages, lmi.newton_steps
        );
        let _ = writeln!(report, "lmi gap estimate: {}", num(lmi.kkt_residual));
    }
    for f in &check.failures {
        let _ = writeln!(report, "failed: {f}");
    }
    print!("{report}");
    run.write("check.txt", &report)?;
    run.finish()?;
    Ok(if check.passed() { 0 } else { 2 })
}

fn resolve_groups(bal: &Balanced, order: &OrderArgs) -> Result<usize> {
    let form = &bal.form;
    match (order.r, order.states) {
        (Some(r), _) => Ok(r as usize),
        (None, Some(states)) => {
            let groups = form.groups_for_states(states as usize);
            let kept = form.states_in_groups(groups);
            if groups == 0 {
                bail!("no group boundary at or below {states} states");
            }
            if kept != states as usize {
                eprintln!("warning: {states} states splits a singular-value group; keeping {kept} states ({groups} groups)");
            }
            Ok(groups)
        }
        (None, None) => bail!("one of --r or --states is required"),
    }
}

fn summary_text(
    src: &Source,
    res: &PipelineResult,
    full_stable: bool,
    error: Option<&HinfResult>,
) -> String {
    let red = &res.reduction;
    let tail: f64 = red.truncated_sigma.iter().sum();
    let mut s = String::new();
    let _ = writeln!(s, "system: {}", src.label);
    let _ = writeln!(s, "kind: {}", red.kind);
    let _ = writeln!(
        s,
        "groups kept: {} of {}",
        red.r_groups,
        res.balanced.form.group_count()
    );
    let _ = writeln!(s, "states kept: {} of {}", red.r_state, src.system.order());
    let _ = writeln!(s, "sum of truncated sigma: {}", num(tail));
    match red.bound {
        Some(b) => {
            let _ = writeln!(s, "error bound: {}", num(b));
        }
        None => s.push_str("error bound: none for type I\n"),
    }
    let _ = writeln!(s, "separation: {}", num(res.separation));
    let _ = writeln!(s, "full system stable: {full_stable}");
    let _ = writeln!(s, "reduced system stable: {}", res.reduced_stable);
    if let Some(e) = error {
        let _ = writeln!(s, "error norm: {} ({:?})", bracket(e), e.status);
    }
    s
}

pub fn reduce(
    ctx: &Context,
    args: &SystemArgs,
    gram: &GramianArgs,
    order: &OrderArgs,
    error: bool,
) -> Result<u8> {
    let src = args.resolve()?;
    let (opts, p_label) = pipeline_options(&src, gram)?;
    let mut run = Run::new(&ctx.out, "reduce")?;
    record_gramian_config(&mut run, &src, gram, p_label);
    let bal = balance_system(&src.system, kind_of(gram.kind), &opts)?;
    let r_groups = resolve_groups(&bal, order)?;
    run.set("r_groups", r_groups);
    run.set("error", error);
    if error {
        run.set("tol", num(ctx.tol));
    }
    let res = reduce_balanced(&src.system, &bal, r_groups)?;
    let full_stable = is_ms_stable(&src.system.a, &src.system.n_list)?.stable;
    let err = if error {
        Some(truncation_error_norm(&src.system, &res.reduction, ctx.tol)?.norm)
    } else {
        None
    };
    let summary = summary_text(&src, &res, full_stable, err.as_ref());
    print!("{summary}");
    run.write("reduced.json", &to_json_string(&res.reduction.reduced))?;
    run.write("sigma.csv", &sigma_csv(&bal.form.sigma))?;
    run.write("summary.txt", &summary)?;
    run.finish()?;
    Ok(0)
}

pub fn sweep(
    ctx: &Context,
    args: &SystemArgs,
    gram: &GramianArgs,
    from: usize,
    step: usize,
    error: bool,
) -> Result<u8> {
    if from == 0 || step == 0 {
        bail!("--from and --step must be positive");
    }
    let src = args.resolve()?;
    let (opts, p_label) = pipeline_options(&src, gram)?;
    let mut run = Run::new(&ctx.out, "reduce-sweep")?;
    record_gramian_config(&mut run, &src, gram, p_label);
    run.set("from", from);
    run.set("step", step);
    run.set("error", error);
    if error {
        run.set("tol", num(ctx.tol));
    }
    let bal = balance_system(&src.system, kind_of(gram.kind), &opts)?;
    let form = &bal.form;
    let top = form
        .groups_for_states(form.n_eff)
        .min(form.group_count() - 1);
    let mut csv = String::from(
        "r_groups,r_state,sigma_tail,two_sigma_bound,error_lo,error_hi,reduced_stable\n",
    );
    for r in (from..=top).step_by(step) {
        let res = reduce_balanced(&src.system, &bal, r)?;
        let red = &res.reduction;
        let two_tail = 2.0
            * form.groups[r..]
                .iter()
                .map(|g| form.sigma[g.start])
                .sum::<f64>();
        let (lo, hi) = if error {
            let e = truncation_error_norm(&src.system, red, ctx.tol)?.norm;
            (num(e.gamma_lo), num(e.gamma_hi))
        } else {
            (String::new(), String::new())
        };
        let tail: f64 = red.truncated_sigma.iter().sum();
        let _ = writeln!(
            csv,
            "{r},{},{},{},{lo},{hi},{}",
            red.r_state,
            num(tail),
            num(two_tail),
            res.reduced_stable
        );
        println!(
            "r = {r:3} ({:3} states)  2Σσ = {}  error = [{lo}, {hi}]  stable = {}",
            red.r_state,
            num(two_tail),
            res.reduced_stable
        );
    }
    run.write("sigma.csv", &sigma_csv(&form.sigma))?;
    run.write("bounds_vs_error.csv", &csv)?;
    run.finish()?;
    Ok(0)
}

pub fn hinf(ctx: &Context, args: &SystemArgs, reduced: Option<&Path>) -> Result<u8> {
    let src = args.resolve()?;
    let mut run = Run::new(&ctx.out, "hinf")?;
    run.set("system", &src.label);
    run.set("tol", num(ctx.tol));
    let target = match reduced {
        Some(path) => {
            run.set("reduced", path.display());
            build_error_system(&src.system, &load(path)?)?.system
        }
        None => src.system.clone(),
    };
    let res = hinf_norm(&target, ctx.tol)?;
    let report = format!(
        "norm: {}\nstatus: {:?}\nnewton iterations: {}\n",
        bracket(&res),
        res.status,
        res.iterations
    );
    print!("{report}");
    run.write("hinf.txt", &report)?;
    run.finish()?;
    Ok(0)
}

pub fn simulate(
    ctx: &Context,
    args: &SystemArgs,
    reduced: Option<&Path>,
    gram: &GramianArgs,
    order: &OrderArgs,
    sim: &SimArgs,
) -> Result<u8> {
    let src = args.resolve()?;
    let mut run = Run::new(&ctx.out, "simulate")?;
    let reduced_sys: StochasticSystem = match reduced {
        Some(path) => {
            run.set("system", &src.label);
            run.set("reduced", path.display());
            load(path)?
        }
        None => {
            let (opts, p_label) = pipeline_options(&src, gram)?;
            record_gramian_config(&mut run, &src, gram, p_label);
            let bal = balance_system(&src.system, kind_of(gram.kind), &opts)?;
            let r_groups = resolve_groups(&bal, order)?;
            run.set("r_groups", r_groups);
            let res = reduce_balanced(&src.system, &bal, r_groups)?;
            if let Some(b) = res.reduction.bound {
                println!("error bound: {}", num(b));
            }
            run.write("reduced.json", &to_json_string(&res.reduction.reduced))?;
            res.reduction.reduced
        }
    };
    let m = src.system.dims().m;
    let input = sim.input.clone().unwrap_or_else(|| vec![1.0; m]);
    if input.len() != m {
        bail!(
            "--input has {} values but the system has {m} inputs",
            input.len()
        );
    }
    let cfg = SimConfig {
        t_final: sim.t_final,
        dt: sim.dt,
        n_paths: sim.paths,
        seed: ctx.seed,
        input: InputSpec::Constant(input.clone()),
        record_stride: sim.stride,
    };
    run.set("t_final", num(cfg.t_final));
    run.set("dt", num(cfg.dt));
    run.set("paths", cfg.n_paths);
    run.set("seed", cfg.seed);
    run.set(
        "input",
        input.iter().map(|v| num(*v)).collect::<Vec<_>>().join(","),
    );
    if let Some(s) = sim.stride {
        run.set("stride", s);
    }
    let res = simulate_pair(&src.system, &reduced_sys, &cfg)?;
    let mut report = String::new();
    let _ = writeln!(report, "input norm: {}", num(res.input_norm.value));
    let _ = writeln!(
        report,
        "error norm: {} ± {}",
        num(res.error_norm.value),
        num(res.error_norm.half_width)
    );
    if let Some(g) = res.gain() {
        let _ = writeln!(report, "gain: {} ± {}", num(g.value), num(g.half_width));
    }
    let peak = res.mean_error.iter().fold(0.0f64, |a, &b| a.max(b));
    let _ = writeln!(report, "max mean error: {}", num(peak));
    let _ = writeln!(
        report,
        "paths blown up: {} of {}",
        res.blown_up.len(),
        res.n_paths
    );
    print!("{report}");
    run.write("trajectory.csv", &trajectory_csv(&res))?;
    run.write("norms.txt", &report)?;
    run.finish()?;
    Ok(0)
}

pub fn bench(ctx: &Context, sizes: &[usize]) -> Result<u8> {
    let mut run = Run::new(&ctx.out, "bench")?;
    run.set(
        "sizes",
        sizes
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    run.set("tol", num(ctx.tol));
    let mut csv = String::from("stage,n,seconds\n");
    for &n in sizes {
        let sys = build_ladder(n, LadderParams::default())?;
        let mut time = |stage: &str, f: &mut dyn FnMut() -> Result<()>| -> Result<()> {
            let start = Instant::now();
            f()?;
            let secs = start.elapsed().as_secs_f64();
            println!("n = {n:4}  {stage:<16} {secs:.4} s");
            let _ = writeln!(csv, "{stage},{n},{}", num(secs));
            Ok(())
        };
        time("stability", &mut || {
            Ok(is_ms_stable(&sys.a, &sys.n_list).map(|_| ())?)
        })?;
        time("type1_gramians", &mut || {
            Ok(type1_gramians(&sys).map(|_| ())?)
        })?;
        time("type2_balance", &mut || {
            Ok(
                balance_system(&sys, GramianKind::TypeII, &PipelineOptions::default())
                    .map(|_| ())?,
            )
        })?;
        time("hinf_norm", &mut || {
            Ok(hinf_norm(&sys, ctx.tol).map(|_| ())?)
        })?;
    }
    run.write("bench.csv", &csv)?;
    run.finish()?;
    Ok(0)
}
