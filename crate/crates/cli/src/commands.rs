//! The subcommands: single flow and discrete runs, parameter sweeps and the
//! invariant check suite.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use pdflow::diagnostics::DEFAULT_HIT_THRESHOLD;
use pdflow::discrete::run_primal_dual;
use pdflow::flow::uniform_grid;
use pdflow::linops::min_eigenvalue;
use pdflow::metric::default_sample_times;
use pdflow::vector::{dist, dot, norm};
use pdflow::{
    catalog, certify, certify_rates, discrete_trace, flow_trace, kkt_residual, operator_norm,
    run, run_chambolle_pock, sweep_summary, w0_norm_sq, ConditionReport, DenseMatrix,
    DiscreteParams, DiscreteRun, Error, FlowParams, FlowSystem, LinearMap, MetricMode,
    MetricSchedule, ProblemSpec, ProxFunction, RateCertificate, SmoothFunction, SweepEntry,
    SystemState, TauSchedule, TraceRecord,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{
    CustomProblem, FunctionSpec, MetricKind, ProblemSource, RunConfig, Scheme, StartSpec,
    TauChoice,
};
use crate::output::{
    certificate_footer, condition_footer, format_footer, plot_script, sweep_plot_script,
    write_trace, Clock,
};

/// Why a command stopped early.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or parameters; exit code 1.
    Config(String),
    /// File system trouble; exit code 1.
    Io(String),
}

impl Failure {
    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Io(m) => m,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn config_err(e: Error) -> Failure {
    Failure::Config(match e {
        Error::InvalidParameter(m) => m,
        other => other.to_string(),
    })
}

/// Exit code: 0 when every certificate holds, 2 otherwise.
pub type Code = i32;

pub const SUCCESS: Code = 0;
pub const CERTIFICATE_FAILED: Code = 2;

fn function(spec: &FunctionSpec, dim: usize) -> Result<ProxFunction, Error> {
    match spec {
        FunctionSpec::Zero => Ok(ProxFunction::zero(dim)),
        FunctionSpec::SqNorm(c) => ProxFunction::scaled_sq_norm(dim, *c),
        FunctionSpec::L1(w) => ProxFunction::l1_norm(dim, *w),
        FunctionSpec::Box { lo, hi } => {
            if lo.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: lo.len(),
                });
            }
            ProxFunction::box_indicator(lo.clone(), hi.clone())
        }
    }
}

fn read_matrix(path: &Path) -> Result<DenseMatrix, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    DenseMatrix::from_text(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn custom_problem(cp: &CustomProblem) -> Result<ProblemSpec, Failure> {
    let a = read_matrix(&cp.a_file)?;
    let (m, n) = (a.rows(), a.cols());
    let h = match &cp.least_squares {
        None => SmoothFunction::zero(n),
        Some((path, b)) => {
            SmoothFunction::least_squares(&read_matrix(path)?, b).map_err(config_err)?
        }
    };
    ProblemSpec::new(
        "custom",
        function(&cp.f, n).map_err(config_err)?,
        h,
        function(&cp.g, m).map_err(config_err)?,
        LinearMap::dense(a),
    )
    .map_err(config_err)
}

pub fn build_problem(cfg: &RunConfig) -> Result<ProblemSpec, Failure> {
    match &cfg.problem {
        ProblemSource::Catalog(name) => catalog(name).map_err(config_err),
        ProblemSource::Custom(cp) => custom_problem(cp),
    }
}

pub fn start_state(cfg: &RunConfig, p: &ProblemSpec) -> Result<SystemState, Failure> {
    let fail = |e: crate::config::ConfigError| Failure::Config(e.to_string());
    let x = cfg.start_vector(&cfg.x0, p.n(), false).map_err(fail)?;
    let y = cfg.start_vector(&cfg.y0, p.m(), true).map_err(fail)?;
    let z = match &cfg.z0 {
        StartSpec::Split => p.a.apply(&x),
        StartSpec::Zero => vec![0.0; p.m()],
        StartSpec::Values(v) if v.len() == p.m() => v.clone(),
        StartSpec::Values(v) => {
            return Err(Failure::Config(format!(
                "z0: expected {} entries, found {}",
                p.m(),
                v.len()
            )))
        }
        StartSpec::Example1Default => {
            return Err(Failure::Config("z0: use `split` for z0 = Ax0".into()))
        }
    };
    Ok(SystemState::new(x, z, y))
}

fn a_norm_sq(p: &ProblemSpec) -> Result<f64, Failure> {
    Ok(operator_norm(&p.a, 1e-13, 100_000)
        .map_err(config_err)?
        .value
        .powi(2))
}

/// Largest step with margin 0.9 satisfying `cτ‖A‖² ≤ 1` and
/// `1/τ ≥ c(3+γ)/4·‖A‖² + L_h/2`.
pub fn auto_tau_flow(p: &ProblemSpec, c: f64, gamma: f64) -> Result<f64, Failure> {
    let a2 = a_norm_sq(p)?;
    let lh = p.lipschitz_h();
    Ok(0.9 * (1.0 / (c * a2)).min(1.0 / (c * (3.0 + gamma) / 4.0 * a2 + lh / 2.0)))
}

/// `0.9/(L_h + c(2-γ)‖A‖²)`
pub fn auto_tau_discrete(p: &ProblemSpec, c: f64, gamma: f64) -> Result<f64, Failure> {
    Ok(0.9 / (p.lipschitz_h() + c * (2.0 - gamma) * a_norm_sq(p)?))
}

fn metric_mode(cfg: &RunConfig, p: &ProblemSpec, tau: TauSchedule) -> Result<MetricMode, Failure> {
    match cfg.metric {
        MetricKind::ClosedForm => Ok(MetricMode::ClosedForm { tau }),
        MetricKind::General => Ok(MetricMode::General {
            m1: MetricSchedule::tau_family(cfg.c, &p.a, tau).map_err(config_err)?,
            m2: MetricSchedule::zero(p.m()),
            inner_tol: cfg.inner_tol,
        }),
    }
}

fn describe_tau(t: &TauSchedule) -> String {
    match t {
        TauSchedule::Constant(v) => format!("{v}"),
        TauSchedule::Saturating { initial, limit } => {
            format!("saturating from {initial} to {limit}")
        }
        TauSchedule::Steps(s) => format!("{} steps", s.len()),
    }
}

fn certificate_code(cert: &RateCertificate) -> Code {
    if cert.all_ok() {
        SUCCESS
    } else {
        CERTIFICATE_FAILED
    }
}

fn write_common(out: &Path, cfg: &RunConfig, seed: u64) -> Result<(), Failure> {
    fs::create_dir_all(out)?;
    let mut text = format!("# seed = {seed}\n");
    text.push_str(&cfg.to_document().to_string());
    fs::write(out.join("config.resolved"), text)?;
    Ok(())
}

fn condition_text(rep: &ConditionReport) -> String {
    let mut s = String::from("parameter conditions\n");
    s.push_str(&indent(&format_footer(&condition_footer(rep))));
    s
}

fn indent(text: &str) -> String {
    text.lines().map(|l| format!("  {l}\n")).collect()
}

struct FlowRun {
    trace: Vec<TraceRecord>,
    states: Vec<SystemState>,
    condition: ConditionReport,
    certificate: RateCertificate,
    aborted: Option<String>,
}

fn flow_once(
    cfg: &RunConfig,
    p: &ProblemSpec,
    s0: &SystemState,
    gamma: f64,
    tau: TauSchedule,
) -> Result<FlowRun, Failure> {
    let params = FlowParams {
        c: cfg.c,
        gamma,
        mode: metric_mode(cfg, p, tau)?,
        integrator: cfg.integrator,
        horizon: cfg.horizon,
    };
    params.validate().map_err(config_err)?;
    let sys = FlowSystem::from_params(p, &params).map_err(config_err)?;
    let (m1, m2) = (sys.m1().clone(), sys.m2().clone());
    let condition = certify(
        &m1,
        &m2,
        cfg.c,
        gamma,
        &p.a,
        p.lipschitz_h(),
        &default_sample_times(cfg.horizon, 50),
    )
    .map_err(config_err)?;
    let grid = uniform_grid(cfg.horizon, cfg.sample_dt);
    let (traj, aborted) = match sys.integrate(s0, params.integrator, params.horizon, &grid) {
        Ok(t) => (t, None),
        Err(Error::IntegrationAborted { t, reason, partial }) => {
            (*partial, Some(format!("integration aborted at t = {t}: {reason}")))
        }
        Err(e) => return Err(config_err(e)),
    };
    let trace = flow_trace(&sys, &traj).map_err(config_err)?;
    let w0 = w0_norm_sq(p, &m1, &m2, cfg.c, gamma, s0).unwrap_or(0.0);
    let mut certificate =
        certify_rates(&trace, p, w0, cfg.hit_threshold).map_err(config_err)?;
    if aborted.is_some() {
        certificate.lyapunov_monotone = false;
    }
    Ok(FlowRun {
        trace,
        states: traj.states,
        condition,
        certificate,
        aborted,
    })
}

fn resolve_flow_tau(cfg: &RunConfig, p: &ProblemSpec, gamma: f64) -> Result<TauSchedule, Failure> {
    match &cfg.tau {
        TauChoice::Auto => Ok(TauSchedule::Constant(auto_tau_flow(p, cfg.c, gamma)?)),
        TauChoice::Given(t) => Ok(t.clone()),
    }
}

pub fn flow(cfg: &RunConfig, out: &Path, seed: u64) -> Result<Code, Failure> {
    let p = build_problem(cfg)?;
    let s0 = start_state(cfg, &p)?;
    let tau = resolve_flow_tau(cfg, &p, cfg.gamma)?;
    let run = flow_once(cfg, &p, &s0, cfg.gamma, tau.clone())?;
    write_common(out, cfg, seed)?;

    let mut footer = certificate_footer(&run.certificate);
    footer.extend(condition_footer(&run.condition));
    if let Some(msg) = &run.aborted {
        footer.push(("aborted".into(), msg.clone()));
    }
    let states = cfg.dump_state.then_some(run.states.as_slice());
    write_trace(&out.join("trace.csv"), Clock::Time, &run.trace, states, &footer)?;
    fs::write(out.join("plot.gp"), plot_script("trace.csv", Clock::Time))?;

    let mut report = format!(
        "flow run on {}\n  c = {}, gamma = {}, tau = {}, horizon = {}, samples = {}\n",
        p.name,
        cfg.c,
        cfg.gamma,
        describe_tau(&tau),
        cfg.horizon,
        run.trace.len()
    );
    if let Some(msg) = &run.aborted {
        let _ = writeln!(report, "  {msg}");
    }
    report.push_str(&condition_text(&run.condition));
    report.push_str("rate certificate\n");
    report.push_str(&indent(&format_footer(&certificate_footer(&run.certificate))));
    let code = certificate_code(&run.certificate);
    let _ = writeln!(report, "result: {}", verdict(code));
    fs::write(out.join("report.txt"), &report)?;
    print!("{report}");
    Ok(code)
}

fn verdict(code: Code) -> &'static str {
    if code == SUCCESS {
        "all certificates hold"
    } else {
        "certificate failure"
    }
}

pub fn discrete(cfg: &RunConfig, out: &Path, seed: u64) -> Result<Code, Failure> {
    let p = build_problem(cfg)?;
    let s0 = start_state(cfg, &p)?;
    let tau = match &cfg.tau {
        TauChoice::Auto => TauSchedule::Constant(auto_tau_discrete(&p, cfg.c, cfg.gamma)?),
        TauChoice::Given(t) => t.clone(),
    };
    let mode = metric_mode(cfg, &p, tau.clone())?;
    let d = DiscreteParams {
        c: cfg.c,
        gamma: cfg.gamma,
        mode: mode.clone(),
        max_iters: cfg.max_iters,
        stop_tol: cfg.stop_tol,
    };
    d.validate().map_err(config_err)?;
    let run: DiscreteRun = match cfg.scheme {
        Scheme::Admm => run(&p, &d, &s0),
        Scheme::PrimalDual => run_primal_dual(&p, &d, &s0),
        Scheme::ChambollePock => run_chambolle_pock(&p, &d, &s0.x, &s0.y),
    }
    .map_err(config_err)?;
    let trace = discrete_trace(&p, cfg.c, cfg.gamma, &mode, &run).map_err(config_err)?;
    let (m1, m2) = mode.schedules(cfg.c, &p.a).map_err(config_err)?;
    let w0 = w0_norm_sq(&p, &m1, &m2, cfg.c, cfg.gamma, &s0).unwrap_or(0.0);
    let mut certificate = certify_rates(&trace, &p, w0, cfg.hit_threshold).map_err(config_err)?;
    if run.stop == pdflow::StopReason::Diverged {
        certificate.lyapunov_monotone = false;
    }
    write_common(out, cfg, seed)?;

    let last = run.last();
    let mut footer = certificate_footer(&certificate);
    footer.extend([
        ("scheme".to_string(), cfg.scheme.as_str().to_string()),
        ("stop".to_string(), run.stop.to_string()),
        ("iterations".to_string(), run.iterations().to_string()),
        ("kkt_residual".to_string(), format!("{:.12e}", last.residual.max())),
    ]);
    let states: Vec<SystemState> = run.history.iter().map(|r| r.state.clone()).collect();
    let states = cfg.dump_state.then_some(states.as_slice());
    write_trace(&out.join("trace.csv"), Clock::Iteration, &trace, states, &footer)?;
    fs::write(out.join("plot.gp"), plot_script("trace.csv", Clock::Iteration))?;

    let code = certificate_code(&certificate);
    let mut report = format!(
        "{} run on {}\n  c = {}, gamma = {}, tau = {}\n  stop = {} after {} iterations, kkt residual = {:.3e}\n",
        cfg.scheme.as_str(),
        p.name,
        cfg.c,
        cfg.gamma,
        describe_tau(&tau),
        run.stop,
        run.iterations(),
        last.residual.max()
    );
    report.push_str("rate certificate\n");
    report.push_str(&indent(&format_footer(&certificate_footer(&certificate))));
    let _ = writeln!(report, "result: {}", verdict(code));
    fs::write(out.join("report.txt"), &report)?;
    print!("{report}");
    Ok(code)
}

fn jobs_pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Config(format!("cannot start {jobs} workers: {e}")))
}

fn tag(v: f64) -> String {
    v.to_string().replace('-', "m")
}

pub fn sweep(cfg: &RunConfig, out: &Path, seed: u64, jobs: usize) -> Result<Code, Failure> {
    let p = build_problem(cfg)?;
    let s0 = start_state(cfg, &p)?;
    let mut cells = Vec::new();
    for &tc in &cfg.sweep_tau_cs {
        for &g in &cfg.sweep_gammas {
            cells.push((tc, g));
        }
    }
    write_common(out, cfg, seed)?;
    let pool = jobs_pool(jobs)?;
    let results: Vec<Result<(f64, f64, FlowRun), Failure>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(tc, g)| {
                let run = flow_once(cfg, &p, &s0, g, TauSchedule::Constant(tc / cfg.c))?;
                let name = format!("trace_tauc{}_gamma{}.csv", tag(tc), tag(g));
                let mut footer = certificate_footer(&run.certificate);
                footer.push(("tau_c".into(), tc.to_string()));
                footer.push(("gamma".into(), g.to_string()));
                let states = cfg.dump_state.then_some(run.states.as_slice());
                write_trace(&out.join(&name), Clock::Time, &run.trace, states, &footer)?;
                Ok((tc, g, run))
            })
            .collect()
    });
    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        runs.push(r?);
    }

    let entries: Vec<SweepEntry> = runs
        .iter()
        .map(|(tc, g, r)| SweepEntry {
            gamma: *g,
            tau_c: *tc,
            trace: Some(r.trace.clone()),
        })
        .collect();
    let summary = sweep_summary(&entries, cfg.hit_threshold);

    let mut report = format!(
        "sweep on {} with c = {}, horizon = {}\n\n{summary}\nper-run certificates\n",
        p.name, cfg.c, cfg.horizon
    );
    let mut code = SUCCESS;
    for (tc, g, r) in &runs {
        let c = &r.certificate;
        let _ = writeln!(
            report,
            "  tau_c = {tc:<6} gamma = {g:<6} feas_bounded = {} gap_bound_ok = {} lyapunov_monotone = {} rate_condition = {}{}",
            c.feas_bounded,
            c.gap_bound_ok,
            c.lyapunov_monotone,
            r.condition.rate_condition,
            r.aborted.as_deref().map(|m| format!(" ({m})")).unwrap_or_default()
        );
        if !c.all_ok() {
            code = CERTIFICATE_FAILED;
        }
    }
    let _ = writeln!(report, "result: {}", verdict(code));
    fs::write(out.join("report.txt"), &report)?;
    let plots: Vec<(String, String)> = runs
        .iter()
        .map(|(tc, g, _)| {
            (
                format!("trace_tauc{}_gamma{}.csv", tag(*tc), tag(*g)),
                format!("tau_c={tc} gamma={g}"),
            )
        })
        .collect();
    fs::write(out.join("plot.gp"), sweep_plot_script(&plots))?;
    print!("{report}");
    Ok(code)
}

/// The example sweep from the standard starting point.
pub fn reproduce_example1(base: &RunConfig, out: &Path, seed: u64, jobs: usize) -> Result<Code, Failure> {
    let defaults = RunConfig::default();
    let cfg = RunConfig {
        problem: ProblemSource::Catalog("example1".into()),
        c: 1.0,
        metric: MetricKind::ClosedForm,
        x0: StartSpec::Example1Default,
        z0: StartSpec::Split,
        y0: StartSpec::Example1Default,
        sweep_gammas: defaults.sweep_gammas,
        sweep_tau_cs: defaults.sweep_tau_cs,
        hit_threshold: DEFAULT_HIT_THRESHOLD,
        ..base.clone()
    };
    sweep(&cfg, out, seed, jobs)
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-10.0..10.0)).collect()
}

/// Runs the invariant suite on the configured problem.
pub fn check(cfg: &RunConfig, out: Option<&Path>, seed: u64) -> Result<Code, Failure> {
    let p = build_problem(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    if let Ok((x, z, y)) = p.saddle_point() {
        let r = kkt_residual(&p, &x, &z, &y).map_err(config_err)?;
        checks.push(Check {
            name: "known saddle point",
            pass: r.max() <= 1e-9,
            detail: format!("kkt residual {:.2e}", r.max()),
        });
    }

    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let x = random_vec(&mut rng, p.n());
        let y = random_vec(&mut rng, p.m());
        let lhs = dot(&p.a.apply(&x), &y);
        let rhs = dot(&x, &p.a.apply_adjoint(&y));
        worst = worst.max((lhs - rhs).abs() / (norm(&p.a.apply(&x)) * norm(&y)).max(1.0));
    }
    checks.push(Check {
        name: "adjoint consistency",
        pass: worst <= 1e-12,
        detail: format!("worst relative defect {worst:.2e} over 200 pairs"),
    });

    let mut moreau: f64 = 0.0;
    let mut expansion: f64 = f64::NEG_INFINITY;
    for (func, dim) in [(&p.f, p.n()), (&p.g, p.m())] {
        for c in [0.1, 1.0, 10.0] {
            for _ in 0..100 {
                let u = random_vec(&mut rng, dim);
                let v = random_vec(&mut rng, dim);
                let scaled: Vec<f64> = u.iter().map(|a| a / c).collect();
                let pr = func.prox(1.0 / c, &scaled).map_err(config_err)?;
                let cp = func.conjugate_prox(c, &u).map_err(config_err)?;
                for i in 0..dim {
                    moreau = moreau.max((c * pr[i] + cp[i] - u[i]).abs());
                }
                let (pu, pv) = (
                    func.prox(c, &u).map_err(config_err)?,
                    func.prox(c, &v).map_err(config_err)?,
                );
                expansion = expansion.max(dist(&pu, &pv) - dist(&u, &v));
            }
        }
    }
    checks.push(Check {
        name: "Moreau decomposition",
        pass: moreau <= 1e-12,
        detail: format!("max defect {moreau:.2e}"),
    });
    checks.push(Check {
        name: "prox nonexpansive",
        pass: expansion <= 1e-12,
        detail: format!("worst expansion {expansion:.2e}"),
    });

    let tau = resolve_flow_tau(cfg, &p, cfg.gamma)?;
    let tau0 = tau.value(0.0);
    let mode = metric_mode(cfg, &p, tau.clone())?;
    let (m1, m2) = mode.schedules(cfg.c, &p.a).map_err(config_err)?;
    let cond = certify(
        &m1,
        &m2,
        cfg.c,
        cfg.gamma,
        &p.a,
        p.lipschitz_h(),
        &default_sample_times(cfg.horizon, 50),
    )
    .map_err(config_err)?;
    checks.push(Check {
        name: "parameter conditions",
        pass: cond.all_hold(),
        detail: format!(
            "tau = {}, cstrong alpha = {:.4}, rate condition {}",
            describe_tau(&tau),
            cond.cstrong.alpha,
            cond.rate_condition
        ),
    });

    // scalar rate test against the operator form
    let a2 = a_norm_sq(&p)?;
    let n = p.n();
    let gram = p.a.gram().to_dense();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            data[i * n + j] = id / tau0 - cfg.c * (3.0 + cfg.gamma) / 4.0 * gram.get(i, j)
                - p.lipschitz_h() / 4.0 * id;
        }
    }
    let floor = min_eigenvalue(
        &LinearMap::dense(DenseMatrix::new(n, n, data).map_err(config_err)?),
        1e-12,
    )
    .map_err(config_err)?;
    let scalar = tau0 * (p.lipschitz_h() / 4.0 + cfg.c * (3.0 + cfg.gamma) / 4.0 * a2) <= 1.0;
    checks.push(Check {
        name: "scalar rate test",
        pass: scalar == (floor >= -1e-9),
        detail: format!("scalar {scalar}, operator floor {floor:.3e}"),
    });

    if let Ok(saddle) = SystemState::saddle(&p) {
        let sys = FlowSystem::new(&p, cfg.c, cfg.gamma, &mode).map_err(config_err)?;
        let speed = sys.velocity_norm(&saddle).map_err(config_err)?;
        checks.push(Check {
            name: "saddle point stationary",
            pass: speed <= 1e-10,
            detail: format!("|Gamma| = {speed:.2e}"),
        });
    }

    let s0 = start_state(cfg, &p)?;
    let flow_run = flow_once(cfg, &p, &s0, cfg.gamma, tau.clone())?;
    let c = &flow_run.certificate;
    checks.push(Check {
        name: "Lyapunov descent",
        pass: c.lyapunov_monotone,
        detail: format!("worst relative increase {:.2e}", c.lyapunov_worst_increase),
    });
    checks.push(Check {
        name: "ergodic feasibility O(1/t)",
        pass: c.feas_bounded,
        detail: format!("max t*feas {:.4e}", c.feas_constant),
    });
    checks.push(Check {
        name: "ergodic gap bound",
        pass: c.gap_bound_ok,
        detail: format!(
            "min margin {:.3e}, {} samples checked, {} skipped",
            c.gap_bound_margin, c.gap_samples_checked, c.gap_samples_skipped
        ),
    });

    // Euler with step 1 against the discrete scheme
    let steps = 20;
    let euler = FlowParams {
        c: cfg.c,
        gamma: cfg.gamma,
        mode: mode.clone(),
        integrator: pdflow::Integrator::Euler { step: 1.0 },
        horizon: steps as f64,
    };
    let grid: Vec<f64> = (1..=steps).map(|k| k as f64).collect();
    let traj = pdflow::integrate(&p, &euler, &s0, &grid).map_err(config_err)?;
    let d = DiscreteParams {
        c: cfg.c,
        gamma: cfg.gamma,
        mode,
        max_iters: steps,
        stop_tol: 0.0,
    };
    let iters = run(&p, &d, &s0).map_err(config_err)?;
    let mut dev: f64 = 0.0;
    for (a, b) in traj.states.iter().zip(&iters.history) {
        let scale = (norm(&b.state.x) + norm(&b.state.z) + norm(&b.state.y)).max(1.0);
        dev = dev.max(
            (dist(&a.x, &b.state.x) + dist(&a.z, &b.state.z) + dist(&a.y, &b.state.y)) / scale,
        );
    }
    checks.push(Check {
        name: "Euler step 1 equals ADMM",
        pass: dev <= 1e-12 && traj.states.len() == iters.history.len(),
        detail: format!("max relative deviation {dev:.2e} over {steps} steps"),
    });

    let mut report = format!("invariant check on {} (seed {seed})\n", p.name);
    let mut code = SUCCESS;
    for c in &checks {
        let _ = writeln!(
            report,
            "{} {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        if !c.pass {
            code = CERTIFICATE_FAILED;
        }
    }
    let _ = writeln!(report, "result: {}", verdict(code));
    if let Some(out) = out {
        write_common(out, cfg, seed)?;
        fs::write(out.join("report.txt"), &report)?;
    }
    print!("{report}");
    Ok(code)
}

/// Output directory: the flag, then the config, then `pdflow-out`.
pub fn output_dir(flag: Option<&PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.cloned()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("pdflow-out"))
}
