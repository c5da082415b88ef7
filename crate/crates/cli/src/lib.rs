//! Command-line driver for the pdflow solvers.

pub mod commands;
pub mod config;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pdflow::{Integrator, TauSchedule};

use crate::commands::Failure;
use crate::config::{ProblemSource, RunConfig, StartSpec, TauChoice};

#[derive(Debug, Parser)]
#[command(name = "pdflow", version, about = "Primal-dual flows and their discretizations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the flow and certify its rates.
    Flow(Common),
    /// Run a discrete scheme (admm, primal-dual, chambolle-pock).
    Discrete(Common),
    /// Integrate the flow over a grid of (tau*c, gamma) pairs.
    Sweep(Common),
    /// Check the library invariants on one problem.
    Check(Common),
    /// The standard sweep on example1 from (-10, 10).
    ReproduceExample1(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Seed for randomized checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add the state vectors to the trace.
    #[arg(long)]
    pub dump_state: bool,
    /// Catalog problem name.
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Constant step parameter.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Fixed integrator step (rk4 or euler).
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

impl Common {
    /// Loads the config file, if any, and applies the flag overrides.
    pub fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            None => RunConfig::default(),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                let base = path.parent().unwrap_or(Path::new("."));
                RunConfig::parse(&text, base)
                    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
            }
        };
        let mut overridden = Vec::new();
        if let Some(p) = &self.problem {
            if p != "example1" {
                for s in [&mut cfg.x0, &mut cfg.y0] {
                    if *s == StartSpec::Example1Default {
                        *s = StartSpec::Zero;
                    }
                }
            }
            cfg.problem = ProblemSource::Catalog(p.clone());
            overridden.push("problem");
        }
        if let Some(c) = self.c {
            cfg.c = c;
            overridden.push("c");
        }
        if let Some(g) = self.gamma {
            cfg.gamma = g;
            overridden.push("gamma");
        }
        if let Some(t) = self.tau {
            cfg.tau = TauChoice::Given(TauSchedule::Constant(t));
            overridden.push("metric.tau");
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
            overridden.push("integrator.horizon");
        }
        if let Some(s) = self.step {
            cfg.integrator = match cfg.integrator {
                Integrator::Euler { .. } => Integrator::Euler { step: s },
                _ => Integrator::Rk4 { step: s },
            };
            overridden.push("integrator.step");
        }
        if let Some(k) = self.max_iters {
            cfg.max_iters = k;
            overridden.push("discrete.max_iters");
        }
        if self.dump_state {
            cfg.dump_state = true;
        }
        for key in overridden {
            cfg.lines.remove(key);
        }
        cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
        Ok(cfg)
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code:
/// 0 on success, 1 on configuration or input errors, 2 when a certificate fails.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message());
            1
        }
    }
}

fn dispatch(cmd: &Command) -> Result<i32, Failure> {
    match cmd {
        Command::Flow(o) => {
            let cfg = o.resolve()?;
            commands::flow(&cfg, &commands::output_dir(o.out.as_ref(), &cfg), o.seed)
        }
        Command::Discrete(o) => {
            let cfg = o.resolve()?;
            commands::discrete(&cfg, &commands::output_dir(o.out.as_ref(), &cfg), o.seed)
        }
        Command::Sweep(o) => {
            let cfg = o.resolve()?;
            commands::sweep(&cfg, &commands::output_dir(o.out.as_ref(), &cfg), o.seed, o.jobs.max(1))
        }
        Command::Check(o) => {
            let cfg = o.resolve()?;
            let out = o.out.clone().or_else(|| cfg.out_dir.clone());
            commands::check(&cfg, out.as_deref(), o.seed)
        }
        Command::ReproduceExample1(o) => {
            let cfg = o.resolve()?;
            commands::reproduce_example1(
                &cfg,
                &commands::output_dir(o.out.as_ref(), &cfg),
                o.seed,
                o.jobs.max(1),
            )
        }
    }
}
