//! Discrete counterparts of the flow: proximal ADMM with variable metrics, its
//! primal-dual rewriting, and the Chambolle–Pock iteration.

use crate::error::{check_dim, Error, Result};
use crate::flow::{FlowSystem, SystemState};
use crate::metric::MetricMode;
use crate::problem::{kkt_residual, ProblemSpec, SaddleResidual};
use crate::proxlib::metric_prox;
use crate::vector::sub;

/// Residual above which a run is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct DiscreteParams {
    pub c: f64,
    pub gamma: f64,
    /// `τ_k = τ(k)` and `M^k = M(k)`.
    pub mode: MetricMode,
    pub max_iters: usize,
    /// Stop once the largest saddle residual component is at most this.
    pub stop_tol: f64,
}

impl DiscreteParams {
    pub fn closed_form(c: f64, gamma: f64, tau: f64, max_iters: usize, stop_tol: f64) -> Self {
        Self {
            c,
            gamma,
            mode: MetricMode::closed_form(tau),
            max_iters,
            stop_tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter("gamma must lie in [0,1]".into()));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidParameter("c must be positive".into()));
        }
        if self.stop_tol.is_nan() || self.stop_tol < 0.0 {
            return Err(Error::InvalidParameter("stop tolerance must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn tau_at(&self, k: usize) -> Option<f64> {
        self.mode.tau_at(k as f64)
    }
}

/// Proximal ADMM with variable metrics, bound to one problem.
#[derive(Debug, Clone)]
pub struct Admm<'a> {
    sys: FlowSystem<'a>,
}

impl<'a> Admm<'a> {
    pub fn new(p: &'a ProblemSpec, d: &DiscreteParams) -> Result<Self> {
        d.validate()?;
        Ok(Self {
            sys: FlowSystem::new(p, d.c, d.gamma, &d.mode)?,
        })
    }

    /// One iteration `(xᵏ, zᵏ, yᵏ) → (xᵏ⁺¹, zᵏ⁺¹, yᵏ⁺¹)`; the returned state has `t = k + 1`.
    pub fn step(&self, k: usize, s: &SystemState) -> Result<SystemState> {
        let p = self.sys.problem();
        s.check_dims(p)?;
        let c = self.sys.c();
        let gamma = self.sys.gamma();
        let tk = k as f64;
        let grad = p.h.grad(&s.x)?;

        // argmin f(x) + ⟨x - xᵏ, ∇h(xᵏ)⟩ + c/2‖Ax - zᵏ + yᵏ/c‖² + ½‖x - xᵏ‖²_{M₁ᵏ}
        let x_next = match self.sys.mode() {
            MetricMode::ClosedForm { tau } => {
                let tau = tau.value(tk);
                let r: Vec<f64> = p
                    .a
                    .apply(&s.x)
                    .iter()
                    .zip(s.y.iter().zip(&s.z))
                    .map(|(ax, (y, z))| y + c * (ax - z))
                    .collect();
                let atr = p.a.apply_adjoint(&r);
                let arg: Vec<f64> = (0..s.x.len())
                    .map(|i| s.x[i] - tau * (grad[i] + atr[i]))
                    .collect();
                p.f.prox(tau, &arg)?
            }
            MetricMode::General { .. } => {
                let q = self.sys.q1_at(tk)?;
                let m1x = self.sys.m1().at(tk).apply(&s.x);
                let atz = p.a.apply_adjoint(&s.z);
                let aty = p.a.apply_adjoint(&s.y);
                let linear: Vec<f64> = (0..s.x.len())
                    .map(|i| grad[i] - c * atz[i] + aty[i] - m1x[i])
                    .collect();
                metric_prox(&p.f, &q, &linear, &s.x, self.sys.inner_tol())?
            }
        };

        // argmin g(z) + c/2‖A(γxᵏ⁺¹ + (1-γ)xᵏ) - z + yᵏ/c‖² + ½‖z - zᵏ‖²_{M₂ᵏ}
        let mix: Vec<f64> = x_next
            .iter()
            .zip(&s.x)
            .map(|(xn, x)| gamma * xn + (1.0 - gamma) * x)
            .collect();
        let amix = p.a.apply(&mix);
        let z_next = if self.sys.m2().is_zero() {
            let arg: Vec<f64> = amix.iter().zip(&s.y).map(|(a, y)| a + y / c).collect();
            p.g.prox(1.0 / c, &arg)?
        } else {
            let q2 = self.sys.q2_at(tk);
            let m2z = self.sys.m2().at(tk).apply(&s.z);
            let linear: Vec<f64> = (0..s.z.len())
                .map(|i| -(m2z[i] + c * amix[i] + s.y[i]))
                .collect();
            metric_prox(&p.g, &q2, &linear, &s.z, self.sys.inner_tol())?
        };

        let ax = p.a.apply(&x_next);
        let y_next: Vec<f64> = (0..s.y.len())
            .map(|i| s.y[i] + c * (ax[i] - z_next[i]))
            .collect();
        Ok(SystemState {
            t: tk + 1.0,
            x: x_next,
            z: z_next,
            y: y_next,
        })
    }

    pub fn system(&self) -> &FlowSystem<'a> {
        &self.sys
    }
}

pub fn admm_step(
    p: &ProblemSpec,
    d: &DiscreteParams,
    k: usize,
    s: &SystemState,
) -> Result<SystemState> {
    Admm::new(p, d)?.step(k, s)
}

fn cp_preconditions(p: &ProblemSpec, d: &DiscreteParams) -> Result<f64> {
    d.validate()?;
    if !p.h.is_zero() {
        return Err(Error::Precondition(
            "the Chambolle-Pock form requires h = 0".into(),
        ));
    }
    if d.gamma != 1.0 {
        return Err(Error::Precondition(
            "the Chambolle-Pock form requires gamma = 1".into(),
        ));
    }
    match &d.mode {
        MetricMode::ClosedForm { tau } => {
            tau.validate()?;
            let a_norm_sq = crate::linops::operator_norm(&p.a, 1e-12, 10_000)?.value.powi(2);
            let worst = d.c * tau.sup_value() * a_norm_sq;
            if worst > 1.0 + crate::metric::SCALAR_TEST_SLACK {
                return Err(Error::Precondition(format!(
                    "step-size condition c·tau·|A|^2 <= 1 violated ({worst})"
                )));
            }
            Ok(a_norm_sq)
        }
        MetricMode::General { .. } => Err(Error::Unsupported(
            "the Chambolle-Pock form needs a scalar step tau".into(),
        )),
    }
}

fn tau_k(d: &DiscreteParams, k: usize) -> f64 {
    d.tau_at(k).expect("closed-form mode checked")
}

/// `xᵏ⁺¹ = prox_{τf}(xᵏ - τA*(2yᵏ - yᵏ⁻¹))`, `yᵏ⁺¹ = prox_{cg*}(yᵏ + cAxᵏ⁺¹)`
pub fn cp_step(
    p: &ProblemSpec,
    d: &DiscreteParams,
    k: usize,
    x: &[f64],
    y: &[f64],
    y_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    cp_preconditions(p, d)?;
    cp_step_unchecked(p, d, k, x, y, y_prev)
}

fn cp_step_unchecked(
    p: &ProblemSpec,
    d: &DiscreteParams,
    k: usize,
    x: &[f64],
    y: &[f64],
    y_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(p.n(), x.len())?;
    check_dim(p.m(), y.len())?;
    check_dim(p.m(), y_prev.len())?;
    let tau = tau_k(d, k);
    let extrap: Vec<f64> = y.iter().zip(y_prev).map(|(a, b)| 2.0 * a - b).collect();
    let ate = p.a.apply_adjoint(&extrap);
    let arg: Vec<f64> = x.iter().zip(&ate).map(|(xi, ai)| xi - tau * ai).collect();
    let x_next = p.f.prox(tau, &arg)?;
    let ax = p.a.apply(&x_next);
    let dual_arg: Vec<f64> = y.iter().zip(&ax).map(|(yi, ai)| yi + d.c * ai).collect();
    let y_next = p.g.conjugate_prox(d.c, &dual_arg)?;
    Ok((x_next, y_next))
}

/// `xᵏ⁺¹ = prox_{τf}(xᵏ - τA*(yᵏ + cAxᵏ - czᵏ))`, `yᵏ⁺¹ = prox_{cg*}(yᵏ + cAxᵏ⁺¹)`,
/// `zᵏ⁺¹ = Axᵏ⁺¹ - (yᵏ⁺¹ - yᵏ)/c`
pub fn primal_dual_step(
    p: &ProblemSpec,
    d: &DiscreteParams,
    k: usize,
    s: &SystemState,
) -> Result<SystemState> {
    cp_preconditions(p, d)?;
    primal_dual_step_unchecked(p, d, k, s)
}

fn primal_dual_step_unchecked(
    p: &ProblemSpec,
    d: &DiscreteParams,
    k: usize,
    s: &SystemState,
) -> Result<SystemState> {
    s.check_dims(p)?;
    let c = d.c;
    let tau = tau_k(d, k);
    let ax = p.a.apply(&s.x);
    let r: Vec<f64> = (0..s.y.len())
        .map(|i| s.y[i] + c * ax[i] - c * s.z[i])
        .collect();
    let atr = p.a.apply_adjoint(&r);
    let arg: Vec<f64> = s.x.iter().zip(&atr).map(|(xi, ai)| xi - tau * ai).collect();
    let x_next = p.f.prox(tau, &arg)?;
    let ax_next = p.a.apply(&x_next);
    let dual_arg: Vec<f64> = s.y.iter().zip(&ax_next).map(|(y, a)| y + c * a).collect();
    let y_next = p.g.conjugate_prox(c, &dual_arg)?;
    let z_next: Vec<f64> = (0..s.z.len())
        .map(|i| ax_next[i] - (y_next[i] - s.y[i]) / c)
        .collect();
    Ok(SystemState {
        t: k as f64 + 1.0,
        x: x_next,
        z: z_next,
        y: y_next,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    pub state: SystemState,
    pub residual: SaddleResidual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    Budget,
    /// A residual exceeded [`DIVERGENCE_THRESHOLD`] or became non-finite.
    Diverged,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Tolerance => "tolerance",
            StopReason::Budget => "budget",
            StopReason::Diverged => "diverged",
        }
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteRun {
    /// Iterates `0..=K`, starting with the initial state.
    pub history: Vec<IterateRecord>,
    pub stop: StopReason,
}

impl DiscreteRun {
    pub fn last(&self) -> &IterateRecord {
        self.history.last().expect("history holds the initial state")
    }

    pub fn iterations(&self) -> usize {
        self.last().k
    }
}

fn drive(
    p: &ProblemSpec,
    d: &DiscreteParams,
    s0: &SystemState,
    mut step: impl FnMut(usize, &SystemState) -> Result<SystemState>,
) -> Result<DiscreteRun> {
    s0.check_dims(p)?;
    let mut state = SystemState { t: 0.0, ..s0.clone() };
    let mut history = Vec::new();
    let mut k = 0;
    loop {
        let residual = kkt_residual(p, &state.x, &state.z, &state.y)?;
        let r = residual.max();
        history.push(IterateRecord {
            k,
            state: state.clone(),
            residual,
        });
        let stop = if r <= d.stop_tol {
            Some(StopReason::Tolerance)
        } else if !r.is_finite() || r > DIVERGENCE_THRESHOLD || !state.is_finite() {
            Some(StopReason::Diverged)
        } else if k >= d.max_iters {
            Some(StopReason::Budget)
        } else {
            None
        };
        if let Some(stop) = stop {
            return Ok(DiscreteRun { history, stop });
        }
        state = step(k, &state)?;
        k += 1;
    }
}

/// Runs proximal ADMM until the saddle residual drops to `stop_tol`, the
/// budget is exhausted, or the iterates diverge.
pub fn run(p: &ProblemSpec, d: &DiscreteParams, s0: &SystemState) -> Result<DiscreteRun> {
    let admm = Admm::new(p, d)?;
    drive(p, d, s0, |k, s| admm.step(k, s))
}

/// Runs the primal-dual rewriting of ADMM (`h = 0`, `γ = 1`, `M₁ = I/τ - cA*A`, `M₂ = 0`).
pub fn run_primal_dual(p: &ProblemSpec, d: &DiscreteParams, s0: &SystemState) -> Result<DiscreteRun> {
    cp_preconditions(p, d)?;
    drive(p, d, s0, |k, s| primal_dual_step_unchecked(p, d, k, s))
}

/// Runs Chambolle–Pock from `(x⁰, y⁰)` with `y⁻¹ = y⁰`. The split variable is
/// recovered as `zᵏ = Axᵏ - (yᵏ - yᵏ⁻¹)/c`, with `z⁰ = Ax⁰`.
pub fn run_chambolle_pock(
    p: &ProblemSpec,
    d: &DiscreteParams,
    x0: &[f64],
    y0: &[f64],
) -> Result<DiscreteRun> {
    cp_preconditions(p, d)?;
    let s0 = SystemState::with_split_default(p, x0.to_vec(), y0.to_vec());
    let mut y_prev = y0.to_vec();
    drive(p, d, &s0, |k, s| {
        let (x, y) = cp_step_unchecked(p, d, k, &s.x, &s.y, &y_prev)?;
        let ax = p.a.apply(&x);
        let z: Vec<f64> = (0..y.len())
            .map(|i| ax[i] - (y[i] - s.y[i]) / d.c)
            .collect();
        y_prev = s.y.clone();
        Ok(SystemState {
            t: k as f64 + 1.0,
            x,
            z,
            y,
        })
    })
}

/// `yᵏ⁺¹ - yᵏ - c(Axᵏ⁺¹ - zᵏ⁺¹)`, zero up to rounding for ADMM iterates.
pub fn dual_update_defect(p: &ProblemSpec, c: f64, prev: &SystemState, next: &SystemState) -> Vec<f64> {
    let ax = p.a.apply(&next.x);
    let dy = sub(&next.y, &prev.y);
    (0..dy.len())
        .map(|i| dy[i] - c * (ax[i] - next.z[i]))
        .collect()
}
