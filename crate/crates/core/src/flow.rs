//! The primal-dual dynamical system `U̇ = Γ(t, U)`, fixed-step and adaptive
//! integrators, and ergodic averages along trajectories.

use crate::error::{check_dim, Error, Result};
use crate::linops::{eigen_bounds, operator_norm, LinearMap, SelfAdjointPsd};
use crate::metric::{MetricMode, MetricSchedule};
use crate::problem::ProblemSpec;
use crate::proxlib::metric_prox;
use crate::vector::{all_finite, norm_sq, sub};

/// Default fixed step of the Runge–Kutta integrator.
pub const DEFAULT_STEP: f64 = 0.01;

/// `U = (x, z, y)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

impl SystemState {
    pub fn new(x: Vec<f64>, z: Vec<f64>, y: Vec<f64>) -> Self {
        Self { t: 0.0, x, z, y }
    }

    /// Initial state with `z⁰ = Ax⁰`.
    pub fn with_split_default(p: &ProblemSpec, x: Vec<f64>, y: Vec<f64>) -> Self {
        let z = p.a.apply(&x);
        Self::new(x, z, y)
    }

    /// The known saddle point of `p` as a state at `t = 0`.
    pub fn saddle(p: &ProblemSpec) -> Result<Self> {
        let (x, z, y) = p.saddle_point()?;
        Ok(Self::new(x, z, y))
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && all_finite(&self.x) && all_finite(&self.z) && all_finite(&self.y)
    }

    pub fn check_dims(&self, p: &ProblemSpec) -> Result<()> {
        check_dim(p.n(), self.x.len())?;
        check_dim(p.m(), self.z.len())?;
        check_dim(p.m(), self.y.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    Euler { step: f64 },
    Rk4 { step: f64 },
    /// Dormand–Prince 5(4). May chatter near the kinks of the prox maps.
    Adaptive {
        rel_tol: f64,
        abs_tol: f64,
        h_min: f64,
        h_max: f64,
    },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Rk4 { step: DEFAULT_STEP }
    }
}

impl Integrator {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Integrator::Euler { step } | Integrator::Rk4 { step } => step > 0.0 && step.is_finite(),
            Integrator::Adaptive {
                rel_tol,
                abs_tol,
                h_min,
                h_max,
            } => rel_tol > 0.0 && abs_tol >= 0.0 && h_min > 0.0 && h_max >= h_min,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid integrator settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowParams {
    pub c: f64,
    pub gamma: f64,
    pub mode: MetricMode,
    pub integrator: Integrator,
    pub horizon: f64,
}

impl FlowParams {
    pub fn closed_form(c: f64, gamma: f64, tau: f64, horizon: f64) -> Self {
        Self {
            c,
            gamma,
            mode: MetricMode::closed_form(tau),
            integrator: Integrator::default(),
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter("gamma must lie in [0,1]".into()));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidParameter("c must be positive".into()));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        self.integrator.validate()
    }
}

/// `Γ(t, U) = (u, v, w)`
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl Velocity {
    pub fn norm(&self) -> f64 {
        (norm_sq(&self.u) + norm_sq(&self.v) + norm_sq(&self.w)).sqrt()
    }
}

/// `Γ` for one problem and parameter set, with preconditions checked once.
#[derive(Debug, Clone)]
pub struct FlowSystem<'a> {
    p: &'a ProblemSpec,
    c: f64,
    gamma: f64,
    mode: MetricMode,
    m1: MetricSchedule,
    m2: MetricSchedule,
    gram: LinearMap,
    q1_const: Option<SelfAdjointPsd>,
    q2_const: Option<SelfAdjointPsd>,
    alpha: f64,
}

impl<'a> FlowSystem<'a> {
    pub fn new(p: &'a ProblemSpec, c: f64, gamma: f64, mode: &MetricMode) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter("gamma must lie in [0,1]".into()));
        }
        if !(c > 0.0) {
            return Err(Error::InvalidParameter("c must be positive".into()));
        }
        mode.validate(p.n(), p.m())?;
        let (m1, m2) = mode.schedules(c, &p.a)?;
        let gram = p.a.gram();
        let mut q1_const = None;
        let mut q2_const = None;

        let alpha = match mode {
            MetricMode::ClosedForm { tau } => {
                let a_norm_sq = operator_norm(&p.a, 1e-12, 10_000)?.value.powi(2);
                let worst = c * tau.sup_value() * a_norm_sq;
                if worst > 1.0 + crate::metric::SCALAR_TEST_SLACK {
                    return Err(Error::Precondition(format!(
                        "step-size condition c·tau·|A|^2 <= 1 violated ({worst})"
                    )));
                }
                1.0 / tau.sup_value()
            }
            MetricMode::General { .. } => {
                let alpha = match &m1 {
                    MetricSchedule::TauFamily(f) => 1.0 / f.tau().sup_value(),
                    other => {
                        let q = q_operator(&gram, c, &other.at(0.0))?;
                        let floor = q.alpha_floor();
                        q1_const = Some(q);
                        floor
                    }
                };
                if !(alpha > 1e-12) {
                    return Err(Error::Precondition(format!(
                        "cA*A + M1(t) is not uniformly positive definite (floor {alpha:e})"
                    )));
                }
                if !m2.is_zero() && m2.is_constant() {
                    q2_const = Some(q2_operator(&m2.at(0.0), c));
                }
                alpha
            }
        };

        Ok(Self {
            p,
            c,
            gamma,
            mode: mode.clone(),
            m1,
            m2,
            gram,
            q1_const,
            q2_const,
            alpha,
        })
    }

    pub fn from_params(p: &'a ProblemSpec, params: &FlowParams) -> Result<Self> {
        params.validate()?;
        Self::new(p, params.c, params.gamma, &params.mode)
    }

    pub fn problem(&self) -> &ProblemSpec {
        self.p
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mode(&self) -> &MetricMode {
        &self.mode
    }

    pub fn m1(&self) -> &MetricSchedule {
        &self.m1
    }

    pub fn m2(&self) -> &MetricSchedule {
        &self.m2
    }

    /// Uniform floor `α` with `cA*A + M₁(t) ⪰ αI`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn inner_tol(&self) -> f64 {
        match &self.mode {
            MetricMode::General { inner_tol, .. } => *inner_tol,
            MetricMode::ClosedForm { .. } => crate::proxlib::DEFAULT_INNER_TOL,
        }
    }

    /// `cA*A + M₁(t)`
    pub fn q1_at(&self, t: f64) -> Result<SelfAdjointPsd> {
        if let Some(q) = &self.q1_const {
            return Ok(q.clone());
        }
        let m1t = self.m1.at(t);
        match &self.m1 {
            MetricSchedule::TauFamily(f) => {
                // equals I/τ(t)
                let inv_tau = 1.0 / f.tau().value(t);
                let base = LinearMap::Sum(vec![(self.c, self.gram.clone()), (1.0, m1t.base().clone())]);
                SelfAdjointPsd::with_bounds(base, inv_tau, inv_tau)
            }
            _ => q_operator(&self.gram, self.c, &m1t),
        }
    }

    /// `M₂(t) + cI`
    pub fn q2_at(&self, t: f64) -> SelfAdjointPsd {
        match &self.q2_const {
            Some(q) => q.clone(),
            None => q2_operator(&self.m2.at(t), self.c),
        }
    }

    /// `Γ(t, U)`, evaluated in the order `u → v → w`.
    pub fn rhs(&self, s: &SystemState) -> Result<Velocity> {
        s.check_dims(self.p)?;
        let p = self.p;
        let c = self.c;
        let t = s.t;
        let grad = p.h.grad(&s.x)?;

        let x_new = match &self.mode {
            MetricMode::ClosedForm { tau } => {
                let tau = tau.value(t);
                // (I - cτA*A)x + cτA*z - τA*y - τ∇h(x)
                let gx = self.gram.apply(&s.x);
                let atz = p.a.apply_adjoint(&s.z);
                let aty = p.a.apply_adjoint(&s.y);
                let arg: Vec<f64> = (0..s.x.len())
                    .map(|i| {
                        s.x[i] - c * tau * gx[i] + c * tau * atz[i] - tau * aty[i] - tau * grad[i]
                    })
                    .collect();
                p.f.prox(tau, &arg)?
            }
            MetricMode::General { .. } => {
                let q = self.q1_at(t)?;
                let m1x = self.m1.at(t).apply(&s.x);
                let atz = p.a.apply_adjoint(&s.z);
                let aty = p.a.apply_adjoint(&s.y);
                // -(M₁x + cA*z - A*y - ∇h(x))
                let linear: Vec<f64> = (0..s.x.len())
                    .map(|i| -(m1x[i] + c * atz[i] - aty[i] - grad[i]))
                    .collect();
                metric_prox(&p.f, &q, &linear, &s.x, self.inner_tol())?
            }
        };
        let u = sub(&x_new, &s.x);

        let xg: Vec<f64> = s.x.iter().zip(&u).map(|(x, u)| x + self.gamma * u).collect();
        let axg = p.a.apply(&xg);
        let z_new = if self.m2.is_zero() {
            let arg: Vec<f64> = axg.iter().zip(&s.y).map(|(a, y)| a + y / c).collect();
            p.g.prox(1.0 / c, &arg)?
        } else {
            let q2 = self.q2_at(t);
            let m2z = self.m2.at(t).apply(&s.z);
            let linear: Vec<f64> = (0..s.z.len())
                .map(|i| -(m2z[i] + c * axg[i] + s.y[i]))
                .collect();
            metric_prox(&p.g, &q2, &linear, &s.z, self.inner_tol())?
        };
        let v = sub(&z_new, &s.z);

        let xu: Vec<f64> = s.x.iter().zip(&u).map(|(x, u)| x + u).collect();
        let axu = p.a.apply(&xu);
        let w: Vec<f64> = (0..s.y.len())
            .map(|i| c * axu[i] - c * (v[i] + s.z[i]))
            .collect();
        Ok(Velocity { u, v, w })
    }

    /// `S_t(u) = argmin_x f(x) + ½‖x‖²_{cA*A+M₁(t)} - c⟨x, u⟩`
    pub fn s_map(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.p.n(), u.len())?;
        match &self.mode {
            MetricMode::ClosedForm { tau } => {
                let tau = tau.value(t);
                let arg: Vec<f64> = u.iter().map(|v| self.c * tau * v).collect();
                self.p.f.prox(tau, &arg)
            }
            MetricMode::General { .. } => {
                let q = self.q1_at(t)?;
                let linear: Vec<f64> = u.iter().map(|v| -self.c * v).collect();
                metric_prox(&self.p.f, &q, &linear, u, self.inner_tol())
            }
        }
    }

    /// `‖Γ(t, U)‖`
    pub fn velocity_norm(&self, s: &SystemState) -> Result<f64> {
        Ok(self.rhs(s)?.norm())
    }
}

fn q_operator(gram: &LinearMap, c: f64, m1t: &SelfAdjointPsd) -> Result<SelfAdjointPsd> {
    let base = LinearMap::Sum(vec![(c, gram.clone()), (1.0, m1t.base().clone())]);
    let (lo, hi) = eigen_bounds(&base, 1e-12)?;
    SelfAdjointPsd::with_bounds(base, lo, hi)
}

fn q2_operator(m2t: &SelfAdjointPsd, c: f64) -> SelfAdjointPsd {
    let m = m2t.dim();
    let base = LinearMap::Sum(vec![(1.0, m2t.base().clone()), (c, LinearMap::identity(m))]);
    SelfAdjointPsd::with_bounds(base, m2t.alpha_floor() + c, m2t.upper() + c)
        .expect("square by construction")
}

/// `Γ(t, U)` for a single evaluation.
pub fn rhs(p: &ProblemSpec, params: &FlowParams, s: &SystemState) -> Result<Velocity> {
    FlowSystem::from_params(p, params)?.rhs(s)
}

/// Running integrals for the ergodic averages `x̃(t) = (1/t)∫₀ᵗ (ẋ + x) ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicAccumulator {
    pub x0: Vec<f64>,
    pub z0: Vec<f64>,
    /// `∫₀ᵗ x(s) ds`
    pub int_x: Vec<f64>,
    /// `∫₀ᵗ z(s) ds`
    pub int_z: Vec<f64>,
    pub t: f64,
}

impl ErgodicAccumulator {
    pub fn new(s0: &SystemState) -> Self {
        Self {
            x0: s0.x.clone(),
            z0: s0.z.clone(),
            int_x: vec![0.0; s0.x.len()],
            int_z: vec![0.0; s0.z.len()],
            t: s0.t,
        }
    }

    /// `(x̃(t), z̃(t))` given the current state.
    pub fn averages(&self, s: &SystemState) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim(self.x0.len(), s.x.len())?;
        check_dim(self.z0.len(), s.z.len())?;
        if !(self.t > 0.0) {
            return Err(Error::InvalidParameter(
                "ergodic averages are undefined at t = 0".into(),
            ));
        }
        let avg = |cur: &[f64], start: &[f64], int: &[f64]| -> Vec<f64> {
            (0..cur.len())
                .map(|i| (cur[i] - start[i] + int[i]) / self.t)
                .collect()
        };
        Ok((avg(&s.x, &self.x0, &self.int_x), avg(&s.z, &self.z0, &self.int_z)))
    }
}

pub fn ergodic(acc: &ErgodicAccumulator, s: &SystemState) -> Result<(Vec<f64>, Vec<f64>)> {
    acc.averages(s)
}

/// Sampled trajectory. `states[i]` and `ergodic[i]` refer to the same time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<SystemState>,
    pub ergodic: Vec<ErgodicAccumulator>,
    pub steps: usize,
    pub rhs_evals: usize,
}

impl Trajectory {
    pub fn last(&self) -> Option<&SystemState> {
        self.states.last()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Packed integration state `(x, z, y, ∫x, ∫z)`.
struct Packed {
    n: usize,
    m: usize,
}

impl Packed {
    fn pack(&self, s: &SystemState, acc: &ErgodicAccumulator) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.n + 3 * self.m);
        v.extend_from_slice(&s.x);
        v.extend_from_slice(&s.z);
        v.extend_from_slice(&s.y);
        v.extend_from_slice(&acc.int_x);
        v.extend_from_slice(&acc.int_z);
        v
    }

    fn state(&self, t: f64, v: &[f64]) -> SystemState {
        let (n, m) = (self.n, self.m);
        SystemState {
            t,
            x: v[..n].to_vec(),
            z: v[n..n + m].to_vec(),
            y: v[n + m..n + 2 * m].to_vec(),
        }
    }

    fn accumulator(&self, t: f64, v: &[f64], s0: &SystemState) -> ErgodicAccumulator {
        let (n, m) = (self.n, self.m);
        ErgodicAccumulator {
            x0: s0.x.clone(),
            z0: s0.z.clone(),
            int_x: v[n + 2 * m..2 * n + 2 * m].to_vec(),
            int_z: v[2 * n + 2 * m..].to_vec(),
            t,
        }
    }
}

impl FlowSystem<'_> {
    fn packed_rhs(&self, packed: &Packed, t: f64, v: &[f64]) -> Result<Vec<f64>> {
        let s = packed.state(t, v);
        let vel = self.rhs(&s)?;
        let mut out = Vec::with_capacity(v.len());
        out.extend_from_slice(&vel.u);
        out.extend_from_slice(&vel.v);
        out.extend_from_slice(&vel.w);
        out.extend_from_slice(&s.x);
        out.extend_from_slice(&s.z);
        Ok(out)
    }

    /// Integrates from `s0` (which must sit at `t = 0`) to `horizon`, recording
    /// the state at `t = 0`, at every requested sample time, and at the horizon.
    pub fn integrate(
        &self,
        s0: &SystemState,
        integrator: Integrator,
        horizon: f64,
        sample_times: &[f64],
    ) -> Result<Trajectory> {
        s0.check_dims(self.p)?;
        integrator.validate()?;
        if s0.t != 0.0 {
            return Err(Error::InvalidParameter("initial state must sit at t = 0".into()));
        }
        if !s0.is_finite() {
            return Err(Error::InvalidParameter("initial state is not finite".into()));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        if sample_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("sample times must be sorted".into()));
        }
        if sample_times.iter().any(|t| *t < 0.0 || *t > horizon) {
            return Err(Error::InvalidParameter(
                "sample times must lie in [0, horizon]".into(),
            ));
        }

        let mut grid: Vec<f64> = Vec::with_capacity(sample_times.len() + 2);
        for &t in sample_times.iter().chain(std::iter::once(&horizon)) {
            if t > grid.last().copied().unwrap_or(0.0) {
                grid.push(t);
            }
        }

        let packed = Packed {
            n: self.p.n(),
            m: self.p.m(),
        };
        let acc0 = ErgodicAccumulator::new(s0);
        let mut traj = Trajectory {
            states: vec![s0.clone()],
            ergodic: vec![acc0.clone()],
            steps: 0,
            rhs_evals: 0,
        };
        let mut v = packed.pack(s0, &acc0);
        let mut t = 0.0;
        let mut h_adapt = match integrator {
            Integrator::Adaptive { h_min, h_max, .. } => (0.01f64).clamp(h_min, h_max),
            _ => 0.0,
        };

        for &target in &grid {
            let outcome = match integrator {
                Integrator::Euler { step } | Integrator::Rk4 { step } => {
                    let delta = target - t;
                    let n_steps = ((delta / step) - 1e-9).ceil().max(1.0) as usize;
                    let h = delta / n_steps as f64;
                    let mut res = Ok(());
                    for i in 0..n_steps {
                        let ti = t + i as f64 * h;
                        let stepped = if matches!(integrator, Integrator::Euler { .. }) {
                            self.euler_step(&packed, ti, &v, h, &mut traj.rhs_evals)
                        } else {
                            self.rk4_step(&packed, ti, &v, h, &mut traj.rhs_evals)
                        };
                        match stepped {
                            Ok(next) if all_finite(&next) => {
                                v = next;
                                traj.steps += 1;
                            }
                            Ok(_) => {
                                res = Err((ti + h, "state became non-finite".to_string()));
                                break;
                            }
                            Err(e) => {
                                res = Err((ti, e.to_string()));
                                break;
                            }
                        }
                    }
                    res
                }
                Integrator::Adaptive {
                    rel_tol,
                    abs_tol,
                    h_min,
                    h_max,
                } => self.adaptive_segment(
                    &packed,
                    &mut t,
                    target,
                    &mut v,
                    &mut h_adapt,
                    (rel_tol, abs_tol, h_min, h_max),
                    &mut traj,
                ),
            };
            if let Err((t_fail, reason)) = outcome {
                return Err(Error::IntegrationAborted {
                    t: t_fail,
                    reason,
                    partial: Box::new(traj),
                });
            }
            t = target;
            traj.states.push(packed.state(t, &v));
            traj.ergodic.push(packed.accumulator(t, &v, s0));
        }

        Ok(traj)
    }

    fn euler_step(
        &self,
        packed: &Packed,
        t: f64,
        v: &[f64],
        h: f64,
        evals: &mut usize,
    ) -> Result<Vec<f64>> {
        let k1 = self.packed_rhs(packed, t, v)?;
        *evals += 1;
        Ok(v.iter().zip(&k1).map(|(a, k)| a + h * k).collect())
    }

    fn rk4_step(
        &self,
        packed: &Packed,
        t: f64,
        v: &[f64],
        h: f64,
        evals: &mut usize,
    ) -> Result<Vec<f64>> {
        let shifted = |k: &[f64], s: f64| -> Vec<f64> {
            v.iter().zip(k).map(|(a, k)| a + s * k).collect()
        };
        let k1 = self.packed_rhs(packed, t, v)?;
        let k2 = self.packed_rhs(packed, t + 0.5 * h, &shifted(&k1, 0.5 * h))?;
        let k3 = self.packed_rhs(packed, t + 0.5 * h, &shifted(&k2, 0.5 * h))?;
        let k4 = self.packed_rhs(packed, t + h, &shifted(&k3, h))?;
        *evals += 4;
        Ok((0..v.len())
            .map(|i| v[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect())
    }

    #[allow(clippy::too_many_arguments)]
    fn adaptive_segment(
        &self,
        packed: &Packed,
        t: &mut f64,
        target: f64,
        v: &mut Vec<f64>,
        h: &mut f64,
        (rel_tol, abs_tol, h_min, h_max): (f64, f64, f64, f64),
        traj: &mut Trajectory,
    ) -> std::result::Result<(), (f64, String)> {
        while *t < target {
            let remaining = target - *t;
            let last = *h >= remaining;
            let step = if last { remaining } else { *h };
            let (next, err) = self
                .dopri_step(packed, *t, v, step, &mut traj.rhs_evals)
                .map_err(|e| (*t, e.to_string()))?;
            if !all_finite(&next) {
                return Err((*t, "state became non-finite".into()));
            }
            let scale_err = err
                .iter()
                .zip(v.iter().zip(&next))
                .map(|(e, (a, b))| {
                    let sc = abs_tol + rel_tol * a.abs().max(b.abs());
                    if *e == 0.0 {
                        0.0
                    } else {
                        (e / sc).powi(2)
                    }
                })
                .sum::<f64>();
            let err_norm = (scale_err / err.len().max(1) as f64).sqrt();
            let factor = if err_norm == 0.0 {
                5.0
            } else if err_norm.is_finite() {
                (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                0.2
            };
            if err_norm <= 1.0 {
                *t = if last { target } else { *t + step };
                *v = next;
                traj.steps += 1;
                if !last {
                    *h = (step * factor).min(h_max);
                }
            } else {
                let shrunk = step * factor;
                if shrunk < h_min {
                    return Err((*t, format!("step size underflow (h = {shrunk:e} < h_min)")));
                }
                *h = shrunk;
            }
        }
        Ok(())
    }

    fn dopri_step(
        &self,
        packed: &Packed,
        t: f64,
        v: &[f64],
        h: f64,
        evals: &mut usize,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
        const A: [[f64; 6]; 7] = [
            [0.0; 6],
            [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            [
                19372.0 / 6561.0,
                -25360.0 / 2187.0,
                64448.0 / 6561.0,
                -212.0 / 729.0,
                0.0,
                0.0,
            ],
            [
                9017.0 / 3168.0,
                -355.0 / 33.0,
                46732.0 / 5247.0,
                49.0 / 176.0,
                -5103.0 / 18656.0,
                0.0,
            ],
            [
                35.0 / 384.0,
                0.0,
                500.0 / 1113.0,
                125.0 / 192.0,
                -2187.0 / 6784.0,
                11.0 / 84.0,
            ],
        ];
        const B5: [f64; 7] = [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
            0.0,
        ];
        const B4: [f64; 7] = [
            5179.0 / 57600.0,
            0.0,
            7571.0 / 16695.0,
            393.0 / 640.0,
            -92097.0 / 339200.0,
            187.0 / 2100.0,
            1.0 / 40.0,
        ];
        let mut ks: Vec<Vec<f64>> = Vec::with_capacity(7);
        for stage in 0..7 {
            let mut arg = v.to_vec();
            for (j, k) in ks.iter().enumerate() {
                let a = A[stage][j];
                if a != 0.0 {
                    arg.iter_mut().zip(k).for_each(|(x, kj)| *x += h * a * kj);
                }
            }
            ks.push(self.packed_rhs(packed, t + C[stage] * h, &arg)?);
            *evals += 1;
        }
        let mut next = v.to_vec();
        let mut err = vec![0.0; v.len()];
        for (s, k) in ks.iter().enumerate() {
            for i in 0..v.len() {
                next[i] += h * B5[s] * k[i];
                err[i] += h * (B5[s] - B4[s]) * k[i];
            }
        }
        Ok((next, err))
    }
}

/// Integrates `U̇ = Γ(t, U)` from `s0` over `[0, params.horizon]`.
pub fn integrate(
    p: &ProblemSpec,
    params: &FlowParams,
    s0: &SystemState,
    sample_times: &[f64],
) -> Result<Trajectory> {
    let sys = FlowSystem::from_params(p, params)?;
    sys.integrate(s0, params.integrator, params.horizon, sample_times)
}

/// Uniform grid `0, dt, 2dt, …` up to and including `horizon`.
pub fn uniform_grid(horizon: f64, dt: f64) -> Vec<f64> {
    if !(dt > 0.0) || !(horizon > 0.0) {
        return vec![0.0];
    }
    let n = (horizon / dt - 1e-9).ceil() as usize;
    let mut out: Vec<f64> = (0..=n).map(|i| (i as f64 * dt).min(horizon)).collect();
    out.dedup();
    out
}
