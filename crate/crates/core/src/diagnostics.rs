//! Lyapunov bookkeeping, ergodic rate certificates and parameter-sweep summaries.

use std::fmt;

use crate::discrete::DiscreteRun;
use crate::error::{Error, Result};
use crate::flow::{FlowSystem, SystemState, Trajectory};
use crate::linops::LinearMap;
use crate::metric::{weight_w, BlockWeight, MetricMode, MetricSchedule};
use crate::problem::{optimal_value, ProblemSpec};
use crate::vector::{dist, norm, sub};

/// Default certificate sampling grid.
pub const CERTIFICATE_TIMES: [f64; 8] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0];

/// Default threshold on `‖x - x*‖` for first-hit times.
pub const DEFAULT_HIT_THRESHOLD: f64 = 1e-2;

/// Relative slack allowed per sample step in the Lyapunov descent check.
pub const LYAPUNOV_SLACK: f64 = 1e-6;

/// Absolute slack in the ergodic gap bound.
pub const GAP_SLACK: f64 = 1e-8;

/// One row of a trace. Fields that need a known saddle point are `None` without one;
/// ergodic fields are `None` at `t = 0` and the gap is `None` outside `dom f × dom g`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub dist_primal: Option<f64>,
    pub dist_dual: Option<f64>,
    pub feas: f64,
    pub lyapunov: Option<f64>,
    pub ergodic_feas: Option<f64>,
    pub ergodic_gap: Option<f64>,
    pub gamma: f64,
    pub c: f64,
    pub tau: Option<f64>,
}

/// Lyapunov evaluator; caches `W` for time-invariant metrics.
#[derive(Debug, Clone)]
pub struct LyapunovWeight {
    m1: MetricSchedule,
    m2: MetricSchedule,
    c: f64,
    gamma: f64,
    a: LinearMap,
    cached: Option<BlockWeight>,
}

impl LyapunovWeight {
    pub fn new(m1: &MetricSchedule, m2: &MetricSchedule, c: f64, gamma: f64, a: &LinearMap) -> Result<Self> {
        let cached = if m1.is_constant() && m2.is_constant() {
            Some(weight_w(m1, m2, c, gamma, a, 0.0)?)
        } else {
            None
        };
        Ok(Self {
            m1: m1.clone(),
            m2: m2.clone(),
            c,
            gamma,
            a: a.clone(),
            cached,
        })
    }

    pub fn at(&self, t: f64) -> Result<BlockWeight> {
        match &self.cached {
            Some(w) => Ok(w.clone()),
            None => weight_w(&self.m1, &self.m2, self.c, self.gamma, &self.a, t),
        }
    }

    /// `‖(x - x*, z - Ax*, y - y*)‖²_{W(t)}`
    pub fn value(&self, p: &ProblemSpec, s: &SystemState) -> Result<f64> {
        let (xs, zs, ys) = p.saddle_point()?;
        let w = self.at(s.t)?;
        w.seminorm_sq(&sub(&s.x, &xs), &sub(&s.z, &zs), &sub(&s.y, &ys))
    }
}

/// `V(t) = ‖x - x*‖²_{M₁+c(1-γ)A*A} + ‖z - Ax*‖²_{M₂+cI} + ‖y - y*‖²/c`
pub fn lyapunov(
    p: &ProblemSpec,
    m1: &MetricSchedule,
    m2: &MetricSchedule,
    c: f64,
    gamma: f64,
    s: &SystemState,
) -> Result<f64> {
    let (xs, zs, ys) = p.saddle_point()?;
    let w = weight_w(m1, m2, c, gamma, &p.a, s.t)?;
    w.seminorm_sq(&sub(&s.x, &xs), &sub(&s.z, &zs), &sub(&s.y, &ys))
}

/// `‖(x⁰, z⁰, y⁰) - (x*, Ax*, 0)‖²_{W(0)}`, the constant of the ergodic gap bound.
pub fn w0_norm_sq(
    p: &ProblemSpec,
    m1: &MetricSchedule,
    m2: &MetricSchedule,
    c: f64,
    gamma: f64,
    s0: &SystemState,
) -> Result<f64> {
    let xs = p
        .known_primal
        .as_ref()
        .ok_or_else(|| Error::MissingSolution(p.name.clone()))?;
    let zs = p.a.apply(xs);
    let w = weight_w(m1, m2, c, gamma, &p.a, 0.0)?;
    w.seminorm_sq(&sub(&s0.x, xs), &sub(&s0.z, &zs), &s0.y)
}

fn ergodic_fields(p: &ProblemSpec, xt: &[f64], zt: &[f64], opt: Option<f64>) -> Result<(f64, Option<f64>)> {
    let feas = norm(&sub(&p.a.apply(xt), zt));
    let gap = match opt {
        Some(opt) => {
            let fx = p.f.eval(xt)?;
            let gz = p.g.eval(zt)?;
            if fx.is_finite() && gz.is_finite() {
                Some(fx + p.h.eval(xt)? + gz - opt)
            } else {
                None
            }
        }
        None => None,
    };
    Ok((feas, gap))
}

fn base_record(
    p: &ProblemSpec,
    s: &SystemState,
    weight: Option<&LyapunovWeight>,
    gamma: f64,
    c: f64,
    tau: Option<f64>,
) -> Result<TraceRecord> {
    let dist_primal = p.known_primal.as_ref().map(|xs| dist(&s.x, xs));
    let dist_dual = p.known_dual.as_ref().map(|ys| dist(&s.y, ys));
    let lyapunov = match (weight, &p.known_primal, &p.known_dual) {
        (Some(w), Some(_), Some(_)) => Some(w.value(p, s)?),
        _ => None,
    };
    Ok(TraceRecord {
        t: s.t,
        dist_primal,
        dist_dual,
        feas: norm(&sub(&p.a.apply(&s.x), &s.z)),
        lyapunov,
        ergodic_feas: None,
        ergodic_gap: None,
        gamma,
        c,
        tau,
    })
}

/// Trace of a sampled flow trajectory.
pub fn flow_trace(sys: &FlowSystem<'_>, traj: &Trajectory) -> Result<Vec<TraceRecord>> {
    let p = sys.problem();
    let weight = LyapunovWeight::new(sys.m1(), sys.m2(), sys.c(), sys.gamma(), &p.a)?;
    let opt = optimal_value(p).ok();
    let mut out = Vec::with_capacity(traj.len());
    for (s, acc) in traj.states.iter().zip(&traj.ergodic) {
        let mut r = base_record(p, s, Some(&weight), sys.gamma(), sys.c(), sys.mode().tau_at(s.t))?;
        if s.t > 0.0 {
            let (xt, zt) = acc.averages(s)?;
            let (feas, gap) = ergodic_fields(p, &xt, &zt, opt)?;
            r.ergodic_feas = Some(feas);
            r.ergodic_gap = gap;
        }
        out.push(r);
    }
    Ok(out)
}

/// Trace of a discrete run; `t` holds the iteration counter and the ergodic
/// averages are `x̃ᴷ = (1/K)Σ_{k=1..K} xᵏ`.
pub fn discrete_trace(
    p: &ProblemSpec,
    c: f64,
    gamma: f64,
    mode: &MetricMode,
    run: &DiscreteRun,
) -> Result<Vec<TraceRecord>> {
    let (m1, m2) = mode.schedules(c, &p.a)?;
    let weight = LyapunovWeight::new(&m1, &m2, c, gamma, &p.a)?;
    let opt = optimal_value(p).ok();
    let mut sum_x = vec![0.0; p.n()];
    let mut sum_z = vec![0.0; p.m()];
    let mut out = Vec::with_capacity(run.history.len());
    for rec in &run.history {
        let mut s = rec.state.clone();
        s.t = rec.k as f64;
        let mut r = base_record(p, &s, Some(&weight), gamma, c, mode.tau_at(s.t))?;
        if rec.k > 0 {
            sum_x.iter_mut().zip(&s.x).for_each(|(a, b)| *a += b);
            sum_z.iter_mut().zip(&s.z).for_each(|(a, b)| *a += b);
            let k = rec.k as f64;
            let xt: Vec<f64> = sum_x.iter().map(|v| v / k).collect();
            let zt: Vec<f64> = sum_z.iter().map(|v| v / k).collect();
            let (feas, gap) = ergodic_fields(p, &xt, &zt, opt)?;
            r.ergodic_feas = Some(feas);
            r.ergodic_gap = gap;
        }
        out.push(r);
    }
    Ok(out)
}

/// Empirical check of the O(1/t) ergodic rates and Lyapunov descent.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCertificate {
    /// `max_{t ≥ 1} t·‖Ax̃(t) - z̃(t)‖`
    pub feas_constant: f64,
    /// `feas_constant ≤ 2·(value at the first sample with t ≥ 1)`
    pub feas_bounded: bool,
    pub gap_bound_ok: bool,
    /// `min_t (W0/(2t) - gap(t))`; infinite when no sample was checked.
    pub gap_bound_margin: f64,
    pub gap_samples_checked: usize,
    pub gap_samples_skipped: usize,
    pub lyapunov_monotone: bool,
    /// Largest relative increase `(V(t_{k+1}) - V(t_k))/(1 + V(t_k))` between samples.
    pub lyapunov_worst_increase: f64,
    /// First sampled time with `‖x - x*‖ ≤ threshold`.
    pub first_hit_time: f64,
    /// First sampled time after which `‖x - x*‖ ≤ threshold` at every later sample.
    pub settling_time: f64,
}

impl RateCertificate {
    pub fn all_ok(&self) -> bool {
        self.feas_bounded && self.gap_bound_ok && self.lyapunov_monotone
    }

    /// `key = value` lines for trace footers.
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("feas_constant", format!("{:.12e}", self.feas_constant)),
            ("feas_bounded", self.feas_bounded.to_string()),
            ("gap_bound_ok", self.gap_bound_ok.to_string()),
            ("gap_bound_margin", format!("{:.12e}", self.gap_bound_margin)),
            ("gap_samples_checked", self.gap_samples_checked.to_string()),
            ("gap_samples_skipped", self.gap_samples_skipped.to_string()),
            ("lyapunov_monotone", self.lyapunov_monotone.to_string()),
            (
                "lyapunov_worst_increase",
                format!("{:.12e}", self.lyapunov_worst_increase),
            ),
            ("first_hit_time", format_time(self.first_hit_time)),
            ("settling_time", format_time(self.settling_time)),
        ]
    }
}

fn format_time(t: f64) -> String {
    if t.is_finite() {
        format!("{t:.6}")
    } else {
        "inf".into()
    }
}

/// First sampled time with `dist_primal ≤ threshold`; infinite for `threshold ≤ 0`.
pub fn first_hit_time(trace: &[TraceRecord], threshold: f64) -> f64 {
    if !(threshold > 0.0) {
        return f64::INFINITY;
    }
    trace
        .iter()
        .find(|r| r.dist_primal.is_some_and(|d| d <= threshold))
        .map_or(f64::INFINITY, |r| r.t)
}

/// First sampled time from which `dist_primal ≤ threshold` holds at every later sample.
pub fn settling_time(trace: &[TraceRecord], threshold: f64) -> f64 {
    if !(threshold > 0.0) {
        return f64::INFINITY;
    }
    let mut settled = f64::INFINITY;
    for r in trace.iter().rev() {
        match r.dist_primal {
            Some(d) if d <= threshold => settled = r.t,
            _ => break,
        }
    }
    settled
}

pub fn certify_rates(
    trace: &[TraceRecord],
    _p: &ProblemSpec,
    w0_norm_sq: f64,
    hit_threshold: f64,
) -> Result<RateCertificate> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }

    let mut feas_constant: f64 = 0.0;
    let mut feas_at_start = None;
    for r in trace.iter().filter(|r| r.t >= 1.0) {
        if let Some(ef) = r.ergodic_feas {
            let v = r.t * ef;
            feas_at_start.get_or_insert(v);
            feas_constant = feas_constant.max(v);
        }
    }
    let feas_bounded = match feas_at_start {
        Some(v0) => feas_constant <= 2.0 * v0,
        None => true,
    };

    let mut margin = f64::INFINITY;
    let mut margin_bound = 0.0;
    let mut checked = 0;
    let mut skipped = 0;
    for r in trace.iter().filter(|r| r.t > 0.0) {
        match r.ergodic_gap {
            Some(gap) => {
                let bound = w0_norm_sq / (2.0 * r.t);
                checked += 1;
                if bound - gap < margin {
                    margin = bound - gap;
                    margin_bound = bound;
                }
            }
            None => skipped += 1,
        }
    }
    let gap_bound_ok = margin >= -GAP_SLACK * (1.0 + margin_bound);

    let mut worst: f64 = f64::NEG_INFINITY;
    let values: Vec<f64> = trace.iter().filter_map(|r| r.lyapunov).collect();
    for w in values.windows(2) {
        worst = worst.max((w[1] - w[0]) / (1.0 + w[0]));
    }
    let lyapunov_monotone = worst <= LYAPUNOV_SLACK;

    Ok(RateCertificate {
        feas_constant,
        feas_bounded,
        gap_bound_ok,
        gap_bound_margin: margin,
        gap_samples_checked: checked,
        gap_samples_skipped: skipped,
        lyapunov_monotone,
        lyapunov_worst_increase: if worst.is_finite() { worst } else { 0.0 },
        first_hit_time: first_hit_time(trace, hit_threshold),
        settling_time: settling_time(trace, hit_threshold),
    })
}

/// One run of a `(γ, τc)` sweep; `trace` is `None` when the run is missing.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub gamma: f64,
    pub tau_c: f64,
    pub trace: Option<Vec<TraceRecord>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub tau_c: f64,
    /// `None` marks a missing run.
    pub first_hit: Option<f64>,
    pub settling: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGroup {
    pub tau_c: f64,
    /// First-hit time nonincreasing in γ; `None` when a run is missing.
    pub first_hit_monotone: Option<bool>,
    pub settling_monotone: Option<bool>,
    /// `(max - min)/max` of the first-hit times over γ.
    pub relative_spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub threshold: f64,
    pub rows: Vec<SweepRow>,
    pub groups: Vec<SweepGroup>,
    /// Relative spread at the smallest τc is at most the one at the largest τc.
    pub attenuates: Option<bool>,
}

impl SweepReport {
    pub fn all_monotone(&self) -> bool {
        self.groups.iter().all(|g| g.first_hit_monotone == Some(true))
    }
}

fn nonincreasing_in_gamma(mut pts: Vec<(f64, f64)>) -> bool {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(2).all(|w| w[1].1 <= w[0].1)
}

/// Tabulates first-hit and settling times per `(γ, τc)` and checks that larger γ
/// never slows convergence at fixed τc.
pub fn sweep_summary(entries: &[SweepEntry], threshold: f64) -> SweepReport {
    let mut rows: Vec<SweepRow> = entries
        .iter()
        .map(|e| SweepRow {
            gamma: e.gamma,
            tau_c: e.tau_c,
            first_hit: e.trace.as_ref().map(|t| first_hit_time(t, threshold)),
            settling: e.trace.as_ref().map(|t| settling_time(t, threshold)),
        })
        .collect();
    rows.sort_by(|a, b| b.tau_c.total_cmp(&a.tau_c).then(b.gamma.total_cmp(&a.gamma)));

    let mut taus: Vec<f64> = rows.iter().map(|r| r.tau_c).collect();
    taus.dedup();
    let groups: Vec<SweepGroup> = taus
        .iter()
        .map(|&tc| {
            let members: Vec<&SweepRow> = rows.iter().filter(|r| r.tau_c == tc).collect();
            let complete = members.iter().all(|r| r.first_hit.is_some());
            let hits: Vec<(f64, f64)> = members
                .iter()
                .filter_map(|r| r.first_hit.map(|h| (r.gamma, h)))
                .collect();
            let settles: Vec<(f64, f64)> = members
                .iter()
                .filter_map(|r| r.settling.map(|h| (r.gamma, h)))
                .collect();
            let spread = if complete && hits.iter().all(|h| h.1.is_finite()) && !hits.is_empty() {
                let max = hits.iter().map(|h| h.1).fold(f64::MIN, f64::max);
                let min = hits.iter().map(|h| h.1).fold(f64::MAX, f64::min);
                Some(if max > 0.0 { (max - min) / max } else { 0.0 })
            } else {
                None
            };
            SweepGroup {
                tau_c: tc,
                first_hit_monotone: complete.then(|| nonincreasing_in_gamma(hits)),
                settling_monotone: complete.then(|| nonincreasing_in_gamma(settles)),
                relative_spread: spread,
            }
        })
        .collect();

    let attenuates = match (groups.first(), groups.last()) {
        (Some(hi), Some(lo)) if groups.len() > 1 => match (hi.relative_spread, lo.relative_spread) {
            (Some(a), Some(b)) => Some(b <= a),
            _ => None,
        },
        _ => None,
    };

    SweepReport {
        threshold,
        rows,
        groups,
        attenuates,
    }
}

fn opt_time(t: Option<f64>) -> String {
    match t {
        None => "missing".into(),
        Some(t) => format_time(t),
    }
}

fn opt_bool(b: Option<bool>) -> &'static str {
    match b {
        None => "incomplete",
        Some(true) => "yes",
        Some(false) => "no",
    }
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "threshold ||x - x*|| <= {}", self.threshold)?;
        writeln!(f, "{:>8} {:>8} {:>14} {:>14}", "tau_c", "gamma", "first_hit", "settling")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>8} {:>8} {:>14} {:>14}",
                r.tau_c,
                r.gamma,
                opt_time(r.first_hit),
                opt_time(r.settling)
            )?;
        }
        for g in &self.groups {
            writeln!(
                f,
                "tau_c = {}: first_hit nonincreasing in gamma: {}; settling nonincreasing in gamma: {}; relative spread: {}",
                g.tau_c,
                opt_bool(g.first_hit_monotone),
                opt_bool(g.settling_monotone),
                g.relative_spread.map_or("n/a".into(), |s| format!("{s:.4}"))
            )?;
        }
        writeln!(f, "gamma effect attenuates at small tau_c: {}", opt_bool(self.attenuates))
    }
}
