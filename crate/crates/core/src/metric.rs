//! Time-dependent metric operators `M₁(t)`, `M₂(t)`, the step-size schedule
//! `τ(t)`, certification of the standing positivity conditions, and the block
//! weight `W(t)` used by the Lyapunov and rate diagnostics.

use crate::error::{check_dim, Error, Result};
use crate::linops::{eigen_bounds, operator_norm, LinearMap, SelfAdjointPsd};
use crate::proxlib::DEFAULT_INNER_TOL;

/// Slack applied to the scalar step-size tests (`≤ 1`).
pub const SCALAR_TEST_SLACK: f64 = 1e-12;

/// Nondecreasing step-size schedule `τ(t) > 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum TauSchedule {
    Constant(f64),
    /// `τ(t) = limit - (limit - initial)·e^{-t}`
    Saturating { initial: f64, limit: f64 },
    /// Piecewise constant: `τ(t) = steps[min(⌊t⌋, len-1)]`.
    Steps(Vec<f64>),
}

impl TauSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match self {
            TauSchedule::Constant(t) if !(*t > 0.0) || !t.is_finite() => {
                bad(format!("tau must be positive, got {t}"))
            }
            TauSchedule::Saturating { initial, limit }
                if !(*initial > 0.0) || !(limit >= initial) || !limit.is_finite() =>
            {
                bad(format!(
                    "saturating tau needs 0 < initial <= limit, got {initial}, {limit}"
                ))
            }
            TauSchedule::Steps(v) if v.is_empty() => bad("tau step list is empty".into()),
            TauSchedule::Steps(v) if v.iter().any(|t| !(*t > 0.0) || !t.is_finite()) => {
                bad("tau steps must be positive".into())
            }
            TauSchedule::Steps(v) if v.windows(2).any(|w| w[1] < w[0]) => {
                bad("tau steps must be nondecreasing".into())
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            TauSchedule::Constant(tau) => *tau,
            TauSchedule::Saturating { initial, limit } => limit - (limit - initial) * (-t).exp(),
            TauSchedule::Steps(v) => {
                let i = if t <= 0.0 { 0 } else { t.floor() as usize };
                v[i.min(v.len() - 1)]
            }
        }
    }

    /// `τ'(t)`; zero almost everywhere for piecewise-constant schedules.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            TauSchedule::Saturating { initial, limit } => (limit - initial) * (-t).exp(),
            _ => 0.0,
        }
    }

    /// `sup_t τ'(t)/τ(t)²`; infinite when the schedule jumps.
    pub fn sup_rate(&self) -> f64 {
        match self {
            TauSchedule::Constant(_) => 0.0,
            // numerator decreases and denominator increases, so the sup sits at t = 0
            TauSchedule::Saturating { initial, limit } => (limit - initial) / (initial * initial),
            TauSchedule::Steps(v) => {
                if v.windows(2).any(|w| w[1] > w[0]) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    /// `sup_t τ(t)`
    pub fn sup_value(&self) -> f64 {
        match self {
            TauSchedule::Constant(t) => *t,
            TauSchedule::Saturating { limit, .. } => *limit,
            TauSchedule::Steps(v) => *v.last().expect("validated"),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            TauSchedule::Constant(_) => true,
            TauSchedule::Saturating { initial, limit } => initial == limit,
            TauSchedule::Steps(v) => v.windows(2).all(|w| w[0] == w[1]),
        }
    }
}

/// Monotonically decreasing PSD operator schedule.
#[derive(Debug, Clone)]
pub enum MetricSchedule {
    Zero { dim: usize },
    Constant(SelfAdjointPsd),
    /// `M₁(t) = I/τ(t) - c·A*A`
    TauFamily(TauFamily),
}

#[derive(Debug, Clone)]
pub struct TauFamily {
    c: f64,
    tau: TauSchedule,
    gram: LinearMap,
    gram_min: f64,
    gram_max: f64,
}

impl TauFamily {
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn tau(&self) -> &TauSchedule {
        &self.tau
    }

    /// `‖A‖²`, the largest eigenvalue of `A*A`.
    pub fn a_norm_sq(&self) -> f64 {
        self.gram_max
    }
}

impl MetricSchedule {
    pub fn zero(dim: usize) -> Self {
        MetricSchedule::Zero { dim }
    }

    pub fn constant(m: SelfAdjointPsd) -> Self {
        MetricSchedule::Constant(m)
    }

    pub fn tau_family(c: f64, a: &LinearMap, tau: TauSchedule) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
        }
        tau.validate()?;
        let gram = a.gram();
        let (gram_min, gram_max) = eigen_bounds(&gram, 1e-12)?;
        Ok(MetricSchedule::TauFamily(TauFamily {
            c,
            tau,
            gram,
            gram_min: gram_min.max(0.0),
            gram_max: gram_max.max(0.0),
        }))
    }

    pub fn dim(&self) -> usize {
        match self {
            MetricSchedule::Zero { dim } => *dim,
            MetricSchedule::Constant(m) => m.dim(),
            MetricSchedule::TauFamily(f) => f.gram.in_dim(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, MetricSchedule::Zero { .. })
    }

    pub fn is_constant(&self) -> bool {
        match self {
            MetricSchedule::Zero { .. } | MetricSchedule::Constant(_) => true,
            MetricSchedule::TauFamily(f) => f.tau.is_constant(),
        }
    }

    /// The operator at time `t`, with analytic spectral bounds.
    pub fn at(&self, t: f64) -> SelfAdjointPsd {
        match self {
            MetricSchedule::Zero { dim } => SelfAdjointPsd::scaled_identity(*dim, 0.0),
            MetricSchedule::Constant(m) => m.clone(),
            MetricSchedule::TauFamily(f) => {
                let inv_tau = 1.0 / f.tau.value(t);
                let n = f.gram.in_dim();
                let base = LinearMap::Sum(vec![
                    (inv_tau, LinearMap::identity(n)),
                    (-f.c, f.gram.clone()),
                ]);
                SelfAdjointPsd::with_bounds(
                    base,
                    inv_tau - f.c * f.gram_max,
                    inv_tau - f.c * f.gram_min,
                )
                .expect("square by construction")
            }
        }
    }

    /// The operator in the limit `t → ∞` (monotone schedules converge).
    pub fn at_limit(&self) -> SelfAdjointPsd {
        match self {
            MetricSchedule::TauFamily(f) => {
                let limit = MetricSchedule::TauFamily(TauFamily {
                    tau: TauSchedule::Constant(f.tau.sup_value()),
                    ..f.clone()
                });
                limit.at(0.0)
            }
            other => other.at(0.0),
        }
    }

    /// `sup_t ‖Ṁ(t)‖`
    pub fn derivative_sup(&self) -> f64 {
        match self {
            MetricSchedule::Zero { .. } | MetricSchedule::Constant(_) => 0.0,
            MetricSchedule::TauFamily(f) => f.tau.sup_rate(),
        }
    }

    pub fn as_tau_family(&self) -> Option<&TauFamily> {
        match self {
            MetricSchedule::TauFamily(f) => Some(f),
            _ => None,
        }
    }
}

/// How the metric enters the x-subproblem, shared by the flow and the discrete schemes.
#[derive(Debug, Clone)]
pub enum MetricMode {
    /// `M₁(t) = I/τ(t) - cA*A`, `M₂ = 0`: the x-update is a single prox of `f`.
    ClosedForm { tau: TauSchedule },
    /// Arbitrary schedules; subproblems are solved by [`crate::proxlib::metric_prox`].
    General {
        m1: MetricSchedule,
        m2: MetricSchedule,
        inner_tol: f64,
    },
}

impl MetricMode {
    pub fn closed_form(tau: f64) -> Self {
        MetricMode::ClosedForm {
            tau: TauSchedule::Constant(tau),
        }
    }

    pub fn general(m1: MetricSchedule, m2: MetricSchedule) -> Self {
        MetricMode::General {
            m1,
            m2,
            inner_tol: DEFAULT_INNER_TOL,
        }
    }

    /// Tau-family `M₁` with `M₂ = 0`, solved through the generic inner solver.
    pub fn general_tau_family(c: f64, a: &LinearMap, tau: TauSchedule) -> Result<Self> {
        Ok(Self::general(
            MetricSchedule::tau_family(c, a, tau)?,
            MetricSchedule::zero(a.out_dim()),
        ))
    }

    /// The `(M₁, M₂)` pair this mode represents.
    pub fn schedules(&self, c: f64, a: &LinearMap) -> Result<(MetricSchedule, MetricSchedule)> {
        match self {
            MetricMode::ClosedForm { tau } => Ok((
                MetricSchedule::tau_family(c, a, tau.clone())?,
                MetricSchedule::zero(a.out_dim()),
            )),
            MetricMode::General { m1, m2, .. } => Ok((m1.clone(), m2.clone())),
        }
    }

    pub fn tau_at(&self, t: f64) -> Option<f64> {
        match self {
            MetricMode::ClosedForm { tau } => Some(tau.value(t)),
            MetricMode::General { m1, .. } => m1.as_tau_family().map(|f| f.tau.value(t)),
        }
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        match self {
            MetricMode::ClosedForm { tau } => tau.validate(),
            MetricMode::General { m1, m2, inner_tol } => {
                check_dim(n, m1.dim())?;
                check_dim(m, m2.dim())?;
                if !(*inner_tol > 0.0) {
                    return Err(Error::InvalidParameter("inner tolerance must be positive".into()));
                }
                Ok(())
            }
        }
    }
}

/// `(Cstrong)`: a uniform floor `α` with `cA*A + M₁(t) ⪰ αI`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongCondition {
    pub holds: bool,
    pub alpha: f64,
}

/// Outcome of [`certify`]. Failures are `false` flags, never errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub cstrong: StrongCondition,
    /// `cA*A + M₁(t)` positive definite at every sample.
    pub cweak: bool,
    /// Tau family: `τ(t)(L_h/4 + c(3+γ)/4·‖A‖²) ≤ 1` at every sample.
    /// Other schedules: equal to `thm4_psd`, the operator form of the same test.
    pub rate_condition: bool,
    /// `M₁(t) + c(1-γ)/4·A*A - L_h/4·I ⪰ 0` at every sample.
    pub thm4_psd: bool,
    /// `M₁(t) + c(1-γ)/4·A*A - L_h/2·I ⪰ 0` at every sample.
    pub thm7_psd: bool,
    /// Tau family only: `cτ(t)‖A‖² ≤ 1` at every sample.
    pub step_size: Option<bool>,
    /// `M₁(t₁) ⪰ M₁(t₂)` and `M₂(t₁) ⪰ M₂(t₂)` for consecutive samples.
    pub monotone: bool,
    /// `M₁(t)` and `M₂(t)` positive semidefinite at every sample.
    pub metrics_psd: bool,
    /// `sup‖Ṁ₁‖` and `sup‖Ṁ₂‖` finite.
    pub derivative_bounded: bool,
}

impl ConditionReport {
    /// All hypotheses of the convergence and rate results hold.
    pub fn all_hold(&self) -> bool {
        self.cstrong.holds
            && self.cweak
            && self.rate_condition
            && self.thm4_psd
            && self.thm7_psd
            && self.step_size.unwrap_or(true)
            && self.monotone
            && self.metrics_psd
            && self.derivative_bounded
    }
}

/// `n` log-spaced sample times on `[horizon/10⁴, horizon]`, preceded by `t = 0`.
pub fn default_sample_times(horizon: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    if !(horizon > 0.0) || n == 0 {
        return out;
    }
    let lo = (horizon * 1e-4).ln();
    let hi = horizon.ln();
    for i in 0..n {
        let s = if n == 1 { 1.0 } else { i as f64 / (n - 1) as f64 };
        out.push((lo + s * (hi - lo)).exp());
    }
    out
}

/// Scalar form of the rate condition for `M₁ = I/τ - cA*A`:
/// `τ·(L_h/4 + c(3+γ)/4·‖A‖²) ≤ 1`.
pub fn rate_condition_scalar(tau: f64, c: f64, gamma: f64, l_h: f64, a_norm_sq: f64) -> bool {
    tau * (l_h / 4.0 + c * (3.0 + gamma) / 4.0 * a_norm_sq) <= 1.0 + SCALAR_TEST_SLACK
}

/// Operator `M₁ + c(1-γ)/4·A*A - (L_h·shift)·I`.
fn shifted_metric(
    m1: &SelfAdjointPsd,
    gram: &LinearMap,
    c: f64,
    gamma: f64,
    l_h_shift: f64,
) -> LinearMap {
    let n = m1.dim();
    LinearMap::Sum(vec![
        (1.0, m1.base().clone()),
        (c * (1.0 - gamma) / 4.0, gram.clone()),
        (-l_h_shift, LinearMap::identity(n)),
    ])
}

fn psd_tol(op_scale: f64) -> f64 {
    1e-10 * op_scale.max(1.0)
}

/// Certifies the standing conditions at the given sample times (and, for
/// saturating schedules, at the limit `t → ∞`).
#[allow(clippy::too_many_arguments)]
pub fn certify(
    m1: &MetricSchedule,
    m2: &MetricSchedule,
    c: f64,
    gamma: f64,
    a: &LinearMap,
    l_h: f64,
    sample_times: &[f64],
) -> Result<ConditionReport> {
    if sample_times.is_empty() {
        return Err(Error::InvalidParameter("certify needs at least one sample time".into()));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("sample times must be sorted".into()));
    }
    if !(c > 0.0) || !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter("need c > 0 and gamma in [0,1]".into()));
    }
    check_dim(a.in_dim(), m1.dim())?;
    check_dim(a.out_dim(), m2.dim())?;

    let gram = a.gram();
    let a_norm_sq = operator_norm(a, 1e-12, 10_000)?.value.powi(2);
    let scale = c * a_norm_sq + l_h;

    let mut alpha = f64::INFINITY;
    let mut cweak = true;
    let mut thm4 = true;
    let mut thm7 = true;
    let mut metrics_psd = true;

    let mut evaluate = |m1t: &SelfAdjointPsd, m2t: &SelfAdjointPsd, is_sample: bool| -> Result<()> {
        let tol = psd_tol(scale + m1t.upper());
        let q = LinearMap::Sum(vec![(c, gram.clone()), (1.0, m1t.base().clone())]);
        let (lo, _) = eigen_bounds(&q, tol)?;
        alpha = alpha.min(lo);
        if is_sample && lo <= tol {
            cweak = false;
        }
        thm4 &= eigen_bounds(&shifted_metric(m1t, &gram, c, gamma, l_h / 4.0), tol)?.0 >= -tol;
        thm7 &= eigen_bounds(&shifted_metric(m1t, &gram, c, gamma, l_h / 2.0), tol)?.0 >= -tol;
        metrics_psd &= eigen_bounds(m1t.base(), tol)?.0 >= -tol;
        metrics_psd &= eigen_bounds(m2t.base(), psd_tol(m2t.upper()))?.0 >= -psd_tol(m2t.upper());
        Ok(())
    };

    for &t in sample_times {
        evaluate(&m1.at(t), &m2.at(t), true)?;
    }
    evaluate(&m1.at_limit(), &m2.at_limit(), false)?;

    let mut monotone = true;
    for w in sample_times.windows(2) {
        for m in [m1, m2] {
            if m.is_constant() {
                continue;
            }
            let (a0, a1) = (m.at(w[0]), m.at(w[1]));
            let diff = LinearMap::Sum(vec![(1.0, a0.base().clone()), (-1.0, a1.base().clone())]);
            monotone &= eigen_bounds(&diff, 1e-10)?.0 >= -1e-10;
        }
    }

    let cstrong_tol = psd_tol(scale);
    let cstrong = StrongCondition {
        holds: alpha > cstrong_tol,
        alpha: alpha.max(0.0),
    };

    let (rate_condition, step_size) = match m1.as_tau_family() {
        Some(f) => {
            let taus = sample_times
                .iter()
                .map(|&t| f.tau.value(t))
                .chain(std::iter::once(f.tau.sup_value()));
            let mut rate = true;
            let mut step = true;
            for tau in taus {
                rate &= rate_condition_scalar(tau, c, gamma, l_h, a_norm_sq);
                step &= c * tau * a_norm_sq <= 1.0 + SCALAR_TEST_SLACK;
            }
            (rate, Some(step))
        }
        None => (thm4, None),
    };

    Ok(ConditionReport {
        cstrong,
        cweak,
        rate_condition,
        thm4_psd: thm4,
        thm7_psd: thm7,
        step_size,
        monotone,
        metrics_psd,
        derivative_bounded: m1.derivative_sup().is_finite() && m2.derivative_sup().is_finite(),
    })
}

/// Block-diagonal weight on `(x, z, y)`.
#[derive(Debug, Clone)]
pub struct BlockWeight {
    pub x_block: SelfAdjointPsd,
    pub z_block: SelfAdjointPsd,
    pub y_block: SelfAdjointPsd,
}

impl BlockWeight {
    pub fn seminorm_sq(&self, x: &[f64], z: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.x_block.seminorm_sq(x)? + self.z_block.seminorm_sq(z)? + self.y_block.seminorm_sq(y)?)
    }
}

/// `W(t) = (M₁(t) + c(1-γ)A*A, M₂(t) + cI, I/c)`
pub fn weight_w(
    m1: &MetricSchedule,
    m2: &MetricSchedule,
    c: f64,
    gamma: f64,
    a: &LinearMap,
    t: f64,
) -> Result<BlockWeight> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
    }
    check_dim(a.in_dim(), m1.dim())?;
    check_dim(a.out_dim(), m2.dim())?;
    let (m1t, m2t) = (m1.at(t), m2.at(t));
    let m = a.out_dim();

    let x_block = if gamma == 1.0 {
        m1t
    } else if let Some(f) = m1.as_tau_family() {
        // I/τ - cγA*A
        let inv_tau = 1.0 / f.tau.value(t);
        let base = LinearMap::Sum(vec![
            (inv_tau, LinearMap::identity(a.in_dim())),
            (-c * gamma, f.gram.clone()),
        ]);
        SelfAdjointPsd::with_bounds(
            base,
            inv_tau - c * gamma * f.gram_max,
            inv_tau - c * gamma * f.gram_min,
        )?
    } else {
        let base = LinearMap::Sum(vec![
            (1.0, m1t.base().clone()),
            (c * (1.0 - gamma), a.gram()),
        ]);
        SelfAdjointPsd::assume(base)?
    };
    let z_block = if m2.is_zero() {
        SelfAdjointPsd::scaled_identity(m, c)
    } else {
        let base = LinearMap::Sum(vec![(1.0, m2t.base().clone()), (c, LinearMap::identity(m))]);
        SelfAdjointPsd::with_bounds(base, m2t.alpha_floor() + c, m2t.upper() + c)?
    };
    Ok(BlockWeight {
        x_block,
        z_block,
        y_block: SelfAdjointPsd::scaled_identity(m, 1.0 / c),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::DenseMatrix;

    fn example_a() -> LinearMap {
        LinearMap::dense(DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![1.0, 1.0]]).unwrap())
    }

    fn samples() -> Vec<f64> {
        vec![0.0, 0.5, 1.0, 5.0, 50.0]
    }

    #[test]
    fn example_setup_passes_step_size_test() {
        let a = example_a();
        let (m1, m2) = MetricMode::closed_form(0.25).schedules(1.0, &a).unwrap();
        let r = certify(&m1, &m2, 1.0, 0.5, &a, 0.0, &samples()).unwrap();
        assert_eq!(r.step_size, Some(true));
        assert!(r.rate_condition && r.thm4_psd && r.thm7_psd);
        assert!(r.cstrong.holds && r.cweak);
        // cA*A + M₁ = I/τ
        assert!((r.cstrong.alpha - 4.0).abs() < 1e-12);
        assert!(r.all_hold());
    }

    #[test]
    fn zero_metrics_with_gamma_one() {
        let a = example_a();
        let r = certify(
            &MetricSchedule::zero(2),
            &MetricSchedule::zero(2),
            1.0,
            1.0,
            &a,
            0.0,
            &[0.0, 1.0],
        )
        .unwrap();
        assert!(r.thm4_psd);
        assert!(r.thm7_psd);
        assert_eq!(r.rate_condition, r.thm4_psd);
        assert_eq!(r.step_size, None);
        // A is injective, so cA*A alone is positive definite
        assert!(r.cstrong.holds);
    }

    #[test]
    fn remark_scalar_evaluation() {
        // 0.49 · (3.99/4) · 2 ≈ 0.978
        let v: f64 = 0.49 * (1.0 * (3.0 + 0.99) / 4.0) * 2.0;
        assert!((v - 0.97755).abs() < 1e-12);
        assert!(rate_condition_scalar(0.49, 1.0, 0.99, 0.0, 2.0));
        assert!(!rate_condition_scalar(0.51, 1.0, 0.99, 0.0, 2.0));
    }

    #[test]
    fn cstrong_implies_cweak() {
        let a = LinearMap::dense(DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap());
        // A*A singular: with M₁ = 0 neither condition holds
        let r = certify(
            &MetricSchedule::zero(2),
            &MetricSchedule::zero(1),
            1.0,
            0.5,
            &a,
            0.0,
            &[0.0],
        )
        .unwrap();
        assert!(!r.cstrong.holds && !r.cweak);
        let m1 = MetricSchedule::constant(SelfAdjointPsd::scaled_identity(2, 0.1));
        let r = certify(&m1, &MetricSchedule::zero(1), 1.0, 0.5, &a, 0.0, &[0.0, 1.0]).unwrap();
        assert!(r.cstrong.holds && r.cweak);
        assert!((r.cstrong.alpha - 0.1).abs() < 1e-12);
    }

    #[test]
    fn violated_step_size_is_a_flag() {
        let a = example_a();
        let (m1, m2) = MetricMode::closed_form(0.6).schedules(1.0, &a).unwrap();
        let r = certify(&m1, &m2, 1.0, 0.5, &a, 0.0, &samples()).unwrap();
        assert_eq!(r.step_size, Some(false));
        assert!(!r.metrics_psd);
        assert!(!r.all_hold());
    }

    #[test]
    fn certify_rejects_bad_inputs() {
        let a = example_a();
        let (m1, m2) = MetricMode::closed_form(0.25).schedules(1.0, &a).unwrap();
        assert!(certify(&m1, &m2, 1.0, 0.5, &a, 0.0, &[]).is_err());
        assert!(certify(&m1, &m2, 1.0, 0.5, &a, 0.0, &[2.0, 1.0]).is_err());
        assert!(certify(&m1, &m2, 1.0, 1.5, &a, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn tau_schedules() {
        let s = TauSchedule::Saturating { initial: 0.1, limit: 0.4 };
        s.validate().unwrap();
        assert!((s.value(0.0) - 0.1).abs() < 1e-15);
        assert!(s.value(1.0) < s.value(2.0));
        assert!((s.sup_rate() - 30.0).abs() < 1e-12);
        assert_eq!(s.sup_value(), 0.4);
        assert!(TauSchedule::Saturating { initial: 0.5, limit: 0.4 }.validate().is_err());
        assert!(TauSchedule::Constant(0.0).validate().is_err());
        assert!(TauSchedule::Steps(vec![0.2, 0.1]).validate().is_err());
        let st = TauSchedule::Steps(vec![0.1, 0.2, 0.3]);
        assert_eq!(st.value(0.0), 0.1);
        assert_eq!(st.value(1.5), 0.2);
        assert_eq!(st.value(99.0), 0.3);
        assert_eq!(st.sup_rate(), f64::INFINITY);
    }

    #[test]
    fn saturating_family_is_monotone_decreasing() {
        let a = example_a();
        let m1 = MetricSchedule::tau_family(
            1.0,
            &a,
            TauSchedule::Saturating { initial: 0.1, limit: 0.45 },
        )
        .unwrap();
        let r = certify(&m1, &MetricSchedule::zero(2), 1.0, 0.5, &a, 0.0, &samples()).unwrap();
        assert!(r.monotone);
        assert!(r.derivative_bounded);
        // Cstrong uses the limit τ = 0.45: α = 1/0.45
        assert!((r.cstrong.alpha - 1.0 / 0.45).abs() < 1e-12);
    }

    #[test]
    fn constant_schedule_is_time_invariant() {
        let m = SelfAdjointPsd::scaled_identity(2, 3.0);
        let s = MetricSchedule::constant(m);
        assert_eq!(s.at(0.0).base().to_dense(), s.at(123.0).base().to_dense());
        assert_eq!(s.derivative_sup(), 0.0);
    }

    #[test]
    fn weight_examples() {
        let a = example_a();
        let w = weight_w(&MetricSchedule::zero(2), &MetricSchedule::zero(2), 2.0, 1.0, &a, 0.0).unwrap();
        assert_eq!(w.x_block.base().to_dense(), DenseMatrix::diagonal(&[0.0, 0.0]));
        assert_eq!(w.z_block.base().to_dense(), DenseMatrix::diagonal(&[2.0, 2.0]));
        assert_eq!(w.y_block.base().to_dense(), DenseMatrix::diagonal(&[0.5, 0.5]));

        // τc = 0.25, c = 1, γ = 0: I/τ - A*A + A*A = 4I
        let (m1, m2) = MetricMode::closed_form(0.25).schedules(1.0, &a).unwrap();
        let w = weight_w(&m1, &m2, 1.0, 0.0, &a, 3.0).unwrap();
        assert!(w.x_block.base().to_dense().max_abs_diff(&DenseMatrix::diagonal(&[4.0, 4.0])) < 1e-14);

        let y = [3.0, -1.0];
        let v = w.seminorm_sq(&[0.0, 0.0], &[0.0, 0.0], &y).unwrap();
        assert!((v - 10.0 / 1.0).abs() < 1e-14);
        let w2 = weight_w(&m1, &m2, 4.0, 0.0, &a, 0.0);
        assert!(w2.is_ok());
        let v2 = w2.unwrap().seminorm_sq(&[0.0, 0.0], &[0.0, 0.0], &y).unwrap();
        assert!((v2 - 10.0 / 4.0).abs() < 1e-14);
    }
}
