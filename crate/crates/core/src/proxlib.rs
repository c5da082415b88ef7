//! Proximal operators, conjugate proxes via the Moreau decomposition, smooth
//! terms with Lipschitz gradients, and a proximal-gradient solver for
//! variable-metric prox subproblems.

use crate::error::{check_dim, Error, Result};
use crate::linops::{eigen_bounds, DenseMatrix, SelfAdjointPsd};
use crate::vector::{dot, norm, norm_sq};

/// Iteration cap of the inner solver in [`metric_prox`].
pub const INNER_MAX_ITERS: usize = 100_000;

/// Default relative first-order residual tolerance of the inner solver.
pub const DEFAULT_INNER_TOL: f64 = 1e-10;

/// One coordinate of a separable function.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarTerm {
    Zero,
    /// `coef/2 · (v - center)²`
    Quadratic { coef: f64, center: f64 },
    /// `weight · |v - center|`
    Abs { weight: f64, center: f64 },
    /// Indicator of `[lo, hi]`; either end may be infinite.
    Interval { lo: f64, hi: f64 },
}

impl ScalarTerm {
    fn eval(&self, v: f64) -> f64 {
        match *self {
            ScalarTerm::Zero => 0.0,
            ScalarTerm::Quadratic { coef, center } => 0.5 * coef * (v - center) * (v - center),
            ScalarTerm::Abs { weight, center } => weight * (v - center).abs(),
            ScalarTerm::Interval { lo, hi } => {
                if (lo..=hi).contains(&v) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    fn prox(&self, tau: f64, u: f64) -> f64 {
        match *self {
            ScalarTerm::Zero => u,
            ScalarTerm::Quadratic { coef, center } => (u + tau * coef * center) / (1.0 + tau * coef),
            ScalarTerm::Abs { weight, center } => center + soft_threshold(u - center, tau * weight),
            ScalarTerm::Interval { lo, hi } => u.clamp(lo, hi),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ScalarTerm::Zero => Ok(()),
            ScalarTerm::Quadratic { coef, .. } if coef >= 0.0 && coef.is_finite() => Ok(()),
            ScalarTerm::Abs { weight, .. } if weight >= 0.0 && weight.is_finite() => Ok(()),
            ScalarTerm::Interval { lo, hi } if lo <= hi => Ok(()),
            _ => Err(Error::InvalidParameter(format!(
                "scalar term {self:?} is not convex or is empty"
            ))),
        }
    }
}

pub fn soft_threshold(u: f64, k: f64) -> f64 {
    if u > k {
        u - k
    } else if u < -k {
        u + k
    } else {
        0.0
    }
}

/// Proper convex lower semicontinuous function with a closed-form prox.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxFunction {
    Zero { dim: usize },
    /// `coef/2 · ‖x‖²`
    ScaledSqNorm { dim: usize, coef: f64 },
    /// `weight · ‖x‖₁`
    L1Norm { dim: usize, weight: f64 },
    /// Indicator of the box `lo ≤ x ≤ hi`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Separable(Vec<ScalarTerm>),
}

impl ProxFunction {
    pub fn zero(dim: usize) -> Self {
        ProxFunction::Zero { dim }
    }

    pub fn scaled_sq_norm(dim: usize, coef: f64) -> Result<Self> {
        ScalarTerm::Quadratic { coef, center: 0.0 }.validate()?;
        Ok(ProxFunction::ScaledSqNorm { dim, coef })
    }

    pub fn l1_norm(dim: usize, weight: f64) -> Result<Self> {
        ScalarTerm::Abs { weight, center: 0.0 }.validate()?;
        Ok(ProxFunction::L1Norm { dim, weight })
    }

    pub fn box_indicator(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        for (l, h) in lo.iter().zip(&hi) {
            ScalarTerm::Interval { lo: *l, hi: *h }.validate()?;
        }
        Ok(ProxFunction::Box { lo, hi })
    }

    pub fn separable(terms: Vec<ScalarTerm>) -> Result<Self> {
        for t in &terms {
            t.validate()?;
        }
        Ok(ProxFunction::Separable(terms))
    }

    pub fn dim(&self) -> usize {
        match self {
            ProxFunction::Zero { dim }
            | ProxFunction::ScaledSqNorm { dim, .. }
            | ProxFunction::L1Norm { dim, .. } => *dim,
            ProxFunction::Box { lo, .. } => lo.len(),
            ProxFunction::Separable(terms) => terms.len(),
        }
    }

    /// Value in the extended reals; indicators return `f64::INFINITY` outside their domain.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(match self {
            ProxFunction::Zero { .. } => 0.0,
            ProxFunction::ScaledSqNorm { coef, .. } => 0.5 * coef * norm_sq(x),
            ProxFunction::L1Norm { weight, .. } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            ProxFunction::Box { lo, hi } => {
                let inside = x
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(v, (l, h))| (*l..=*h).contains(v));
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxFunction::Separable(terms) => terms.iter().zip(x).map(|(t, v)| t.eval(*v)).sum(),
        })
    }

    pub fn in_domain(&self, x: &[f64]) -> Result<bool> {
        Ok(self.eval(x)?.is_finite())
    }

    /// `prox_{τf}(u) = argmin_v f(v) + ‖v - u‖²/(2τ)`
    pub fn prox(&self, tau: f64, u: &[f64]) -> Result<Vec<f64>> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "prox step must be positive and finite, got {tau}"
            )));
        }
        check_dim(self.dim(), u.len())?;
        Ok(match self {
            ProxFunction::Zero { .. } => u.to_vec(),
            ProxFunction::ScaledSqNorm { coef, .. } => {
                let s = 1.0 / (1.0 + tau * coef);
                u.iter().map(|v| s * v).collect()
            }
            ProxFunction::L1Norm { weight, .. } => {
                u.iter().map(|v| soft_threshold(*v, tau * weight)).collect()
            }
            ProxFunction::Box { lo, hi } => u
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| v.clamp(*l, *h))
                .collect(),
            ProxFunction::Separable(terms) => {
                terms.iter().zip(u).map(|(t, v)| t.prox(tau, *v)).collect()
            }
        })
    }

    /// `prox_{c f*}(y) = y - c·prox_{f/c}(y/c)` (Moreau decomposition).
    pub fn conjugate_prox(&self, c: f64, y: &[f64]) -> Result<Vec<f64>> {
        conjugate_prox(self, c, y)
    }
}

pub fn prox(f: &ProxFunction, tau: f64, u: &[f64]) -> Result<Vec<f64>> {
    f.prox(tau, u)
}

/// `prox_{c g*}(y)` through the Moreau decomposition.
pub fn conjugate_prox(g: &ProxFunction, c: f64, y: &[f64]) -> Result<Vec<f64>> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "conjugate prox scale must be positive, got {c}"
        )));
    }
    let scaled: Vec<f64> = y.iter().map(|v| v / c).collect();
    let p = g.prox(1.0 / c, &scaled)?;
    Ok(y.iter().zip(p).map(|(v, pv)| v - c * pv).collect())
}

/// Convex quadratic `½⟨x, Hx⟩ + ⟨q, x⟩ + r`, or the zero function.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothFunction {
    dim: usize,
    quadratic: Option<Quadratic>,
    lipschitz_grad: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Quadratic {
    hessian: DenseMatrix,
    linear: Vec<f64>,
    constant: f64,
}

impl SmoothFunction {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            quadratic: None,
            lipschitz_grad: 0.0,
        }
    }

    /// `½⟨x, Hx⟩ + ⟨q, x⟩ + r` with `H` symmetric positive semidefinite.
    /// The gradient Lipschitz constant is the largest eigenvalue of `H`.
    pub fn quadratic(hessian: DenseMatrix, linear: Vec<f64>, constant: f64) -> Result<Self> {
        let dim = hessian.cols();
        check_dim(hessian.rows(), dim)?;
        check_dim(dim, linear.len())?;
        let psd = SelfAdjointPsd::certify(crate::linops::LinearMap::dense(hessian.clone()), 1e-10)?;
        Ok(Self {
            dim,
            lipschitz_grad: psd.upper(),
            quadratic: Some(Quadratic {
                hessian,
                linear,
                constant,
            }),
        })
    }

    /// `½‖Bx - b‖²`
    pub fn least_squares(b_mat: &DenseMatrix, b: &[f64]) -> Result<Self> {
        check_dim(b_mat.rows(), b.len())?;
        let bt = b_mat.transpose();
        let n = b_mat.cols();
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                h[i * n + j] = dot(bt.row(i), bt.row(j));
            }
        }
        let q: Vec<f64> = b_mat.matvec_transpose(b).into_iter().map(|v| -v).collect();
        Self::quadratic(DenseMatrix::new(n, n, h)?, q, 0.5 * norm_sq(b))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz_grad(&self) -> f64 {
        self.lipschitz_grad
    }

    pub fn is_zero(&self) -> bool {
        self.quadratic.is_none()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(match &self.quadratic {
            None => 0.0,
            Some(q) => 0.5 * dot(x, &q.hessian.matvec(x)) + dot(&q.linear, x) + q.constant,
        })
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        Ok(match &self.quadratic {
            None => vec![0.0; self.dim],
            Some(q) => {
                let mut g = q.hessian.matvec(x);
                g.iter_mut().zip(&q.linear).for_each(|(a, b)| *a += b);
                g
            }
        })
    }

    /// Largest eigenvalue of the Hessian recomputed from scratch (for consistency checks).
    pub fn hessian_spectrum(&self) -> Result<(f64, f64)> {
        match &self.quadratic {
            None => Ok((0.0, 0.0)),
            Some(q) => eigen_bounds(&crate::linops::LinearMap::dense(q.hessian.clone()), 1e-12),
        }
    }
}

/// Minimizes `f(v) + ⟨v, linear⟩ + ½⟨v, Qv⟩` by proximal-gradient iterations
/// with step `1/‖Q‖`, started at `x0`.
///
/// Stops when `‖v⁺ - v‖ ≤ tol·max(1, ‖v⁺‖)`. The gradient of a smooth term
/// evaluated at a fixed point belongs in `linear`.
pub fn metric_prox(
    f: &ProxFunction,
    q: &SelfAdjointPsd,
    linear: &[f64],
    x0: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    check_dim(f.dim(), q.dim())?;
    check_dim(f.dim(), linear.len())?;
    check_dim(f.dim(), x0.len())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "inner tolerance must be positive, got {tol}"
        )));
    }
    if !(q.alpha_floor() > 0.0) {
        return Err(Error::Precondition(
            "metric of the prox subproblem is not certified positive definite".into(),
        ));
    }
    let step = 1.0 / q.upper();
    let mut v = x0.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..INNER_MAX_ITERS {
        let qv = q.apply(&v);
        let point: Vec<f64> = v
            .iter()
            .zip(qv.iter().zip(linear))
            .map(|(vi, (qi, li))| vi - step * (qi + li))
            .collect();
        let next = f.prox(step, &point)?;
        let change = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        residual = change / norm(&next).max(1.0);
        v = next;
        if residual <= tol {
            return Ok(v);
        }
    }
    Err(Error::ToleranceNotMet {
        iterations: INNER_MAX_ITERS,
        residual,
        best: v,
    })
}
