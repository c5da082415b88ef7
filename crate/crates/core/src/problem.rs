//! Structured convex problems `min f(x) + h(x) + g(Ax)`, their Lagrangian,
//! saddle-point residuals, and a small catalog of instances with known solutions.

use crate::error::{check_dim, Error, Result};
use crate::linops::{DenseMatrix, LinearMap};
use crate::proxlib::{ProxFunction, SmoothFunction};
use crate::vector::{all_finite, dist, dot, norm, sub};

/// Names accepted by [`catalog`].
pub const CATALOG_NAMES: [&str; 3] = ["example1", "lasso-small", "box-qp"];

/// Starting primal point of the two-dimensional example.
pub const EXAMPLE1_X0: [f64; 2] = [-10.0, 10.0];
/// Starting dual point of the two-dimensional example.
pub const EXAMPLE1_Y0: [f64; 2] = [-10.0, 10.0];

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub f: ProxFunction,
    pub h: SmoothFunction,
    pub g: ProxFunction,
    pub a: LinearMap,
    pub known_primal: Option<Vec<f64>>,
    pub known_dual: Option<Vec<f64>>,
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        f: ProxFunction,
        h: SmoothFunction,
        g: ProxFunction,
        a: LinearMap,
    ) -> Result<Self> {
        check_dim(a.in_dim(), f.dim())?;
        check_dim(a.in_dim(), h.dim())?;
        check_dim(a.out_dim(), g.dim())?;
        Ok(Self {
            name: name.into(),
            f,
            h,
            g,
            a,
            known_primal: None,
            known_dual: None,
        })
    }

    pub fn with_solution(mut self, primal: Vec<f64>, dual: Option<Vec<f64>>) -> Result<Self> {
        check_dim(self.n(), primal.len())?;
        if !all_finite(&primal) {
            return Err(Error::InvalidParameter("known primal point is not finite".into()));
        }
        if let Some(y) = &dual {
            check_dim(self.m(), y.len())?;
        }
        self.known_primal = Some(primal);
        self.known_dual = dual;
        Ok(self)
    }

    /// Primal dimension.
    pub fn n(&self) -> usize {
        self.a.in_dim()
    }

    /// Dimension of the split variable and the multiplier.
    pub fn m(&self) -> usize {
        self.a.out_dim()
    }

    pub fn lipschitz_h(&self) -> f64 {
        self.h.lipschitz_grad()
    }

    /// `(x*, Ax*, y*)`, or [`Error::MissingSolution`].
    pub fn saddle_point(&self) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        match (&self.known_primal, &self.known_dual) {
            (Some(x), Some(y)) => Ok((x.clone(), self.a.apply(x), y.clone())),
            _ => Err(Error::MissingSolution(self.name.clone())),
        }
    }

    fn check_point(&self, x: &[f64], z: &[f64], y: &[f64]) -> Result<()> {
        check_dim(self.n(), x.len())?;
        check_dim(self.m(), z.len())?;
        check_dim(self.m(), y.len())
    }
}

/// `f(x) + h(x) + g(z) + ⟨y, Ax - z⟩`; infinite when `x` or `z` leaves an indicator's domain.
pub fn lagrangian(p: &ProblemSpec, x: &[f64], z: &[f64], y: &[f64]) -> Result<f64> {
    p.check_point(x, z, y)?;
    let fx = p.f.eval(x)?;
    let gz = p.g.eval(z)?;
    if fx.is_infinite() || gz.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let r = sub(&p.a.apply(x), z);
    Ok(fx + p.h.eval(x)? + gz + dot(y, &r))
}

/// `f(x) + h(x) + g(Ax)`
pub fn objective(p: &ProblemSpec, x: &[f64]) -> Result<f64> {
    check_dim(p.n(), x.len())?;
    let fx = p.f.eval(x)?;
    let gz = p.g.eval(&p.a.apply(x))?;
    if fx.is_infinite() || gz.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(fx + p.h.eval(x)? + gz)
}

/// Objective value at the known primal solution.
pub fn optimal_value(p: &ProblemSpec) -> Result<f64> {
    match &p.known_primal {
        Some(x) => objective(p, x),
        None => Err(Error::MissingSolution(p.name.clone())),
    }
}

/// Fixed-point residuals of the optimality system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleResidual {
    /// `‖x - prox_f(x - ∇h(x) - A*y)‖`
    pub stat_x: f64,
    /// `‖z - prox_g(z + y)‖`
    pub stat_z: f64,
    /// `‖Ax - z‖`
    pub feas: f64,
}

impl SaddleResidual {
    pub fn max(&self) -> f64 {
        self.stat_x.max(self.stat_z).max(self.feas)
    }
}

pub fn kkt_residual(p: &ProblemSpec, x: &[f64], z: &[f64], y: &[f64]) -> Result<SaddleResidual> {
    p.check_point(x, z, y)?;
    let grad = p.h.grad(x)?;
    let aty = p.a.apply_adjoint(y);
    let point: Vec<f64> = x
        .iter()
        .zip(grad.iter().zip(&aty))
        .map(|(xi, (gi, ai))| xi - gi - ai)
        .collect();
    let stat_x = dist(x, &p.f.prox(1.0, &point)?);
    let zy: Vec<f64> = z.iter().zip(y).map(|(a, b)| a + b).collect();
    let stat_z = dist(z, &p.g.prox(1.0, &zy)?);
    let feas = norm(&sub(&p.a.apply(x), z));
    Ok(SaddleResidual { stat_x, stat_z, feas })
}

/// Dual objective of the two-dimensional example: `-y₁² - y₂²` on `[-1,1]²`, `-∞` outside.
pub fn example1_dual_objective(y: &[f64]) -> Result<f64> {
    check_dim(2, y.len())?;
    if y.iter().all(|v| (-1.0..=1.0).contains(v)) {
        Ok(-y[0] * y[0] - y[1] * y[1])
    } else {
        Ok(f64::NEG_INFINITY)
    }
}

pub fn catalog(name: &str) -> Result<ProblemSpec> {
    match name {
        "example1" => example1(),
        "lasso-small" => lasso_small(),
        "box-qp" => box_qp(),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

/// `½‖x‖² + |x₁ - x₂| + |x₁ + x₂|`
fn example1() -> Result<ProblemSpec> {
    let a = DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![1.0, 1.0]])?;
    ProblemSpec::new(
        "example1",
        ProxFunction::scaled_sq_norm(2, 1.0)?,
        SmoothFunction::zero(2),
        ProxFunction::l1_norm(2, 1.0)?,
        LinearMap::dense(a),
    )?
    .with_solution(vec![0.0, 0.0], Some(vec![0.0, 0.0]))
}

/// `½‖Bx - b‖² + 1.5‖x‖₁` with `A = I`.
fn lasso_small() -> Result<ProblemSpec> {
    let b_mat = DenseMatrix::from_rows(&[
        vec![2.0, 1.0, 0.0, 0.0, -1.0],
        vec![1.0, 3.0, 1.0, 0.0, 0.0],
        vec![0.0, 1.0, 2.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0, 3.0, 1.0],
        vec![-1.0, 0.0, 0.0, 1.0, 2.0],
        vec![1.0, 0.0, 1.0, 0.0, 1.0],
        vec![0.0, 1.0, 0.0, 1.0, 0.0],
        vec![1.0, -1.0, 1.0, -1.0, 1.0],
    ])?;
    let b = [1.0, -2.0, 0.5, 3.0, -1.0, 0.0, 2.0, -0.5];
    // exact active-set solution; support {0, 1, 3, 4}
    let x_star = vec![
        0.2146739130434783,
        -0.3940217391304348,
        0.0,
        0.9809782608695653,
        -0.4103260869565218,
    ];
    let y_star = vec![1.5, -1.5, -0.2608695652173916, 1.5, -1.4999999999999996];
    ProblemSpec::new(
        "lasso-small",
        ProxFunction::zero(5),
        SmoothFunction::least_squares(&b_mat, &b)?,
        ProxFunction::l1_norm(5, 1.5)?,
        LinearMap::identity(5),
    )?
    .with_solution(x_star, Some(y_star))
}

/// `min ½x'Px + q'x` over `x ∈ [-1,1]⁴` with `Ax ≤ b`.
fn box_qp() -> Result<ProblemSpec> {
    let p = DenseMatrix::from_rows(&[
        vec![4.0, 1.0, 0.0, 0.5],
        vec![1.0, 3.0, 0.5, 0.0],
        vec![0.0, 0.5, 2.0, 0.25],
        vec![0.5, 0.0, 0.25, 1.5],
    ])?;
    let q = vec![-6.0, 2.0, -1.0, 1.0];
    let a = DenseMatrix::from_rows(&[vec![1.0, 1.0, 1.0, 1.0], vec![1.0, -1.0, 0.0, 2.0]])?;
    ProblemSpec::new(
        "box-qp",
        ProxFunction::box_indicator(vec![-1.0; 4], vec![1.0; 4])?,
        SmoothFunction::quadratic(p, q, 0.0)?,
        ProxFunction::box_indicator(vec![f64::NEG_INFINITY; 2], vec![-0.5, 0.25])?,
        LinearMap::dense(a),
    )?
    .with_solution(vec![1.0, -1.0, 0.5, -1.0], Some(vec![0.75, 0.0]))
}
