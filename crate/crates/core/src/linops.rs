//! Finite-dimensional linear operators, their adjoints, and spectral estimates.
//!
//! Vectors are plain `f64` slices. A [`LinearMap`] is a small expression tree
//! (dense matrix, scaled identity, composition, weighted sum) so that operators
//! such as `I/tau - c A^T A` are applied without being materialized.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::vector::{dot, norm, norm_sq, scale};

/// Operators up to this dimension are certified by a full symmetric eigendecomposition.
pub const EXACT_EIGEN_MAX_DIM: usize = 64;

/// Seed for the starting vector of every power iteration.
pub const POWER_ITERATION_SEED: u64 = 0x0005_eed0_ff10;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(
                "matrix dimensions must be positive".into(),
            ));
        }
        check_dim(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_dim(cols, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { rows: n, cols: n, data }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            data[i * n + i] = *d;
        }
        Self { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn matvec_transpose(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.get(i, j);
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Parses the plain-text format: a `rows cols` header line followed by
    /// `rows` lines of space-separated decimals. Blank lines and `#` comments are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing `rows cols` header".into(),
        })?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        let parse_dim = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: hline,
                message: format!("invalid dimension `{s}`"),
            })
        };
        if dims.len() != 2 {
            return Err(Error::Parse {
                line: hline,
                message: "header must be `rows cols`".into(),
            });
        }
        let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);

        let mut data = Vec::with_capacity(rows * cols);
        let mut seen_rows = 0;
        for (lineno, line) in lines {
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| Error::Parse {
                        line: lineno,
                        message: format!("invalid number `{tok}`"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != cols {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {cols} entries, found {}", row.len()),
                });
            }
            data.extend(row);
            seen_rows += 1;
        }
        if seen_rows != rows {
            return Err(Error::Parse {
                line: hline,
                message: format!("header declares {rows} rows, found {seen_rows}"),
            });
        }
        Self::new(rows, cols, data)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// A linear map `R^in_dim -> R^out_dim` with access to its adjoint.
#[derive(Debug, Clone)]
pub enum LinearMap {
    Dense(DenseMatrix),
    ScaledIdentity { dim: usize, scale: f64 },
    /// `outer ∘ inner`
    Composition {
        outer: Box<LinearMap>,
        inner: Box<LinearMap>,
    },
    /// `Σ weight_i · term_i`
    Sum(Vec<(f64, LinearMap)>),
}

impl LinearMap {
    pub fn dense(m: DenseMatrix) -> Self {
        LinearMap::Dense(m)
    }

    pub fn identity(dim: usize) -> Self {
        LinearMap::ScaledIdentity { dim, scale: 1.0 }
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        LinearMap::ScaledIdentity { dim, scale }
    }

    pub fn zero(dim: usize) -> Self {
        LinearMap::ScaledIdentity { dim, scale: 0.0 }
    }

    /// `outer ∘ inner`; requires `outer.in_dim() == inner.out_dim()`.
    pub fn compose(outer: LinearMap, inner: LinearMap) -> Result<Self> {
        check_dim(outer.in_dim(), inner.out_dim())?;
        Ok(LinearMap::Composition {
            outer: Box::new(outer),
            inner: Box::new(inner),
        })
    }

    pub fn sum(terms: Vec<(f64, LinearMap)>) -> Result<Self> {
        let (first, rest) = terms.split_first().ok_or_else(|| {
            Error::InvalidParameter("an operator sum needs at least one term".into())
        })?;
        for (_, t) in rest {
            check_dim(first.1.in_dim(), t.in_dim())?;
            check_dim(first.1.out_dim(), t.out_dim())?;
        }
        Ok(LinearMap::Sum(terms))
    }

    /// `A^* A`
    pub fn gram(&self) -> Self {
        LinearMap::Composition {
            outer: Box::new(self.adjoint()),
            inner: Box::new(self.clone()),
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.cols(),
            LinearMap::ScaledIdentity { dim, .. } => *dim,
            LinearMap::Composition { inner, .. } => inner.in_dim(),
            LinearMap::Sum(terms) => terms[0].1.in_dim(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.rows(),
            LinearMap::ScaledIdentity { dim, .. } => *dim,
            LinearMap::Composition { outer, .. } => outer.out_dim(),
            LinearMap::Sum(terms) => terms[0].1.out_dim(),
        }
    }

    pub fn is_square(&self) -> bool {
        self.in_dim() == self.out_dim()
    }

    /// Applies the map. Panics on a dimension mismatch; see [`LinearMap::try_apply`].
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.in_dim(), "LinearMap::apply dimension mismatch");
        self.apply_inner(x)
    }

    pub fn try_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.in_dim(), x.len())?;
        Ok(self.apply_inner(x))
    }

    /// Applies the adjoint. Panics on a dimension mismatch.
    pub fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(
            y.len(),
            self.out_dim(),
            "LinearMap::apply_adjoint dimension mismatch"
        );
        self.apply_adjoint_inner(y)
    }

    pub fn try_apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.out_dim(), y.len())?;
        Ok(self.apply_adjoint_inner(y))
    }

    fn apply_inner(&self, x: &[f64]) -> Vec<f64> {
        match self {
            LinearMap::Dense(m) => m.matvec(x),
            LinearMap::ScaledIdentity { scale: s, .. } => scale(*s, x),
            LinearMap::Composition { outer, inner } => outer.apply_inner(&inner.apply_inner(x)),
            LinearMap::Sum(terms) => {
                let mut out = vec![0.0; self.out_dim()];
                for (w, t) in terms {
                    for (o, v) in out.iter_mut().zip(t.apply_inner(x)) {
                        *o += w * v;
                    }
                }
                out
            }
        }
    }

    fn apply_adjoint_inner(&self, y: &[f64]) -> Vec<f64> {
        match self {
            LinearMap::Dense(m) => m.matvec_transpose(y),
            LinearMap::ScaledIdentity { scale: s, .. } => scale(*s, y),
            LinearMap::Composition { outer, inner } => {
                inner.apply_adjoint_inner(&outer.apply_adjoint_inner(y))
            }
            LinearMap::Sum(terms) => {
                let mut out = vec![0.0; self.in_dim()];
                for (w, t) in terms {
                    for (o, v) in out.iter_mut().zip(t.apply_adjoint_inner(y)) {
                        *o += w * v;
                    }
                }
                out
            }
        }
    }

    /// The adjoint as a map of the same representation.
    pub fn adjoint(&self) -> Self {
        match self {
            LinearMap::Dense(m) => LinearMap::Dense(m.transpose()),
            LinearMap::ScaledIdentity { .. } => self.clone(),
            LinearMap::Composition { outer, inner } => LinearMap::Composition {
                outer: Box::new(inner.adjoint()),
                inner: Box::new(outer.adjoint()),
            },
            LinearMap::Sum(terms) => {
                LinearMap::Sum(terms.iter().map(|(w, t)| (*w, t.adjoint())).collect())
            }
        }
    }

    /// Materializes the map column by column.
    pub fn to_dense(&self) -> DenseMatrix {
        if let LinearMap::Dense(m) = self {
            return m.clone();
        }
        let (rows, cols) = (self.out_dim(), self.in_dim());
        let mut data = vec![0.0; rows * cols];
        let mut e = vec![0.0; cols];
        for j in 0..cols {
            e[j] = 1.0;
            let col = self.apply_inner(&e);
            e[j] = 0.0;
            for (i, v) in col.into_iter().enumerate() {
                data[i * cols + j] = v;
            }
        }
        DenseMatrix { rows, cols, data }
    }
}

/// Starting vector for power iterations: seeded, uniform in [-1, 1], unit norm.
pub(crate) fn seeded_unit_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Result of an iterative spectral estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    /// `false` when `max_iters` ran out before the relative change dropped below `tol`.
    pub converged: bool,
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by power
/// iteration with Rayleigh quotients.
pub fn power_iteration<F>(apply: F, dim: usize, tol: f64, max_iters: usize) -> SpectralEstimate
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut v = seeded_unit_vector(dim, POWER_ITERATION_SEED);
    let mut lambda = 0.0;
    for k in 1..=max_iters {
        let w = apply(&v);
        let next = dot(&v, &w);
        let wn = norm(&w);
        if wn == 0.0 {
            return SpectralEstimate {
                value: 0.0,
                iterations: k,
                converged: true,
            };
        }
        v = scale(1.0 / wn, &w);
        if k > 1 && (next - lambda).abs() <= 0.1 * tol * next.abs() {
            return SpectralEstimate {
                value: next,
                iterations: k,
                converged: true,
            };
        }
        lambda = next;
    }
    SpectralEstimate {
        value: lambda,
        iterations: max_iters,
        converged: false,
    }
}

/// Estimates `‖L‖ = sup_{‖x‖≤1} ‖Lx‖` by power iteration on `L^* L`.
pub fn operator_norm(l: &LinearMap, tol: f64, max_iters: usize) -> Result<SpectralEstimate> {
    if !(tol > 0.0) || max_iters == 0 {
        return Err(Error::InvalidParameter(
            "operator_norm needs tol > 0 and max_iters >= 1".into(),
        ));
    }
    let est = power_iteration(
        |x| l.apply_adjoint_inner(&l.apply_inner(x)),
        l.in_dim(),
        tol,
        max_iters,
    );
    Ok(SpectralEstimate {
        value: est.value.max(0.0).sqrt(),
        ..est
    })
}

/// Smallest and largest eigenvalue of a self-adjoint map.
///
/// Dimensions up to [`EXACT_EIGEN_MAX_DIM`] use a dense symmetric eigendecomposition;
/// larger ones use power iterations on the shifted operators `sI ± U`.
pub fn eigen_bounds(u: &LinearMap, tol: f64) -> Result<(f64, f64)> {
    if !u.is_square() {
        return Err(Error::DimensionMismatch {
            expected: u.out_dim(),
            found: u.in_dim(),
        });
    }
    let n = u.in_dim();
    if n <= EXACT_EIGEN_MAX_DIM {
        let m = u.to_dense().to_nalgebra();
        let sym = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym).eigenvalues;
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Ok((lo, hi));
    }
    let max_iters = 100_000;
    let shift = operator_norm(u, tol, max_iters)?.value;
    let plus = power_iteration(
        |x| {
            let mut ux = u.apply_inner(x);
            ux.iter_mut().zip(x).for_each(|(a, b)| *a += shift * b);
            ux
        },
        n,
        tol,
        max_iters,
    );
    let minus = power_iteration(
        |x| {
            let ux = u.apply_inner(x);
            x.iter().zip(ux).map(|(b, a)| shift * b - a).collect()
        },
        n,
        tol,
        max_iters,
    );
    Ok((shift - minus.value, plus.value - shift))
}

/// Smallest eigenvalue of a self-adjoint map (may be negative).
pub fn min_eigenvalue(u: &LinearMap, tol: f64) -> Result<f64> {
    eigen_bounds(u, tol).map(|(lo, _)| lo)
}

fn is_self_adjoint(u: &LinearMap) -> bool {
    let n = u.in_dim();
    if n <= EXACT_EIGEN_MAX_DIM {
        let m = u.to_dense();
        let scale = m.as_slice().iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
        return m.max_abs_diff(&m.transpose()) <= 1e-12 * scale;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    (0..8).all(|_| {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs = dot(&u.apply_inner(&x), &y);
        let rhs = dot(&x, &u.apply_inner(&y));
        (lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs())
    })
}

/// A self-adjoint positive semidefinite operator with a certified spectral floor
/// `alpha_floor` (`U ⪰ alpha_floor·I`) and ceiling `upper` (`U ⪯ upper·I`).
#[derive(Debug, Clone)]
pub struct SelfAdjointPsd {
    base: LinearMap,
    alpha_floor: f64,
    upper: f64,
}

impl SelfAdjointPsd {
    /// Wraps `base` without computing its floor (`alpha_floor = 0`).
    /// The ceiling is taken from an operator-norm estimate.
    pub fn assume(base: LinearMap) -> Result<Self> {
        if !base.is_square() {
            return Err(Error::DimensionMismatch {
                expected: base.out_dim(),
                found: base.in_dim(),
            });
        }
        let upper = operator_norm(&base, 1e-10, 10_000)?.value;
        Ok(Self {
            base,
            alpha_floor: 0.0,
            upper,
        })
    }

    /// Checks self-adjointness and computes both spectral bounds.
    /// Fails with [`Error::NotPsd`] when the smallest eigenvalue is below `-tol`.
    pub fn certify(base: LinearMap, tol: f64) -> Result<Self> {
        if !base.is_square() {
            return Err(Error::DimensionMismatch {
                expected: base.out_dim(),
                found: base.in_dim(),
            });
        }
        if !is_self_adjoint(&base) {
            return Err(Error::Precondition("operator is not self-adjoint".into()));
        }
        let (lo, hi) = eigen_bounds(&base, tol)?;
        if lo < -tol {
            return Err(Error::NotPsd { min_eigenvalue: lo });
        }
        Ok(Self {
            base,
            alpha_floor: lo.max(0.0),
            upper: hi.max(0.0),
        })
    }

    /// Uses analytically known spectral bounds.
    pub fn with_bounds(base: LinearMap, alpha_floor: f64, upper: f64) -> Result<Self> {
        if !base.is_square() {
            return Err(Error::DimensionMismatch {
                expected: base.out_dim(),
                found: base.in_dim(),
            });
        }
        Ok(Self {
            base,
            alpha_floor: alpha_floor.max(0.0),
            upper,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        Self {
            base: LinearMap::scaled_identity(dim, scale),
            alpha_floor: scale.max(0.0),
            upper: scale.max(0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.base.in_dim()
    }

    pub fn base(&self) -> &LinearMap {
        &self.base
    }

    pub fn alpha_floor(&self) -> f64 {
        self.alpha_floor
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.base.apply(x)
    }

    /// `‖x‖²_U = ⟨x, Ux⟩`
    pub fn seminorm_sq(&self, x: &[f64]) -> Result<f64> {
        seminorm_sq(self, x)
    }
}

/// `⟨x, Ux⟩`, clamped to zero when it lies within `-1e-12·‖x‖²` of it.
pub fn seminorm_sq(u: &SelfAdjointPsd, x: &[f64]) -> Result<f64> {
    check_dim(u.dim(), x.len())?;
    let v = dot(x, &u.base.apply_inner(x));
    let floor = -1e-12 * norm_sq(x);
    if v >= 0.0 {
        Ok(v)
    } else if v >= floor {
        Ok(0.0)
    } else {
        Err(Error::NotPsd {
            min_eigenvalue: v / norm_sq(x),
        })
    }
}

/// Smallest eigenvalue of `U`, clamped at zero; errors when it is below `-tol`.
pub fn psd_floor(u: &SelfAdjointPsd, tol: f64) -> Result<f64> {
    let lo = min_eigenvalue(&u.base, tol)?;
    if lo < -tol {
        Err(Error::NotPsd { min_eigenvalue: lo })
    } else {
        Ok(lo.max(0.0))
    }
}
