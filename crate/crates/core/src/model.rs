//! Model specification: a first-order Lagrangian
//! `L = ½ m q̇·q̇ + q̇·u(q) − V(q)` on `I` variables, and a transformation
//! `q = α(q̄) + β(q̄)·q̄̇` from `K ≤ I` basic variables.
//!
//! All derivatives are supplied analytically by the implementor. They are
//! never differentiated numerically by the library; [`validate_model`]
//! cross-checks them against central differences once, up front.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Tensor3, Tensor4};

/// Condition-number bound above which the Gram matrix `βᵀβ` is treated as singular.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;
/// Relative tolerance for the finite-difference derivative checks.
pub const DERIVATIVE_TOLERANCE: f64 = 1e-5;
/// Minimum `σ_min/σ_max` of `β` for a point to count as regular.
pub const RANK_RATIO_LIMIT: f64 = 1e-10;

/// Mass, gauge-like vector `u` and potential `V` of the first-order Lagrangian.
///
/// Callbacks must be pure. They are generic over [`Scalar`] so the library
/// can push dual numbers and time series through them.
pub trait Lagrangian: Send + Sync {
    /// Number of variables `I`.
    fn dim(&self) -> usize;
    fn mass(&self) -> f64;
    fn u<T: Scalar>(&self, q: &[T]) -> Vec<T>;
    /// `du[(i, j)] = ∂u_i/∂q_j`.
    fn du<T: Scalar>(&self, q: &[T]) -> Matrix<T>;
    fn potential<T: Scalar>(&self, q: &[T]) -> T;
    /// `∂V/∂q_i`.
    fn grad_potential<T: Scalar>(&self, q: &[T]) -> Vec<T>;
}

/// The transformation `q = α(q̄) + β(q̄)·q̄̇` with first and second derivatives.
pub trait Transform: Send + Sync {
    /// Number of lifted variables `I`.
    fn output_dim(&self) -> usize;
    /// Number of basic variables `K`.
    fn input_dim(&self) -> usize;
    fn alpha<T: Scalar>(&self, qbar: &[T]) -> Vec<T>;
    /// `I × K`.
    fn beta<T: Scalar>(&self, qbar: &[T]) -> Matrix<T>;
    /// `α′[(i, k)] = ∂α_i/∂q̄_k`.
    fn dalpha<T: Scalar>(&self, qbar: &[T]) -> Matrix<T>;
    /// `β′[(i, k, l)] = ∂β_ik/∂q̄_l`.
    fn dbeta<T: Scalar>(&self, qbar: &[T]) -> Tensor3<T>;
    /// `α″[(i, k, l)] = ∂α′_ik/∂q̄_l`.
    fn ddalpha<T: Scalar>(&self, qbar: &[T]) -> Tensor3<T>;
    /// `β″[(i, k, l, m)] = ∂β′_ikl/∂q̄_m`.
    fn ddbeta<T: Scalar>(&self, qbar: &[T]) -> Tensor4<T>;
}

/// Anything the dynamics can be built from.
pub trait Model: Send + Sync {
    type Lagrangian: Lagrangian;
    type Transform: Transform;

    fn name(&self) -> &str;
    fn lagrangian(&self) -> &Self::Lagrangian;
    fn transform(&self) -> &Self::Transform;

    /// `I`.
    fn full_dim(&self) -> usize {
        self.lagrangian().dim()
    }

    /// `K`.
    fn reduced_dim(&self) -> usize {
        self.transform().input_dim()
    }

    fn mass(&self) -> f64 {
        self.lagrangian().mass()
    }
}

/// A Lagrangian paired with a transformation.
#[derive(Clone, Debug)]
pub struct ModelSpec<L, Tr> {
    name: String,
    lagrangian: L,
    transform: Tr,
}

impl<L: Lagrangian, Tr: Transform> ModelSpec<L, Tr> {
    pub fn new(name: impl Into<String>, lagrangian: L, transform: Tr) -> Result<Self> {
        if lagrangian.dim() != transform.output_dim() {
            return Err(Error::dim("transform.I", lagrangian.dim(), transform.output_dim()));
        }
        if transform.input_dim() > transform.output_dim() {
            return Err(Error::dim("transform.K", format!("<= {}", transform.output_dim()), transform.input_dim()));
        }
        if !(lagrangian.mass() > 0.0) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {}", lagrangian.mass())));
        }
        Ok(Self { name: name.into(), lagrangian, transform })
    }

    pub fn into_parts(self) -> (L, Tr) {
        (self.lagrangian, self.transform)
    }
}

impl<L: Lagrangian, Tr: Transform> Model for ModelSpec<L, Tr> {
    type Lagrangian = L;
    type Transform = Tr;

    fn name(&self) -> &str {
        &self.name
    }

    fn lagrangian(&self) -> &L {
        &self.lagrangian
    }

    fn transform(&self) -> &Tr {
        &self.transform
    }
}

/// Wraps a Lagrangian and multiplies its potential gradient by a constant.
/// Used to inject a deliberately inconsistent `dV` into checks.
#[derive(Clone, Debug)]
pub struct ScaledPotentialGradient<L> {
    pub inner: L,
    pub factor: f64,
}

impl<L: Lagrangian> Lagrangian for ScaledPotentialGradient<L> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn mass(&self) -> f64 {
        self.inner.mass()
    }
    fn u<T: Scalar>(&self, q: &[T]) -> Vec<T> {
        self.inner.u(q)
    }
    fn du<T: Scalar>(&self, q: &[T]) -> Matrix<T> {
        self.inner.du(q)
    }
    fn potential<T: Scalar>(&self, q: &[T]) -> T {
        self.inner.potential(q)
    }
    fn grad_potential<T: Scalar>(&self, q: &[T]) -> Vec<T> {
        self.inner.grad_potential(q).into_iter().map(|g| g.scale(self.factor)).collect()
    }
}

/// Largest relative mismatch between each supplied derivative and its
/// central-difference estimate.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DerivativeMismatch {
    pub du: f64,
    pub dv: f64,
    pub dalpha: f64,
    pub dbeta: f64,
    pub ddalpha: f64,
    pub ddbeta: f64,
}

impl DerivativeMismatch {
    pub fn max(&self) -> f64 {
        [self.du, self.dv, self.dalpha, self.dbeta, self.ddalpha, self.ddbeta].into_iter().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointReport {
    pub qbar: Vec<f64>,
    pub mismatch: DerivativeMismatch,
    /// Singular values of `β(q̄)`, descending.
    pub beta_singular_values: Vec<f64>,
    pub regular: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub points: Vec<PointReport>,
    pub passed: bool,
    /// `I = 3K/2`: the jets and the first-order states have equal dimension.
    pub correspondence_case: bool,
}

impl ValidationReport {
    pub fn max_mismatch(&self) -> f64 {
        self.points.iter().map(|p| p.mismatch.max()).fold(0.0, f64::max)
    }
}

fn fd_step(x: f64) -> f64 {
    f64::max(1e-6, 1e-6 * x.abs())
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / f64::max(1.0, numeric.abs())
}

fn check_len(field: &str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::dim(field, expected, actual))
    }
}

fn check_shape(field: &str, expected: &[usize], actual: &[usize]) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::dim(field, format!("{expected:?}"), format!("{actual:?}")))
    }
}

/// Central difference of a vector-valued function in direction `j`.
fn central<F: Fn(&[f64]) -> Vec<f64>>(f: F, x: &[f64], j: usize) -> Vec<f64> {
    let h = fd_step(x[j]);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[j] += h;
    xm[j] -= h;
    f(&xp).iter().zip(f(&xm)).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

fn flat_matrix(m: &Matrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    (0..r).flat_map(|i| (0..c).map(move |k| (i, k))).map(|ix| m[ix]).collect()
}

fn flat3(t: &Tensor3<f64>) -> Vec<f64> {
    let [a, b, c] = t.dims();
    let mut out = Vec::with_capacity(a * b * c);
    for i in 0..a {
        for k in 0..b {
            for l in 0..c {
                out.push(t[(i, k, l)]);
            }
        }
    }
    out
}

fn check_structure<M: Model>(model: &M, qbar: &[f64], q: &[f64]) -> Result<()> {
    let (i_dim, k_dim) = (model.full_dim(), model.reduced_dim());
    let lag = model.lagrangian();
    let tr = model.transform();
    check_len("u", i_dim, lag.u(q).len())?;
    check_shape("du", &[i_dim, i_dim], &[lag.du(q).rows(), lag.du(q).cols()])?;
    check_len("dV", i_dim, lag.grad_potential(q).len())?;
    check_len("alpha", i_dim, tr.alpha(qbar).len())?;
    let b = tr.beta(qbar);
    check_shape("beta", &[i_dim, k_dim], &[b.rows(), b.cols()])?;
    let da = tr.dalpha(qbar);
    check_shape("dalpha", &[i_dim, k_dim], &[da.rows(), da.cols()])?;
    check_shape("dbeta", &[i_dim, k_dim, k_dim], &tr.dbeta(qbar).dims())?;
    check_shape("ddalpha", &[i_dim, k_dim, k_dim], &tr.ddalpha(qbar).dims())?;
    check_shape("ddbeta", &[i_dim, k_dim, k_dim, k_dim], &tr.ddbeta(qbar).dims())?;
    Ok(())
}

/// Cross-checks every supplied derivative by central differences and checks
/// that `β` has full column rank at each sample point.
///
/// The Lagrangian callbacks are probed at `q = α(q̄) + β(q̄)·q̄`, i.e. at the
/// lift of each sample point with `q̄̇ = q̄`.
pub fn validate_model<M: Model>(model: &M, sample_points: &[Vec<f64>]) -> Result<ValidationReport> {
    if sample_points.is_empty() {
        return Err(Error::InvalidParameter("validate_model needs at least one sample point".into()));
    }
    let (i_dim, k_dim) = (model.full_dim(), model.reduced_dim());
    let lag = model.lagrangian();
    let tr = model.transform();
    let mut points = Vec::with_capacity(sample_points.len());
    for qbar in sample_points {
        check_len("sample point", k_dim, qbar.len())?;
        let q = {
            let a = tr.alpha(qbar);
            check_len("alpha", i_dim, a.len())?;
            let b = tr.beta(qbar);
            check_shape("beta", &[i_dim, k_dim], &[b.rows(), b.cols()])?;
            let bq = b.mul_vec(qbar);
            a.iter().zip(bq).map(|(x, y)| x + y).collect::<Vec<f64>>()
        };
        check_structure(model, qbar, &q)?;

        let mut mm = DerivativeMismatch::default();
        let du = lag.du(&q);
        let dv = lag.grad_potential(&q);
        for j in 0..i_dim {
            let fd_u = central(|x| lag.u(x), &q, j);
            for i in 0..i_dim {
                mm.du = mm.du.max(rel_err(du[(i, j)], fd_u[i]));
            }
            let fd_v = central(|x| vec![lag.potential(x)], &q, j);
            mm.dv = mm.dv.max(rel_err(dv[j], fd_v[0]));
        }

        let da = tr.dalpha(qbar);
        let db = tr.dbeta(qbar);
        let dda = tr.ddalpha(qbar);
        let ddb = tr.ddbeta(qbar);
        for l in 0..k_dim {
            let fd_a = central(|x| tr.alpha(x), qbar, l);
            let fd_b = central(|x| flat_matrix(&tr.beta(x)), qbar, l);
            let fd_da = central(|x| flat_matrix(&tr.dalpha(x)), qbar, l);
            let fd_db = central(|x| flat3(&tr.dbeta(x)), qbar, l);
            for i in 0..i_dim {
                mm.dalpha = mm.dalpha.max(rel_err(da[(i, l)], fd_a[i]));
                for k in 0..k_dim {
                    mm.dbeta = mm.dbeta.max(rel_err(db[(i, k, l)], fd_b[i * k_dim + k]));
                    mm.ddalpha = mm.ddalpha.max(rel_err(dda[(i, k, l)], fd_da[i * k_dim + k]));
                    for n in 0..k_dim {
                        let idx = (i * k_dim + k) * k_dim + n;
                        mm.ddbeta = mm.ddbeta.max(rel_err(ddb[(i, k, n, l)], fd_db[idx]));
                    }
                }
            }
        }

        let sv = beta_singular_values(&tr.beta(qbar));
        let smax = sv.first().copied().unwrap_or(0.0);
        let smin = sv.last().copied().unwrap_or(0.0);
        let regular = smax > 0.0 && smin > RANK_RATIO_LIMIT * smax;
        let passed = regular && mm.max() < DERIVATIVE_TOLERANCE;
        points.push(PointReport { qbar: qbar.clone(), mismatch: mm, beta_singular_values: sv, regular, passed });
    }
    let passed = points.iter().all(|p| p.passed);
    Ok(ValidationReport { points, passed, correspondence_case: 2 * i_dim == 3 * k_dim })
}

fn beta_singular_values(beta: &Matrix<f64>) -> Vec<f64> {
    let m: DMatrix<f64> = beta.values();
    let mut sv: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Inverse `B` of the Gram matrix `βᵀβ` at `q̄`.
pub fn gram_inverse<M: Model, T: Scalar>(model: &M, qbar: &[T]) -> Result<Matrix<T>> {
    let beta = model.transform().beta(qbar);
    gram_inverse_of(&beta)
}

pub(crate) fn gram_inverse_of<T: Scalar>(beta: &Matrix<T>) -> Result<Matrix<T>> {
    let gram = beta.gram();
    let (inv, condition) = gram.inverse_with_condition()?;
    if !(condition <= GRAM_CONDITION_LIMIT) {
        return Err(Error::Singular { condition });
    }
    let k = inv.rows();
    Ok(Matrix::from_fn(k, k, |r, c| (inv[(r, c)] + inv[(c, r)]).scale(0.5)))
}
