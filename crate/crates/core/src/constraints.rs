//! Primary constraints, the iterated constraint chain, Poisson and Dirac
//! brackets, and projection onto the constraint manifold.
//!
//! Level `j + 1` of the chain is `{level j, H}`. Because `{f, H}` is the
//! time derivative of `f` along the canonical flow, level `j` at a state is
//! the `(j − 1)`-th time derivative of the primary constraints along the
//! trajectory through that state. The library evaluates it exactly by
//! propagating the flow as a truncated Taylor series ([`flow_series`]),
//! and obtains Jacobians by running the same computation on dual numbers.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::{canonical_rhs, gradient_from_phase};
use crate::error::{Error, Result};
use crate::kinematics::{coupled_momentum, CanonicalState, Phase};
use crate::model::Model;
use crate::scalar::{Dual64, Scalar, Taylor};

/// Largest number of Taylor coefficients used for chain evaluation; bounds
/// `max_level + 1`.
pub const MAX_SERIES: usize = 8;
/// Relative least-squares residual below which a new level counts as a
/// combination of existing constraints.
pub const CLOSURE_TOLERANCE: f64 = 1e-8;
/// Condition number above which the constraint matrix is treated as singular.
pub const CONSTRAINT_CONDITION_LIMIT: f64 = 1e12;

/// `φ⁽¹⁾_k = P₁_k − (m q̇_i + u_i)(α′_ik + β′_ilk Q₂_l)`.
pub fn primary_constraints<M: Model, T: Scalar>(model: &M, state: &CanonicalState<T>) -> Result<Vec<T>> {
    let ph = Phase::new(model, state)?;
    let np = coupled_momentum(&ph);
    Ok(state.p1.iter().zip(np).map(|(p, n)| *p - n).collect())
}

// ---------------------------------------------------------------------------
// Observables and brackets

/// A phase-space function with a gradient in canonical order `(Q₁, Q₂, P₁, P₂)`.
pub trait Observable: Send + Sync {
    fn value(&self, state: &CanonicalState) -> Result<f64>;
    fn gradient(&self, state: &CanonicalState) -> Result<Vec<f64>>;
}

/// A single canonical coordinate (0-based component index).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    Q1(usize),
    Q2(usize),
    P1(usize),
    P2(usize),
}

impl Var {
    pub fn flat_index(self, k: usize) -> usize {
        match self {
            Var::Q1(i) => i,
            Var::Q2(i) => k + i,
            Var::P1(i) => 2 * k + i,
            Var::P2(i) => 3 * k + i,
        }
    }
}

impl Observable for Var {
    fn value(&self, state: &CanonicalState) -> Result<f64> {
        Ok(state.to_vec()[self.flat_index(state.dim())])
    }

    fn gradient(&self, state: &CanonicalState) -> Result<Vec<f64>> {
        let k = state.dim();
        let mut g = vec![0.0; 4 * k];
        g[self.flat_index(k)] = 1.0;
        Ok(g)
    }
}

/// `w · x` on the flattened state.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear(pub Vec<f64>);

impl Observable for Linear {
    fn value(&self, state: &CanonicalState) -> Result<f64> {
        let x = state.to_vec();
        if x.len() != self.0.len() {
            return Err(Error::dim("observable weights", x.len(), self.0.len()));
        }
        Ok(x.iter().zip(&self.0).map(|(a, b)| a * b).sum())
    }

    fn gradient(&self, state: &CanonicalState) -> Result<Vec<f64>> {
        if 4 * state.dim() != self.0.len() {
            return Err(Error::dim("observable weights", 4 * state.dim(), self.0.len()));
        }
        Ok(self.0.clone())
    }
}

/// A closure over dual numbers; its gradient comes from forward-mode AD.
pub struct AutoDiff<F>(pub F);

impl<F> Observable for AutoDiff<F>
where
    F: Fn(&CanonicalState<Dual64>) -> Dual64 + Send + Sync,
{
    fn value(&self, state: &CanonicalState) -> Result<f64> {
        Ok((self.0)(&state.map(Dual64::constant)).re)
    }

    fn gradient(&self, state: &CanonicalState) -> Result<Vec<f64>> {
        let x = state.to_vec();
        Ok((0..x.len()).map(|a| (self.0)(&seed(&x, a)).eps).collect())
    }
}

/// A plain closure; its gradient comes from central differences.
pub struct Numeric<F>(pub F);

impl<F> Observable for Numeric<F>
where
    F: Fn(&CanonicalState) -> f64 + Send + Sync,
{
    fn value(&self, state: &CanonicalState) -> Result<f64> {
        Ok((self.0)(state))
    }

    fn gradient(&self, state: &CanonicalState) -> Result<Vec<f64>> {
        let x = state.to_vec();
        Ok((0..x.len())
            .map(|a| {
                let h = 1e-6 * f64::max(1.0, x[a].abs());
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[a] += h;
                xm[a] -= h;
                ((self.0)(&CanonicalState::from_slice(&xp)) - (self.0)(&CanonicalState::from_slice(&xm))) / (2.0 * h)
            })
            .collect())
    }
}

/// The Hamiltonian of a model, with its exact gradient.
pub struct HamiltonianObservable<'a, M>(pub &'a M);

impl<M: Model> Observable for HamiltonianObservable<'_, M> {
    fn value(&self, state: &CanonicalState) -> Result<f64> {
        crate::dynamics::hamiltonian(self.0, state)
    }

    fn gradient(&self, state: &CanonicalState) -> Result<Vec<f64>> {
        let ph = Phase::new(self.0, state)?;
        Ok(gradient_from_phase(self.0, state, &ph).to_vec())
    }
}

/// One member of a [`ConstraintSet`] viewed as an observable.
pub struct Component<'a, S: ?Sized> {
    pub set: &'a S,
    pub index: usize,
}

impl<S: ConstraintSet + ?Sized> Observable for Component<'_, S> {
    fn value(&self, state: &CanonicalState) -> Result<f64> {
        Ok(self.set.values(state)?[self.index])
    }

    fn gradient(&self, state: &CanonicalState) -> Result<Vec<f64>> {
        let j = self.set.jacobian(state)?;
        Ok(j.row(self.index).iter().copied().collect())
    }
}

fn seed(x: &[f64], a: usize) -> CanonicalState<Dual64> {
    let v: Vec<Dual64> =
        x.iter().enumerate().map(|(i, v)| if i == a { Dual64::var(*v) } else { Dual64::constant(*v) }).collect();
    CanonicalState::from_slice(&v)
}

/// `{f, g}` from gradients in canonical order.
pub fn bracket_of_gradients(gf: &[f64], gg: &[f64]) -> f64 {
    debug_assert_eq!(gf.len(), gg.len());
    let k = gf.len() / 4;
    let mut acc = 0.0;
    for i in 0..k {
        let (q1, q2, p1, p2) = (i, k + i, 2 * k + i, 3 * k + i);
        acc += gf[q1] * gg[p1] - gf[p1] * gg[q1] + gf[q2] * gg[p2] - gf[p2] * gg[q2];
    }
    acc
}

/// Canonical Poisson bracket
/// `{f, g} = Σ_k ∂f/∂Q₁_k ∂g/∂P₁_k − ∂f/∂P₁_k ∂g/∂Q₁_k + ∂f/∂Q₂_k ∂g/∂P₂_k − ∂f/∂P₂_k ∂g/∂Q₂_k`.
pub fn poisson_bracket(f: &dyn Observable, g: &dyn Observable, state: &CanonicalState) -> Result<f64> {
    let gf = f.gradient(state)?;
    let gg = g.gradient(state)?;
    let n = 4 * state.dim();
    if gf.len() != n || gg.len() != n {
        return Err(Error::dim("observable gradient", n, gf.len().max(gg.len())));
    }
    Ok(bracket_of_gradients(&gf, &gg))
}

// ---------------------------------------------------------------------------
// Constraint sets

/// A finite list of phase-space constraints with Jacobian.
pub trait ConstraintSet: Send + Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn values(&self, state: &CanonicalState) -> Result<Vec<f64>>;

    /// `len × 4K`, columns in canonical order.
    fn jacobian(&self, state: &CanonicalState) -> Result<DMatrix<f64>>;

    fn labels(&self) -> Vec<String> {
        (1..=self.len()).map(|i| format!("phi{i}")).collect()
    }

    fn max_residual(&self, state: &CanonicalState) -> Result<f64> {
        Ok(self.values(state)?.iter().fold(0.0, |m, x| m.max(x.abs())))
    }
}

/// The `K` primary constraints alone.
pub struct PrimaryConstraints<'a, M>(pub &'a M);

impl<M: Model> ConstraintSet for PrimaryConstraints<'_, M> {
    fn len(&self) -> usize {
        self.0.reduced_dim()
    }

    fn values(&self, state: &CanonicalState) -> Result<Vec<f64>> {
        primary_constraints(self.0, state)
    }

    fn jacobian(&self, state: &CanonicalState) -> Result<DMatrix<f64>> {
        let x = state.to_vec();
        let k = self.len();
        let mut j = DMatrix::zeros(k, x.len());
        for a in 0..x.len() {
            let col = primary_constraints(self.0, &seed(&x, a))?;
            for (r, v) in col.iter().enumerate() {
                j[(r, a)] = v.eps;
            }
        }
        Ok(j)
    }
}

/// Taylor coefficients of the canonical flow through `x0`, `x(t) = Σ_j x_j tʲ`.
///
/// Picard iteration on series: after pass `j` the coefficient `x_{j+1} =
/// [f(x)]_j / (j + 1)` is final.
pub fn flow_series<M: Model, T: Scalar, const N: usize>(
    model: &M,
    x0: &CanonicalState<T>,
) -> Result<CanonicalState<Taylor<T, N>>> {
    let mut x = x0.map(Taylor::<T, N>::constant);
    for j in 0..N.saturating_sub(1) {
        let f = canonical_rhs(model, &x)?;
        let inv = 1.0 / (j + 1) as f64;
        let upd = |xs: &mut Vec<Taylor<T, N>>, fs: &Vec<Taylor<T, N>>| {
            for (xv, fv) in xs.iter_mut().zip(fs) {
                xv.c[j + 1] = fv.c[j].scale(inv);
            }
        };
        upd(&mut x.q1, &f.q1);
        upd(&mut x.q2, &f.q2);
        upd(&mut x.p1, &f.p1);
        upd(&mut x.p2, &f.p2);
    }
    Ok(x)
}

fn levels_n<M: Model, T: Scalar, const N: usize>(model: &M, state: &CanonicalState<T>) -> Result<Vec<Vec<T>>> {
    let x = flow_series::<M, T, N>(model, state)?;
    let phi = primary_constraints(model, &x)?;
    Ok((0..N).map(|j| phi.iter().map(|p| p.derivative_at_zero(j)).collect()).collect())
}

/// Values of chain levels `1..=levels` at a state: `out[j][k]` is component
/// `k` of level `j + 1`.
pub fn chain_levels<M: Model, T: Scalar>(model: &M, state: &CanonicalState<T>, levels: usize) -> Result<Vec<Vec<T>>> {
    match levels {
        0 => Ok(Vec::new()),
        1 => levels_n::<M, T, 1>(model, state),
        2 => levels_n::<M, T, 2>(model, state),
        3 => levels_n::<M, T, 3>(model, state),
        4 => levels_n::<M, T, 4>(model, state),
        5 => levels_n::<M, T, 5>(model, state),
        6 => levels_n::<M, T, 6>(model, state),
        7 => levels_n::<M, T, 7>(model, state),
        8 => levels_n::<M, T, 8>(model, state),
        n => Err(Error::InvalidParameter(format!("chain depth {n} exceeds {MAX_SERIES}"))),
    }
}

/// Identifies one scalar constraint: component `component` of level `level` (both 1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ConstraintId {
    pub level: usize,
    pub component: usize,
}

/// A chain member found to be a fixed linear combination of active constraints.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dependency {
    pub id: ConstraintId,
    /// Coefficients over the active constraints present when it was tested.
    pub coefficients: Vec<f64>,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Closure {
    pub closed: bool,
    /// The level whose every component was a combination of earlier ones
    /// (or the last level tried when `closed` is false).
    pub level: usize,
    /// `K × active` coefficients expressing that level through the active constraints.
    pub combination_coefficients: Vec<Vec<f64>>,
}

/// Result of iterating `φ⁽ʲ⁺¹⁾ = {φ⁽ʲ⁾, H}` to closure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintChain {
    pub k: usize,
    /// Number of stored levels; levels above this are implied by the closure.
    pub levels: usize,
    /// Linearly independent chain members, in the order they were found.
    pub active: Vec<ConstraintId>,
    pub dependencies: Vec<Dependency>,
    pub closure: Closure,
}

/// Random probe states for [`build_constraint_chain`], uniform in `[−1, 1]`.
pub fn probe_states(k: usize, count: usize, seed: u64) -> Vec<CanonicalState> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v: Vec<f64> = (0..4 * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            CanonicalState::from_slice(&v)
        })
        .collect()
}

fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    if a.ncols() == 0 {
        return (DVector::zeros(0), b.amax());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let w = svd.solve(b, 1e-12 * smax.max(f64::MIN_POSITIVE)).unwrap_or_else(|_| DVector::zeros(a.ncols()));
    let r = (a * &w - b).amax();
    (w, r)
}

/// Builds the constraint chain by repeated bracketing with `H`.
///
/// Each new level is tested component by component against the active set
/// at all probe states; components reproduced by a state-independent linear
/// combination (relative residual below [`CLOSURE_TOLERANCE`]) are recorded
/// as dependencies, the others join the active set. The chain closes at the
/// first level whose components are all dependent.
pub fn build_constraint_chain<M: Model>(
    model: &M,
    max_level: usize,
    probes: &[CanonicalState],
) -> Result<ConstraintChain> {
    if max_level == 0 || max_level + 1 > MAX_SERIES {
        return Err(Error::InvalidParameter(format!("max_level must be in 1..={}", MAX_SERIES - 1)));
    }
    let k = model.reduced_dim();
    if probes.len() < 4 * k + 1 {
        return Err(Error::InvalidParameter(format!("need at least {} probe states, got {}", 4 * k + 1, probes.len())));
    }
    let samples: Vec<Vec<Vec<f64>>> =
        probes.iter().map(|s| chain_levels(model, s, max_level + 1)).collect::<Result<_>>()?;

    let np = probes.len();
    let mut active: Vec<ConstraintId> = Vec::new();
    let mut a = DMatrix::<f64>::zeros(np, 0);
    let mut dependencies = Vec::new();
    let mut closure = Closure { closed: false, level: max_level, combination_coefficients: Vec::new() };

    for level in 1..=max_level + 1 {
        let mut all_dependent = true;
        let mut rows = Vec::with_capacity(k);
        for comp in 0..k {
            let b = DVector::from_iterator(np, samples.iter().map(|s| s[level - 1][comp]));
            let scale = f64::max(1.0, b.amax());
            let (w, resid) = lstsq(&a, &b);
            let id = ConstraintId { level, component: comp + 1 };
            if resid < CLOSURE_TOLERANCE * scale {
                let coefficients: Vec<f64> = w.iter().copied().collect();
                rows.push(coefficients.clone());
                dependencies.push(Dependency { id, coefficients, residual: resid / scale });
            } else {
                all_dependent = false;
                if level <= max_level {
                    active.push(id);
                    let last = a.ncols();
                    a = a.insert_column(last, 0.0);
                    a.set_column(last, &b);
                }
            }
        }
        if all_dependent {
            closure = Closure { closed: true, level, combination_coefficients: rows };
            break;
        }
    }
    let levels = if closure.closed { closure.level - 1 } else { max_level };
    // Dependencies found on the closing level are part of the closure record.
    let closing = closure.level;
    if closure.closed {
        dependencies.retain(|d| d.id.level != closing);
    }
    Ok(ConstraintChain { k, levels, active, dependencies, closure })
}

impl ConstraintChain {
    /// Values of the active constraints.
    pub fn evaluate<M: Model>(&self, model: &M, state: &CanonicalState) -> Result<Vec<f64>> {
        let lv = chain_levels(model, state, self.levels)?;
        Ok(self.active.iter().map(|id| lv[id.level - 1][id.component - 1]).collect())
    }

    /// Jacobian of the active constraints, `active × 4K`.
    pub fn jacobian<M: Model>(&self, model: &M, state: &CanonicalState) -> Result<DMatrix<f64>> {
        let x = state.to_vec();
        let mut j = DMatrix::zeros(self.active.len(), x.len());
        for a in 0..x.len() {
            let lv = chain_levels(model, &seed(&x, a), self.levels)?;
            for (r, id) in self.active.iter().enumerate() {
                j[(r, a)] = lv[id.level - 1][id.component - 1].eps;
            }
        }
        Ok(j)
    }

    /// The chain evaluated through `model`, usable wherever a [`ConstraintSet`] is.
    pub fn bind<'a, M: Model>(&'a self, model: &'a M) -> BoundChain<'a, M> {
        BoundChain { chain: self, model }
    }
}

pub struct BoundChain<'a, M> {
    pub chain: &'a ConstraintChain,
    pub model: &'a M,
}

impl<M: Model> ConstraintSet for BoundChain<'_, M> {
    fn len(&self) -> usize {
        self.chain.active.len()
    }

    fn values(&self, state: &CanonicalState) -> Result<Vec<f64>> {
        self.chain.evaluate(self.model, state)
    }

    fn jacobian(&self, state: &CanonicalState) -> Result<DMatrix<f64>> {
        self.chain.jacobian(self.model, state)
    }

    fn labels(&self) -> Vec<String> {
        self.chain.active.iter().map(|id| format!("phi{}_{}", id.level, id.component)).collect()
    }
}

/// Antisymmetric matrix of pairwise Poisson brackets among the constraints.
pub fn constraint_matrix(set: &dyn ConstraintSet, state: &CanonicalState) -> Result<DMatrix<f64>> {
    let j = set.jacobian(state)?;
    let n = j.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|r| j.row(r).iter().copied().collect()).collect();
    let mut c = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a + 1..n {
            let v = bracket_of_gradients(&rows[a], &rows[b]);
            c[(a, b)] = v;
            c[(b, a)] = -v;
        }
    }
    Ok(c)
}

fn condition(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smin = sv.min();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / smin
    }
}

/// `{f, g}_D = {f, g} − {f, φ_a} (C⁻¹)_ab {φ_b, g}`.
pub fn dirac_bracket(
    f: &dyn Observable,
    g: &dyn Observable,
    set: &dyn ConstraintSet,
    state: &CanonicalState,
) -> Result<f64> {
    let c = constraint_matrix(set, state)?;
    let cond = condition(&c);
    if !(cond <= CONSTRAINT_CONDITION_LIMIT) {
        return Err(Error::SecondClass { condition: cond });
    }
    let cinv = c.try_inverse().ok_or(Error::SecondClass { condition: f64::INFINITY })?;
    let gf = f.gradient(state)?;
    let gg = g.gradient(state)?;
    let j = set.jacobian(state)?;
    let n = j.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|r| j.row(r).iter().copied().collect()).collect();
    let f_phi = DVector::from_iterator(n, rows.iter().map(|r| bracket_of_gradients(&gf, r)));
    let phi_g = DVector::from_iterator(n, rows.iter().map(|r| bracket_of_gradients(r, &gg)));
    Ok(bracket_of_gradients(&gf, &gg) - f_phi.dot(&(cinv * phi_g)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        Self { max_iter: 20, tol: 1e-10 }
    }
}

/// Gauss–Newton projection onto `{x : φ(x) = 0}` in the Euclidean metric
/// on canonical coordinates.
///
/// Each iteration takes the minimum-norm correction `Δx = −Jᵀ(JJᵀ)⁺φ`; for
/// affine constraints the first step lands on the nearest point. States
/// already within `tol` are returned unchanged.
pub fn project(set: &dyn ConstraintSet, state: &CanonicalState, options: &ProjectOptions) -> Result<CanonicalState> {
    let mut x = DVector::from_vec(state.to_vec());
    let mut residual = f64::INFINITY;
    for iter in 0..=options.max_iter {
        let s = CanonicalState::from_slice(x.as_slice());
        let c = DVector::from_vec(set.values(&s)?);
        residual = c.amax();
        if residual < options.tol {
            return Ok(s);
        }
        if iter == options.max_iter || !residual.is_finite() {
            break;
        }
        let j = set.jacobian(&s)?;
        let jjt = &j * j.transpose();
        let svd = jjt.svd(true, true);
        let smax = svd.singular_values.max();
        let y = svd
            .solve(&c, 1e-14 * smax.max(f64::MIN_POSITIVE))
            .map_err(|_| Error::Projection { iterations: iter, residual })?;
        x -= j.transpose() * y;
    }
    Err(Error::Projection { iterations: options.max_iter, residual })
}
