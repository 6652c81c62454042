//! Euler–Lagrange residuals, the Ostrogradsky Hamiltonian, its exact
//! gradient and the canonical vector field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{coupled_momentum, kinetic, CanonicalState, Geometry, Jet, Phase};
use crate::model::{gram_inverse_of, Lagrangian, Model, Transform};
use crate::scalar::{Scalar, Taylor};
use crate::tensor::{dot, Matrix};

/// `ω_ij = ∂u_i/∂q_j − ∂u_j/∂q_i`.
pub fn omega<L: Lagrangian, T: Scalar>(lag: &L, q: &[T]) -> Matrix<T> {
    let du = lag.du(q);
    let n = du.rows();
    Matrix::from_fn(n, n, |i, j| du[(i, j)] - du[(j, i)])
}

/// `m q̈_i + ω_ij q̇_j + ∂V/∂q_i`, the residual of the first-order problem.
pub fn second_order_residual<M: Model, T: Scalar>(model: &M, q: &[T], qdot: &[T], qddot: &[T]) -> Result<Vec<T>> {
    let n = model.full_dim();
    for (name, v) in [("q", q), ("qdot", qdot), ("qddot", qddot)] {
        if v.len() != n {
            return Err(Error::dim(name, n, v.len()));
        }
    }
    Ok(force_residual(model.lagrangian(), q, qdot, qddot))
}

fn force_residual<L: Lagrangian, T: Scalar>(lag: &L, q: &[T], qdot: &[T], qddot: &[T]) -> Vec<T> {
    let m = lag.mass();
    let wq = omega(lag, q).mul_vec(qdot);
    let dv = lag.grad_potential(q);
    (0..q.len()).map(|i| qddot[i].scale(m) + wq[i] + dv[i]).collect()
}

fn series<T: Scalar, const N: usize>(coeffs: &[&[T]], k: usize) -> Vec<Taylor<T, N>> {
    (0..k)
        .map(|idx| {
            let mut c = [T::zero(); N];
            for (j, v) in coeffs.iter().enumerate().take(N) {
                c[j] = v[idx].scale(1.0 / crate::scalar::factorial(j));
            }
            Taylor::from_coeffs(c)
        })
        .collect()
}

/// Residual of the reduced equations
/// `(α′_ik + β′_ilk q̄̇_l) E_i − d/dt(β_ik E_i)` with
/// `E_i = m q̈_i + ω_ij q̇_j + ∂V/∂q_i`.
///
/// The time derivative is taken exactly by propagating `q̄(t)` as a
/// truncated Taylor series through the callbacks, so no Hessians of `u` or
/// `V` have to be supplied.
pub fn fourth_order_residual<M: Model, T: Scalar>(model: &M, jet: &Jet<T>, qbar_4: &[T]) -> Result<Vec<T>> {
    let k = model.reduced_dim();
    if jet.dim() != k {
        return Err(Error::dim("jet.qbar", k, jet.dim()));
    }
    if qbar_4.len() != k {
        return Err(Error::dim("qbar_4", k, qbar_4.len()));
    }
    let jerk = jet.jerk()?;
    let qbar: Vec<Taylor<T, 5>> =
        series(&[&jet.qbar, &jet.qbar_dot, &jet.qbar_ddot, jerk, qbar_4], k);
    let qd: Vec<_> = qbar.iter().map(|x| x.derivative()).collect();
    let qdd: Vec<_> = qd.iter().map(|x| x.derivative()).collect();
    let lag = model.lagrangian();
    let geo = Geometry::at(model.transform(), &qbar);
    let q = geo.q(&qd);
    let qdot = geo.qdot(&qd, &qdd);
    let qddot: Vec<_> = qdot.iter().map(|x| x.derivative()).collect();
    let e = force_residual(lag, &q, &qdot, &qddot);
    let n = geo.coupling(&qd);
    let ne = n.tr_mul_vec(&e);
    let be = geo.beta.tr_mul_vec(&e);
    Ok((0..k).map(|idx| ne[idx].c[0] - be[idx].derivative().c[0]).collect())
}

/// Solves the reduced equations for `q̄⁽⁴⁾`.
///
/// The residual is affine in `q̄⁽⁴⁾` with leading coefficient `−m βᵀβ`,
/// which is inverted under the same regularity rule as the Gram matrix.
pub fn fourth_derivative<M: Model, T: Scalar>(model: &M, jet: &Jet<T>) -> Result<Vec<T>> {
    let k = model.reduced_dim();
    let zero = vec![T::zero(); k];
    let r0 = fourth_order_residual(model, jet, &zero)?;
    let beta = model.transform().beta(&jet.qbar);
    let b = gram_inverse_of(&beta)?;
    let m = model.mass();
    Ok(b.mul_vec(&r0).into_iter().map(|x| x.scale(1.0 / m)).collect())
}

/// Right-hand side of the jet-space first-order system
/// `(q̄, q̄̇, q̄̈, q̄⃛) ↦ (q̄̇, q̄̈, q̄⃛, q̄⁽⁴⁾)`.
pub fn jet_rhs<M: Model, T: Scalar>(model: &M, jet: &Jet<T>) -> Result<Jet<T>> {
    let q4 = fourth_derivative(model, jet)?;
    Ok(Jet {
        qbar: jet.qbar_dot.clone(),
        qbar_dot: jet.qbar_ddot.clone(),
        qbar_ddot: jet.jerk()?.to_vec(),
        qbar_dddot: Some(q4),
    })
}

/// The higher-order Lagrangian `L̄(q̄, q̄̇, q̄̈) = ½ m q̇·q̇ + q̇·u(q) − V(q)`
/// with `q`, `q̇` lifted from the jet (the jerk is not used).
pub fn induced_lagrangian<M: Model, T: Scalar>(model: &M, jet: &Jet<T>) -> Result<T> {
    let k = model.reduced_dim();
    for (name, v) in [("qbar", &jet.qbar), ("qbar_dot", &jet.qbar_dot), ("qbar_ddot", &jet.qbar_ddot)] {
        if v.len() != k {
            return Err(Error::dim(name, k, v.len()));
        }
    }
    let lag = model.lagrangian();
    let geo = Geometry::at(model.transform(), &jet.qbar);
    let q = geo.q(&jet.qbar_dot);
    let qdot = geo.qdot(&jet.qbar_dot, &jet.qbar_ddot);
    Ok(kinetic(lag.mass(), &qdot) + dot(&qdot, &lag.u(&q)) - lag.potential(&q))
}

/// `H = ½ m q̇·q̇ + V(q) + [P₁_k − (m q̇_i + u_i)(α′_ik + β′_ilk Q₂_l)] Q₂_k`,
/// with `q`, `q̇` reconstructed from the canonical state.
pub fn hamiltonian<M: Model, T: Scalar>(model: &M, state: &CanonicalState<T>) -> Result<T> {
    let ph = Phase::new(model, state)?;
    Ok(hamiltonian_from_phase(model, state, &ph))
}

pub(crate) fn hamiltonian_from_phase<M: Model, T: Scalar>(model: &M, state: &CanonicalState<T>, ph: &Phase<T>) -> T {
    let lag = model.lagrangian();
    let np = coupled_momentum(ph);
    let bracket: Vec<T> = state.p1.iter().zip(&np).map(|(a, b)| *a - *b).collect();
    kinetic(lag.mass(), &ph.qdot) + lag.potential(&ph.q) + dot(&bracket, &state.q2)
}

/// Partial derivatives of `H` with respect to the canonical variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradH<T = f64> {
    pub dq1: Vec<T>,
    pub dq2: Vec<T>,
    pub dp1: Vec<T>,
    pub dp2: Vec<T>,
}

impl<T: Scalar> GradH<T> {
    /// Flattened in canonical order `(Q₁, Q₂, P₁, P₂)`.
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(4 * self.dq1.len());
        v.extend_from_slice(&self.dq1);
        v.extend_from_slice(&self.dq2);
        v.extend_from_slice(&self.dp1);
        v.extend_from_slice(&self.dp2);
        v
    }
}

/// Exact gradient of [`hamiltonian`].
///
/// With `F_i = ∂V/∂q_i − (∂u_j/∂q_i) q̇_j` and `N_ik = α′_ik + β′_ilk Q₂_l`:
/// `∂H/∂P₁ = Q₂`, `∂H/∂P₂ = q̄̈`,
/// `∂H/∂Q₁_k = F_i N_ik − (m q̇_i + u_i) dN_ik/dt`,
/// `∂H/∂Q₂_k = P₁_k + F_i β_ik − (m q̇_i + u_i)(N_ik + β′_ikl Q₂_l)`,
/// where `dN/dt` uses the reconstructed `q̄̈`.
pub fn hamiltonian_gradient<M: Model, T: Scalar>(model: &M, state: &CanonicalState<T>) -> Result<GradH<T>> {
    let ph = Phase::new(model, state)?;
    Ok(gradient_from_phase(model, state, &ph))
}

pub(crate) fn gradient_from_phase<M: Model, T: Scalar>(model: &M, state: &CanonicalState<T>, ph: &Phase<T>) -> GradH<T> {
    let lag = model.lagrangian();
    let (ni, nk) = ph.geo.beta.shape();
    let du = lag.du(&ph.q);
    let dv = lag.grad_potential(&ph.q);
    let f: Vec<T> = (0..ni)
        .map(|i| {
            let mut acc = dv[i];
            for j in 0..ni {
                acc -= du[(j, i)] * ph.qdot[j];
            }
            acc
        })
        .collect();
    let ndot = ph.geo.coupling_rate(&state.q2, &ph.qbar_ddot);
    let fn_ = ph.coupling.tr_mul_vec(&f);
    let pnd = ndot.tr_mul_vec(&ph.p);
    let dq1 = (0..nk).map(|k| fn_[k] - pnd[k]).collect();

    let fb = ph.geo.beta.tr_mul_vec(&f);
    let dq2 = (0..nk)
        .map(|k| {
            let mut acc = state.p1[k] + fb[k];
            for i in 0..ni {
                let mut c = ph.coupling[(i, k)];
                for l in 0..nk {
                    c += ph.geo.dbeta[(i, k, l)] * state.q2[l];
                }
                acc -= ph.p[i] * c;
            }
            acc
        })
        .collect();
    GradH { dq1, dq2, dp1: state.q2.clone(), dp2: ph.qbar_ddot.clone() }
}

/// `(Q̇₁, Q̇₂, Ṗ₁, Ṗ₂) = (∂H/∂P₁, ∂H/∂P₂, −∂H/∂Q₁, −∂H/∂Q₂)`.
pub fn canonical_rhs<M: Model, T: Scalar>(model: &M, state: &CanonicalState<T>) -> Result<CanonicalState<T>> {
    let g = hamiltonian_gradient(model, state)?;
    Ok(CanonicalState {
        q1: g.dp1,
        q2: g.dp2,
        p1: g.dq1.into_iter().map(|x| -x).collect(),
        p2: g.dq2.into_iter().map(|x| -x).collect(),
    })
}
