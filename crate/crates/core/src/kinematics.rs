//! The lift `q(q̄, q̄̇)`, `q̇(q̄, q̄̇, q̄̈)`, the Ostrogradsky momenta, and the
//! one-to-one map between jets `(q̄, q̄̇, q̄̈, q̄⃛)` and canonical states
//! `(Q₁, Q₂, P₁, P₂)`.
//!
//! Index conventions follow the [`Transform`](crate::model::Transform)
//! callbacks: `β′[(i, k, l)] = ∂β_ik/∂q̄_l`, and likewise for the second
//! derivatives. Sums over repeated indices are written out as loops.

use serde::{Deserialize, Serialize};

use crate::dynamics::omega;
use crate::error::{Error, Result};
use crate::model::{gram_inverse_of, Lagrangian, Model, Transform};
use crate::scalar::Scalar;
use crate::tensor::{dot, Matrix, Tensor3, Tensor4};

/// `q̄` together with its time derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jet<T = f64> {
    pub qbar: Vec<T>,
    pub qbar_dot: Vec<T>,
    pub qbar_ddot: Vec<T>,
    /// Third derivative; second-order workflows can leave it out.
    pub qbar_dddot: Option<Vec<T>>,
}

impl<T: Scalar> Jet<T> {
    pub fn new(qbar: Vec<T>, qbar_dot: Vec<T>, qbar_ddot: Vec<T>, qbar_dddot: Option<Vec<T>>) -> Self {
        Self { qbar, qbar_dot, qbar_ddot, qbar_dddot }
    }

    pub fn zeros(k: usize) -> Self {
        let z = vec![T::zero(); k];
        Self { qbar: z.clone(), qbar_dot: z.clone(), qbar_ddot: z.clone(), qbar_dddot: Some(z) }
    }

    pub fn dim(&self) -> usize {
        self.qbar.len()
    }

    pub fn jerk(&self) -> Result<&[T]> {
        self.qbar_dddot.as_deref().ok_or(Error::Missing("jet.qbar_dddot"))
    }

    fn check(&self, k: usize) -> Result<()> {
        for (name, v) in [("jet.qbar", &self.qbar), ("jet.qbar_dot", &self.qbar_dot), ("jet.qbar_ddot", &self.qbar_ddot)] {
            if v.len() != k {
                return Err(Error::dim(name, k, v.len()));
            }
        }
        if let Some(j) = &self.qbar_dddot {
            if j.len() != k {
                return Err(Error::dim("jet.qbar_dddot", k, j.len()));
            }
        }
        Ok(())
    }
}

impl Jet<f64> {
    /// Flattens `(q̄, q̄̇, q̄̈, q̄⃛)`; a missing jerk is written as zeros.
    pub fn to_vec(&self) -> Vec<f64> {
        let k = self.dim();
        let mut v = Vec::with_capacity(4 * k);
        v.extend_from_slice(&self.qbar);
        v.extend_from_slice(&self.qbar_dot);
        v.extend_from_slice(&self.qbar_ddot);
        match &self.qbar_dddot {
            Some(j) => v.extend_from_slice(j),
            None => v.extend(std::iter::repeat(0.0).take(k)),
        }
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        assert!(v.len() % 4 == 0, "jet vector length must be a multiple of 4");
        let k = v.len() / 4;
        Self {
            qbar: v[..k].to_vec(),
            qbar_dot: v[k..2 * k].to_vec(),
            qbar_ddot: v[2 * k..3 * k].to_vec(),
            qbar_dddot: Some(v[3 * k..].to_vec()),
        }
    }
}

/// A point of the Ostrogradsky phase space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalState<T = f64> {
    pub q1: Vec<T>,
    pub q2: Vec<T>,
    pub p1: Vec<T>,
    pub p2: Vec<T>,
}

impl<T: Scalar> CanonicalState<T> {
    pub fn new(q1: Vec<T>, q2: Vec<T>, p1: Vec<T>, p2: Vec<T>) -> Self {
        Self { q1, q2, p1, p2 }
    }

    pub fn zeros(k: usize) -> Self {
        let z = vec![T::zero(); k];
        Self { q1: z.clone(), q2: z.clone(), p1: z.clone(), p2: z }
    }

    pub fn dim(&self) -> usize {
        self.q1.len()
    }

    /// Flattened `(Q₁, Q₂, P₁, P₂)`; the coordinate order used everywhere
    /// a state is treated as a vector (Jacobians, projection, export).
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(4 * self.dim());
        v.extend_from_slice(&self.q1);
        v.extend_from_slice(&self.q2);
        v.extend_from_slice(&self.p1);
        v.extend_from_slice(&self.p2);
        v
    }

    pub fn from_slice(v: &[T]) -> Self {
        assert!(v.len() % 4 == 0, "state vector length must be a multiple of 4");
        let k = v.len() / 4;
        Self { q1: v[..k].to_vec(), q2: v[k..2 * k].to_vec(), p1: v[2 * k..3 * k].to_vec(), p2: v[3 * k..].to_vec() }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> CanonicalState<U> {
        let m = |v: &Vec<T>| v.iter().map(|x| f(*x)).collect();
        CanonicalState { q1: m(&self.q1), q2: m(&self.q2), p1: m(&self.p1), p2: m(&self.p2) }
    }

    pub(crate) fn check(&self, k: usize) -> Result<()> {
        for (name, v) in [("state.Q1", &self.q1), ("state.Q2", &self.q2), ("state.P1", &self.p1), ("state.P2", &self.p2)] {
            if v.len() != k {
                return Err(Error::dim(name, k, v.len()));
            }
        }
        Ok(())
    }
}

impl CanonicalState<f64> {
    pub fn values(&self) -> Vec<f64> {
        self.to_vec()
    }

    pub fn max_abs(&self) -> f64 {
        self.to_vec().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.to_vec().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|x| x.is_finite())
    }
}

/// Transformation data evaluated at one `q̄`.
pub(crate) struct Geometry<T> {
    pub alpha: Vec<T>,
    pub beta: Matrix<T>,
    pub dalpha: Matrix<T>,
    pub dbeta: Tensor3<T>,
    pub ddalpha: Tensor3<T>,
    pub ddbeta: Tensor4<T>,
}

impl<T: Scalar> Geometry<T> {
    pub fn at<Tr: Transform>(tr: &Tr, qbar: &[T]) -> Self {
        Self {
            alpha: tr.alpha(qbar),
            beta: tr.beta(qbar),
            dalpha: tr.dalpha(qbar),
            dbeta: tr.dbeta(qbar),
            ddalpha: tr.ddalpha(qbar),
            ddbeta: tr.ddbeta(qbar),
        }
    }

    fn dims(&self) -> (usize, usize) {
        self.beta.shape()
    }

    /// `q_i = α_i + β_ik q̄̇_k`.
    pub fn q(&self, qbar_dot: &[T]) -> Vec<T> {
        let bq = self.beta.mul_vec(qbar_dot);
        self.alpha.iter().zip(bq).map(|(a, b)| *a + b).collect()
    }

    /// `A_i = (α′_in + β′_iln q̄̇_l) q̄̇_n`, the part of `q̇` free of `q̄̈`.
    pub fn velocity_drift(&self, qd: &[T]) -> Vec<T> {
        let (ni, nk) = self.dims();
        (0..ni)
            .map(|i| {
                let mut acc = T::zero();
                for n in 0..nk {
                    let mut c = self.dalpha[(i, n)];
                    for l in 0..nk {
                        c += self.dbeta[(i, l, n)] * qd[l];
                    }
                    acc += c * qd[n];
                }
                acc
            })
            .collect()
    }

    /// `N_ik = α′_ik + β′_ilk q̄̇_l`.
    pub fn coupling(&self, qd: &[T]) -> Matrix<T> {
        let (ni, nk) = self.dims();
        Matrix::from_fn(ni, nk, |i, k| {
            let mut c = self.dalpha[(i, k)];
            for l in 0..nk {
                c += self.dbeta[(i, l, k)] * qd[l];
            }
            c
        })
    }

    /// `dN_ik/dt = α″_ikn q̄̇_n + β″_ilkn q̄̇_l q̄̇_n + β′_ilk q̄̈_l`.
    pub fn coupling_rate(&self, qd: &[T], qdd: &[T]) -> Matrix<T> {
        let (ni, nk) = self.dims();
        Matrix::from_fn(ni, nk, |i, k| {
            let mut c = T::zero();
            for n in 0..nk {
                c += self.ddalpha[(i, k, n)] * qd[n];
                let mut inner = T::zero();
                for l in 0..nk {
                    inner += self.ddbeta[(i, l, k, n)] * qd[l];
                }
                c += inner * qd[n];
            }
            for l in 0..nk {
                c += self.dbeta[(i, l, k)] * qdd[l];
            }
            c
        })
    }

    /// `q̇_i = A_i + β_ik q̄̈_k`.
    pub fn qdot(&self, qd: &[T], qdd: &[T]) -> Vec<T> {
        let drift = self.velocity_drift(qd);
        let bq = self.beta.mul_vec(qdd);
        drift.into_iter().zip(bq).map(|(a, b)| a + b).collect()
    }

    /// `C_i`: the part of `q̈` free of `q̄⃛`,
    /// `α″_ikl q̄̇_k q̄̇_l + β″_iklm q̄̇_k q̄̇_l q̄̇_m + (α′_in + β′_iln q̄̇_l + 2β′_inl q̄̇_l) q̄̈_n`.
    pub fn accel_drift(&self, qd: &[T], qdd: &[T]) -> Vec<T> {
        let (ni, nk) = self.dims();
        (0..ni)
            .map(|i| {
                let mut acc = T::zero();
                for k in 0..nk {
                    for l in 0..nk {
                        let mut c = self.ddalpha[(i, k, l)];
                        for m in 0..nk {
                            c += self.ddbeta[(i, k, l, m)] * qd[m];
                        }
                        acc += c * qd[k] * qd[l];
                    }
                }
                for n in 0..nk {
                    let mut c = self.dalpha[(i, n)];
                    for l in 0..nk {
                        c += (self.dbeta[(i, l, n)] + self.dbeta[(i, n, l)].scale(2.0)) * qd[l];
                    }
                    acc += c * qdd[n];
                }
                acc
            })
            .collect()
    }
}

fn check_model_jet<M: Model, T: Scalar>(model: &M, jet: &Jet<T>) -> Result<()> {
    jet.check(model.reduced_dim())
}

fn check_vec(field: &str, k: usize, v: &[impl Sized]) -> Result<()> {
    if v.len() == k {
        Ok(())
    } else {
        Err(Error::dim(field, k, v.len()))
    }
}

/// `q = α(q̄) + β(q̄)·q̄̇`.
pub fn lift_q<M: Model, T: Scalar>(model: &M, qbar: &[T], qbar_dot: &[T]) -> Result<Vec<T>> {
    let k = model.reduced_dim();
    check_vec("qbar", k, qbar)?;
    check_vec("qbar_dot", k, qbar_dot)?;
    let tr = model.transform();
    let a = tr.alpha(qbar);
    let b = tr.beta(qbar);
    let bq = b.mul_vec(qbar_dot);
    Ok(a.into_iter().zip(bq).map(|(x, y)| x + y).collect())
}

/// `q̇ = α′·q̄̇ + β′:(q̄̇⊗q̄̇) + β·q̄̈`.
pub fn lift_qdot<M: Model, T: Scalar>(model: &M, jet: &Jet<T>) -> Result<Vec<T>> {
    check_model_jet(model, jet)?;
    let geo = Geometry::at(model.transform(), &jet.qbar);
    Ok(geo.qdot(&jet.qbar_dot, &jet.qbar_ddot))
}

/// `q̈`, the exact time derivative of [`lift_qdot`]; needs the jerk.
pub fn lift_qddot<M: Model, T: Scalar>(model: &M, jet: &Jet<T>) -> Result<Vec<T>> {
    check_model_jet(model, jet)?;
    let jerk = jet.jerk()?;
    let geo = Geometry::at(model.transform(), &jet.qbar);
    let c = geo.accel_drift(&jet.qbar_dot, &jet.qbar_ddot);
    let bj = geo.beta.mul_vec(jerk);
    Ok(c.into_iter().zip(bj).map(|(a, b)| a + b).collect())
}

/// Ostrogradsky momenta `(P₁, P₂)` of a full jet.
///
/// `P₂_k = (m q̇_i + u_i) β_ik` and
/// `P₁_k = −(m q̈_i + ω_ij q̇_j + ∂V/∂q_i) β_ik + (m q̇_i + u_i)(α′_ik + β′_ilk q̄̇_l)`.
pub fn momenta<M: Model, T: Scalar>(model: &M, jet: &Jet<T>) -> Result<(Vec<T>, Vec<T>)> {
    check_model_jet(model, jet)?;
    let jerk = jet.jerk()?;
    let lag = model.lagrangian();
    let m = T::cst(lag.mass());
    let geo = Geometry::at(model.transform(), &jet.qbar);
    let q = geo.q(&jet.qbar_dot);
    let qdot = geo.qdot(&jet.qbar_dot, &jet.qbar_ddot);
    let qddot: Vec<T> = {
        let c = geo.accel_drift(&jet.qbar_dot, &jet.qbar_ddot);
        let bj = geo.beta.mul_vec(jerk);
        c.into_iter().zip(bj).map(|(a, b)| a + b).collect()
    };
    let u = lag.u(&q);
    let p: Vec<T> = qdot.iter().zip(&u).map(|(v, u)| m * *v + *u).collect();
    let w = omega(lag, &q);
    let wq = w.mul_vec(&qdot);
    let dv = lag.grad_potential(&q);
    let e: Vec<T> = (0..q.len()).map(|i| m * qddot[i] + wq[i] + dv[i]).collect();
    let p2 = geo.beta.tr_mul_vec(&p);
    let n = geo.coupling(&jet.qbar_dot);
    let np = n.tr_mul_vec(&p);
    let be = geo.beta.tr_mul_vec(&e);
    let p1 = np.into_iter().zip(be).map(|(a, b)| a - b).collect();
    Ok((p1, p2))
}

/// Everything reconstructed from a canonical state: `q̄̈`, `q`, `q̇` and the
/// transformation data. Shared by the Hamiltonian, its gradient and the
/// constraints.
pub(crate) struct Phase<T> {
    pub geo: Geometry<T>,
    pub gram_inv: Matrix<T>,
    pub qbar_ddot: Vec<T>,
    pub q: Vec<T>,
    pub qdot: Vec<T>,
    /// `m q̇_i + u_i`.
    pub p: Vec<T>,
    /// `N_ik = α′_ik + β′_ilk Q₂_l`.
    pub coupling: Matrix<T>,
}

impl<T: Scalar> Phase<T> {
    pub fn new<M: Model>(model: &M, state: &CanonicalState<T>) -> Result<Self> {
        state.check(model.reduced_dim())?;
        let lag = model.lagrangian();
        let m = lag.mass();
        let geo = Geometry::at(model.transform(), &state.q1);
        let gram_inv = gram_inverse_of(&geo.beta)?;
        let qd = &state.q2;
        let q = geo.q(qd);
        let u = lag.u(&q);
        let drift = geo.velocity_drift(qd);
        // β_ik (u_i + m A_i)
        let rhs_i: Vec<T> = u.iter().zip(&drift).map(|(u, a)| *u + a.scale(m)).collect();
        let bt = geo.beta.tr_mul_vec(&rhs_i);
        let src: Vec<T> = state.p2.iter().zip(bt).map(|(p, b)| (*p - b).scale(1.0 / m)).collect();
        let qbar_ddot = gram_inv.mul_vec(&src);
        let bq = geo.beta.mul_vec(&qbar_ddot);
        let qdot: Vec<T> = drift.into_iter().zip(bq).map(|(a, b)| a + b).collect();
        let p = qdot.iter().zip(&u).map(|(v, u)| v.scale(m) + *u).collect();
        let coupling = geo.coupling(qd);
        Ok(Self { geo, gram_inv, qbar_ddot, q, qdot, p, coupling })
    }
}

/// `q̄̈(Q₁, Q₂, P₂)`: solves `P₂_k = (m q̇_i + u_i) β_ik` for the acceleration.
pub fn accel_from_canonical<M: Model, T: Scalar>(model: &M, state: &CanonicalState<T>) -> Result<Vec<T>> {
    Ok(Phase::new(model, state)?.qbar_ddot)
}

pub(crate) fn jerk_from_phase<M: Model, T: Scalar>(model: &M, state: &CanonicalState<T>, ph: &Phase<T>) -> Vec<T> {
    let lag = model.lagrangian();
    let m = lag.mass();
    let c = ph.geo.accel_drift(&state.q2, &ph.qbar_ddot);
    let w = omega(lag, &ph.q);
    let wq = w.mul_vec(&ph.qdot);
    let dv = lag.grad_potential(&ph.q);
    let force: Vec<T> = (0..c.len()).map(|i| c[i].scale(m) + wq[i] + dv[i]).collect();
    let bf = ph.geo.beta.tr_mul_vec(&force);
    let np = ph.coupling.tr_mul_vec(&ph.p);
    let src: Vec<T> = (0..state.p1.len()).map(|k| (np[k] - state.p1[k] - bf[k]).scale(1.0 / m)).collect();
    ph.gram_inv.mul_vec(&src)
}

/// `q̄⃛(Q₁, Q₂, P₁, P₂)`: solves the `P₁` relation for the jerk.
pub fn jerk_from_canonical<M: Model, T: Scalar>(model: &M, state: &CanonicalState<T>) -> Result<Vec<T>> {
    let ph = Phase::new(model, state)?;
    Ok(jerk_from_phase(model, state, &ph))
}

pub fn canonical_from_jet<M: Model, T: Scalar>(model: &M, jet: &Jet<T>) -> Result<CanonicalState<T>> {
    let (p1, p2) = momenta(model, jet)?;
    Ok(CanonicalState { q1: jet.qbar.clone(), q2: jet.qbar_dot.clone(), p1, p2 })
}

pub fn jet_from_canonical<M: Model, T: Scalar>(model: &M, state: &CanonicalState<T>) -> Result<Jet<T>> {
    let ph = Phase::new(model, state)?;
    let jerk = jerk_from_phase(model, state, &ph);
    Ok(Jet { qbar: state.q1.clone(), qbar_dot: state.q2.clone(), qbar_ddot: ph.qbar_ddot, qbar_dddot: Some(jerk) })
}

/// `(m q̇_i + u_i)·N_ik`, the momentum combination appearing in `H` and in
/// the primary constraints.
pub(crate) fn coupled_momentum<T: Scalar>(ph: &Phase<T>) -> Vec<T> {
    ph.coupling.tr_mul_vec(&ph.p)
}

pub(crate) fn kinetic<T: Scalar>(m: f64, qdot: &[T]) -> T {
    dot(qdot, qdot).scale(0.5 * m)
}
