//! A single transverse Fourier mode of the fourth-order wave equation
//! `□□h = 0`, i.e. `(d²/dt² + ν²)² ĥ = 0` with `ν = ck`.
//!
//! The mode is packaged as an ordinary [`ModelSpec`] with `K = 1`, `I = 2`:
//! `q = (ν ĥ, ĥ̇)`, `u = (−ν q₂, ν q₁)`, `V = −½ν²|q|²`, `m = 1`. Its
//! induced Lagrangian is `½(ĥ̈ + ν²ĥ)²` up to a total derivative, so the
//! generic machinery reproduces the mode equation, and the canonical
//! momenta come out as `P₂ = ĥ̈ + ν²ĥ` and `P₁ = −(ĥ⃛ + ν²ĥ̇)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::kinematics::CanonicalState;
use crate::model::{Lagrangian, ModelSpec, Transform};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Tensor3, Tensor4};

/// Wave speed and wavenumber of the mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub c: f64,
    pub k: f64,
}

impl Default for ModeParams {
    fn default() -> Self {
        Self { c: 1.0, k: 2.0 }
    }
}

impl ModeParams {
    pub fn new(c: f64, k: f64) -> Result<Self> {
        let p = Self { c, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidParameter(format!("c must be positive, got {}", self.c)));
        }
        if !(self.k >= 0.0) || !self.k.is_finite() {
            return Err(Error::InvalidParameter(format!("k must be non-negative, got {}", self.k)));
        }
        Ok(())
    }

    /// Angular frequency `ν = ck`.
    pub fn nu(&self) -> f64 {
        self.c * self.k
    }
}

/// `(ĥ, ĥ̇, ĥ̈, ĥ⃛)`.
pub type ModeState = [f64; 4];

/// `h⁗ + 2ν²ḧ + ν⁴h`.
pub fn mode_residual(p: &ModeParams, h: f64, hd: f64, hdd: f64, hddd: f64, hdddd: f64) -> f64 {
    let _ = (hd, hddd);
    let n2 = p.nu() * p.nu();
    hdddd + 2.0 * n2 * hdd + n2 * n2 * h
}

/// `ψ = h⃛ + ν²ḣ`, the time derivative of `ḧ + ν²h`.
pub fn mode_constraint(p: &ModeParams, hdd: f64, hddd: f64, hd: f64, h: f64) -> f64 {
    let _ = (hdd, h);
    hddd + p.nu() * p.nu() * hd
}

/// `ḧ + ν²h`.
pub fn box_h(p: &ModeParams, x: &ModeState) -> f64 {
    x[2] + p.nu() * p.nu() * x[0]
}

/// Jet-space vector field with `h⁗ = −2ν²ḧ − ν⁴h`.
pub fn mode_rhs(p: &ModeParams, x: &ModeState) -> ModeState {
    let n2 = p.nu() * p.nu();
    [x[1], x[2], x[3], -2.0 * n2 * x[2] - n2 * n2 * x[0]]
}

/// `(h, ḣ, ḧ, h⃛) ↦ (Q₁, Q₂, P₁, P₂)` for the embedded model.
pub fn mode_to_canonical(p: &ModeParams, x: &ModeState) -> CanonicalState {
    let n2 = p.nu() * p.nu();
    CanonicalState::new(vec![x[0]], vec![x[1]], vec![-(x[3] + n2 * x[1])], vec![x[2] + n2 * x[0]])
}

pub fn canonical_to_mode(p: &ModeParams, s: &CanonicalState) -> ModeState {
    let n2 = p.nu() * p.nu();
    let (h, hd) = (s.q1[0], s.q2[0]);
    [h, hd, s.p2[0] - n2 * h, -s.p1[0] - n2 * hd]
}

/// Plane wave `h₀ cos νt + (ḣ₀/ν) sin νt` as a mode state at time `t`.
pub fn plane_wave(p: &ModeParams, h0: f64, hd0: f64, t: f64) -> ModeState {
    let nu = p.nu();
    if nu == 0.0 {
        return [h0 + hd0 * t, hd0, 0.0, 0.0];
    }
    let (s, c) = (nu * t).sin_cos();
    let h = h0 * c + hd0 / nu * s;
    let hd = -h0 * nu * s + hd0 * c;
    [h, hd, -nu * nu * h, -nu * nu * hd]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeLagrangian {
    pub nu: f64,
}

impl Lagrangian for ModeLagrangian {
    fn dim(&self) -> usize {
        2
    }

    fn mass(&self) -> f64 {
        1.0
    }

    fn u<T: Scalar>(&self, q: &[T]) -> Vec<T> {
        vec![-q[1].scale(self.nu), q[0].scale(self.nu)]
    }

    fn du<T: Scalar>(&self, _q: &[T]) -> Matrix<T> {
        Matrix::from_rows(&[&[0.0, -self.nu], &[self.nu, 0.0]])
    }

    fn potential<T: Scalar>(&self, q: &[T]) -> T {
        (q[0] * q[0] + q[1] * q[1]).scale(-0.5 * self.nu * self.nu)
    }

    fn grad_potential<T: Scalar>(&self, q: &[T]) -> Vec<T> {
        let s = -self.nu * self.nu;
        vec![q[0].scale(s), q[1].scale(s)]
    }
}

/// `α(h) = (ν h, 0)`, `β = (0, 1)ᵀ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeTransform {
    pub nu: f64,
}

impl Transform for ModeTransform {
    fn output_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn alpha<T: Scalar>(&self, qbar: &[T]) -> Vec<T> {
        vec![qbar[0].scale(self.nu), T::zero()]
    }

    fn beta<T: Scalar>(&self, _qbar: &[T]) -> Matrix<T> {
        Matrix::from_rows(&[&[0.0], &[1.0]])
    }

    fn dalpha<T: Scalar>(&self, _qbar: &[T]) -> Matrix<T> {
        Matrix::from_rows(&[&[self.nu], &[0.0]])
    }

    fn dbeta<T: Scalar>(&self, _qbar: &[T]) -> Tensor3<T> {
        Tensor3::zeros(2, 1, 1)
    }

    fn ddalpha<T: Scalar>(&self, _qbar: &[T]) -> Tensor3<T> {
        Tensor3::zeros(2, 1, 1)
    }

    fn ddbeta<T: Scalar>(&self, _qbar: &[T]) -> Tensor4<T> {
        Tensor4::zeros(2, 1, 1, 1)
    }
}

pub type ModeModel = ModelSpec<ModeLagrangian, ModeTransform>;

/// The mode as a model for [`crate::integrate::integrate`], together with its
/// constraint set `{ψ, ψ̇}`.
pub fn make_mode_model(p: &ModeParams) -> Result<(ModeModel, ModeConstraints)> {
    p.validate()?;
    let nu = p.nu();
    let model = ModelSpec::new("gravwave-mode", ModeLagrangian { nu }, ModeTransform { nu })?;
    Ok((model, ModeConstraints { params: *p }))
}

/// `ψ = h⃛ + ν²ḣ` and `ψ̇ = h⁗ + ν²ḧ` with `h⁗` taken from the dynamics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeConstraints {
    pub params: ModeParams,
}

impl ConstraintSet for ModeConstraints {
    fn len(&self) -> usize {
        2
    }

    fn values(&self, state: &CanonicalState) -> Result<Vec<f64>> {
        state.check(1)?;
        let p = &self.params;
        let x = canonical_to_mode(p, state);
        let psi = mode_constraint(p, x[2], x[3], x[1], x[0]);
        let x4 = mode_rhs(p, &x)[3];
        Ok(vec![psi, x4 + p.nu() * p.nu() * x[2]])
    }

    fn jacobian(&self, state: &CanonicalState) -> Result<DMatrix<f64>> {
        state.check(1)?;
        // ψ = −P₁ and ψ̇ = −ν²P₂ in canonical variables.
        let n2 = self.params.nu() * self.params.nu();
        Ok(DMatrix::from_row_slice(2, 4, &[0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, -n2]))
    }

    fn labels(&self) -> Vec<String> {
        vec!["psi".into(), "psi_dot".into()]
    }
}

/// Amplitude of the deviation from the plane wave sharing the initial
/// `(h, ḣ)`: `√(δh² + (δḣ/ν)²)` at each recorded time.
pub fn secular_envelope(p: &ModeParams, times: &[f64], states: &[CanonicalState]) -> Vec<f64> {
    let Some(first) = states.first() else { return Vec::new() };
    let x0 = canonical_to_mode(p, first);
    let t0 = times[0];
    let nu = p.nu();
    times
        .iter()
        .zip(states)
        .map(|(t, s)| {
            let x = canonical_to_mode(p, s);
            let w = plane_wave(p, x0[0], x0[1], t - t0);
            let dh = x[0] - w[0];
            let dhd = x[1] - w[1];
            if nu == 0.0 {
                dh.abs()
            } else {
                (dh * dh + (dhd / nu).powi(2)).sqrt()
            }
        })
        .collect()
}
