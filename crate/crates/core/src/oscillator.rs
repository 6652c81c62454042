//! Three-dimensional harmonic oscillator reduced to two basic variables
//! through `q = (q̄₁ + λq̄̇₂, q̄₂, λq̄̇₁)`.
//!
//! Besides the model itself this module carries closed-form expressions
//! (induced Lagrangian, momenta, Hamiltonian, canonical equations, explicit
//! solutions, the four rescaled constraints and their bracket matrix) that
//! the tests and the `verify` command use as independent oracles.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::kinematics::{CanonicalState, Jet};
use crate::model::{Lagrangian, ModelSpec, Transform};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Tensor3, Tensor4};

/// Mass, spring constants and time constant `λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub m: f64,
    pub h: [f64; 3],
    pub lambda: f64,
}

impl Default for OscillatorParams {
    fn default() -> Self {
        Self::isotropic(1.0, 1.0, 1.0)
    }
}

impl OscillatorParams {
    pub fn isotropic(m: f64, h: f64, lambda: f64) -> Self {
        Self { m, h: [h; 3], lambda }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) || !self.m.is_finite() {
            return Err(Error::InvalidParameter(format!("m must be positive, got {}", self.m)));
        }
        if self.lambda == 0.0 || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be nonzero and finite, got {}", self.lambda)));
        }
        if self.h.iter().any(|h| !h.is_finite() || *h < 0.0) {
            return Err(Error::InvalidParameter(format!("spring constants must be finite and non-negative, got {:?}", self.h)));
        }
        Ok(())
    }

    /// `ω_i = √(h_i/m)`.
    pub fn omega_i(&self, i: usize) -> f64 {
        (self.h[i] / self.m).sqrt()
    }

    pub fn is_isotropic(&self) -> bool {
        self.h[0] == self.h[1] && self.h[1] == self.h[2]
    }

    fn require_isotropic(&self) -> Result<f64> {
        if self.is_isotropic() {
            Ok(self.h[0])
        } else {
            Err(Error::InvalidParameter(format!("closed form requires h1 = h2 = h3, got {:?}", self.h)))
        }
    }

    /// `Ω = λ²ω²` (isotropic).
    pub fn big_omega(&self) -> f64 {
        self.lambda * self.lambda * self.h[0] / self.m
    }

    /// Parameters with the given `Ω`, keeping `m` and `λ`.
    pub fn with_big_omega(m: f64, lambda: f64, big_omega: f64) -> Self {
        Self::isotropic(m, big_omega * m / (lambda * lambda), lambda)
    }
}

/// `L = ½ m q̇·q̇ − ½ Σ h_i q_i²`, `u ≡ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscillatorLagrangian {
    pub m: f64,
    pub h: [f64; 3],
}

impl Lagrangian for OscillatorLagrangian {
    fn dim(&self) -> usize {
        3
    }

    fn mass(&self) -> f64 {
        self.m
    }

    fn u<T: Scalar>(&self, _q: &[T]) -> Vec<T> {
        vec![T::zero(); 3]
    }

    fn du<T: Scalar>(&self, _q: &[T]) -> Matrix<T> {
        Matrix::zeros(3, 3)
    }

    fn potential<T: Scalar>(&self, q: &[T]) -> T {
        (0..3).fold(T::zero(), |acc, i| acc + (q[i] * q[i]).scale(0.5 * self.h[i]))
    }

    fn grad_potential<T: Scalar>(&self, q: &[T]) -> Vec<T> {
        (0..3).map(|i| q[i].scale(self.h[i])).collect()
    }
}

/// `α = (q̄₁, q̄₂, 0)`, `β = [[0, λ], [0, 0], [λ, 0]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscillatorTransform {
    pub lambda: f64,
}

impl Transform for OscillatorTransform {
    fn output_dim(&self) -> usize {
        3
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn alpha<T: Scalar>(&self, qbar: &[T]) -> Vec<T> {
        vec![qbar[0], qbar[1], T::zero()]
    }

    fn beta<T: Scalar>(&self, _qbar: &[T]) -> Matrix<T> {
        let l = self.lambda;
        Matrix::from_rows(&[&[0.0, l], &[0.0, 0.0], &[l, 0.0]])
    }

    fn dalpha<T: Scalar>(&self, _qbar: &[T]) -> Matrix<T> {
        Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]])
    }

    fn dbeta<T: Scalar>(&self, _qbar: &[T]) -> Tensor3<T> {
        Tensor3::zeros(3, 2, 2)
    }

    fn ddalpha<T: Scalar>(&self, _qbar: &[T]) -> Tensor3<T> {
        Tensor3::zeros(3, 2, 2)
    }

    fn ddbeta<T: Scalar>(&self, _qbar: &[T]) -> Tensor4<T> {
        Tensor4::zeros(3, 2, 2, 2)
    }
}

pub type Oscillator = ModelSpec<OscillatorLagrangian, OscillatorTransform>;

pub fn make_oscillator(params: &OscillatorParams) -> Result<Oscillator> {
    params.validate()?;
    ModelSpec::new(
        "oscillator",
        OscillatorLagrangian { m: params.m, h: params.h },
        OscillatorTransform { lambda: params.lambda },
    )
}

// ---------------------------------------------------------------------------
// Closed forms

/// The higher-order Lagrangian written out in the basic variables.
pub fn closed_form_lagrangian(p: &OscillatorParams, jet: &Jet) -> f64 {
    let (m, l, [h1, h2, h3]) = (p.m, p.lambda, p.h);
    let (x, y) = (jet.qbar[0], jet.qbar[1]);
    let (xd, yd) = (jet.qbar_dot[0], jet.qbar_dot[1]);
    let (xdd, ydd) = (jet.qbar_ddot[0], jet.qbar_ddot[1]);
    0.5 * m * (xd * xd + yd * yd + l * l * (xdd * xdd + ydd * ydd) + 2.0 * l * xd * ydd)
        - 0.5 * (h1 * x * x + h2 * y * y + l * l * (h3 * xd * xd + h1 * yd * yd) + 2.0 * l * h1 * x * yd)
}

/// `(P₁, P₂)` written out in the basic variables; needs the jerk.
pub fn closed_form_momenta(p: &OscillatorParams, jet: &Jet) -> Result<([f64; 2], [f64; 2])> {
    let (m, l, [h1, _, h3]) = (p.m, p.lambda, p.h);
    let x = jet.qbar[0];
    let (xd, yd) = (jet.qbar_dot[0], jet.qbar_dot[1]);
    let (xdd, ydd) = (jet.qbar_ddot[0], jet.qbar_ddot[1]);
    let j = jet.jerk()?;
    let p11 = m * (xd + l * ydd - l * l * j[0]) - l * l * h3 * xd;
    let p12 = m * (yd - l * xdd - l * l * j[1]) - l * h1 * (x + l * yd);
    let p21 = l * l * m * xdd;
    let p22 = l * m * (xd + l * ydd);
    Ok(([p11, p12], [p21, p22]))
}

/// The quadratic Hamiltonian in canonical variables.
pub fn closed_form_hamiltonian(p: &OscillatorParams, s: &CanonicalState) -> f64 {
    let (m, l, [h1, h2, h3]) = (p.m, p.lambda, p.h);
    let (q11, q12, q21, q22) = (s.q1[0], s.q1[1], s.q2[0], s.q2[1]);
    let (p11, p12, p21, p22) = (s.p1[0], s.p1[1], s.p2[0], s.p2[1]);
    (p21 * p21 + p22 * p22) / (2.0 * l * l * m) - p22 * q21 / l - 0.5 * m * q22 * q22
        + 0.5 * (h1 * (q11 + l * q22).powi(2) + h2 * q12 * q12 + l * l * h3 * q21 * q21)
        + p11 * q21
        + p12 * q22
}

/// The canonical equations written out component by component.
pub fn closed_form_rhs(p: &OscillatorParams, s: &CanonicalState) -> CanonicalState {
    let (m, l, [h1, h2, h3]) = (p.m, p.lambda, p.h);
    let (q11, q12, q21, q22) = (s.q1[0], s.q1[1], s.q2[0], s.q2[1]);
    let (p11, p12, p21, p22) = (s.p1[0], s.p1[1], s.p2[0], s.p2[1]);
    CanonicalState::new(
        vec![q21, q22],
        vec![p21 / (l * l * m), p22 / (l * l * m) - q21 / l],
        vec![-h1 * (q11 + l * q22), -h2 * q12],
        vec![p22 / l - p11 - l * l * h3 * q21, m * q22 - l * h1 * (q11 + l * q22) - p12],
    )
}

/// Explicit solution of the three decoupled oscillators with exact derivatives.
pub fn analytic_q(p: &OscillatorParams, c: [f64; 3], c_prime: [f64; 3], t: f64) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let mut q = [0.0; 3];
    let mut qd = [0.0; 3];
    let mut qdd = [0.0; 3];
    for i in 0..3 {
        let w = p.omega_i(i);
        let (s, co) = (w * t).sin_cos();
        q[i] = c[i] * co + c_prime[i] * s;
        qd[i] = w * (-c[i] * s + c_prime[i] * co);
        qdd[i] = -w * w * q[i];
    }
    (q, qd, qdd)
}

/// `q̄` and its derivatives through fourth order.
#[derive(Clone, Debug, PartialEq)]
pub struct QbarSolution {
    pub jet: Jet,
    pub qbar_4: Vec<f64>,
}

/// Sum of terms `Re[a_j e^{s_j t}]` differentiated `n` times.
fn modes(terms: &[(Complex64, Complex64)], t: f64, n: i32) -> f64 {
    terms.iter().map(|(a, s)| (a * s.powi(n) * (s * t).exp()).re).sum()
}

fn solution_from_terms(x: &[(Complex64, Complex64)], y: &[(Complex64, Complex64)], t: f64) -> QbarSolution {
    let d = |n| vec![modes(x, t, n), modes(y, t, n)];
    QbarSolution { jet: Jet::new(d(0), d(1), d(2), Some(d(3))), qbar_4: d(4) }
}

/// General solution of the isotropic reduced equations.
///
/// `c̄₁..c̄₄` weight the oscillation at `ω`, `c̄₅, c̄₆` the mode decaying as
/// `e^{−√3t/(2λ)}` and `c̄₇, c̄₈` the mode growing as `e^{√3t/(2λ)}`; the
/// latter two rotate at angular frequency `1/(2λ)`.
pub fn analytic_qbar(p: &OscillatorParams, cbar: [f64; 8], t: f64) -> Result<QbarSolution> {
    p.validate()?;
    p.require_isotropic()?;
    let w = p.omega_i(0);
    let r = 3f64.sqrt() / (2.0 * p.lambda);
    let th = 1.0 / (2.0 * p.lambda);
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let iw = c(0.0, w);
    let decay = c(-r, th);
    let grow = c(r, th);
    let x = [(c(cbar[0], -cbar[1]), iw), (c(cbar[4], -cbar[5]), decay), (c(cbar[6], -cbar[7]), grow)];
    let y = [(c(cbar[2], -cbar[3]), iw), (c(cbar[5], cbar[4]), decay), (c(cbar[7], cbar[6]), grow)];
    Ok(solution_from_terms(&x, &y, t))
}

/// The candidate `q̄` built from [`analytic_q`]'s constants by inverting
/// the transformation on oscillatory solutions. It solves the reduced
/// equations only in the isotropic case.
pub fn candidate_qbar(p: &OscillatorParams, c: [f64; 3], c_prime: [f64; 3], t: f64) -> QbarSolution {
    let (w1, w2) = (p.omega_i(0), p.omega_i(1));
    let l = p.lambda;
    let z = |re: f64, im: f64| Complex64::new(re, im);
    let x = [(z(c[0], -c_prime[0]), z(0.0, w1)), (z(-l * w2 * c_prime[1], -l * w2 * c[1]), z(0.0, w2))];
    let y = [(z(c[1], -c_prime[1]), z(0.0, w2))];
    solution_from_terms(&x, &y, t)
}

/// The four constraints in their `λ`-rescaled form (isotropic `h`).
pub fn oscillator_constraints(p: &OscillatorParams, s: &CanonicalState) -> [f64; 4] {
    let (m, l, h) = (p.m, p.lambda, p.h[0]);
    let (q11, q12, q21, q22) = (s.q1[0], s.q1[1], s.q2[0], s.q2[1]);
    let (p11, p12, p21, p22) = (s.p1[0], s.p1[1], s.p2[0], s.p2[1]);
    let phi1 = l * p11 - p22;
    let phi2 = l * (p12 - m * q22);
    let phi3 = -p22 + l * m * q21 - l * l * h * q12;
    let phi4 = phi2 + p21 + l * l * h * q11;
    [phi1, phi2, phi3, phi4]
}

/// [`oscillator_constraints`] as a [`ConstraintSet`] with its constant Jacobian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscillatorConstraints {
    pub params: OscillatorParams,
}

impl OscillatorConstraints {
    pub fn new(params: OscillatorParams) -> Result<Self> {
        params.validate()?;
        params.require_isotropic()?;
        Ok(Self { params })
    }
}

impl ConstraintSet for OscillatorConstraints {
    fn len(&self) -> usize {
        4
    }

    fn values(&self, state: &CanonicalState) -> Result<Vec<f64>> {
        state.check(2)?;
        Ok(oscillator_constraints(&self.params, state).to_vec())
    }

    fn jacobian(&self, state: &CanonicalState) -> Result<DMatrix<f64>> {
        state.check(2)?;
        let (m, l, h) = (self.params.m, self.params.lambda, self.params.h[0]);
        let lh = l * l * h;
        // columns: Q11 Q12 Q21 Q22 P11 P12 P21 P22
        Ok(DMatrix::from_row_slice(
            4,
            8,
            &[
                0.0, 0.0, 0.0, 0.0, l, 0.0, 0.0, -1.0, //
                0.0, 0.0, 0.0, -l * m, 0.0, l, 0.0, 0.0, //
                0.0, -lh, l * m, 0.0, 0.0, 0.0, 0.0, -1.0, //
                lh, 0.0, 0.0, -l * m, 0.0, l, 1.0, 0.0,
            ],
        ))
    }
}

/// The Hamiltonian restricted to the surface where the first two constraints vanish.
pub fn constrained_hamiltonian(p: &OscillatorParams, s: &CanonicalState) -> f64 {
    let (m, l, h) = (p.m, p.lambda, p.h[0]);
    let (q11, q12, q21, q22) = (s.q1[0], s.q1[1], s.q2[0], s.q2[1]);
    let (p21, p22) = (s.p2[0], s.p2[1]);
    (p21 * p21 + p22 * p22) / (2.0 * l * l * m)
        + 0.5 * m * q22 * q22
        + 0.5 * h * ((q11 + l * q22).powi(2) + q12 * q12 + l * l * q21 * q21)
}

/// Pairwise brackets of [`oscillator_constraints`], written out.
pub fn oscillator_bracket_matrix(p: &OscillatorParams) -> DMatrix<f64> {
    let w = p.big_omega();
    let a = 1.0 + w;
    DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, -1.0, 0.0, -a, //
            1.0, 0.0, a, 0.0, //
            0.0, -a, 0.0, -w, //
            a, 0.0, w, 0.0,
        ],
    ) * (p.lambda * p.m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::lift_q;

    fn unit() -> OscillatorParams {
        OscillatorParams::default()
    }

    #[test]
    fn rejects_zero_lambda() {
        let p = OscillatorParams::isotropic(1.0, 1.0, 0.0);
        assert!(matches!(make_oscillator(&p), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn lift_example() {
        let m = make_oscillator(&unit()).unwrap();
        assert_eq!(lift_q(&m, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), vec![5.0, 2.0, 3.0]);
    }

    #[test]
    fn lagrangian_at_static_jet() {
        let jet = Jet::new(vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0], None);
        assert_eq!(closed_form_lagrangian(&unit(), &jet), -0.5);
    }

    #[test]
    fn analytic_q_examples() {
        let (q, _, _) = analytic_q(&unit(), [1.0, 0.0, 0.0], [0.0; 3], 0.0);
        assert_eq!(q, [1.0, 0.0, 0.0]);
        let (q, _, _) = analytic_q(&unit(), [1.0, 0.0, 0.0], [0.0; 3], std::f64::consts::PI);
        assert!((q[0] + 1.0).abs() < 1e-15 && q[1] == 0.0 && q[2] == 0.0);
    }

    #[test]
    fn analytic_qbar_at_origin() {
        let s = analytic_qbar(&unit(), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0).unwrap();
        assert_eq!(s.jet.qbar, vec![1.0, 0.0]);
    }

    #[test]
    fn analytic_qbar_rejects_anisotropy() {
        let p = OscillatorParams { m: 1.0, h: [1.0, 2.0, 3.0], lambda: 1.0 };
        assert!(analytic_qbar(&p, [0.0; 8], 0.0).is_err());
    }

    #[test]
    fn growing_mode_rate() {
        let s = analytic_qbar(&unit(), [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0], 1.0).unwrap();
        let norm = s.jet.qbar.iter().map(|x| x * x).sum::<f64>().sqrt();
        let expected = (3f64.sqrt() / 2.0).exp();
        assert!((norm / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exponential_modes_satisfy_identities() {
        let l = 1.3;
        let p = OscillatorParams::isotropic(1.0, 0.7, l);
        for t in [0.0, 0.4, 2.0] {
            let s = analytic_qbar(&p, [0.0, 0.0, 0.0, 0.0, 0.3, -0.2, 0.5, 0.9], t).unwrap();
            let (x, y) = (&s.jet.qbar, &s.jet.qbar_dot);
            let xdd = &s.jet.qbar_ddot;
            assert!((x[0] + l * y[1] - l * l * xdd[0]).abs() < 1e-10);
            assert!((x[1] - l * y[0] - l * l * xdd[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn constrained_hamiltonian_examples() {
        assert_eq!(constrained_hamiltonian(&unit(), &CanonicalState::zeros(2)), 0.0);
        let s = CanonicalState::new(vec![0.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0]);
        assert_eq!(constrained_hamiltonian(&unit(), &s), 1.0);
    }

    #[test]
    fn bracket_matrix_literal() {
        let m = oscillator_bracket_matrix(&unit());
        let want = DMatrix::from_row_slice(
            4,
            4,
            &[0.0, -1.0, 0.0, -2.0, 1.0, 0.0, 2.0, 0.0, 0.0, -2.0, 0.0, -1.0, 2.0, 0.0, 1.0, 0.0],
        );
        assert_eq!(m, want);
        let z = oscillator_bracket_matrix(&OscillatorParams::with_big_omega(1.0, 1.0, 0.0));
        assert_eq!(z[(2, 3)], 0.0);
        for w in [0.0, 0.25, 1.0, 4.0] {
            assert!(oscillator_bracket_matrix(&OscillatorParams::with_big_omega(1.0, 1.0, w)).determinant().abs() > 1e-6);
        }
    }

    #[test]
    fn zero_state_satisfies_constraints() {
        assert_eq!(oscillator_constraints(&unit(), &CanonicalState::zeros(2)), [0.0; 4]);
    }
}
