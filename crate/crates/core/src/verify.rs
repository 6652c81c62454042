//! Self-checks for the built-in models: derivative consistency, exact
//! gradient against finite differences, round trips, flow equivalence,
//! constraint-chain closure, and the closed forms each model carries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constraints::{
    build_constraint_chain, chain_levels, constraint_matrix, dirac_bracket, probe_states, AutoDiff, Component,
    ConstraintSet,
};
use crate::dynamics::{canonical_rhs, fourth_order_residual, hamiltonian, hamiltonian_gradient, induced_lagrangian};
use crate::error::Result;
use crate::gravwave::{
    box_h, canonical_to_mode, make_mode_model, mode_constraint, mode_residual, mode_to_canonical, plane_wave,
    ModeLagrangian, ModeParams,
};
use crate::integrate::{integrate, integrate_jet, IntegrateOptions};
use crate::kinematics::{canonical_from_jet, jet_from_canonical, momenta, CanonicalState, Jet};
use crate::model::{validate_model, Model, ModelSpec, ScaledPotentialGradient};
use crate::oscillator::{
    analytic_qbar, closed_form_hamiltonian, closed_form_lagrangian, closed_form_momenta, closed_form_rhs,
    make_oscillator, oscillator_bracket_matrix, oscillator_constraints, OscillatorConstraints, OscillatorParams,
};
use crate::registry::BuiltinModel;
use crate::scalar::{Dual64, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// The measured quantity (usually a max error).
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), passed: value < tolerance, value, tolerance }
    }

    fn above(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), passed: value > tolerance, value, tolerance }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random states or jets per sampled check.
    pub samples: usize,
    /// Multiplies the potential gradient seen by the dynamics. Anything but
    /// 1 injects a fault the suite must catch.
    pub potential_gradient_factor: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 0, samples: 100, potential_gradient_factor: 1.0 }
    }
}

fn uniform(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-scale..scale)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

/// Central-difference gradient of `H`, step `1e-6·max(1, |x|)`.
pub fn fd_hamiltonian_gradient<M: Model>(model: &M, state: &CanonicalState) -> Result<Vec<f64>> {
    let x = state.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for a in 0..x.len() {
        let h = 1e-6 * f64::max(1.0, x[a].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[a] += h;
        xm[a] -= h;
        let hp = hamiltonian(model, &CanonicalState::from_slice(&xp))?;
        let hm = hamiltonian(model, &CanonicalState::from_slice(&xm))?;
        g.push((hp - hm) / (2.0 * h));
    }
    Ok(g)
}

/// Largest `|exact − fd| / max(1, |fd|)` over the components.
pub fn gradient_error<M: Model>(model: &M, state: &CanonicalState) -> Result<f64> {
    let g = hamiltonian_gradient(model, state)?.to_vec();
    let fd = fd_hamiltonian_gradient(model, state)?;
    Ok(g.iter().zip(&fd).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs() / f64::max(1.0, b.abs()))))
}

/// `jet → canonical → jet` and `canonical → jet → canonical` deviations.
pub fn round_trip_error<M: Model>(model: &M, jet: &Jet, state: &CanonicalState) -> Result<f64> {
    let a = jet_from_canonical(model, &canonical_from_jet(model, jet)?)?;
    let b = canonical_from_jet(model, &jet_from_canonical(model, state)?)?;
    Ok(max_abs_diff(&a.to_vec(), &jet.to_vec()).max(max_abs_diff(&b.to_vec(), &state.to_vec())))
}

/// Max `|q̄_canonical(t) − q̄_jet(t)|` over `steps` RK4 steps from `jet`.
pub fn flow_equivalence_error<M: Model>(model: &M, jet: &Jet, dt: f64, steps: usize) -> Result<f64> {
    let s0 = canonical_from_jet(model, jet)?;
    let traj = integrate(model, &s0, &IntegrateOptions::free(dt, steps))?;
    let jets = integrate_jet(model, jet, dt, steps)?;
    let mut err: f64 = 0.0;
    for (s, j) in traj.states.iter().zip(&jets) {
        err = err.max(max_abs_diff(&s.q1, &j.qbar));
    }
    if traj.len() != jets.len() {
        return Ok(f64::INFINITY);
    }
    Ok(err)
}

/// Checks that apply to any model.
pub fn generic_checks<M: Model>(model: &M, opts: &VerifyOptions) -> Result<Vec<Check>> {
    let k = model.reduced_dim();
    let n = opts.samples.max(1);
    let mut r = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::new();

    let pts: Vec<Vec<f64>> = (0..10).map(|_| uniform(&mut r, k, 1.0)).collect();
    let rep = validate_model(model, &pts)?;
    out.push(Check { name: "derivatives".into(), passed: rep.passed, value: rep.max_mismatch(), tolerance: 1e-5 });

    let mut grad: f64 = 0.0;
    let mut trip: f64 = 0.0;
    let mut p2_moved = 0.0;
    for _ in 0..n {
        let s = CanonicalState::from_slice(&uniform(&mut r, 4 * k, 1.0));
        grad = grad.max(gradient_error(model, &s)?);
        let jet = Jet::from_slice(&uniform(&mut r, 4 * k, 1.0));
        trip = trip.max(round_trip_error(model, &jet, &s)?);
        let mut bumped = jet.clone();
        if let Some(j) = bumped.qbar_dddot.as_mut() {
            j.iter_mut().for_each(|x| *x += 0.5);
        }
        let (_, p2a) = momenta(model, &jet)?;
        let (_, p2b) = momenta(model, &bumped)?;
        if p2a != p2b {
            p2_moved = 1.0;
        }
    }
    out.push(Check::below("gradient", grad, 1e-6));
    out.push(Check::below("round-trip", trip, 1e-9));
    out.push(Check::below("p2-ignores-jerk", p2_moved, 0.5));

    let s = CanonicalState::from_slice(&uniform(&mut r, 4 * k, 0.5));
    let traj = integrate(model, &s, &IntegrateOptions::free(1e-3, 10_000))?;
    let h0 = traj.h_values[0];
    let drift = traj.h_values.iter().fold(0.0_f64, |m, h| m.max((h - h0).abs())) / f64::max(1.0, h0.abs());
    out.push(Check::below("energy", if traj.diverged() { f64::INFINITY } else { drift }, 1e-6));

    let mut flow: f64 = 0.0;
    for _ in 0..3 {
        let jet = Jet::from_slice(&uniform(&mut r, 4 * k, 1.0));
        flow = flow.max(flow_equivalence_error(model, &jet, 1e-3, 1000)?);
    }
    out.push(Check::below("flow-equivalence", flow, 1e-6));

    let probes = probe_states(k, 8 * k + 8, opts.seed.wrapping_add(1));
    let chain = build_constraint_chain(model, 6, &probes)?;
    out.push(Check {
        name: "chain-closes".into(),
        passed: chain.closure.closed,
        value: chain.closure.level as f64,
        tolerance: 6.0,
    });

    // d/dt of each stored level along the flow, by central differences in t,
    // against {φ, H} = ∇φ · X_H.
    let s = CanonicalState::from_slice(&uniform(&mut r, 4 * k, 1.0));
    let ht = 1e-3;
    let fwd = integrate(model, &s, &IntegrateOptions::free(ht, 1))?;
    let bwd = integrate(model, &s, &IntegrateOptions { reverse: true, ..IntegrateOptions::free(ht, 1) })?;
    let bound = chain.bind(model);
    let (vp, vm) = (bound.values(&fwd.states[1])?, bound.values(&bwd.states[1])?);
    let jac = bound.jacobian(&s)?;
    let xh = nalgebra::DVector::from_vec(canonical_rhs(model, &s)?.to_vec());
    let bracket = &jac * xh;
    let mut chain_err: f64 = 0.0;
    for a in 0..bound.len() {
        let fd = (vp[a] - vm[a]) / (2.0 * ht);
        chain_err = chain_err.max((fd - bracket[a]).abs() / f64::max(1.0, bracket[a].abs()));
    }
    // RK4 with step ht leaves an O(ht²) differencing error
    out.push(Check::below("chain-derivative", chain_err, 1e-5));
    let lv = chain_levels(model, &s, chain.levels + 1)?;
    let mut lie: f64 = 0.0;
    for (a, id) in chain.active.iter().enumerate() {
        if id.level <= chain.levels {
            lie = lie.max((lv[id.level][id.component - 1] - bracket[a]).abs());
        }
    }
    out.push(Check::below("chain-bracket", lie, 1e-9));
    Ok(out)
}

fn with_fault<L: crate::model::Lagrangian + Clone, Tr: crate::model::Transform + Clone>(
    m: &ModelSpec<L, Tr>,
    factor: f64,
) -> Result<ModelSpec<ScaledPotentialGradient<L>, Tr>> {
    let (l, t) = m.clone().into_parts();
    ModelSpec::new(m.name().to_string(), ScaledPotentialGradient { inner: l, factor }, t)
}

/// Closed-form checks for the oscillator, run through `model` (which may
/// carry an injected fault).
pub fn oscillator_checks<M: Model>(model: &M, p: &OscillatorParams, opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut r = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(7));
    let n = opts.samples.max(1);
    let mut out = Vec::new();
    let (mut el, mut eh, mut erhs, mut emom) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..n {
        let jet = Jet::from_slice(&uniform(&mut r, 8, 1.0));
        el = el.max((induced_lagrangian(model, &jet)? - closed_form_lagrangian(p, &jet)).abs());
        let (p1, p2) = momenta(model, &jet)?;
        let (c1, c2) = closed_form_momenta(p, &jet)?;
        emom = emom.max(max_abs_diff(&p1, &c1)).max(max_abs_diff(&p2, &c2));
        let s = CanonicalState::from_slice(&uniform(&mut r, 8, 1.0));
        eh = eh.max((hamiltonian(model, &s)? - closed_form_hamiltonian(p, &s)).abs());
        erhs = erhs.max(max_abs_diff(&canonical_rhs(model, &s)?.to_vec(), &closed_form_rhs(p, &s).to_vec()));
    }
    out.push(Check::below("closed-form-lagrangian", el, 1e-10));
    out.push(Check::below("closed-form-momenta", emom, 1e-10));
    out.push(Check::below("closed-form-hamiltonian", eh, 1e-10));
    out.push(Check::below("closed-form-equations", erhs, 1e-10));

    if !p.is_isotropic() {
        return Ok(out);
    }
    let cs = OscillatorConstraints::new(*p)?;
    let (mut eres, mut eon, mut eclose, mut edirac) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..20 {
        let c: [f64; 8] = uniform(&mut r, 8, 1.0).try_into().expect("length 8");
        let t = r.gen_range(0.0..2.0);
        let sol = analytic_qbar(p, c, t)?;
        let res = fourth_order_residual(model, &sol.jet, &sol.qbar_4)?;
        eres = eres.max(res.iter().fold(0.0, |m, x| m.max(x.abs())));
        let stable = [c[0], c[1], c[2], c[3], 0.0, 0.0, 0.0, 0.0];
        let on = canonical_from_jet(model, &analytic_qbar(p, stable, t)?.jet)?;
        eon = eon.max(oscillator_constraints(p, &on).iter().fold(0.0, |m, x| m.max(x.abs())));

        let s = CanonicalState::from_slice(&uniform(&mut r, 8, 1.0));
        let phi = oscillator_constraints(p, &s);
        let x_h = nalgebra::DVector::from_vec(canonical_rhs(model, &s)?.to_vec());
        let dphi4 = (cs.jacobian(&s)?.row(3) * x_h)[0];
        eclose = eclose.max((p.lambda * dphi4 - (phi[2] - phi[0])).abs());

        let w = uniform(&mut r, 8, 1.0);
        let f = AutoDiff(move |x: &CanonicalState<Dual64>| {
            x.to_vec().iter().zip(&w).fold(Dual64::constant(0.0), |acc, (v, w)| acc + (*v * *v * *v).scale(*w))
        });
        for a in 0..4 {
            edirac = edirac.max(dirac_bracket(&Component { set: &cs, index: a }, &f, &cs, &s)?.abs());
        }
    }
    out.push(Check::below("analytic-solution", eres, 1e-9));
    out.push(Check::below("constraints-on-shell", eon, 1e-10));
    out.push(Check::below("closure-identity", eclose, 1e-8));
    out.push(Check::below("dirac-property", edirac, 1e-8));

    let s = CanonicalState::from_slice(&uniform(&mut r, 8, 1.0));
    let bm = (constraint_matrix(&cs, &s)? - oscillator_bracket_matrix(p)).amax();
    out.push(Check::below("bracket-matrix", bm, 1e-10));

    let c = [1.0, 0.0, 0.3, -0.5, 0.0, 0.0, 0.0, 0.0];
    let s0 = canonical_from_jet(model, &analytic_qbar(p, c, 0.0)?.jet)?;
    let traj = integrate(model, &s0, &IntegrateOptions::projected(1e-3, 10_000, &cs))?;
    let mut err: f64 = 0.0;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        err = err.max(max_abs_diff(&s.q1, &analytic_qbar(p, c, *t)?.jet.qbar));
    }
    out.push(Check::below("constrained-flow", if traj.diverged() { f64::INFINITY } else { err }, 1e-6));
    Ok(out)
}

/// Checks specific to the wave mode.
pub fn gravwave_checks<M: Model>(model: &M, p: &ModeParams, opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut r = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(11));
    let n = opts.samples.max(1);
    let mut out = Vec::new();
    let (mut emb, mut emap) = (0.0_f64, 0.0_f64);
    for _ in 0..n {
        let v = uniform(&mut r, 5, 1.0);
        let jet = Jet::new(vec![v[0]], vec![v[1]], vec![v[2]], Some(vec![v[3]]));
        let res = fourth_order_residual(model, &jet, &[v[4]])?[0];
        emb = emb.max((res + mode_residual(p, v[0], v[1], v[2], v[3], v[4])).abs());
        let s = canonical_from_jet(model, &jet)?;
        emap = emap.max(max_abs_diff(&s.to_vec(), &mode_to_canonical(p, &[v[0], v[1], v[2], v[3]]).to_vec()));
    }
    out.push(Check::below("mode-equation", emb, 1e-10));
    out.push(Check::below("mode-momenta", emap, 1e-10));

    let nu = p.nu();
    // t·cos νt solves the mode equation but not the constraint
    let t = 0.3;
    let (s, c) = (nu * t).sin_cos();
    let h = [
        t * c,
        c - nu * t * s,
        -2.0 * nu * s - nu * nu * t * c,
        -3.0 * nu * nu * c + nu.powi(3) * t * s,
        4.0 * nu.powi(3) * s + nu.powi(4) * t * c,
    ];
    out.push(Check::below("secular-solves-mode", mode_residual(p, h[0], h[1], h[2], h[3], h[4]).abs(), 1e-10));
    if nu > 0.0 {
        out.push(Check::above("secular-violates-constraint", mode_constraint(p, h[2], h[3], h[1], h[0]).abs(), 1e-6));
    }

    let x0 = plane_wave(p, 1.0, 0.0, 0.0);
    let traj = integrate(model, &mode_to_canonical(p, &x0), &IntegrateOptions::free(1e-3, 10_000))?;
    let mut err: f64 = 0.0;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        err = err.max((canonical_to_mode(p, s)[0] - plane_wave(p, 1.0, 0.0, *t)[0]).abs());
    }
    out.push(Check::below("plane-wave", err, 1e-6));

    let (_, cs) = make_mode_model(p)?;
    let bumped = mode_to_canonical(p, &[1.0, 0.0, -nu * nu + 0.01, 0.0]);
    let traj = integrate(model, &bumped, &IntegrateOptions::projected(1e-3, 10_000, &cs))?;
    let worst = traj.states.iter().fold(0.0_f64, |m, s| m.max(box_h(p, &canonical_to_mode(p, s)).abs()));
    out.push(Check::below("projected-box", worst, 1e-8));
    Ok(out)
}

/// Full suite for a built-in model.
pub fn verify_builtin(b: &BuiltinModel, opts: &VerifyOptions) -> Result<Vec<Check>> {
    let f = opts.potential_gradient_factor;
    match b {
        BuiltinModel::Oscillator(p) => {
            let m = with_fault(&make_oscillator(p)?, f)?;
            let mut checks = generic_checks(&m, opts)?;
            checks.extend(oscillator_checks(&m, p, opts)?);
            Ok(checks)
        }
        BuiltinModel::GravwaveMode(p) => {
            let (base, _) = make_mode_model(p)?;
            let m = with_fault::<ModeLagrangian, _>(&base, f)?;
            let mut checks = generic_checks(&m, opts)?;
            checks.extend(gravwave_checks(&m, p, opts)?);
            Ok(checks)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> VerifyOptions {
        VerifyOptions { samples: 10, ..VerifyOptions::default() }
    }

    #[test]
    fn oscillator_suite_passes() {
        let checks = verify_builtin(&BuiltinModel::Oscillator(OscillatorParams::default()), &quick()).unwrap();
        let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
        assert!(failed.is_empty(), "{failed:?}");
    }

    #[test]
    fn gravwave_suite_passes() {
        let checks = verify_builtin(&BuiltinModel::GravwaveMode(ModeParams::default()), &quick()).unwrap();
        let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
        assert!(failed.is_empty(), "{failed:?}");
    }

    #[test]
    fn injected_fault_is_caught() {
        let opts = VerifyOptions { potential_gradient_factor: 2.0, ..quick() };
        let checks = verify_builtin(&BuiltinModel::Oscillator(OscillatorParams::default()), &opts).unwrap();
        let by_name = |n: &str| checks.iter().find(|c| c.name == n).unwrap().passed;
        assert!(!by_name("derivatives"));
        assert!(!by_name("gradient"));
    }
}
