use nalgebra::{DMatrix, DVector};
use ostrogradsky::constraints::*;
use ostrogradsky::fixtures::random_model;
use ostrogradsky::integrate::{integrate, IntegrateOptions};
use ostrogradsky::kinematics::{canonical_from_jet, CanonicalState};
use ostrogradsky::oscillator::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_state(r: &mut ChaCha8Rng, k: usize) -> CanonicalState {
    CanonicalState::from_slice(&(0..4 * k).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<_>>())
}

fn fd_grad(f: impl Fn(&CanonicalState) -> f64, s: &CanonicalState) -> Vec<f64> {
    let x = s.to_vec();
    (0..x.len())
        .map(|a| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[a] += 1e-6;
            xm[a] -= 1e-6;
            (f(&CanonicalState::from_slice(&xp)) - f(&CanonicalState::from_slice(&xm))) / 2e-6
        })
        .collect()
}

/// `{f, g}` written out over the four canonical blocks.
fn bracket(gf: &[f64], gg: &[f64], k: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..k {
        acc += gf[i] * gg[2 * k + i] - gf[2 * k + i] * gg[i];
        acc += gf[k + i] * gg[3 * k + i] - gf[3 * k + i] * gg[k + i];
    }
    acc
}

#[test]
fn primary_constraint_examples() {
    let p = OscillatorParams::default();
    let m = make_oscillator(&p).unwrap();
    assert_eq!(primary_constraints(&m, &CanonicalState::<f64>::zeros(2)).unwrap(), vec![0.0, 0.0]);
    let sol = analytic_qbar(&p, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.4).unwrap();
    let s = canonical_from_jet(&m, &sol.jet).unwrap();
    assert!(primary_constraints(&m, &s).unwrap().iter().all(|x| x.abs() < 1e-10));
    let s = CanonicalState::new(vec![0.0; 2], vec![0.0; 2], vec![1.0, 0.0], vec![0.0; 2]);
    assert_eq!(primary_constraints(&m, &s).unwrap(), vec![1.0, 0.0]);
}

#[test]
fn primary_constraints_are_rescaled_closed_form_pair() {
    let p = OscillatorParams::isotropic(1.3, 0.7, 1.7);
    let m = make_oscillator(&p).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let s = random_state(&mut r, 2);
        let phi = primary_constraints(&m, &s).unwrap();
        let closed = oscillator_constraints(&p, &s);
        assert!((phi[0] - closed[0] / p.lambda).abs() < 1e-12);
        assert!((phi[1] - closed[1] / p.lambda).abs() < 1e-12);
    }
}

#[test]
fn second_closed_form_constraint_appears_at_level_two() {
    let p = OscillatorParams::default();
    let m = make_oscillator(&p).unwrap();
    let probes = probe_states(2, 20, 3);
    // fit φ₂ by constant combinations of the level-2 components
    let a = DMatrix::from_fn(probes.len(), 2, |r, c| chain_levels(&m, &probes[r], 2).unwrap()[1][c]);
    let b = DVector::from_fn(probes.len(), |r, _| oscillator_constraints(&p, &probes[r])[1]);
    let x = a.clone().svd(true, true).solve(&b, 1e-12).unwrap();
    assert!((a * x - b).amax() < 1e-10);
}

#[test]
fn poisson_bracket_examples() {
    let s = CanonicalState::from_slice(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]);
    assert_eq!(poisson_bracket(&Var::Q1(0), &Var::P1(0), &s).unwrap(), 1.0);
    assert_eq!(poisson_bracket(&Var::Q1(0), &Var::Q2(0), &s).unwrap(), 0.0);
    assert_eq!(poisson_bracket(&Var::P2(1), &Var::Q2(1), &s).unwrap(), -1.0);
    let cs = OscillatorConstraints::new(OscillatorParams::default()).unwrap();
    let b = poisson_bracket(&Component { set: &cs, index: 0 }, &Component { set: &cs, index: 1 }, &s).unwrap();
    assert_eq!(b, -1.0);
}

#[test]
fn dirac_bracket_examples() {
    let p = OscillatorParams::default();
    let cs = OscillatorConstraints::new(p).unwrap();
    let s = CanonicalState::from_slice(&[0.3, -0.1, 0.5, 0.2, -0.4, 0.6, 0.1, -0.7]);
    let phi1 = Component { set: &cs, index: 0 };
    assert!(dirac_bracket(&phi1, &Var::Q1(0), &cs, &s).unwrap().abs() < 1e-12);
    assert!(dirac_bracket(&Var::P2(1), &Var::P2(1), &cs, &s).unwrap().abs() < 1e-15);

    let c = oscillator_bracket_matrix(&p);
    let cinv = c.clone().try_inverse().unwrap();
    let grads: Vec<Vec<f64>> = (0..4).map(|a| fd_grad(|x| oscillator_constraints(&p, x)[a], &s)).collect();
    let gq = Var::Q1(0).gradient(&s).unwrap();
    let gp = Var::P1(0).gradient(&s).unwrap();
    let mut want = bracket(&gq, &gp, 2);
    for a in 0..4 {
        for b in 0..4 {
            want -= bracket(&gq, &grads[a], 2) * cinv[(a, b)] * bracket(&grads[b], &gp, 2);
        }
    }
    let got = dirac_bracket(&Var::Q1(0), &Var::P1(0), &cs, &s).unwrap();
    assert!((got - want).abs() < 1e-9, "{got} vs {want}");
}

#[test]
fn singular_constraint_matrix_is_reported() {
    // two copies of the same constraint: the bracket matrix vanishes
    struct Twice;
    impl ConstraintSet for Twice {
        fn len(&self) -> usize {
            2
        }
        fn values(&self, s: &CanonicalState) -> ostrogradsky::error::Result<Vec<f64>> {
            Ok(vec![s.p1[0], s.p1[0]])
        }
        fn jacobian(&self, _s: &CanonicalState) -> ostrogradsky::error::Result<DMatrix<f64>> {
            let mut j = DMatrix::zeros(2, 8);
            j[(0, 4)] = 1.0;
            j[(1, 4)] = 1.0;
            Ok(j)
        }
    }
    let s = CanonicalState::<f64>::zeros(2);
    assert!(dirac_bracket(&Var::Q1(0), &Var::P1(0), &Twice, &s).is_err());
}

#[test]
fn on_shell_vanishing() {
    let p = OscillatorParams::default();
    let m = make_oscillator(&p).unwrap();
    let chain = build_constraint_chain(&m, 6, &probe_states(2, 24, 5)).unwrap();
    assert!(chain.closure.closed);
    let mut r = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let c = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        for t in [0.0, 0.9, 2.3, 4.7] {
            let sol = analytic_qbar(&p, [c[0], c[1], c[2], c[3], 0.0, 0.0, 0.0, 0.0], t).unwrap();
            let s = canonical_from_jet(&m, &sol.jet).unwrap();
            assert!(chain.evaluate(&m, &s).unwrap().iter().all(|v| v.abs() < 1e-8));
            assert!(oscillator_constraints(&p, &s).iter().all(|v| v.abs() < 1e-8));
        }
    }
}

#[test]
fn chain_matrix_matches_pairwise_brackets() {
    let m = random_model(3, 2, 4, 0.3).unwrap();
    let chain = build_constraint_chain(&m, 3, &probe_states(2, 24, 6)).unwrap();
    let bound = chain.bind(&m);
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let s = random_state(&mut r, 2);
    let c = constraint_matrix(&bound, &s).unwrap();
    let n = bound.len();
    for a in 0..n {
        for b in 0..n {
            assert_eq!(c[(a, b)], -c[(b, a)]);
            let ga = fd_grad(|x| bound.values(x).unwrap()[a], &s);
            let gb = fd_grad(|x| bound.values(x).unwrap()[b], &s);
            let want = bracket(&ga, &gb, 2);
            assert!((c[(a, b)] - want).abs() < 1e-5 * f64::max(1.0, want.abs()), "({a},{b}) {} vs {want}", c[(a, b)]);
        }
    }
}

fn chain_derivative_error<M: ostrogradsky::model::Model>(m: &M, chain: &ConstraintChain, s0: &CanonicalState) -> f64 {
    // small step: the central difference is O(dt²) accurate
    let dt = 1e-4;
    let traj = integrate(m, s0, &IntegrateOptions::free(dt, 400)).unwrap();
    let bound = chain.bind(m);
    let h = HamiltonianObservable(m);
    let mut worst: f64 = 0.0;
    for i in (1..traj.len() - 1).step_by(57) {
        let (vp, vm) = (bound.values(&traj.states[i + 1]).unwrap(), bound.values(&traj.states[i - 1]).unwrap());
        for a in 0..bound.len() {
            let fd = (vp[a] - vm[a]) / (2.0 * dt);
            let pb = poisson_bracket(&Component { set: &bound, index: a }, &h, &traj.states[i]).unwrap();
            worst = worst.max((fd - pb).abs() / f64::max(1.0, pb.abs()));
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn dirac_property(w in prop::collection::vec(-1.0..1.0f64, 8), s in prop::collection::vec(-1.0..1.0f64, 8),
                      big_omega in 0.0..4.0f64) {
        let p = OscillatorParams::with_big_omega(1.0, 1.0, big_omega);
        let cs = OscillatorConstraints::new(p).unwrap();
        let s = CanonicalState::from_slice(&s);
        let f = Numeric(move |x: &CanonicalState| {
            x.to_vec().iter().zip(&w).map(|(v, w)| w * v.sin() + v * v * w).sum::<f64>()
        });
        for a in 0..4 {
            let phi = Component { set: &cs, index: a };
            prop_assert!(dirac_bracket(&phi, &f, &cs, &s).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn constraint_matrix_antisymmetric(seed in 0u64..1000, s in prop::collection::vec(-1.0..1.0f64, 8)) {
        let m = random_model(3, 2, seed, 0.3).unwrap();
        let chain = build_constraint_chain(&m, 3, &probe_states(2, 24, seed)).unwrap();
        let c = constraint_matrix(&chain.bind(&m), &CanonicalState::from_slice(&s)).unwrap();
        prop_assert_eq!(&c, &(-c.transpose()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn chain_derivative_oscillator(s in prop::collection::vec(-1.0..1.0f64, 8)) {
        let m = make_oscillator(&OscillatorParams::default()).unwrap();
        let chain = build_constraint_chain(&m, 6, &probe_states(2, 24, 1)).unwrap();
        prop_assert!(chain_derivative_error(&m, &chain, &CanonicalState::from_slice(&s)) < 1e-5);
    }

    #[test]
    fn chain_derivative_random(seed in 0u64..1000, s in prop::collection::vec(-0.5..0.5f64, 8)) {
        let m = random_model(3, 2, seed, 0.2).unwrap();
        let chain = build_constraint_chain(&m, 3, &probe_states(2, 24, 1)).unwrap();
        prop_assert!(chain_derivative_error(&m, &chain, &CanonicalState::from_slice(&s)) < 1e-5);
    }
}

