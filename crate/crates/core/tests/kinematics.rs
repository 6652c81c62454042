use ostrogradsky::fixtures::random_model;
use ostrogradsky::kinematics::*;
use ostrogradsky::model::{gram_inverse, validate_model, Model, ModelSpec, ScaledPotentialGradient, Transform};
use ostrogradsky::oscillator::*;
use proptest::prelude::*;

fn osc(lambda: f64) -> Oscillator {
    make_oscillator(&OscillatorParams::isotropic(1.0, 1.0, lambda)).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
}

fn points(k: usize, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|p| (0..k).map(|j| ((p * 7 + j * 3) % 11) as f64 / 5.5 - 1.0).collect()).collect()
}

#[test]
fn lift_examples() {
    assert_eq!(lift_q(&osc(1.0), &[1.0, 2.0], &[3.0, 4.0]).unwrap(), vec![5.0, 2.0, 3.0]);
    assert_eq!(lift_q(&osc(1.0), &[0.0, 0.0], &[0.0, 0.0]).unwrap(), vec![0.0; 3]);
    assert_eq!(lift_q(&osc(2.0), &[1.0, 0.0], &[0.0, 1.0]).unwrap(), vec![3.0, 0.0, 0.0]);

    let jet = Jet::new(vec![0.0, 0.0], vec![3.0, 4.0], vec![5.0, 6.0], None);
    assert_eq!(lift_qdot(&osc(1.0), &jet).unwrap(), vec![9.0, 4.0, 5.0]);
    assert_eq!(lift_qdot(&osc(1.0), &Jet::<f64>::zeros(2)).unwrap(), vec![0.0; 3]);
    let jet = Jet::new(vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], None);
    assert_eq!(lift_qdot(&osc(2.0), &jet).unwrap(), vec![3.0, 0.0, 0.0]);
}

#[test]
fn momenta_examples() {
    let m = osc(1.0);
    let jet = Jet::new(vec![0.0, 0.0], vec![3.0, 4.0], vec![5.0, 6.0], Some(vec![0.0, 0.0]));
    let (_, p2) = momenta(&m, &jet).unwrap();
    assert!(close(&p2, &[5.0, 9.0], 1e-14));
    let (p1, p2) = momenta(&m, &Jet::<f64>::zeros(2)).unwrap();
    assert_eq!((p1, p2), (vec![0.0; 2], vec![0.0; 2]));
    assert!(momenta(&m, &Jet::new(vec![0.0; 2], vec![0.0; 2], vec![0.0; 2], None)).is_err());
}

#[test]
fn momenta_on_analytic_solution_match_closed_form() {
    let p = OscillatorParams::default();
    let sol = analytic_qbar(&p, [0.3, -0.2, 0.5, 0.1, 0.2, -0.4, 0.05, 0.3], 0.0).unwrap();
    let (p1, p2) = momenta(&make_oscillator(&p).unwrap(), &sol.jet).unwrap();
    // P11 = m(q̄̇₁ + λq̄̈₂ − λ²q̄⃛₁) − λ²h q̄̇₁, P12 = m(q̄̇₂ − λq̄̈₁ − λ²q̄⃛₂) − λh(q̄₁ + λq̄̇₂)
    let j = &sol.jet;
    let d3 = j.qbar_dddot.as_ref().unwrap();
    let p11 = j.qbar_dot[0] + j.qbar_ddot[1] - d3[0] - j.qbar_dot[0];
    let p12 = j.qbar_dot[1] - j.qbar_ddot[0] - d3[1] - (j.qbar[0] + j.qbar_dot[1]);
    assert!(close(&p1, &[p11, p12], 1e-12));
    assert!(close(&p2, &[j.qbar_ddot[0], j.qbar_dot[0] + j.qbar_ddot[1]], 1e-12));
}

#[test]
fn accel_and_jerk_examples() {
    let m = osc(1.0);
    let s = CanonicalState::new(vec![0.0, 0.0], vec![3.0, 4.0], vec![0.0, 0.0], vec![5.0, 9.0]);
    assert!(close(&accel_from_canonical(&m, &s).unwrap(), &[5.0, 6.0], 1e-14));
    let z = CanonicalState::<f64>::zeros(2);
    assert_eq!(accel_from_canonical(&m, &z).unwrap(), vec![0.0; 2]);
    assert_eq!(jerk_from_canonical(&m, &z).unwrap(), vec![0.0; 2]);

    let p = OscillatorParams::default();
    let sol = analytic_qbar(&p, [0.3, -0.2, 0.5, 0.1, 0.2, -0.4, 0.05, 0.3], 0.3).unwrap();
    let s = canonical_from_jet(&m, &sol.jet).unwrap();
    assert!(close(&jerk_from_canonical(&m, &s).unwrap(), sol.jet.qbar_dddot.as_ref().unwrap(), 1e-8));
}

#[test]
fn worked_jet_example() {
    let s = canonical_from_jet(&osc(1.0), &Jet::from_slice(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0])).unwrap();
    assert_eq!(s.q1, vec![1.0, 2.0]);
    assert_eq!(s.q2, vec![3.0, 4.0]);
    assert!(close(&s.p1, &[-1.0, -14.0], 1e-12));
    assert!(close(&s.p2, &[5.0, 9.0], 1e-12));
    let z = canonical_from_jet(&osc(1.0), &Jet::<f64>::zeros(2)).unwrap();
    assert_eq!(z.to_vec(), vec![0.0; 8]);
    assert_eq!(jet_from_canonical(&osc(1.0), &CanonicalState::<f64>::zeros(2)).unwrap().to_vec(), vec![0.0; 8]);
}

#[test]
fn oscillator_validates_with_expected_singular_values() {
    let rep = validate_model(&osc(1.0), &[vec![0.0, 0.0]]).unwrap();
    assert!(rep.passed);
    assert!(close(&rep.points[0].beta_singular_values, &[1.0, 1.0], 1e-12));
    let rep = validate_model(&osc(2.5), &points(2, 10)).unwrap();
    assert!(rep.passed && rep.max_mismatch() < 1e-5);
    assert!(close(&rep.points[0].beta_singular_values, &[2.5, 2.5], 1e-12));
}

#[test]
fn corrupted_potential_gradient_fails_validation() {
    let (l, t) = osc(1.0).into_parts();
    let bad = ModelSpec::new("bad", ScaledPotentialGradient { inner: l, factor: 2.0 }, t).unwrap();
    for pt in points(2, 5) {
        let rep = validate_model(&bad, &[pt]).unwrap();
        assert!(!rep.passed);
        assert!(rep.points[0].mismatch.dv > 1e-3);
    }
}

#[test]
fn gram_inverse_examples() {
    let b = gram_inverse(&osc(1.0), &[0.2, -0.7]).unwrap();
    let b4 = gram_inverse(&osc(2.0), &[0.0, 0.0]).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let d = if i == j { 1.0 } else { 0.0 };
            assert!((b[(i, j)] - d).abs() < 1e-15);
            assert!((b4[(i, j)] - d / 4.0).abs() < 1e-15);
        }
    }
}

#[test]
fn p2_ignores_jerk_bitwise() {
    let m = random_model(3, 2, 9, 0.2).unwrap();
    let jet = Jet::from_slice(&[0.1, -0.3, 0.4, 0.2, -0.5, 0.7, 0.9, -0.8]);
    let mut other = jet.clone();
    other.qbar_dddot = Some(vec![-3.0, 11.0]);
    assert_eq!(momenta(&m, &jet).unwrap().1, momenta(&m, &other).unwrap().1);
}

fn unit_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gram_inverse_is_inverse(seed in 0u64..1000, (i, k) in prop_oneof![Just((2, 2)), Just((3, 2)), Just((4, 3)), Just((2, 1))]) {
        let m = random_model(i, k, seed, 0.2).unwrap();
        let pts = points(k, 4);
        let rep = validate_model(&m, &pts).unwrap();
        prop_assume!(rep.passed);
        for pt in &pts {
            let beta = m.transform().beta(pt);
            let g = beta.transpose().matmul(&beta);
            let prod = gram_inverse(&m, pt).unwrap().matmul(&g);
            for a in 0..k {
                for b in 0..k {
                    let d = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((prod[(a, b)] - d).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn validation_is_deterministic(seed in 0u64..1000) {
        let m = random_model(3, 2, seed, 0.3).unwrap();
        let pts = points(2, 3);
        prop_assert_eq!(validate_model(&m, &pts).unwrap(), validate_model(&m, &pts).unwrap());
    }

    #[test]
    fn round_trips_random_models(seed in 0u64..1000, jet in unit_vec(8), state in unit_vec(8)) {
        let m = random_model(3, 2, seed, 0.2).unwrap();
        let jet = Jet::from_slice(&jet);
        let back = jet_from_canonical(&m, &canonical_from_jet(&m, &jet).unwrap()).unwrap();
        prop_assert!(close(&back.to_vec(), &jet.to_vec(), 1e-9));
        let state = CanonicalState::from_slice(&state);
        let back = canonical_from_jet(&m, &jet_from_canonical(&m, &state).unwrap()).unwrap();
        prop_assert!(close(&back.to_vec(), &state.to_vec(), 1e-9));
    }

    #[test]
    fn round_trips_oscillator(lambda in prop_oneof![0.3..3.0f64, -3.0..-0.3f64], jet in unit_vec(8)) {
        let m = osc(lambda);
        let jet = Jet::from_slice(&jet);
        let back = jet_from_canonical(&m, &canonical_from_jet(&m, &jet).unwrap()).unwrap();
        prop_assert!(close(&back.to_vec(), &jet.to_vec(), 1e-9));
    }

    #[test]
    fn p2_never_depends_on_jerk(seed in 0u64..1000, jet in unit_vec(8), jerk in unit_vec(2)) {
        let m = random_model(3, 2, seed, 0.2).unwrap();
        let jet = Jet::from_slice(&jet);
        let mut other = jet.clone();
        other.qbar_dddot = Some(jerk);
        prop_assert_eq!(momenta(&m, &jet).unwrap().1, momenta(&m, &other).unwrap().1);
    }

    #[test]
    fn accel_round_trips_through_p2(seed in 0u64..1000, state in unit_vec(8)) {
        let m = random_model(3, 2, seed, 0.2).unwrap();
        let s = CanonicalState::from_slice(&state);
        let qdd = accel_from_canonical(&m, &s).unwrap();
        let jet = Jet::new(s.q1.clone(), s.q2.clone(), qdd, Some(vec![0.0; 2]));
        prop_assert!(close(&momenta(&m, &jet).unwrap().1, &s.p2, 1e-10));
    }

    #[test]
    fn oscillator_matches_closed_forms(jet in unit_vec(8), m in 0.5..2.0f64, lambda in 0.5..2.0f64,
                                       h in prop::array::uniform3(0.2..3.0f64)) {
        let p = OscillatorParams { m, h, lambda };
        let model = make_oscillator(&p).unwrap();
        let jet = Jet::from_slice(&jet);
        let s = canonical_from_jet(&model, &jet).unwrap();
        let (c1, c2) = closed_form_momenta(&p, &jet).unwrap();
        prop_assert_eq!(&s.q1, &jet.qbar);
        prop_assert_eq!(&s.q2, &jet.qbar_dot);
        prop_assert!(close(&s.p1, &c1, 1e-12));
        prop_assert!(close(&s.p2, &c2, 1e-12));
    }
}
