use ostrogradsky::integrate::*;
use ostrogradsky::kinematics::{canonical_from_jet, CanonicalState};
use ostrogradsky::oscillator::*;
use proptest::prelude::*;

fn setup(lambda: f64) -> (OscillatorParams, Oscillator, OscillatorConstraints) {
    let p = OscillatorParams::isotropic(1.0, 1.0, lambda);
    (p, make_oscillator(&p).unwrap(), OscillatorConstraints::new(p).unwrap())
}

fn state_at(p: &OscillatorParams, m: &Oscillator, cbar: [f64; 8], t: f64) -> CanonicalState {
    canonical_from_jet(m, &analytic_qbar(p, cbar, t).unwrap().jet).unwrap()
}

const STABLE: [f64; 8] = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];

fn unstable_seed(amplitude: f64) -> [f64; 8] {
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, amplitude, 0.0]
}

#[test]
fn projected_run_stays_on_surface() {
    let (p, m, cs) = setup(1.0);
    let traj = integrate(&m, &state_at(&p, &m, STABLE, 0.0), &IntegrateOptions::projected(1e-3, 100_000, &cs)).unwrap();
    let rep = drift_report(&traj);
    assert!(!rep.diverged);
    assert!(rep.max_constraint_norm < 1e-8, "{rep:?}");
    assert!(rep.max_h_drift < 1e-6, "{rep:?}");
    assert!(rep.min_h >= -1e-10);
    let fit = growth_rate_fit(&traj, (0.0, 100.0)).unwrap();
    assert!(fit.slope.abs() < 1e-3, "{fit:?}");
}

#[test]
fn unstable_admixture_diverges() {
    let (p, m, _) = setup(1.0);
    let s0 = state_at(&p, &m, unstable_seed(1e-6), 0.0);
    let traj = integrate(&m, &s0, &IntegrateOptions::free(1e-3, 60_000)).unwrap();
    assert!(traj.diverged());
    assert!(*traj.times.last().unwrap() < 60.0);
    assert!(drift_report(&traj).diverged);
    let fit = growth_rate_fit(&traj, (0.0, 60.0)).unwrap();
    assert!((fit.slope - 3f64.sqrt() / 2.0).abs() < 0.01 * 3f64.sqrt() / 2.0, "{fit:?}");
}

#[test]
fn slower_transformation_grows_slower() {
    let (p, m, _) = setup(2.0);
    let s0 = state_at(&p, &m, unstable_seed(1e-6), 0.0);
    let traj = integrate(&m, &s0, &IntegrateOptions::free(1e-3, 120_000)).unwrap();
    let fit = growth_rate_fit(&traj, (0.0, 120.0)).unwrap();
    let want = 3f64.sqrt() / 4.0;
    assert!((fit.slope - want).abs() < 0.01 * want, "{fit:?}");
}

#[test]
fn zero_state_stays_zero() {
    let (_, m, cs) = setup(1.0);
    let z = CanonicalState::<f64>::zeros(2);
    let opts = IntegrateOptions { diagnostics: Some(&cs), ..IntegrateOptions::free(1e-3, 100) };
    for opts in [opts, IntegrateOptions::projected(1e-3, 100, &cs)] {
        let traj = integrate(&m, &z, &opts).unwrap();
        assert!(traj.states.iter().all(|s| s.max_abs() == 0.0));
        let rep = drift_report(&traj);
        assert_eq!((rep.max_h_drift, rep.max_constraint_norm, rep.min_h, rep.diverged), (0.0, 0.0, 0.0, false));
    }
}

#[test]
fn times_are_uniform_and_lengths_consistent() {
    let (p, m, cs) = setup(1.3);
    let traj = integrate(&m, &state_at(&p, &m, STABLE, 0.2), &IntegrateOptions::projected(0.01, 250, &cs)).unwrap();
    assert_eq!(traj.len(), 251);
    assert_eq!(traj.h_values.len(), 251);
    assert_eq!(traj.constraint_norms.len(), 251);
    for (i, t) in traj.times.iter().enumerate() {
        assert!((t - 0.01 * i as f64).abs() < 1e-12);
    }
    assert!(traj.metadata.projected && !traj.metadata.diverged);
}

#[test]
fn projection_interval_is_honoured() {
    let (p, m, cs) = setup(1.0);
    let s0 = state_at(&p, &m, [1.0, 0.2, 0.0, 0.0, 0.0, 0.0, 1e-4, 0.0], 0.0);
    let opts = IntegrateOptions { mode: Mode::Projected { constraints: &cs, every: 50, options: Default::default() }, ..IntegrateOptions::free(1e-3, 200) };
    let traj = integrate(&m, &s0, &opts).unwrap();
    assert!(traj.constraint_norms[0] < 1e-10);
    assert!(traj.constraint_norms.iter().step_by(50).all(|c| *c < 1e-10));
    assert!(integrate(&m, &s0, &IntegrateOptions { mode: Mode::Projected { constraints: &cs, every: 0, options: Default::default() }, ..opts }).is_err());
}

#[test]
fn rk4_global_error_is_fourth_order() {
    let (p, m, _) = setup(1.0);
    let s0 = state_at(&p, &m, [0.5, -0.3, 0.2, 0.4, 0.0, 0.0, 0.0, 0.0], 0.0);
    let want = state_at(&p, &m, [0.5, -0.3, 0.2, 0.4, 0.0, 0.0, 0.0, 0.0], 2.0);
    let err = |dt: f64| {
        let traj = integrate(&m, &s0, &IntegrateOptions::free(dt, (2.0 / dt).round() as usize)).unwrap();
        let last = traj.states.last().unwrap().to_vec();
        last.iter().zip(want.to_vec()).fold(0.0_f64, |e, (a, b)| e.max((a - b).abs()))
    };
    let e = [err(1e-2), err(5e-3), err(2.5e-3)];
    for w in e.windows(2) {
        let ratio = w[0] / w[1];
        assert!((8.0..32.0).contains(&ratio), "{e:?}");
    }
}

#[test]
fn backward_decay_matches_forward_growth() {
    for lambda in [1.0, 2.0] {
        let (p, m, _) = setup(lambda);
        let fwd = integrate(&m, &state_at(&p, &m, unstable_seed(1e-6), 0.0), &IntegrateOptions::free(1e-3, 120_000)).unwrap();
        let grow = growth_rate_fit(&fwd, (0.0, 120.0)).unwrap().slope;
        let bwd_opts = IntegrateOptions { reverse: true, ..IntegrateOptions::free(1e-3, 20_000) };
        let bwd = integrate(&m, &state_at(&p, &m, unstable_seed(1.0), 0.0), &bwd_opts).unwrap();
        assert!(bwd.times[1] < 0.0);
        let decay = growth_rate_fit(&bwd, (0.0, 20.0)).unwrap().slope;
        assert!(decay < 0.0);
        assert!((grow + decay).abs() < 0.02 * grow, "λ={lambda}: {grow} vs {decay}");
    }
}

#[test]
fn batch_matches_sequential() {
    let (p, m, cs) = setup(1.0);
    let starts: Vec<CanonicalState> = (0..6).map(|i| state_at(&p, &m, STABLE, 0.3 * i as f64)).collect();
    let opts = IntegrateOptions::projected(1e-3, 300, &cs);
    let batch = integrate_batch(&m, &starts, &opts);
    for (s, b) in starts.iter().zip(batch) {
        assert_eq!(integrate(&m, s, &opts).unwrap().states, b.unwrap().states);
    }
}

#[test]
fn csv_and_json_exports() {
    let (p, m, cs) = setup(1.0);
    let traj = integrate(&m, &state_at(&p, &m, STABLE, 0.0), &IntegrateOptions::projected(1e-2, 20, &cs)).unwrap();
    let mut csv = Vec::new();
    write_csv(&traj, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,Q1_1,Q1_2,Q2_1,Q2_2,P1_1,P1_2,P2_1,P2_2,H,phi_max");
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first.len(), 11);
    assert_eq!(first[1..9], traj.states[0].to_vec()[..]);
    assert_eq!(text.lines().count(), traj.len() + 1);

    let mut json = Vec::new();
    write_json(&traj, &mut json).unwrap();
    let back = read_json(json.as_slice()).unwrap();
    assert_eq!(back.states, traj.states);
    assert_eq!(back.times, traj.times);
    assert_eq!(back.h_values, traj.h_values);
    assert_eq!(back.metadata, traj.metadata);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn projected_hamiltonian_bounded_below(c in prop::array::uniform4(-1.0..1.0f64), lambda in 0.5..2.0f64,
                                           kick in prop::collection::vec(-1e-3..1e-3f64, 8)) {
        let (p, m, cs) = setup(lambda);
        let s0 = state_at(&p, &m, [c[0], c[1], c[2], c[3], 0.0, 0.0, 0.0, 0.0], 0.0);
        let s0 = CanonicalState::from_slice(&s0.to_vec().iter().zip(&kick).map(|(a, b)| a + b).collect::<Vec<_>>());
        let traj = integrate(&m, &s0, &IntegrateOptions::projected(1e-3, 5000, &cs)).unwrap();
        prop_assert!(traj.h_values.iter().all(|h| *h >= -1e-10));
    }
}
