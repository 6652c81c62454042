//! Fixed-step RK4 integration of the canonical equations, optional
//! projection onto a constraint set, and trajectory diagnostics.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{project, ConstraintSet, ProjectOptions};
use crate::dynamics::{canonical_rhs, hamiltonian, jet_rhs};
use crate::error::{Error, Result};
use crate::kinematics::{CanonicalState, Jet};
use crate::model::Model;

/// Max-norm above which a run is declared diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// One classical Runge–Kutta step of `ẋ = f(x)`.
///
/// Returns [`Error::Divergence`] (with `step = 0`; callers fill in the index)
/// if any stage produces a non-finite value.
pub fn step_rk4<F>(mut rhs: F, x: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let n = x.len();
    let mut eval = |y: &[f64]| -> Result<Vec<f64>> {
        let f = rhs(y)?;
        if f.len() != n {
            return Err(Error::dim("rhs", n, f.len()));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: 0 });
        }
        Ok(f)
    };
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(x, k)| x + a * k).collect() };
    let k1 = eval(x)?;
    let k2 = eval(&axpy(0.5 * dt, &k1))?;
    let k3 = eval(&axpy(0.5 * dt, &k2))?;
    let k4 = eval(&axpy(dt, &k3))?;
    let out: Vec<f64> =
        (0..n).map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { step: 0 });
    }
    Ok(out)
}

#[derive(Clone, Copy)]
pub enum Mode<'a> {
    Free,
    /// Project onto `constraints` before the first step and after every
    /// `every`-th step.
    Projected { constraints: &'a dyn ConstraintSet, every: usize, options: ProjectOptions },
}

impl<'a> Mode<'a> {
    pub fn projected(constraints: &'a dyn ConstraintSet) -> Self {
        Mode::Projected { constraints, every: 1, options: ProjectOptions::default() }
    }
}

#[derive(Clone, Copy)]
pub struct IntegrateOptions<'a> {
    pub dt: f64,
    pub steps: usize,
    pub mode: Mode<'a>,
    /// Constraints whose max residual is recorded in free mode. In projected
    /// mode the projection constraints are recorded.
    pub diagnostics: Option<&'a dyn ConstraintSet>,
    /// Integrate `−X_H`, i.e. run time backwards.
    pub reverse: bool,
}

impl<'a> IntegrateOptions<'a> {
    pub fn free(dt: f64, steps: usize) -> Self {
        Self { dt, steps, mode: Mode::Free, diagnostics: None, reverse: false }
    }

    pub fn projected(dt: f64, steps: usize, constraints: &'a dyn ConstraintSet) -> Self {
        Self { dt, steps, mode: Mode::projected(constraints), diagnostics: None, reverse: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub model: String,
    pub dt: f64,
    pub steps: usize,
    pub projected: bool,
    pub reverse: bool,
    pub diverged: bool,
}

/// Recorded states with `H` and the max constraint residual at each time.
///
/// `constraint_norms` is NaN where no constraint set was supplied. A
/// diverged run is truncated after the last finite state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CanonicalState>,
    pub h_values: Vec<f64>,
    pub constraint_norms: Vec<f64>,
    pub metadata: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn diverged(&self) -> bool {
        self.metadata.diverged
    }
}

pub fn integrate<M: Model>(model: &M, initial: &CanonicalState, opts: &IntegrateOptions) -> Result<Trajectory> {
    if !(opts.dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {}", opts.dt)));
    }
    initial.check(model.reduced_dim())?;
    let (projector, every) = match opts.mode {
        Mode::Free => (None, 0),
        Mode::Projected { constraints, every, options } => {
            if every == 0 {
                return Err(Error::InvalidParameter("projection interval must be at least 1".into()));
            }
            (Some((constraints, options)), every)
        }
    };
    let diag = projector.map(|(c, _)| c).or(opts.diagnostics);
    let sign = if opts.reverse { -1.0 } else { 1.0 };

    let mut x = initial.clone();
    if let Some((c, o)) = projector {
        x = project(c, &x, &o)?;
    }

    let cap = opts.steps + 1;
    let mut traj = Trajectory {
        times: Vec::with_capacity(cap),
        states: Vec::with_capacity(cap),
        h_values: Vec::with_capacity(cap),
        constraint_norms: Vec::with_capacity(cap),
        metadata: TrajectoryMeta {
            model: model.name().to_string(),
            dt: opts.dt,
            steps: opts.steps,
            projected: projector.is_some(),
            reverse: opts.reverse,
            diverged: false,
        },
    };
    let record = |traj: &mut Trajectory, step: usize, s: CanonicalState| -> Result<()> {
        traj.times.push(sign * step as f64 * opts.dt);
        traj.h_values.push(hamiltonian(model, &s)?);
        traj.constraint_norms.push(match diag {
            Some(c) => c.max_residual(&s)?,
            None => f64::NAN,
        });
        traj.states.push(s);
        Ok(())
    };
    record(&mut traj, 0, x.clone())?;

    let rhs = |v: &[f64]| -> Result<Vec<f64>> {
        let f = canonical_rhs(model, &CanonicalState::from_slice(v))?.to_vec();
        Ok(if opts.reverse { f.into_iter().map(|y| -y).collect() } else { f })
    };
    let mut v = x.to_vec();
    for step in 1..=opts.steps {
        v = match step_rk4(rhs, &v, opts.dt) {
            Ok(v) => v,
            Err(Error::Divergence { .. }) => {
                traj.metadata.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let mut s = CanonicalState::from_slice(&v);
        if let Some((c, o)) = projector {
            if step % every == 0 {
                s = project(c, &s, &o)?;
                v = s.to_vec();
            }
        }
        let big = s.max_abs() > DIVERGENCE_THRESHOLD;
        record(&mut traj, step, s)?;
        if big {
            traj.metadata.diverged = true;
            break;
        }
    }
    Ok(traj)
}

/// RK4 on the jet-space system `(q̄, q̄̇, q̄̈, q̄⃛)`, with `q̄⁽⁴⁾` solved from
/// the reduced equations at every stage. Returns `steps + 1` jets.
///
/// This integrates the higher-order equations directly and serves as the
/// reference for the canonical flow.
pub fn integrate_jet<M: Model>(model: &M, jet0: &Jet, dt: f64, steps: usize) -> Result<Vec<Jet>> {
    let mut v = jet0.to_vec();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(Jet::from_slice(&v));
    let rhs = |x: &[f64]| -> Result<Vec<f64>> { Ok(jet_rhs(model, &Jet::from_slice(x))?.to_vec()) };
    for step in 1..=steps {
        v = step_rk4(rhs, &v, dt).map_err(|e| match e {
            Error::Divergence { .. } => Error::Divergence { step },
            e => e,
        })?;
        out.push(Jet::from_slice(&v));
    }
    Ok(out)
}

/// Runs independent trajectories concurrently.
pub fn integrate_batch<M: Model>(
    model: &M,
    initials: &[CanonicalState],
    opts: &IntegrateOptions,
) -> Vec<Result<Trajectory>> {
    initials.par_iter().map(|s| integrate(model, s, opts)).collect()
}

/// Least-squares line fit `y ≈ slope·t + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn fit_line(t: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = t.len();
    if n < 3 || y.len() != n {
        return Err(Error::Fit(format!("need at least 3 matching points, got {n}")));
    }
    let nf = n as f64;
    let mt = t.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in t.iter().zip(y) {
        stt += (a - mt) * (a - mt);
        sty += (a - mt) * (b - my);
        syy += (b - my) * (b - my);
    }
    if stt == 0.0 {
        return Err(Error::Fit("window has zero width".into()));
    }
    let slope = sty / stt;
    let r2 = if syy == 0.0 { 1.0 } else { sty * sty / (stt * syy) };
    Ok(LineFit { slope, intercept: my - slope * mt, r2, points: n })
}

fn window<'a>(times: &'a [f64], values: &'a [f64], w: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = (w.0.min(w.1), w.0.max(w.1));
    times.iter().zip(values).filter(|(t, _)| **t >= lo && **t <= hi).map(|(t, v)| (*t, *v)).unzip()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Envelope {
    /// Fit `log y` against `t`; the slope is an exponential rate.
    Exponential,
    /// Fit `y` against `t`; the slope is a linear growth speed.
    Linear,
}

/// Fits an envelope model to `(times, values)` restricted to `window`.
pub fn envelope_fit(times: &[f64], values: &[f64], window_: (f64, f64), model: Envelope) -> Result<LineFit> {
    let (t, v) = window(times, values, window_);
    let y = match model {
        Envelope::Linear => v,
        Envelope::Exponential => {
            if let Some(bad) = v.iter().find(|x| !(**x > 0.0)) {
                return Err(Error::Fit(format!("non-positive value {bad} in exponential fit")));
            }
            v.iter().map(|x| x.ln()).collect()
        }
    };
    fit_line(&t, &y)
}

/// Slope of `log‖x(t)‖` over `window` (time values as recorded, so a
/// reversed run gives a negative slope for decay).
pub fn growth_rate_fit(traj: &Trajectory, window: (f64, f64)) -> Result<LineFit> {
    let norms: Vec<f64> = traj.states.iter().map(|s| s.norm()).collect();
    let times: Vec<f64> = traj.times.iter().map(|t| t.abs()).collect();
    envelope_fit(&times, &norms, window, Envelope::Exponential)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub max_h_drift: f64,
    /// Max over recorded steps; NaN when no constraints were recorded.
    pub max_constraint_norm: f64,
    pub min_h: f64,
    pub diverged: bool,
}

pub fn drift_report(traj: &Trajectory) -> DriftReport {
    let h0 = traj.h_values.first().copied().unwrap_or(0.0);
    let max_h_drift = traj.h_values.iter().fold(0.0_f64, |m, h| m.max((h - h0).abs()));
    let min_h = traj.h_values.iter().copied().fold(f64::INFINITY, f64::min);
    let recorded: Vec<f64> = traj.constraint_norms.iter().copied().filter(|x| !x.is_nan()).collect();
    let max_constraint_norm =
        if recorded.is_empty() { f64::NAN } else { recorded.iter().fold(0.0_f64, |m, x| m.max(*x)) };
    DriftReport {
        max_h_drift,
        max_constraint_norm,
        min_h: if min_h.is_finite() { min_h } else { 0.0 },
        diverged: traj.metadata.diverged,
    }
}

/// Column names of the CSV export for a system with `K` basic variables.
pub fn csv_header(k: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for block in ["Q1", "Q2", "P1", "P2"] {
        h.extend((1..=k).map(|i| format!("{block}_{i}")));
    }
    h.push("H".into());
    h.push("phi_max".into());
    h
}

/// CSV with columns `t, Q1_*, Q2_*, P1_*, P2_*, H, phi_max`; every value
/// carries 17 significant digits.
pub fn write_csv<W: Write>(traj: &Trajectory, mut w: W) -> std::io::Result<()> {
    let k = traj.states.first().map_or(0, |s| s.dim());
    writeln!(w, "{}", csv_header(k).join(","))?;
    for i in 0..traj.len() {
        let mut row = vec![traj.times[i]];
        row.extend(traj.states[i].to_vec());
        row.push(traj.h_values[i]);
        row.push(traj.constraint_norms[i]);
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    t: f64,
    #[serde(rename = "Q1")]
    q1: Vec<f64>,
    #[serde(rename = "Q2")]
    q2: Vec<f64>,
    #[serde(rename = "P1")]
    p1: Vec<f64>,
    #[serde(rename = "P2")]
    p2: Vec<f64>,
    #[serde(rename = "H")]
    h: f64,
    phi_max: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct JsonTrajectory {
    metadata: TrajectoryMeta,
    records: Vec<JsonRecord>,
}

/// JSON document `{"metadata": {...}, "records": [{t, Q1, Q2, P1, P2, H, phi_max}, ...]}`.
/// Floats are written in shortest round-trip form; a missing `phi_max` is `null`.
pub fn write_json<W: Write>(traj: &Trajectory, w: W) -> std::io::Result<()> {
    let doc = JsonTrajectory {
        metadata: traj.metadata.clone(),
        records: (0..traj.len())
            .map(|i| {
                let s = &traj.states[i];
                let phi = traj.constraint_norms[i];
                JsonRecord {
                    t: traj.times[i],
                    q1: s.q1.clone(),
                    q2: s.q2.clone(),
                    p1: s.p1.clone(),
                    p2: s.p2.clone(),
                    h: traj.h_values[i],
                    phi_max: if phi.is_nan() { None } else { Some(phi) },
                }
            })
            .collect(),
    };
    serde_json::to_writer_pretty(w, &doc).map_err(std::io::Error::other)
}

/// Inverse of [`write_json`].
pub fn read_json<R: std::io::Read>(r: R) -> std::io::Result<Trajectory> {
    let doc: JsonTrajectory = serde_json::from_reader(r).map_err(std::io::Error::other)?;
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        h_values: Vec::new(),
        constraint_norms: Vec::new(),
        metadata: doc.metadata,
    };
    for rec in doc.records {
        traj.times.push(rec.t);
        traj.states.push(CanonicalState::new(rec.q1, rec.q2, rec.p1, rec.p2));
        traj.h_values.push(rec.h);
        traj.constraint_norms.push(rec.phi_max.unwrap_or(f64::NAN));
    }
    Ok(traj)
}
