use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ostrogradsky::constraints::{build_constraint_chain, probe_states, ConstraintSet};
use ostrogradsky::dynamics::hamiltonian;
use ostrogradsky::error::Error;
use ostrogradsky::gravwave::make_mode_model;
use ostrogradsky::integrate::{
    drift_report, integrate_batch, write_csv, write_json, IntegrateOptions, Mode, Trajectory,
};
use ostrogradsky::kinematics::{canonical_from_jet, momenta, CanonicalState, Jet};
use ostrogradsky::model::Model;
use ostrogradsky::oscillator::{analytic_qbar, make_oscillator, OscillatorConstraints};
use ostrogradsky::registry::{list_models as models, BuiltinModel};
use ostrogradsky::verify::{verify_builtin, VerifyOptions};
use serde_json::json;

use crate::config::{load_config, parse_vector, pick, pick_enum, resolve_model, Format, RunConfig, RunMode};
use crate::{CliError, DeriveArgs, IntegrateArgs, VerifyArgs};

/// `println!` that tolerates a closed pipe (`| head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Binds `$m` to the concrete model and `$cs` to its constraint set, then
/// evaluates `$body` once per model type.
macro_rules! with_model {
    ($builtin:expr, $seed:expr, |$m:ident, $cs:ident| $body:expr) => {
        match $builtin {
            BuiltinModel::Oscillator(p) => {
                let $m = make_oscillator(&p).map_err(CliError::usage)?;
                if p.is_isotropic() {
                    let set = OscillatorConstraints::new(p).map_err(CliError::usage)?;
                    let $cs: &dyn ConstraintSet = &set;
                    $body
                } else {
                    // no closed-form constraints: fall back to the derived chain
                    let chain = build_constraint_chain(&$m, 6, &probe_states(2, 24, $seed)).map_err(CliError::numeric)?;
                    let bound = chain.bind(&$m);
                    let $cs: &dyn ConstraintSet = &bound;
                    $body
                }
            }
            BuiltinModel::GravwaveMode(p) => {
                let ($m, set) = make_mode_model(&p).map_err(CliError::usage)?;
                let $cs: &dyn ConstraintSet = &set;
                $body
            }
        }
    };
}

fn expect_len(v: Vec<f64>, n: usize, what: &str) -> Result<Vec<f64>, CliError> {
    if v.len() != n {
        return Err(CliError::usage(format!("{what} needs {n} numbers, got {}", v.len())));
    }
    Ok(v)
}

fn numeric(e: Error) -> CliError {
    match e {
        Error::Dimension { .. } | Error::InvalidParameter(_) | Error::Missing(_) => CliError::usage(e),
        _ => CliError::numeric(e),
    }
}

pub fn derive(a: &DeriveArgs) -> Result<u8, CliError> {
    let cfg = load_config(a.model.config.as_deref())?;
    let builtin = resolve_model(&a.model, &cfg)?;
    let k = builtin.reduced_dim();
    let jet = match &a.jet {
        Some(text) => Some(Jet::from_slice(&expect_len(parse_vector(text)?, 4 * k, "--jet")?)),
        None => None,
    };
    let state = match &a.state {
        Some(text) => Some(CanonicalState::from_slice(&expect_len(parse_vector(text)?, 4 * k, "--state")?)),
        None => None,
    };
    let report = with_model!(builtin, a.seed, |m, _cs| derive_report(&m, &builtin, state, jet, a.seed, a.max_level)?);
    out!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(0)
}

fn derive_report<M: Model>(
    m: &M,
    builtin: &BuiltinModel,
    state: Option<CanonicalState>,
    jet: Option<Jet>,
    seed: u64,
    max_level: usize,
) -> Result<serde_json::Value, CliError> {
    let k = m.reduced_dim();
    let state = match (&jet, state) {
        (Some(j), _) => canonical_from_jet(m, j).map_err(numeric)?,
        (None, Some(s)) => s,
        (None, None) => CanonicalState::zeros(k),
    };
    if let Some(j) = &jet {
        // momenta straight from the jet; equal to the state's by construction
        let (p1, p2) = momenta(m, j).map_err(numeric)?;
        debug_assert_eq!((p1, p2), (state.p1.clone(), state.p2.clone()));
    }
    let h = hamiltonian(m, &state).map_err(numeric)?;
    let chain = build_constraint_chain(m, max_level, &probe_states(k, 8 * k + 8, seed)).map_err(numeric)?;
    let bound = chain.bind(m);
    let values = bound.values(&state).map_err(numeric)?;
    let constraints: Vec<_> = chain
        .active
        .iter()
        .zip(values)
        .map(|(id, v)| json!({"level": id.level, "component": id.component, "value": v}))
        .collect();
    Ok(json!({
        "model": builtin.name(),
        "params": builtin.params(),
        "state": {"Q1": state.q1, "Q2": state.q2, "P1": state.p1, "P2": state.p2},
        "P1": state.p1,
        "P2": state.p2,
        "H": h,
        "constraints": constraints,
        "chain": {
            "level": chain.closure.level,
            "closed": chain.closure.closed,
            "coefficients": chain.closure.combination_coefficients,
            "active": chain.active.iter().map(|id| format!("phi{}_{}", id.level, id.component)).collect::<Vec<_>>(),
        },
    }))
}

fn run_config(a: &IntegrateArgs) -> Result<RunConfig, CliError> {
    let cfg = load_config(a.model.config.as_deref())?;
    let model = resolve_model(&a.model, &cfg)?;
    let dt: f64 = pick(a.dt, &cfg, "dt", 1e-3)?;
    let steps: usize = pick(a.steps, &cfg, "steps", 1000)?;
    let projection_every: usize = pick(a.projection_every, &cfg, "projection_every", 1)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CliError::usage(format!("dt must be positive, got {dt}")));
    }
    if steps == 0 {
        return Err(CliError::usage("steps must be at least 1"));
    }
    if projection_every == 0 {
        return Err(CliError::usage("projection-every must be at least 1"));
    }
    let initial = match (&a.initial, cfg.get("initial")) {
        (Some(t), _) | (None, Some(t)) => Some(parse_vector(t)?),
        (None, None) => None,
    };
    Ok(RunConfig {
        model,
        dt,
        steps,
        mode: pick_enum(a.mode, &cfg, "mode", RunMode::Free)?,
        projection_every,
        output: a.output.clone().or_else(|| cfg.get("output").map(PathBuf::from)),
        format: pick_enum(a.format, &cfg, "format", Format::Csv)?,
        seed: pick(a.seed, &cfg, "seed", 0)?,
        initial,
        reverse: a.reverse || pick(None, &cfg, "reverse", false)?,
    })
}

fn initial_states<M: Model>(m: &M, rc: &RunConfig, a: &IntegrateArgs) -> Result<Vec<CanonicalState>, CliError> {
    let k = m.reduced_dim();
    if let Some(path) = &a.batch {
        let f = File::open(path).map_err(|e| CliError::io(format!("reading {}: {e}", path.display())))?;
        let mut out = Vec::new();
        for line in BufReader::new(f).lines() {
            let line = line.map_err(|e| CliError::io(format!("reading {}: {e}", path.display())))?;
            let body = line.split('#').next().unwrap_or("").trim();
            if !body.is_empty() {
                out.push(CanonicalState::from_slice(&expect_len(parse_vector(body)?, 4 * k, "batch line")?));
            }
        }
        if out.is_empty() {
            return Err(CliError::usage(format!("{} holds no initial states", path.display())));
        }
        return Ok(out);
    }
    if let Some(text) = &a.modes {
        let BuiltinModel::Oscillator(p) = rc.model else {
            return Err(CliError::usage("--modes is only available for the oscillator"));
        };
        let c: [f64; 8] = expect_len(parse_vector(text)?, 8, "--modes")?.try_into().expect("length checked");
        let sol = analytic_qbar(&p, c, 0.0).map_err(CliError::usage)?;
        return Ok(vec![canonical_from_jet(m, &sol.jet).map_err(numeric)?]);
    }
    if let Some(v) = &rc.initial {
        return Ok(vec![CanonicalState::from_slice(&expect_len(v.clone(), 4 * k, "--initial")?)]);
    }
    Ok(probe_states(k, 1, rc.seed))
}

fn write_trajectory(traj: &Trajectory, format: Format, path: Option<&Path>) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::io(format!("writing trajectory: {e}"));
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::io(format!("creating {}: {e}", p.display())))?;
            let mut w = BufWriter::new(f);
            match format {
                Format::Csv => write_csv(traj, &mut w).map_err(io)?,
                Format::Json => write_json(traj, &mut w).map_err(io)?,
            }
            w.flush().map_err(io)
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            match format {
                Format::Csv => write_csv(traj, &mut w).map_err(io)?,
                Format::Json => write_json(traj, &mut w).map_err(io)?,
            }
            w.flush().map_err(io)
        }
    }
}

fn indexed_path(base: &Path, i: usize, format: Format) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    base.with_file_name(format!("{stem}_{i}.{ext}"))
}

fn summarize(label: &str, traj: &Trajectory) {
    let r = drift_report(traj);
    eprintln!(
        "{label}: {} steps to t = {}, max |ΔH| {:e}, max φ {:e}, min H {:e}, diverged {}",
        traj.len().saturating_sub(1),
        traj.times.last().copied().unwrap_or(0.0),
        r.max_h_drift,
        r.max_constraint_norm,
        r.min_h,
        r.diverged
    );
}

fn run_integrate<M: Model>(m: &M, cs: &dyn ConstraintSet, rc: &RunConfig, a: &IntegrateArgs) -> Result<u8, CliError> {
    let starts = initial_states(m, rc, a)?;
    let mode = match rc.mode {
        RunMode::Free => Mode::Free,
        RunMode::Projected => Mode::Projected { constraints: cs, every: rc.projection_every, options: Default::default() },
    };
    let opts = IntegrateOptions { dt: rc.dt, steps: rc.steps, mode, diagnostics: Some(cs), reverse: rc.reverse };
    if a.batch.is_some() && rc.output.is_none() {
        return Err(CliError::usage("--batch needs --output to name the per-run files"));
    }
    let results = integrate_batch(m, &starts, &opts);
    let mut diverged = false;
    for (i, res) in results.into_iter().enumerate() {
        let traj = res.map_err(numeric)?;
        let path = match (&rc.output, a.batch.is_some()) {
            (Some(p), true) => Some(indexed_path(p, i, rc.format)),
            (p, false) => p.clone(),
            (None, true) => unreachable!("checked above"),
        };
        write_trajectory(&traj, rc.format, path.as_deref())?;
        summarize(&path.map(|p| p.display().to_string()).unwrap_or_else(|| "stdout".into()), &traj);
        diverged |= traj.diverged();
    }
    if diverged {
        eprintln!("error: integration diverged (max-norm above 1e12 or non-finite state)");
        return Ok(3);
    }
    Ok(0)
}

pub fn integrate(a: &IntegrateArgs) -> Result<u8, CliError> {
    let rc = run_config(a)?;
    with_model!(rc.model, rc.seed, |m, cs| run_integrate(&m, cs, &rc, a))
}

pub fn verify(a: &VerifyArgs) -> Result<u8, CliError> {
    let cfg = load_config(a.model.config.as_deref())?;
    let builtin = resolve_model(&a.model, &cfg)?;
    let opts = VerifyOptions {
        seed: a.seed,
        samples: a.samples.max(1),
        potential_gradient_factor: a.corrupt_potential_gradient.unwrap_or(1.0),
    };
    let checks = verify_builtin(&builtin, &opts).map_err(numeric)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if a.json {
        out!("{}", serde_json::to_string_pretty(&checks).expect("checks serialize"));
    } else {
        for c in &checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            out!("[{tag}] {:<28} {:>12.3e}  (limit {:.0e})", c.name, c.value, c.tolerance);
        }
        out!("{}: {} of {} checks passed", builtin.name(), checks.len() - failed, checks.len());
    }
    Ok(if failed == 0 { 0 } else { 1 })
}

pub fn list_models(as_json: bool) -> Result<u8, CliError> {
    let list = models();
    if as_json {
        out!("{}", serde_json::to_string_pretty(&list).expect("models serialize"));
        return Ok(0);
    }
    for m in list {
        out!("{}  (K = {})  {}", m.name, m.reduced_dim, m.summary);
        for p in m.params {
            out!("    {:<8} default {:<6} {}", p.key, p.default, p.description);
        }
    }
    Ok(0)
}
