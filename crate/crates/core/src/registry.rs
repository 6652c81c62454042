//! Built-in models by name, and the flat `key = value` config format.
//!
//! Config files hold one `key = value` pair per line; `#` starts a comment
//! and blank lines are ignored. Model parameters use the keys `model`, `m`,
//! `h` (all three spring constants), `h1`, `h2`, `h3`, `lambda`, `c` and `k`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gravwave::ModeParams;
use crate::oscillator::OscillatorParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum BuiltinModel {
    Oscillator(OscillatorParams),
    GravwaveMode(ModeParams),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamInfo {
    pub key: &'static str,
    pub default: f64,
    pub description: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub reduced_dim: usize,
    pub params: Vec<ParamInfo>,
}

pub fn list_models() -> Vec<ModelInfo> {
    let p = |key, default, description| ParamInfo { key, default, description };
    vec![
        ModelInfo {
            name: "oscillator",
            summary: "3-d harmonic oscillator seen through q = (q̄₁ + λq̄̇₂, q̄₂, λq̄̇₁)",
            reduced_dim: 2,
            params: vec![
                p("m", 1.0, "mass"),
                p("h1", 1.0, "spring constant along q₁ (h sets all three)"),
                p("h2", 1.0, "spring constant along q₂"),
                p("h3", 1.0, "spring constant along q₃"),
                p("lambda", 1.0, "time constant of the transformation, nonzero"),
            ],
        },
        ModelInfo {
            name: "gravwave-mode",
            summary: "single transverse mode of □□h = 0",
            reduced_dim: 1,
            params: vec![p("c", 1.0, "wave speed, positive"), p("k", 2.0, "wavenumber, non-negative")],
        },
    ]
}

impl BuiltinModel {
    pub fn name(&self) -> &'static str {
        match self {
            BuiltinModel::Oscillator(_) => "oscillator",
            BuiltinModel::GravwaveMode(_) => "gravwave-mode",
        }
    }

    pub fn reduced_dim(&self) -> usize {
        match self {
            BuiltinModel::Oscillator(_) => 2,
            BuiltinModel::GravwaveMode(_) => 1,
        }
    }

    /// Looks up `name` and applies `params` over the defaults. Unknown
    /// names and keys are errors.
    pub fn from_params(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let model = match name {
            "oscillator" => {
                let mut p = OscillatorParams::default();
                for (key, v) in params {
                    match key.as_str() {
                        "m" => p.m = *v,
                        "h" => p.h = [*v; 3],
                        "lambda" => p.lambda = *v,
                        _ => {}
                    }
                }
                // individual constants override the shorthand
                for (key, v) in params {
                    match key.as_str() {
                        "h1" => p.h[0] = *v,
                        "h2" => p.h[1] = *v,
                        "h3" => p.h[2] = *v,
                        "m" | "h" | "lambda" => {}
                        other => return Err(unknown_param(name, other)),
                    }
                }
                p.validate()?;
                BuiltinModel::Oscillator(p)
            }
            "gravwave-mode" => {
                let mut p = ModeParams::default();
                for (key, v) in params {
                    match key.as_str() {
                        "c" => p.c = *v,
                        "k" => p.k = *v,
                        other => return Err(unknown_param(name, other)),
                    }
                }
                p.validate()?;
                BuiltinModel::GravwaveMode(p)
            }
            other => {
                let names: Vec<&str> = list_models().iter().map(|m| m.name).collect();
                return Err(Error::InvalidParameter(format!("unknown model `{other}` (known: {})", names.join(", "))));
            }
        };
        Ok(model)
    }

    /// Current parameter values, keyed as in [`list_models`].
    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        match self {
            BuiltinModel::Oscillator(p) => {
                out.insert("m".into(), p.m);
                out.insert("h1".into(), p.h[0]);
                out.insert("h2".into(), p.h[1]);
                out.insert("h3".into(), p.h[2]);
                out.insert("lambda".into(), p.lambda);
            }
            BuiltinModel::GravwaveMode(p) => {
                out.insert("c".into(), p.c);
                out.insert("k".into(), p.k);
            }
        }
        out
    }
}

fn unknown_param(model: &str, key: &str) -> Error {
    Error::InvalidParameter(format!("model `{model}` has no parameter `{key}`"))
}

/// Parses `key = value` lines. Later duplicates override earlier ones.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::InvalidParameter(format!("config line {}: expected `key = value`, got `{}`", n + 1, raw.trim())));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::InvalidParameter(format!("config line {}: empty key", n + 1)));
        }
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

/// Keys of [`parse_config`] output that are model parameters.
pub const MODEL_PARAM_KEYS: [&str; 8] = ["m", "h", "h1", "h2", "h3", "lambda", "c", "k"];

pub fn parse_number(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|_| Error::InvalidParameter(format!("`{key}` must be a number, got `{v}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let c = parse_config("# sweep\nmodel = oscillator\n\nlambda=2 # slower\n").unwrap();
        assert_eq!(c["model"], "oscillator");
        assert_eq!(c["lambda"], "2");
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn rejects_malformed_line() {
        assert!(parse_config("lambda 2").is_err());
    }

    #[test]
    fn shorthand_and_override() {
        let mut p = BTreeMap::new();
        p.insert("h".to_string(), 2.0);
        p.insert("h3".to_string(), 5.0);
        let BuiltinModel::Oscillator(o) = BuiltinModel::from_params("oscillator", &p).unwrap() else { panic!() };
        assert_eq!(o.h, [2.0, 2.0, 5.0]);
    }

    #[test]
    fn unknown_names_are_errors() {
        assert!(BuiltinModel::from_params("pendulum", &BTreeMap::new()).is_err());
        let mut p = BTreeMap::new();
        p.insert("lambda".to_string(), 1.0);
        assert!(BuiltinModel::from_params("gravwave-mode", &p).is_err());
        p.clear();
        p.insert("lambda".to_string(), 0.0);
        assert!(BuiltinModel::from_params("oscillator", &p).is_err());
    }
}
