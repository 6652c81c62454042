//! Merges the optional config file with command-line flags. Flags win.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ostrogradsky::registry::{parse_config, parse_number, BuiltinModel, MODEL_PARAM_KEYS};

use crate::{CliError, ModelArgs};

pub const RUN_KEYS: [&str; 10] =
    ["model", "dt", "steps", "mode", "projection_every", "output", "format", "seed", "initial", "reverse"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum RunMode {
    Free,
    Projected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Everything `integrate` needs, after merging.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: BuiltinModel,
    pub dt: f64,
    pub steps: usize,
    pub mode: RunMode,
    pub projection_every: usize,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub initial: Option<Vec<f64>>,
    pub reverse: bool,
}

/// Key-value pairs from `--config`, if given.
pub fn load_config(path: Option<&Path>) -> Result<BTreeMap<String, String>, CliError> {
    let Some(path) = path else { return Ok(BTreeMap::new()) };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}: {e}", path.display())))?;
    let cfg = parse_config(&text).map_err(CliError::usage)?;
    for key in cfg.keys() {
        let k = key.replace('-', "_");
        if !RUN_KEYS.contains(&k.as_str()) && !MODEL_PARAM_KEYS.contains(&k.as_str()) {
            return Err(CliError::usage(format!("{}: unknown key `{key}`", path.display())));
        }
    }
    Ok(cfg.into_iter().map(|(k, v)| (k.replace('-', "_"), v)).collect())
}

/// Resolves the model from `--model`/`--param` over the config file.
pub fn resolve_model(args: &ModelArgs, cfg: &BTreeMap<String, String>) -> Result<BuiltinModel, CliError> {
    let name = args.model.clone().or_else(|| cfg.get("model").cloned()).unwrap_or_else(|| "oscillator".into());
    let mut params = BTreeMap::new();
    for key in MODEL_PARAM_KEYS {
        if let Some(v) = cfg.get(key) {
            params.insert(key.to_string(), parse_number(key, v).map_err(CliError::usage)?);
        }
    }
    for kv in &args.param {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(CliError::usage(format!("--param expects key=value, got `{kv}`")));
        };
        let k = k.trim();
        params.insert(k.to_string(), parse_number(k, v.trim()).map_err(CliError::usage)?);
    }
    BuiltinModel::from_params(&name, &params).map_err(CliError::usage)
}

/// Parses a list of numbers separated by commas and/or whitespace.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| CliError::usage(format!("not a number: `{s}`"))))
        .collect()
}

pub fn pick<T: std::str::FromStr>(
    flag: Option<T>,
    cfg: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match cfg.get(key) {
        Some(text) => text.parse().map_err(|_| CliError::usage(format!("config `{key}`: cannot parse `{text}`"))),
        None => Ok(default),
    }
}

pub fn pick_enum<T: clap::ValueEnum>(
    flag: Option<T>,
    cfg: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match cfg.get(key) {
        Some(text) => T::from_str(text, true).map_err(|_| CliError::usage(format!("config `{key}`: unknown value `{text}`"))),
        None => Ok(default),
    }
}
