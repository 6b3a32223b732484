//! Flat `key = value` registration settings.
//!
//! A config file is a TOML document without tables. Command-line overrides use
//! the same keys as `key=value`; a value that is not valid TOML is taken as a
//! bare string, so `metric=ssd` and `metric="ssd"` are equivalent.

use std::path::Path;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::metric::raptor::IntensityRangePolicy;
use crate::optimizer::{MetricKind, RegistrationConfig};

/// Every recognised key, in documentation order.
pub const VALID_KEYS: &[&str] = &[
    "alpha",
    "c",
    "sigma",
    "metric",
    "num_bins",
    "patch_size",
    "patch_stride",
    "min_variance",
    "intensity_range",
    "trunc_dims",
    "num_time_steps",
    "pyramid_levels",
    "max_iterations",
    "step_size",
    "momentum_coefficient",
    "convergence_tolerance",
    "regularizer_weight",
    "backtracking",
];

fn unknown_key(key: &str) -> Error {
    Error::Config(format!("unknown key '{key}'; valid keys: {}", VALID_KEYS.join(", ")))
}

fn type_error(key: &str, expected: &str, value: &Value) -> Error {
    Error::Config(format!("'{key}' expects {expected}, got {value}"))
}

fn float(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(type_error(key, "a number", other)),
    }
}

fn uint(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        other => Err(type_error(key, "a non-negative integer", other)),
    }
}

fn uint_list(key: &str, v: &Value) -> Result<Vec<usize>> {
    match v {
        Value::Array(items) => items.iter().map(|x| uint(key, x)).collect(),
        other => Ok(vec![uint(key, other)?]),
    }
}

fn string<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| type_error(key, "a string", v))
}

/// Applies one setting to `cfg`.
pub fn apply_setting(cfg: &mut RegistrationConfig, key: &str, v: &Value) -> Result<()> {
    match key {
        "alpha" => cfg.alpha = float(key, v)?,
        "c" => cfg.c = u32::try_from(uint(key, v)?).map_err(|_| type_error(key, "a small integer", v))?,
        "sigma" => cfg.sigma = float(key, v)?,
        "metric" => cfg.metric = MetricKind::parse(string(key, v)?)?,
        "num_bins" => cfg.raptor.num_bins = uint(key, v)?,
        "patch_size" => cfg.raptor.patch_size = uint(key, v)?,
        "patch_stride" => cfg.raptor.patch_stride = uint(key, v)?,
        "min_variance" => cfg.raptor.min_variance = float(key, v)?,
        "intensity_range" => {
            cfg.raptor.intensity_range_policy = match v {
                Value::String(s) if s == "volume" => IntensityRangePolicy::VolumeMinMax,
                Value::Array(a) if a.len() == 2 => {
                    IntensityRangePolicy::Fixed { min: float(key, &a[0])?, max: float(key, &a[1])? }
                }
                other => return Err(type_error(key, "\"volume\" or [min, max]", other)),
            }
        }
        "trunc_dims" => {
            let t = uint_list(key, v)?;
            cfg.trunc_dims = match t.as_slice() {
                [n] => [*n; 3],
                [a, b, c] => [*a, *b, *c],
                _ => return Err(type_error(key, "one or three integers", v)),
            };
        }
        "num_time_steps" => cfg.num_time_steps = uint(key, v)?,
        "pyramid_levels" => cfg.pyramid_levels = uint_list(key, v)?,
        "max_iterations" => cfg.max_iterations = uint_list(key, v)?,
        "step_size" => cfg.step_size = float(key, v)?,
        "momentum_coefficient" => cfg.momentum_coefficient = float(key, v)?,
        "convergence_tolerance" => cfg.convergence_tolerance = float(key, v)?,
        "regularizer_weight" => cfg.regularizer_weight = Some(float(key, v)?),
        "backtracking" => cfg.backtracking = v.as_bool().ok_or_else(|| type_error(key, "true or false", v))?,
        other => return Err(unknown_key(other)),
    }
    Ok(())
}

/// Applies every entry of a parsed document.
pub fn apply_table(cfg: &mut RegistrationConfig, table: &Table) -> Result<()> {
    for (key, value) in table {
        apply_setting(cfg, key, value)?;
    }
    Ok(())
}

/// Parses a config document on top of the defaults and validates the result.
pub fn parse_config(text: &str) -> Result<RegistrationConfig> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let mut cfg = RegistrationConfig::default();
    apply_table(&mut cfg, &table)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RegistrationConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Applies a `key=value` override.
pub fn apply_override(cfg: &mut RegistrationConfig, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    apply_setting(cfg, key, &value)
}

/// The effective settings as a flat table, suitable for echoing into reports.
pub fn to_table(cfg: &RegistrationConfig) -> Table {
    let ints = |v: &[usize]| Value::Array(v.iter().map(|&x| Value::Integer(x as i64)).collect());
    let mut t = Table::new();
    t.insert("alpha".into(), cfg.alpha.into());
    t.insert("c".into(), Value::Integer(cfg.c as i64));
    t.insert("sigma".into(), cfg.sigma.into());
    t.insert("metric".into(), cfg.metric.as_str().into());
    t.insert("num_bins".into(), Value::Integer(cfg.raptor.num_bins as i64));
    t.insert("patch_size".into(), Value::Integer(cfg.raptor.patch_size as i64));
    t.insert("patch_stride".into(), Value::Integer(cfg.raptor.patch_stride as i64));
    t.insert("min_variance".into(), cfg.raptor.min_variance.into());
    t.insert(
        "intensity_range".into(),
        match cfg.raptor.intensity_range_policy {
            IntensityRangePolicy::VolumeMinMax => "volume".into(),
            IntensityRangePolicy::Fixed { min, max } => Value::Array(vec![min.into(), max.into()]),
        },
    );
    t.insert("trunc_dims".into(), ints(&cfg.trunc_dims));
    t.insert("num_time_steps".into(), Value::Integer(cfg.num_time_steps as i64));
    t.insert("pyramid_levels".into(), ints(&cfg.pyramid_levels));
    t.insert("max_iterations".into(), ints(&cfg.max_iterations));
    t.insert("step_size".into(), cfg.step_size.into());
    t.insert("momentum_coefficient".into(), cfg.momentum_coefficient.into());
    t.insert("convergence_tolerance".into(), cfg.convergence_tolerance.into());
    t.insert("regularizer_weight".into(), cfg.effective_regularizer_weight().into());
    t.insert("backtracking".into(), cfg.backtracking.into());
    t
}
