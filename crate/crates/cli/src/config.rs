//! Loading of JSON run configurations.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Reads a config file into a JSON value; `None` yields an empty object.
pub fn read_value(path: Option<&Path>) -> CliResult<Value> {
    let Some(path) = path else {
        return Ok(Value::Object(Default::default()));
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Deserializes with the offending field path in the error.
pub fn from_value<T: DeserializeOwned>(v: Value, source: &str) -> CliResult<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        match unit_suffix_hint(&inner) {
            Some(h) => CliError::config(format!("{source}: at `{path}`: {h}")),
            None => CliError::config(format!("{source}: at `{path}`: {inner}")),
        }
    })
}

/// Turns "unknown field `dt_ms`, expected one of `dt_s`, ..." into a unit
/// hint when a known field shares the name stem.
fn unit_suffix_hint(msg: &str) -> Option<String> {
    let rest = msg.strip_prefix("unknown field `")?;
    let (given, rest) = rest.split_once('`')?;
    let expected: Vec<&str> = rest.split('`').skip(1).step_by(2).collect();
    let (stem, suffix) = given.rsplit_once('_')?;
    let hit = expected
        .iter()
        .find(|c| c.rsplit_once('_').is_some_and(|(s, x)| s == stem && x != suffix))?;
    Some(format!(
        "unit-suffix mismatch: field `{given}` is not accepted, expected `{hit}` (units are part of the field name)"
    ))
}

pub fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

/// A sampled coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Axis {
    Linear { start: f64, stop: f64, points: usize },
    Log { start: f64, stop: f64, points: usize },
    Values(Vec<f64>),
}

impl Axis {
    pub fn values(&self, field: &str) -> CliResult<Vec<f64>> {
        let bad = |m: &str| CliError::config(format!("`{field}`: {m}"));
        let v = match *self {
            Axis::Values(ref v) => v.clone(),
            Axis::Linear { start, stop, points } | Axis::Log { start, stop, points } => {
                if points == 0 {
                    return Err(bad("points must be >= 1"));
                }
                let log = matches!(self, Axis::Log { .. });
                if log && !(start > 0.0 && stop > 0.0) {
                    return Err(bad("log axis needs positive start and stop"));
                }
                (0..points)
                    .map(|i| {
                        let u = if points == 1 { 0.0 } else { i as f64 / (points - 1) as f64 };
                        if log {
                            start * (stop / start).powf(u)
                        } else {
                            start + (stop - start) * u
                        }
                    })
                    .collect()
            }
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(bad("values must be finite and non-empty"));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffix_hint() {
        let m = "unknown field `dt_ms`, expected one of `n_samples`, `dt_s`, `seed`";
        let h = unit_suffix_hint(m).unwrap();
        assert!(h.contains("`dt_s`"), "{h}");
        assert!(unit_suffix_hint("unknown field `foo`, expected `bar`").is_none());
    }

    #[test]
    fn axes() {
        let a = Axis::Linear {
            start: 0.0,
            stop: 1.0,
            points: 3,
        };
        assert_eq!(a.values("x").unwrap(), vec![0.0, 0.5, 1.0]);
        let l = Axis::Log {
            start: 1.0,
            stop: 100.0,
            points: 3,
        };
        let v = l.values("x").unwrap();
        assert!((v[1] - 10.0).abs() < 1e-12);
        assert!(Axis::Values(vec![]).values("x").is_err());
    }
}
