//! JSON material files.
//!
//! ```json
//! {"eps0": 1, "mu0": 1,
//!  "electric": [{"omega": 2, "coupling": 1, "damping": 0}],
//!  "magnetic": []}
//! ```
//!
//! With `"units": "si"`, `eps0`/`mu0` are in F/m and H/m and frequencies in
//! rad/s. They are normalized by the vacuum constants and by a reference
//! frequency: `"frequency_unit"` if given, else the largest
//! `sqrt(omega² + coupling²)`.

use serde_json::{Map, Value};
use thiserror::Error;

use crate::material::{MaterialError, MaterialSpec, Oscillator, EPS0_SI, MU0_SI};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFileError {
    #[error("invalid JSON: {0}")]
    Syntax(String),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Validation(#[from] MaterialError),
}

impl SpecFileError {
    pub fn code(&self) -> &'static str {
        match self {
            SpecFileError::Syntax(_) => "spec.syntax",
            SpecFileError::Schema { .. } => "spec.schema",
            SpecFileError::Validation(_) => "spec.validation",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Normalized,
    Si,
}

/// A parsed file: the normalized spec plus the scale it was brought to
/// (1 for normalized input).
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedSpec {
    pub spec: MaterialSpec,
    pub units: Units,
    /// rad/s per normalized frequency unit
    pub frequency_scale: f64,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> SpecFileError {
    SpecFileError::Schema { path: path.into(), message: message.into() }
}

fn number(obj: &Map<String, Value>, key: &str, path: &str) -> Result<f64, SpecFileError> {
    let p = if path.is_empty() { key.to_string() } else { format!("{path}.{key}") };
    match obj.get(key) {
        None => Err(schema(p, "missing field")),
        Some(v) => v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| schema(p, "expected a finite number")),
    }
}

fn reject_unknown(obj: &Map<String, Value>, allowed: &[&str], path: &str) -> Result<(), SpecFileError> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            let p = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
            return Err(schema(p, "unknown field"));
        }
    }
    Ok(())
}

struct RawOsc {
    omega: f64,
    coupling: f64,
    damping: f64,
}

fn oscillators(root: &Map<String, Value>, key: &str) -> Result<Vec<RawOsc>, SpecFileError> {
    let Some(v) = root.get(key) else {
        return Err(schema(key, "missing field"));
    };
    let list = v.as_array().ok_or_else(|| schema(key, "expected an array"))?;
    list.iter()
        .enumerate()
        .map(|(i, item)| {
            let path = format!("{key}[{i}]");
            let obj = item.as_object().ok_or_else(|| schema(path.clone(), "expected an object"))?;
            reject_unknown(obj, &["omega", "coupling", "damping"], &path)?;
            Ok(RawOsc {
                omega: number(obj, "omega", &path)?,
                coupling: number(obj, "coupling", &path)?,
                damping: number(obj, "damping", &path)?,
            })
        })
        .collect()
}

/// Parses and validates a material file.
pub fn parse_spec(text: &str) -> Result<ParsedSpec, SpecFileError> {
    let value: Value = serde_json::from_str(text).map_err(|e| SpecFileError::Syntax(e.to_string()))?;
    let root = value.as_object().ok_or_else(|| schema("$", "expected an object"))?;
    reject_unknown(root, &["eps0", "mu0", "electric", "magnetic", "units", "frequency_unit"], "")?;
    let units = match root.get("units") {
        None => Units::Normalized,
        Some(Value::String(s)) if s == "si" => Units::Si,
        Some(Value::String(s)) if s == "normalized" => Units::Normalized,
        Some(_) => return Err(schema("units", "expected \"si\" or \"normalized\"")),
    };
    let eps0 = number(root, "eps0", "")?;
    let mu0 = number(root, "mu0", "")?;
    let electric = oscillators(root, "electric")?;
    let magnetic = oscillators(root, "magnetic")?;
    let (scale, eps_unit, mu_unit) = match units {
        Units::Normalized => {
            if root.contains_key("frequency_unit") {
                return Err(schema("frequency_unit", "only allowed with \"units\": \"si\""));
            }
            (1.0, 1.0, 1.0)
        }
        Units::Si => {
            let scale = match root.get("frequency_unit") {
                Some(_) => {
                    let f = number(root, "frequency_unit", "")?;
                    if f <= 0.0 {
                        return Err(schema("frequency_unit", "must be positive"));
                    }
                    f
                }
                None => {
                    let m = electric
                        .iter()
                        .chain(&magnetic)
                        .map(|o| o.omega.hypot(o.coupling))
                        .fold(0.0, f64::max);
                    if m > 0.0 {
                        m
                    } else {
                        1.0
                    }
                }
            };
            (scale, EPS0_SI, MU0_SI)
        }
    };
    let conv = |list: Vec<RawOsc>| -> Vec<Oscillator> {
        list.into_iter().map(|o| Oscillator::new(o.coupling / scale, o.omega / scale, o.damping / scale)).collect()
    };
    let spec = MaterialSpec::new(eps0 / eps_unit, mu0 / mu_unit, conv(electric), conv(magnetic))?;
    Ok(ParsedSpec { spec, units, frequency_scale: scale })
}

/// Normalized JSON for a spec, readable by [`parse_spec`].
pub fn spec_to_json(spec: &MaterialSpec) -> Value {
    let list = |v: &[Oscillator]| -> Value {
        Value::Array(
            v.iter()
                .map(|o| serde_json::json!({"omega": o.resonance, "coupling": o.coupling, "damping": o.damping}))
                .collect(),
        )
    };
    serde_json::json!({
        "eps0": spec.eps0(),
        "mu0": spec.mu0(),
        "electric": list(spec.electric()),
        "magnetic": list(spec.magnetic()),
    })
}
