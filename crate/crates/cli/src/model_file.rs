//! Model files: TOML or JSON with `[constants]`, `[coefficients]` and `[dark_pool]`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use singular_hjb::model::{CoefficientField, DarkPoolAtom, DarkPoolMeasure, ModelSpec};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub constants: Constants,
    pub coefficients: Coefficients,
    #[serde(default)]
    pub dark_pool: DarkPool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    pub horizon: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    #[serde(default = "zero")]
    pub drift: CoefficientField,
    #[serde(default = "zero")]
    pub sigma: CoefficientField,
    pub sigma_bar: CoefficientField,
    pub eta: CoefficientField,
    pub lambda: CoefficientField,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarkPool {
    #[serde(default)]
    pub atoms: Vec<DarkPoolAtom>,
}

fn zero() -> CoefficientField {
    CoefficientField::constant(0.0)
}

impl From<ModelFile> for ModelSpec {
    fn from(m: ModelFile) -> Self {
        ModelSpec {
            drift: m.coefficients.drift,
            sigma: m.coefficients.sigma,
            sigma_bar: m.coefficients.sigma_bar,
            eta: m.coefficients.eta,
            lambda: m.coefficients.lambda,
            dark_pool: DarkPoolMeasure { atoms: m.dark_pool.atoms },
            horizon: m.constants.horizon,
        }
    }
}

impl From<&ModelSpec> for ModelFile {
    fn from(s: &ModelSpec) -> Self {
        ModelFile {
            constants: Constants { horizon: s.horizon },
            coefficients: Coefficients {
                drift: s.drift.clone(),
                sigma: s.sigma.clone(),
                sigma_bar: s.sigma_bar.clone(),
                eta: s.eta.clone(),
                lambda: s.lambda.clone(),
            },
            dark_pool: DarkPool { atoms: s.dark_pool.atoms.clone() },
        }
    }
}

/// Parses by extension: `.json` as JSON, anything else as TOML.
pub fn parse_model(text: &str, json: bool) -> Result<ModelSpec> {
    let file: ModelFile = if json {
        serde_json::from_str(text).context("parsing JSON model")?
    } else {
        toml::from_str(text).context("parsing TOML model")?
    };
    Ok(file.into())
}

pub fn load_model(path: &Path) -> Result<ModelSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading model file {}", path.display()))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let spec = parse_model(&text, json).with_context(|| format!("in {}", path.display()))?;
    if !spec.horizon.is_finite() || spec.horizon <= 0.0 {
        bail!("horizon must be positive and finite, got {}", spec.horizon);
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML_MODEL: &str = r#"
[constants]
horizon = 1.0

[coefficients]
sigma_bar = { family = "constant", value = 1.0 }
eta = { family = "tanh_affine", base = 1.0, amplitude = 0.2, slope = 1.0 }
lambda = { family = "bounded_sin", base = 1.0, amplitude = 0.5, frequency = 2.0 }

[[dark_pool.atoms]]
id = 0
mu = 1.0
gamma = { family = "constant", value = "inf" }
"#;

    #[test]
    fn toml_and_json_agree() {
        let a = parse_model(TOML_MODEL, false).unwrap();
        let json = serde_json::to_string(&ModelFile::from(&a)).unwrap();
        let b = parse_model(&json, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.drift, CoefficientField::constant(0.0));
        assert!(a.dark_pool.atoms[0].gamma.eval(0.0, 0.0).is_infinite());
    }

    #[test]
    fn unknown_families_are_rejected() {
        let bad = TOML_MODEL.replace("bounded_sin", "polynomial");
        assert!(parse_model(&bad, false).is_err());
    }
}
