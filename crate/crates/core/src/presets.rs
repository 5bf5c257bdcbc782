//! Named constant-coefficient models with closed-form singular solutions.
//!
//! All three use `T = 1`, `Λ = κ₀ = 1`, `σ̄ = 1` and `b = σ = 0`.

use crate::model::{CoefficientField, DarkPoolMeasure, ModelSpec};
use crate::sim::value::ValueSource;

pub const PRESET_NAMES: [&str; 3] = ["envelope_lower", "envelope_upper", "uhat_benchmark"];

#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub spec: ModelSpec,
    /// Singular solution of `spec`.
    pub value: ValueSource,
}

fn base(lambda: f64, dark_pool: DarkPoolMeasure) -> ModelSpec {
    ModelSpec {
        drift: CoefficientField::constant(0.0),
        sigma: CoefficientField::constant(0.0),
        sigma_bar: CoefficientField::constant(1.0),
        eta: CoefficientField::constant(1.0),
        lambda: CoefficientField::constant(lambda),
        dark_pool,
        horizon: 1.0,
    }
}

pub fn preset(name: &str) -> Option<Preset> {
    match name {
        // (λ, γ, η) = (0, 0, κ₀), μ(Z) = 1
        "envelope_lower" => Some(Preset {
            name: "envelope_lower",
            spec: base(0.0, DarkPoolMeasure::single(CoefficientField::constant(0.0), 1.0)),
            value: ValueSource::UBarLimit { kappa0: 1.0, mu_total: 1.0, horizon: 1.0 },
        }),
        // (λ, γ, η) = (Λ, +inf, Λ), μ(Z) = 1; the pool never fills
        "envelope_upper" => Some(Preset {
            name: "envelope_upper",
            spec: base(1.0, DarkPoolMeasure::single(CoefficientField::infinite(), 1.0)),
            value: ValueSource::UHat { bound: 1.0, horizon: 1.0 },
        }),
        "uhat_benchmark" => Some(Preset {
            name: "uhat_benchmark",
            spec: base(1.0, DarkPoolMeasure::empty()),
            value: ValueSource::UHat { bound: 1.0, horizon: 1.0 },
        }),
        _ => None,
    }
}
