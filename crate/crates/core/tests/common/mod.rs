#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use singular_hjb::model::{CoefficientField, DarkPoolAtom, DarkPoolMeasure, ModelSpec};

pub fn constant_spec(lambda: f64, eta: f64, dark_pool: DarkPoolMeasure) -> ModelSpec {
    ModelSpec {
        drift: CoefficientField::constant(0.0),
        sigma: CoefficientField::constant(0.0),
        sigma_bar: CoefficientField::constant(1.0),
        eta: CoefficientField::constant(eta),
        lambda: CoefficientField::constant(lambda),
        dark_pool,
        horizon: 1.0,
    }
}

/// `(Λ, +inf, Λ)` with `Λ = 1`.
pub fn upper_envelope() -> ModelSpec {
    constant_spec(1.0, 1.0, DarkPoolMeasure::empty())
}

/// `(0, γ = 0, κ₀)` with `κ₀ = 1`, `μ(Z) = 1`.
pub fn lower_envelope() -> ModelSpec {
    constant_spec(0.0, 1.0, DarkPoolMeasure::single(CoefficientField::constant(0.0), 1.0))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Constant coefficients with `0 <= λ <= 1`, `1/2 <= η <= 1` and up to two atoms.
pub fn random_constant_spec(rng: &mut ChaCha8Rng) -> ModelSpec {
    let atoms = (0..rng.random_range(0..=2))
        .map(|id| DarkPoolAtom {
            id,
            gamma: CoefficientField::constant(rng.random_range(0.0..3.0)),
            mu: rng.random_range(0.1..1.0),
        })
        .collect();
    constant_spec(rng.random_range(0.0..1.0), rng.random_range(0.5..1.0), DarkPoolMeasure { atoms })
}

/// Five factor-dependent models used for barrier and decay checks.
pub fn factor_specs() -> Vec<ModelSpec> {
    let tanh = CoefficientField::tanh_affine;
    let sin = CoefficientField::bounded_sin;
    let c = CoefficientField::constant;
    vec![
        ModelSpec {
            drift: c(0.0),
            sigma: c(0.0),
            sigma_bar: c(1.0),
            eta: c(1.0),
            lambda: tanh(1.0, 0.5, 1.0),
            dark_pool: DarkPoolMeasure::empty(),
            horizon: 1.0,
        },
        ModelSpec {
            drift: sin(0.0, 0.3, 1.0),
            sigma: c(0.3),
            sigma_bar: c(0.8),
            eta: tanh(1.2, 0.3, 2.0),
            lambda: sin(0.8, 0.4, 1.5),
            dark_pool: DarkPoolMeasure::single(tanh(1.0, 0.5, 1.0), 0.5),
            horizon: 1.0,
        },
        ModelSpec {
            drift: c(-0.5),
            sigma: c(0.0),
            sigma_bar: tanh(1.0, 0.2, 1.0),
            eta: sin(0.8, 0.2, 2.0),
            lambda: tanh(0.5, 0.5, 3.0),
            dark_pool: DarkPoolMeasure {
                atoms: vec![
                    DarkPoolAtom { id: 0, gamma: c(0.0), mu: 0.3 },
                    DarkPoolAtom { id: 1, gamma: sin(2.0, 1.0, 1.0), mu: 0.7 },
                ],
            },
            horizon: 1.0,
        },
        ModelSpec {
            drift: tanh(0.0, 0.5, 1.0),
            sigma: sin(0.2, 0.1, 1.0),
            sigma_bar: c(1.2),
            eta: c(1.5),
            lambda: c(2.0),
            dark_pool: DarkPoolMeasure::single(CoefficientField::infinite(), 1.0),
            horizon: 2.0,
        },
        ModelSpec {
            drift: c(0.2),
            sigma: c(0.1),
            sigma_bar: sin(1.0, 0.3, 0.5),
            eta: tanh(0.7, 0.2, 1.0),
            lambda: sin(0.3, 0.3, 2.0),
            dark_pool: DarkPoolMeasure::single(tanh(0.5, 0.4, 2.0), 2.0),
            horizon: 0.5,
        },
    ]
}

/// `(low, high)` with `high` dominating `low` in `(λ, γ, η)`, same `b, σ, σ̄`.
pub fn dominated_pair(rng: &mut ChaCha8Rng) -> (ModelSpec, ModelSpec) {
    let slope = rng.random_range(0.5..3.0);
    let lam_base = rng.random_range(0.3..1.0);
    let lam_amp = rng.random_range(0.0..0.3);
    let eta_base = rng.random_range(0.6..1.0);
    let eta_amp = rng.random_range(0.0..0.2);
    let gamma = rng.random_range(0.0..2.0);
    let mu = rng.random_range(0.0..1.5);
    let low = ModelSpec {
        drift: CoefficientField::bounded_sin(0.0, rng.random_range(0.0..0.5), 1.0),
        sigma: CoefficientField::constant(rng.random_range(0.0..0.5)),
        sigma_bar: CoefficientField::constant(rng.random_range(0.5..1.2)),
        eta: CoefficientField::tanh_affine(eta_base, eta_amp, slope),
        lambda: CoefficientField::tanh_affine(lam_base, lam_amp, slope),
        dark_pool: DarkPoolMeasure::single(CoefficientField::constant(gamma), mu),
        horizon: 1.0,
    };
    let mut high = low.clone();
    match rng.random_range(0..4) {
        0 => {
            let shift = rng.random_range(0.0..0.5);
            high.lambda = CoefficientField::tanh_affine(lam_base + shift, lam_amp, slope);
        }
        1 => high.eta = CoefficientField::tanh_affine(eta_base + eta_amp + 0.3, 0.0, slope),
        2 => high.dark_pool = DarkPoolMeasure::single(CoefficientField::constant(gamma + rng.random_range(0.0..5.0)), mu),
        _ => {
            high.lambda = CoefficientField::constant(lam_base + lam_amp + 0.2);
            high.eta = CoefficientField::constant(eta_base + eta_amp);
            high.dark_pool = DarkPoolMeasure::single(CoefficientField::infinite(), mu);
        }
    }
    (low, high)
}
