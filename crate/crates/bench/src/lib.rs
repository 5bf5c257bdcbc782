//! Shared fixtures for the benchmarks.

use singular_hjb::model::{CoefficientField, DarkPoolMeasure, ModelSpec};
use singular_hjb::pde::Grid1D;

/// Factor-dependent model with one dark-pool venue.
pub fn factor_model() -> ModelSpec {
    ModelSpec {
        drift: CoefficientField::constant(-0.5),
        sigma: CoefficientField::constant(0.3),
        sigma_bar: CoefficientField::constant(1.0),
        eta: CoefficientField::tanh_affine(1.0, 0.3, 1.0),
        lambda: CoefficientField::bounded_sin(1.0, 0.5, 2.0),
        dark_pool: DarkPoolMeasure::single(CoefficientField::constant(2.0), 1.0),
        horizon: 1.0,
    }
}

pub fn factor_grid(n_y: usize, dt: f64) -> Grid1D {
    Grid1D::new(-4.0, 4.0, n_y, dt, 1.0).expect("valid grid")
}
