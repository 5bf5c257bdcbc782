//! Singular-terminal HJB solver for optimal liquidation with dark-pool
//! execution, plus a Monte Carlo simulator of the controlled inventory.
//!
//! The value function is `V(t, y, x) = u(t, y) x²`; everything here works
//! with `u` directly.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_form;
pub mod error;
pub mod model;
pub mod pde;
pub mod presets;
pub mod sim;

pub use closed_form::{barriers, riccati_solve, u_bar_limit, u_bar_n, u_hat, u_tilde_n, BarrierPair, OdeSolution};
pub use error::{HjbError, Result};
pub use model::{
    eval_f, eval_f_hat, eval_f_truncated, theta, validate_assumptions, weighted_coefficients, Assumption,
    AssumptionReport, CoefficientField, DarkPoolAtom, DarkPoolMeasure, ModelConstants, ModelSpec,
};
pub use pde::{Grid1D, ValueField};
pub use presets::{preset, Preset, PRESET_NAMES};
pub use sim::{
    evaluate_cost, mc_value_estimate, monotonize_control, simulate_liquidation, CostBreakdown, CustomControl,
    McEstimate, Policy, TimeGrid, Trajectory, ValueSource,
};
