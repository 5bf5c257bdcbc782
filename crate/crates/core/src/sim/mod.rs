//! Monte Carlo simulation of the controlled inventory.

pub mod checks;
pub mod monotone;
pub mod noise;
pub mod policy;
pub mod simulate;
pub mod trajectory;
pub mod value;

pub use checks::{check_admissibility_estimate, check_state_decay, decay_bound, AdmissibilityReport, DecayReport};
pub use monotone::{monotonize_control, monotonize_control_signed, MonotonizedRun};
pub use noise::{draw_path_noise, path_rng, simulate_factor_path, JumpDraw, PathNoise, TimeGrid};
pub use policy::{CustomControl, Policy};
pub use simulate::{mc_value_estimate, mc_value_estimate_with_workers, path_costs, simulate_liquidation, McEstimate};
pub use trajectory::{evaluate_cost, CostBreakdown, JumpEvent, Trajectory};
pub use value::ValueSource;
