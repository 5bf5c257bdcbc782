//! Finite-difference solver in the unweighted variable `u` on a truncated
//! factor box with homogeneous Neumann boundaries.

pub mod checks;
pub mod convergence;
pub mod field;
pub mod solver;

pub use checks::{check_barriers, check_comparison, check_comparison_with, BarrierReport, ComparisonReport};
pub use convergence::{domain_doubling, spatial_study, temporal_study, ConvergenceStudy, DomainDoublingReport};
pub use field::{Grid1D, Terminal, ValueField};
pub use solver::{
    inactive_cap, solve_finite, solve_finite_terminal, solve_finite_terminal_with, solve_finite_with, solve_singular,
    solve_singular_with, DriftScheme, SchemeOptions, SingularOptions, SingularSolveReport,
};
