//! Barrier certification and comparison checks on solved fields.

use std::fmt;

use serde::Serialize;

use crate::closed_form::BarrierPair;
use crate::error::{HjbError, Result};
use crate::model::ModelSpec;
use crate::pde::field::{Grid1D, ValueField};
use crate::pde::solver::{solve_finite_with, SchemeOptions};

/// Relative slack on both barriers.
pub const BARRIER_TOLERANCE: f64 = 0.02;
/// Allowed undershoot of `u_high` below `u_low`.
pub const COMPARISON_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierViolation {
    pub t: f64,
    pub y: f64,
    pub u: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierReport {
    pub passed: bool,
    pub c0: f64,
    pub c1: f64,
    /// `min (T-t) u / c0 - 1`; below `-tol` means the lower barrier is violated.
    pub lower_margin: f64,
    /// `min 1 - (T-t) u / c1`; below `-tol` means the upper barrier is violated.
    pub upper_margin: f64,
    pub tolerance: f64,
    pub nodes_checked: usize,
    pub violations: Vec<BarrierViolation>,
}

impl BarrierReport {
    /// `"lower"` or `"upper"`, whichever margin is smaller.
    pub fn binding(&self) -> &'static str {
        if self.lower_margin <= self.upper_margin {
            "lower"
        } else {
            "upper"
        }
    }
}

impl fmt::Display for BarrierReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "barriers c0={:.6} c1={:.6} tol={}: {}",
            self.c0,
            self.c1,
            self.tolerance,
            if self.passed { "PASS" } else { "FAIL" }
        )?;
        writeln!(
            f,
            "  lower margin {:.6}  upper margin {:.6}  binding={}  nodes={}  violations={}",
            self.lower_margin,
            self.upper_margin,
            self.binding(),
            self.nodes_checked,
            self.violations.len()
        )
    }
}

/// Checks `c0/(T-t) (1-tol) <= u <= c1/(T-t) (1+tol)` at every node with `t <= T - delta`.
pub fn check_barriers(field: &ValueField, pair: &BarrierPair, delta: f64) -> BarrierReport {
    let horizon = pair.horizon;
    let t_max = horizon - delta + 1e-12;
    let tol = BARRIER_TOLERANCE;
    let ys = field.grid.ys();
    let mut lower_margin = f64::INFINITY;
    let mut upper_margin = f64::INFINITY;
    let mut violations = Vec::new();
    let mut nodes_checked = 0;

    for (i, &t) in field.times.iter().enumerate() {
        if t > t_max {
            continue;
        }
        let s = horizon - t;
        for (j, &u) in field.row(i).iter().enumerate() {
            nodes_checked += 1;
            let scaled = s * u;
            let lo = if pair.c0 > 0.0 { scaled / pair.c0 - 1.0 } else { f64::INFINITY };
            let hi = 1.0 - scaled / pair.c1;
            lower_margin = lower_margin.min(lo);
            upper_margin = upper_margin.min(hi);
            if lo < -tol || hi < -tol || !u.is_finite() {
                violations.push(BarrierViolation { t, y: ys[j], u, lower: pair.lower(t), upper: pair.upper(t) });
            }
        }
    }

    BarrierReport {
        passed: violations.is_empty() && nodes_checked > 0,
        c0: pair.c0,
        c1: pair.c1,
        lower_margin,
        upper_margin,
        tolerance: tol,
        nodes_checked,
        violations,
    }
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub passed: bool,
    /// `min (u_high - u_low)` over all nodes.
    pub min_gap: f64,
    pub worst_t: f64,
    pub worst_y: f64,
    /// Smallest value in either field; negative only under a non-monotone scheme.
    pub min_value: f64,
    pub low: ValueField,
    pub high: ValueField,
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "comparison: {}  min(u_high - u_low)={:.3e} at t={} y={}  min value={:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.min_gap,
            self.worst_t,
            self.worst_y,
            self.min_value
        )
    }
}

/// Solves both specs at level `N` and checks `u_high >= u_low - 1e-6` nodewise.
pub fn check_comparison(spec_low: &ModelSpec, spec_high: &ModelSpec, level: f64, grid: &Grid1D) -> Result<ComparisonReport> {
    check_comparison_with(spec_low, spec_high, level, grid, SchemeOptions::default())
}

pub fn check_comparison_with(
    spec_low: &ModelSpec,
    spec_high: &ModelSpec,
    level: f64,
    grid: &Grid1D,
    scheme: SchemeOptions,
) -> Result<ComparisonReport> {
    verify_domination(spec_low, spec_high)?;
    let low = solve_finite_with(spec_low, level, grid, scheme)?;
    let high = solve_finite_with(spec_high, level, grid, scheme)?;

    let ys = grid.ys();
    let mut min_gap = f64::INFINITY;
    let (mut worst_t, mut worst_y) = (0.0, 0.0);
    for (i, &t) in low.times.iter().enumerate() {
        for (j, (lo, hi)) in low.row(i).iter().zip(high.row(i)).enumerate() {
            let gap = hi - lo;
            if gap < min_gap {
                min_gap = gap;
                worst_t = t;
                worst_y = ys[j];
            }
        }
    }
    let min_value = low.min_value().min(high.min_value());
    Ok(ComparisonReport {
        passed: min_gap >= -COMPARISON_TOLERANCE && min_value >= 0.0,
        min_gap,
        worst_t,
        worst_y,
        min_value,
        low,
        high,
    })
}

fn verify_domination(low: &ModelSpec, high: &ModelSpec) -> Result<()> {
    let fail = |what: &str| Err(HjbError::DominationUnverifiable(what.to_string()));
    if low.drift != high.drift || low.sigma != high.sigma || low.sigma_bar != high.sigma_bar {
        return fail("b, sigma and sigma_bar must coincide");
    }
    if low.horizon != high.horizon {
        return fail("horizons differ");
    }
    if !high.lambda.dominates(&low.lambda) {
        return fail("lambda_high >= lambda_low is not implied by the parameters");
    }
    if !high.eta.dominates(&low.eta) {
        return fail("eta_high >= eta_low is not implied by the parameters");
    }
    if !high.dark_pool.dominates(&low.dark_pool) {
        return fail("dark-pool atoms must pair up with gamma_high >= gamma_low and mu_high <= mu_low");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{barriers, u_hat};
    use crate::model::{CoefficientField, DarkPoolMeasure};
    use crate::pde::field::Terminal;
    use crate::pde::solver::DriftScheme;

    fn base_spec() -> ModelSpec {
        ModelSpec {
            drift: CoefficientField::constant(0.0),
            sigma: CoefficientField::constant(0.0),
            sigma_bar: CoefficientField::constant(1.0),
            eta: CoefficientField::constant(1.0),
            lambda: CoefficientField::constant(1.0),
            dark_pool: DarkPoolMeasure::empty(),
            horizon: 1.0,
        }
    }

    fn grid() -> Grid1D {
        Grid1D::new(-2.0, 2.0, 11, 0.01, 1.0).unwrap()
    }

    fn field_from(f: impl Fn(f64) -> f64, delta: f64) -> ValueField {
        let g = grid();
        let times: Vec<f64> = g.times().into_iter().filter(|&t| t <= 1.0 - delta + 1e-12).collect();
        let values = times.iter().flat_map(|&t| std::iter::repeat_n(f(t), g.n_y)).collect();
        ValueField { grid: g, times, values, terminal: Terminal::Singular { level: 0.0, delta } }
    }

    #[test]
    fn coth_lies_between_barriers() {
        let spec = base_spec();
        let pair = barriers(&spec).unwrap();
        assert_eq!(pair.c0, 1.0);
        assert!((pair.c1 - 1f64.exp().powi(2)).abs() < 1e-12);
        let field = field_from(|t| u_hat(1.0, 1.0, t).unwrap(), 0.05);
        let report = check_barriers(&field, &pair, 0.05);
        assert!(report.passed, "{report}");
        assert!(report.lower_margin > 0.0 && report.upper_margin > 0.0);
    }

    #[test]
    fn inflated_field_violates_everywhere() {
        let spec = base_spec();
        let pair = barriers(&spec).unwrap();
        let field = field_from(|t| 10.0 * pair.upper(t), 0.05);
        let report = check_barriers(&field, &pair, 0.05);
        assert!(!report.passed);
        assert_eq!(report.violations.len(), report.nodes_checked);
    }

    #[test]
    fn lower_barrier_binds_for_the_lower_envelope() {
        let mut spec = base_spec();
        spec.lambda = CoefficientField::constant(0.0);
        spec.dark_pool = DarkPoolMeasure::single(CoefficientField::constant(0.0), 1.0);
        let pair = barriers(&spec).unwrap();
        let field = field_from(|t| crate::closed_form::u_bar_limit(1.0, 1.0, 1.0, t).unwrap(), 0.05);
        let report = check_barriers(&field, &pair, 0.05);
        assert!(report.passed, "{report}");
        assert_eq!(report.binding(), "lower");
    }

    #[test]
    fn shifted_lambda_is_ordered() {
        let low = base_spec();
        let mut high = base_spec();
        high.lambda = CoefficientField::constant(1.5);
        let report = check_comparison(&low, &high, 5.0, &grid()).unwrap();
        assert!(report.passed, "{report}");
        assert!(report.min_gap >= 0.0);
    }

    #[test]
    fn identical_specs_give_identical_fields() {
        let spec = base_spec();
        let report = check_comparison(&spec, &spec, 5.0, &grid()).unwrap();
        assert_eq!(report.low.values, report.high.values);
        assert_eq!(report.min_gap, 0.0);
    }

    #[test]
    fn dark_pool_lowers_the_value() {
        let mut low = base_spec();
        low.dark_pool = DarkPoolMeasure::single(CoefficientField::constant(0.0), 1.0);
        let mut high = base_spec();
        high.dark_pool = DarkPoolMeasure::single(CoefficientField::infinite(), 1.0);
        let report = check_comparison(&low, &high, 5.0, &grid()).unwrap();
        assert!(report.passed, "{report}");
        let (low0, high0) = (report.low.row(0), report.high.row(0));
        assert!(low0.iter().zip(high0).all(|(l, h)| h > l));
    }

    #[test]
    fn unverifiable_domination_is_rejected() {
        let low = base_spec();
        let mut high = base_spec();
        high.lambda = CoefficientField::bounded_sin(1.0, 0.5, 1.0);
        assert!(matches!(
            check_comparison(&low, &high, 1.0, &grid()),
            Err(HjbError::DominationUnverifiable(_))
        ));
        let mut other = base_spec();
        other.drift = CoefficientField::constant(0.1);
        assert!(check_comparison(&low, &other, 1.0, &grid()).is_err());
    }

    #[test]
    fn central_drift_breaks_comparison_at_high_peclet() {
        let mut low = base_spec();
        low.sigma_bar = CoefficientField::constant(0.1);
        low.drift = CoefficientField::constant(-1.0);
        low.lambda = CoefficientField::constant(0.0);
        let mut high = low.clone();
        high.lambda = CoefficientField::tanh_affine(0.5, 0.5, 20.0);
        let g = Grid1D::new(-2.0, 2.0, 21, 0.01, 1.0).unwrap();
        let upwind = check_comparison(&low, &high, 1.0, &g).unwrap();
        assert!(upwind.passed, "{upwind}");
        let central = check_comparison_with(&low, &high, 1.0, &g, SchemeOptions { drift: DriftScheme::Central });
        match central {
            Ok(report) => assert!(!report.passed, "{report}"),
            Err(e) => assert!(matches!(e, HjbError::NegativeValue { .. }), "{e}"),
        }
    }
}
