//! Pathwise checks on simulated trajectories.

use std::fmt;

use serde::Serialize;

use crate::closed_form::BarrierPair;
use crate::sim::trajectory::Trajectory;

/// Slack on the decay envelope for the time discretisation.
pub const DECAY_SLACK: f64 = 0.05;

/// `|x0| ((T - t) / T)^exponent`.
pub fn decay_bound(x0: f64, t: f64, horizon: f64, exponent: f64) -> f64 {
    x0.abs() * ((horizon - t).max(0.0) / horizon).powf(exponent)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub passed: bool,
    /// `c0 / Λ`.
    pub exponent: f64,
    /// `max |x_i| / bound_i` over nodes before `T`.
    pub worst_ratio: f64,
    pub violations: usize,
    pub terminal_zero: bool,
}

impl fmt::Display for DecayReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "decay exponent={:.6} worst ratio={:.6} violations={} x(T)=0: {}",
            self.exponent, self.worst_ratio, self.violations, self.terminal_zero
        )
    }
}

/// `|x_t| <= |x0| ((T-t)/T)^{c0/Λ} (1 + 5%)` at every node, pre- and post-fill,
/// and `x(T) = 0`.
pub fn check_state_decay(traj: &Trajectory, pair: &BarrierPair, bound: f64) -> DecayReport {
    let exponent = pair.c0 / bound;
    let x0 = traj.x0();
    let horizon = pair.horizon;
    let n = traj.steps();
    let mut worst = 0.0_f64;
    let mut violations = 0;
    for i in 0..n {
        let env = decay_bound(x0, traj.times[i], horizon, exponent);
        let x = traj.x_pre[i].abs().max(traj.x_post[i].abs());
        let ratio = if env > 0.0 {
            x / env
        } else if x == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(ratio);
        if ratio > 1.0 + DECAY_SLACK {
            violations += 1;
        }
    }
    let terminal_zero = traj.x_pre[n] == 0.0 && traj.x_post[n] == 0.0;
    DecayReport { passed: violations == 0 && terminal_zero, exponent, worst_ratio: worst, violations, terminal_zero }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    /// Smallest `C` with `x_i² <= C (T - t_i) Σ_{j>=i} ξ_j² dt` on the path.
    pub c_hat: f64,
    /// `10 e^{μ(Z) T}`.
    pub threshold: f64,
    pub flagged: bool,
}

impl fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C_hat={:.6} threshold={:.6} flagged={}", self.c_hat, self.threshold, self.flagged)
    }
}

/// Per-path surrogate of the admissibility estimate: the conditional
/// expectation of the remaining `∫ ξ²` is replaced by its realised value.
pub fn check_admissibility_estimate(traj: &Trajectory, mu_total: f64) -> AdmissibilityReport {
    let n = traj.steps();
    let horizon = traj.times[n];
    let mut forward = 0.0;
    let mut c_hat = 0.0_f64;
    for i in (0..n).rev() {
        let dt = traj.times[i + 1] - traj.times[i];
        forward += traj.xi[i] * traj.xi[i] * dt;
        let x = traj.x_post[i];
        if x != 0.0 {
            let denom = (horizon - traj.times[i]) * forward;
            c_hat = c_hat.max(if denom > 0.0 { x * x / denom } else { f64::INFINITY });
        }
    }
    let threshold = 10.0 * (mu_total * horizon).exp();
    AdmissibilityReport { c_hat, threshold, flagged: !(c_hat <= threshold) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoefficientField, DarkPoolMeasure, ModelSpec};
    use crate::sim::noise::TimeGrid;
    use crate::sim::policy::Policy;
    use crate::sim::simulate::simulate_liquidation;
    use crate::sim::value::ValueSource;

    fn spec() -> ModelSpec {
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

    #[test]
    fn envelope_values() {
        assert!((decay_bound(2.0, 0.5, 1.0, 0.5) - 2.0 * 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(decay_bound(3.0, 0.0, 1.0, 0.7), 3.0);
        assert_eq!(decay_bound(3.0, 1.0, 1.0, 0.7), 0.0);
    }

    #[test]
    fn feedback_from_u_hat_decays() {
        let grid = TimeGrid::new(1.0, 1000).unwrap();
        let policy = Policy::Feedback(ValueSource::UHat { bound: 1.0, horizon: 1.0 });
        let t = simulate_liquidation(&spec(), &policy, 1.0, 0.0, &grid, 0, 0).unwrap();
        let pair = BarrierPair { c0: 1.0, c1: 1f64.exp().powi(2), horizon: 1.0 };
        let r = check_state_decay(&t, &pair, 1.0);
        assert!(r.passed, "{r}");
        assert!(r.worst_ratio <= 1.0 + 1e-12, "{r}");
    }

    #[test]
    fn twap_estimate_is_one() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let t = simulate_liquidation(&spec(), &Policy::Twap, 1.0, 0.0, &grid, 0, 0).unwrap();
        let r = check_admissibility_estimate(&t, 0.0);
        assert!((r.c_hat - 1.0).abs() < 1e-9, "{r}");
        assert!(!r.flagged);
    }

    #[test]
    fn empty_path_has_zero_estimate() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let t = simulate_liquidation(&spec(), &Policy::Twap, 0.0, 0.0, &grid, 0, 0).unwrap();
        assert_eq!(check_admissibility_estimate(&t, 0.0).c_hat, 0.0);
    }
}
