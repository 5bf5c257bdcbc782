//! Closed-form reference solutions, the two-sided growth barriers, and a
//! fourth-order ODE oracle for factor-independent models.

use std::io::Write;

use serde::Serialize;

use crate::error::{HjbError, Result};
use crate::model::{eval_f_hat, validate_assumptions, ModelSpec};

/// `Λ coth(T - t)`, the singular solution for `(λ, γ, η) = (Λ, +inf, Λ)`.
pub fn u_hat(bound: f64, horizon: f64, t: f64) -> Result<f64> {
    let s = horizon - t;
    if !(s > 0.0) {
        return Err(HjbError::OutOfRange { t, range: format!("[0, {horizon})") });
    }
    Ok(bound / s.tanh())
}

/// `∫_{t0}^{t1} Λ coth(T - s) ds = Λ ln(sinh(T - t0) / sinh(T - t1))` for `t0 <= t1 < T`.
pub fn u_hat_integral(bound: f64, horizon: f64, t0: f64, t1: f64) -> f64 {
    let (s0, s1) = (horizon - t0, horizon - t1);
    // ln sinh(s) = s + ln(1 - e^{-2s}) - ln 2, stable for large s
    let ln_sinh = |s: f64| s + (-(-2.0 * s).exp()).ln_1p() - std::f64::consts::LN_2;
    bound * (ln_sinh(s0) - ln_sinh(s1))
}

/// Finite-`N` solution for `(λ, γ, η) = (Λ, +inf, Λ)`:
/// `2Λ / (1 - (N-Λ)/(N+Λ) e^{-2(T-t)}) - Λ`.
pub fn u_tilde_n(bound: f64, level: f64, horizon: f64, t: f64) -> Result<f64> {
    check_level(level)?;
    let s = horizon - t;
    if s < 0.0 {
        return Err(HjbError::OutOfRange { t, range: format!("[0, {horizon}]") });
    }
    if s == 0.0 {
        return Ok(level);
    }
    let k = (level - bound) / (level + bound) * (-2.0 * s).exp();
    Ok(bound * (1.0 + k) / (1.0 - k))
}

/// Finite-`N` solution for `(λ, γ, η) = (0, 0, κ₀)` with dark-pool mass `μ(Z)`:
/// `κ₀μ / (1 - N/(N+κ₀μ) e^{-μ(T-t)}) - κ₀μ`.
///
/// For `μ(Z) = 0` this is the pure Riccati limit `N κ₀ / (κ₀ + N (T - t))`.
pub fn u_bar_n(kappa0: f64, mu_total: f64, level: f64, horizon: f64, t: f64) -> Result<f64> {
    check_level(level)?;
    let s = horizon - t;
    if s < 0.0 {
        return Err(HjbError::OutOfRange { t, range: format!("[0, {horizon}]") });
    }
    if s == 0.0 {
        return Ok(level);
    }
    if mu_total == 0.0 {
        return Ok(level * kappa0 / (kappa0 + level * s));
    }
    let m = kappa0 * mu_total;
    let e = level / (level + m) * (-mu_total * s).exp();
    Ok(m * e / (1.0 - e))
}

/// Pointwise `N -> inf` limit of [`u_bar_n`]: `κ₀μ e^{-μ(T-t)} / (1 - e^{-μ(T-t)})`.
pub fn u_bar_limit(kappa0: f64, mu_total: f64, horizon: f64, t: f64) -> Result<f64> {
    let s = horizon - t;
    if !(s > 0.0) {
        return Err(HjbError::OutOfRange { t, range: format!("[0, {horizon})") });
    }
    if mu_total == 0.0 {
        return Ok(kappa0 / s);
    }
    Ok(kappa0 * mu_total / (mu_total * s).exp_m1())
}

/// `∫_{t0}^{t1}` of [`u_bar_limit`] over time, for `t0 <= t1 < T`.
pub fn u_bar_limit_integral(kappa0: f64, mu_total: f64, horizon: f64, t0: f64, t1: f64) -> f64 {
    let (s0, s1) = (horizon - t0, horizon - t1);
    if mu_total == 0.0 {
        return kappa0 * (s0 / s1).ln();
    }
    // antiderivative in s of κ₀μ/(e^{μs}-1) is κ₀ ln(1 - e^{-μs})
    let g = |s: f64| kappa0 * (-(-mu_total * s).exp()).ln_1p();
    g(s0) - g(s1)
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level.is_finite()) {
        return Err(HjbError::InvalidParameter(format!("terminal level N must be positive, got {level}")));
    }
    Ok(())
}

/// Two-sided growth bounds `c0/(T-t) <= u <= c1/(T-t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BarrierPair {
    pub c0: f64,
    pub c1: f64,
    pub horizon: f64,
}

impl BarrierPair {
    pub fn lower(&self, t: f64) -> f64 {
        self.c0 / (self.horizon - t)
    }

    pub fn upper(&self, t: f64) -> f64 {
        self.c1 / (self.horizon - t)
    }
}

/// `c0 = κ₀ e^{-μ(Z) T}`, `c1 = Λ e^{2T}`.
pub fn barriers(spec: &ModelSpec) -> Result<BarrierPair> {
    let c = validate_assumptions(spec).into_result()?;
    let horizon = spec.horizon;
    Ok(BarrierPair {
        c0: c.kappa0 * (-c.mu_total * horizon).exp(),
        c1: c.bound * (2.0 * horizon).exp(),
        horizon,
    })
}

/// Backward ODE solution `w(t)` on a time grid ordered from `T` downwards.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub terminal: f64,
    /// Set when a sub-step had to be clamped at zero.
    pub clamped: bool,
}

impl OdeSolution {
    /// Value at the grid node closest to `t`.
    pub fn value_near(&self, t: f64) -> f64 {
        let idx = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.values[idx]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,w")?;
        for (t, w) in self.times.iter().zip(&self.values) {
            writeln!(out, "{t:.12e},{w:.17e}")?;
        }
        Ok(())
    }
}

/// Integrates `-w' = F̂(t, w)`, `w(T) = N`, backwards over `time_grid` with
/// the classical four-stage Runge-Kutta method.
///
/// Each grid interval is split into equal sub-steps so that the step times
/// the local stiffness `2w/κ₀ + μ(Z)` stays below 0.01.
pub fn riccati_solve(spec: &ModelSpec, level: f64, time_grid: &[f64]) -> Result<OdeSolution> {
    if let Some(name) = spec.first_factor_dependent() {
        return Err(HjbError::FactorDependent(name));
    }
    if !(level >= 0.0 && level.is_finite()) {
        return Err(HjbError::InvalidParameter(format!("terminal level N must be nonnegative, got {level}")));
    }
    let horizon = spec.horizon;
    let mut times: Vec<f64> = time_grid.to_vec();
    times.sort_by(|a, b| b.total_cmp(a));
    times.dedup();
    match times.first() {
        Some(&t) if (t - horizon).abs() <= 1e-12 * horizon.max(1.0) => times[0] = horizon,
        _ => {
            return Err(HjbError::InvalidParameter("time grid must contain the horizon T".into()));
        }
    }
    if times.last().is_some_and(|&t| t < 0.0) {
        return Err(HjbError::InvalidParameter("time grid must lie in [0, T]".into()));
    }

    let c = spec.constants();
    let eta_min = c.kappa0.max(f64::MIN_POSITIVE);
    let rhs = |t: f64, w: f64| eval_f_hat(spec, t, 0.0, w);

    let mut values = Vec::with_capacity(times.len());
    let mut w = level;
    let mut clamped = false;
    values.push(w);
    for pair in times.windows(2) {
        let (t_hi, t_lo) = (pair[0], pair[1]);
        let span = t_hi - t_lo;
        let stiffness = 2.0 * w / eta_min + c.mu_total + 1.0;
        let substeps = ((span * stiffness / 0.01).ceil() as usize).max(1);
        let h = span / substeps as f64;
        for k in 0..substeps {
            let t = t_hi - k as f64 * h;
            // dw/ds = F̂ with s = T - t
            let k1 = rhs(t, w);
            let k2 = rhs(t - 0.5 * h, w + 0.5 * h * k1);
            let k3 = rhs(t - 0.5 * h, w + 0.5 * h * k2);
            let k4 = rhs(t - h, w + h * k3);
            w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if w < 0.0 {
                w = 0.0;
                clamped = true;
            }
        }
        values.push(w);
    }
    Ok(OdeSolution { times, values, terminal: level, clamped })
}

/// Uniform grid `0, dt, ..., T`.
pub fn uniform_times(horizon: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| if i == steps { horizon } else { horizon * i as f64 / steps as f64 }).collect()
}
