//! The `u` a feedback policy reads: a solved field or a closed form.

use std::sync::Arc;

use crate::closed_form::{u_bar_limit, u_bar_limit_integral, u_hat, u_hat_integral};
use crate::error::{HjbError, Result};
use crate::pde::field::ValueField;

#[derive(Clone, Debug)]
pub enum ValueSource {
    /// Solved field. Past its last row (`T - delta` for singular fields) `u`
    /// follows `c(y) / (T - t)` with `c` matched to the last row.
    Field(Arc<ValueField>),
    /// `Λ coth(T - t)`.
    UHat { bound: f64, horizon: f64 },
    /// `κ₀μ / (e^{μ(T-t)} - 1)`.
    UBarLimit { kappa0: f64, mu_total: f64, horizon: f64 },
    Constant(f64),
}

impl ValueSource {
    pub fn field(field: ValueField) -> Self {
        ValueSource::Field(Arc::new(field))
    }

    pub fn horizon(&self) -> Option<f64> {
        match self {
            ValueSource::Field(f) => Some(f.horizon()),
            ValueSource::UHat { horizon, .. } | ValueSource::UBarLimit { horizon, .. } => Some(*horizon),
            ValueSource::Constant(_) => None,
        }
    }

    /// `u(t, y)` for `t < T`.
    pub fn u(&self, t: f64, y: f64) -> Result<f64> {
        match self {
            ValueSource::Field(f) => {
                let t_end = f.t_end();
                if t <= t_end {
                    f.interpolate(t, y)
                } else {
                    let s = f.horizon() - t;
                    if !(s > 0.0) {
                        return Err(HjbError::OutOfRange { t, range: format!("[0, {})", f.horizon()) });
                    }
                    Ok(layer_constant(f, y)? / s)
                }
            }
            ValueSource::UHat { bound, horizon } => u_hat(*bound, *horizon, t),
            ValueSource::UBarLimit { kappa0, mu_total, horizon } => u_bar_limit(*kappa0, *mu_total, *horizon, t),
            ValueSource::Constant(c) => Ok(*c),
        }
    }

    /// `∫_{t0}^{t1} u(s, y) ds` with the factor frozen at `y`, `t0 <= t1 < T`.
    ///
    /// Exact for the closed forms and in the terminal layer; trapezoidal on
    /// field rows.
    pub fn integral(&self, t0: f64, t1: f64, y: f64) -> Result<f64> {
        match self {
            ValueSource::Field(f) => {
                let t_end = f.t_end();
                let horizon = f.horizon();
                let mut total = 0.0;
                let a = t1.min(t_end);
                if a > t0 {
                    total += 0.5 * (a - t0) * (f.interpolate(t0, y)? + f.interpolate(a, y)?);
                }
                let b = t0.max(t_end);
                if t1 > b {
                    if !(horizon - t1 > 0.0) {
                        return Err(HjbError::OutOfRange { t: t1, range: format!("[0, {horizon})") });
                    }
                    total += layer_constant(f, y)? * ((horizon - b) / (horizon - t1)).ln();
                }
                Ok(total)
            }
            ValueSource::UHat { bound, horizon } => Ok(u_hat_integral(*bound, *horizon, t0, t1)),
            ValueSource::UBarLimit { kappa0, mu_total, horizon } => {
                Ok(u_bar_limit_integral(*kappa0, *mu_total, *horizon, t0, t1))
            }
            ValueSource::Constant(c) => Ok(c * (t1 - t0)),
        }
    }
}

fn layer_constant(f: &ValueField, y: f64) -> Result<f64> {
    let t_end = f.t_end();
    Ok(f.interpolate(t_end, y)? * (f.horizon() - t_end))
}
