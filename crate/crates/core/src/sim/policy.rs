use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::model::{fill_fraction, ModelSpec};
use crate::sim::value::ValueSource;

/// `ξ(t, y, x)`.
pub type RateFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
/// `ρ(t, y, x⁻, k)` for atom index `k`.
pub type FillFn = Arc<dyn Fn(f64, f64, f64, usize) -> f64 + Send + Sync>;

/// User-supplied control. Inventory moves by an explicit Euler step of the
/// rate between nodes.
#[derive(Clone)]
pub struct CustomControl {
    pub rate: RateFn,
    pub fill: FillFn,
    /// Declares `0 <= ρ <= x⁻`; a larger fill is then an overshoot fault.
    pub monotone: bool,
}

impl CustomControl {
    pub fn new(
        rate: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        fill: impl Fn(f64, f64, f64, usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CustomControl { rate: Arc::new(rate), fill: Arc::new(fill), monotone: false }
    }

    pub fn rate_only(rate: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        CustomControl::new(rate, |_, _, _, _| 0.0)
    }

    pub fn monotone(mut self, flag: bool) -> Self {
        self.monotone = flag;
        self
    }

    /// Control for the mirrored problem `x -> -x`.
    pub fn mirrored(&self) -> Self {
        let rate = self.rate.clone();
        let fill = self.fill.clone();
        CustomControl {
            rate: Arc::new(move |t, y, x| -rate(t, y, -x)),
            fill: Arc::new(move |t, y, x, k| -fill(t, y, -x, k)),
            monotone: self.monotone,
        }
    }
}

impl fmt::Debug for CustomControl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomControl").field("monotone", &self.monotone).finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub enum Policy {
    /// `ξ = u x / η`, `ρ_k = u x⁻ / (γ_k + u)`.
    Feedback(ValueSource),
    /// `ξ = x₀ / T`, no dark-pool orders.
    Twap,
    Custom(CustomControl),
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Feedback(_) => "feedback",
            Policy::Twap => "twap",
            Policy::Custom(_) => "custom",
        }
    }

    pub(crate) fn is_monotone(&self) -> bool {
        match self {
            Policy::Feedback(_) | Policy::Twap => true,
            Policy::Custom(c) => c.monotone,
        }
    }

    /// Dark-pool order size for atom `k` at inventory `x`.
    pub(crate) fn fill(&self, spec: &ModelSpec, t: f64, y: f64, x: f64, k: usize) -> Result<f64> {
        match self {
            Policy::Feedback(src) => {
                if x == 0.0 {
                    return Ok(0.0);
                }
                let u = src.u(t, y)?;
                Ok(fill_fraction(spec.dark_pool.atoms[k].gamma.eval(t, y), u) * x)
            }
            Policy::Twap => Ok(0.0),
            Policy::Custom(c) => Ok((c.fill)(t, y, x, k)),
        }
    }
}
