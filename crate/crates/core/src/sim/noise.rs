//! Per-path random drivers: factor increments and dark-pool event times.
//!
//! Every path owns a ChaCha8 stream selected by `(seed, path_index)`, so a
//! path's draws never depend on how paths are scheduled. Within a step the
//! two Gaussian increments are drawn first, then any dark-pool events that
//! fall in the step.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;

use crate::error::{HjbError, Result};
use crate::model::ModelSpec;

/// Uniform simulation grid `t_i = i T / steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) || steps == 0 {
            return Err(HjbError::InvalidParameter(format!(
                "need T > 0 and at least one step, got T={horizon} steps={steps}"
            )));
        }
        Ok(TimeGrid { horizon, steps })
    }

    /// Grid with step `dt`, which must divide `T` within `1e-12`.
    pub fn from_dt(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt <= horizon) {
            return Err(HjbError::InvalidParameter(format!("need 0 < dt <= T, got dt={dt}")));
        }
        let steps = (horizon / dt).round();
        if (steps * dt - horizon).abs() > 1e-12 * horizon.max(1.0) {
            return Err(HjbError::InvalidParameter(format!("dt={dt} does not divide T={horizon}")));
        }
        TimeGrid::new(horizon, steps as usize)
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i >= self.steps {
            self.horizon
        } else {
            self.horizon * i as f64 / self.steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.time(i)).collect()
    }
}

/// Generator for path `path_index` under master seed `seed`.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// A dark-pool event at `t`, executed at the end of step `step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JumpDraw {
    pub t: f64,
    pub step: usize,
    /// Index into `spec.dark_pool.atoms`.
    pub atom: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathNoise {
    /// Factor at every grid node.
    pub y: Vec<f64>,
    pub jumps: Vec<JumpDraw>,
}

/// Euler-Maruyama factor path and Poisson event times for one path.
pub fn draw_path_noise(spec: &ModelSpec, y0: f64, grid: &TimeGrid, seed: u64, path_index: u64) -> PathNoise {
    let mut rng = path_rng(seed, path_index);
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let rate = spec.dark_pool.total_mass();
    let atoms = &spec.dark_pool.atoms;

    let mut y = Vec::with_capacity(grid.steps + 1);
    y.push(y0);
    let mut jumps = Vec::new();
    let mut next_jump: Option<f64> = None;

    for i in 0..grid.steps {
        let t = grid.time(i);
        let t_next = grid.time(i + 1);
        let yi = y[i];
        let db: f64 = rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
        let dw: f64 = rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
        y.push(yi + spec.drift.eval(t, yi) * dt + spec.sigma_bar.eval(t, yi) * db + spec.sigma.eval(t, yi) * dw);

        if rate > 0.0 {
            let mut tau = match next_jump {
                Some(tau) => tau,
                None => rng.sample::<f64, _>(Exp1) / rate,
            };
            while tau <= t_next {
                let pick: f64 = rng.random::<f64>() * rate;
                let mut acc = 0.0;
                let mut atom = atoms.len() - 1;
                for (k, a) in atoms.iter().enumerate() {
                    acc += a.mu;
                    if pick < acc {
                        atom = k;
                        break;
                    }
                }
                jumps.push(JumpDraw { t: tau, step: i, atom });
                tau += rng.sample::<f64, _>(Exp1) / rate;
            }
            next_jump = Some(tau);
        }
    }
    PathNoise { y, jumps }
}

/// Factor values at the grid nodes; the same path a liquidation run with
/// identical `(seed, path_index)` sees.
pub fn simulate_factor_path(spec: &ModelSpec, y0: f64, grid: &TimeGrid, seed: u64, path_index: u64) -> Vec<f64> {
    draw_path_noise(spec, y0, grid, seed, path_index).y
}
