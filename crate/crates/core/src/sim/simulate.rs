use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HjbError, Result};
use crate::model::ModelSpec;
use crate::sim::noise::{draw_path_noise, PathNoise, TimeGrid};
use crate::sim::policy::Policy;
use crate::sim::trajectory::{evaluate_cost, Trajectory};

/// Simulates one controlled path. The last step always sells the remaining
/// inventory at rate `x / dt`, so `x(T) = 0`.
pub fn simulate_liquidation(
    spec: &ModelSpec,
    policy: &Policy,
    x0: f64,
    y0: f64,
    grid: &TimeGrid,
    seed: u64,
    path_index: u64,
) -> Result<Trajectory> {
    check_inputs(spec, policy, x0, y0, grid)?;
    let noise = draw_path_noise(spec, y0, grid, seed, path_index);
    run_policy(spec, policy, x0, grid, &noise)
}

fn check_inputs(spec: &ModelSpec, policy: &Policy, x0: f64, y0: f64, grid: &TimeGrid) -> Result<()> {
    if !(x0.is_finite() && y0.is_finite()) {
        return Err(HjbError::InvalidParameter(format!("x0 and y0 must be finite, got x0={x0} y0={y0}")));
    }
    if (grid.horizon - spec.horizon).abs() > 1e-12 * spec.horizon.max(1.0) {
        return Err(HjbError::InvalidParameter(format!(
            "simulation horizon {} differs from model horizon {}",
            grid.horizon, spec.horizon
        )));
    }
    if let Policy::Feedback(src) = policy {
        if let Some(h) = src.horizon() {
            if (h - spec.horizon).abs() > 1e-12 * spec.horizon.max(1.0) {
                return Err(HjbError::InvalidParameter(format!(
                    "value source horizon {h} differs from model horizon {}",
                    spec.horizon
                )));
            }
        }
    }
    Ok(())
}

pub(crate) fn run_policy(
    spec: &ModelSpec,
    policy: &Policy,
    x0: f64,
    grid: &TimeGrid,
    noise: &PathNoise,
) -> Result<Trajectory> {
    let atoms = &spec.dark_pool.atoms;
    let n_atoms = atoms.len();
    let steps = grid.steps;
    let dt = grid.dt();
    let times = grid.times();
    let mut traj = Trajectory::start(times.clone(), noise.y.clone(), x0, n_atoms);
    traj.forced_terminal = true;
    let twap_rate = x0 / grid.horizon;
    let mut jumps = noise.jumps.iter().peekable();

    for i in 0..steps {
        let (t0, t1) = (times[i], times[i + 1]);
        let (y0, y1) = (noise.y[i], noise.y[i + 1]);
        let x = traj.x_post[i];
        let last = i + 1 == steps;

        for k in 0..n_atoms {
            traj.rho_start[i * n_atoms + k] = policy.fill(spec, t0, y0, x, k)?;
        }

        let x_minus = if last {
            0.0
        } else {
            match policy {
                Policy::Feedback(src) => {
                    if x == 0.0 {
                        0.0
                    } else {
                        x * (-src.integral(t0, t1, y0)? / spec.eta.eval(t0, y0)).exp()
                    }
                }
                Policy::Twap => x - twap_rate * dt,
                Policy::Custom(c) => x - (c.rate)(t0, y0, x) * dt,
            }
        };
        traj.xi[i] = if last { x / dt } else { (x - x_minus) / dt };

        let mut x_now = x_minus;
        while let Some(jump) = jumps.next_if(|j| j.step == i) {
            let atom_id = atoms[jump.atom].id;
            let size = if last { 0.0 } else { policy.fill(spec, t1, y1, x_now, jump.atom)? };
            if policy.is_monotone() && !(size >= 0.0 && size <= x_now.abs() * (1.0 + 1e-12)) {
                return Err(HjbError::Overshoot { t: jump.t, fill: size, inventory: x_now });
            }
            x_now -= size;
            traj.record_fill(i, jump.t, atom_id, size);
        }
        traj.x_pre[i + 1] = x_minus;
        traj.x_post[i + 1] = x_now;

        for k in 0..n_atoms {
            traj.rho_end[i * n_atoms + k] = policy.fill(spec, t1, y1, x_minus, k)?;
        }
    }
    traj.accumulate(spec);
    Ok(traj)
}

/// Sample mean and standard error of path costs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub paths: usize,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0);
        McEstimate { mean, se: (var / n).sqrt(), paths: samples.len(), seed }
    }
}

impl fmt::Display for McEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mean={:.12} se={:.12} n={} seed={}", self.mean, self.se, self.paths, self.seed)
    }
}

/// Path costs in index order.
pub fn path_costs(
    spec: &ModelSpec,
    policy: &Policy,
    x0: f64,
    y0: f64,
    grid: &TimeGrid,
    paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_inputs(spec, policy, x0, y0, grid)?;
    (0..paths as u64)
        .into_par_iter()
        .map(|k| {
            let noise = draw_path_noise(spec, y0, grid, seed, k);
            run_policy(spec, policy, x0, grid, &noise).map(|t| evaluate_cost(&t, spec).total)
        })
        .collect()
}

/// Monte Carlo estimate of the expected cost on the current rayon pool.
/// Results depend only on `(seed, paths)`, never on the worker count.
pub fn mc_value_estimate(
    spec: &ModelSpec,
    policy: &Policy,
    x0: f64,
    y0: f64,
    grid: &TimeGrid,
    paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    if paths < 2 {
        return Err(HjbError::InvalidParameter(format!("need at least 2 paths, got {paths}")));
    }
    let costs = path_costs(spec, policy, x0, y0, grid, paths, seed)?;
    Ok(McEstimate::from_samples(&costs, seed))
}

/// [`mc_value_estimate`] on a dedicated pool of `workers` threads.
#[allow(clippy::too_many_arguments)]
pub fn mc_value_estimate_with_workers(
    spec: &ModelSpec,
    policy: &Policy,
    x0: f64,
    y0: f64,
    grid: &TimeGrid,
    paths: usize,
    seed: u64,
    workers: usize,
) -> Result<McEstimate> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HjbError::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| mc_value_estimate(spec, policy, x0, y0, grid, paths, seed))
}
