//! Projection of an arbitrary control onto one that sells only and never
//! crosses zero, at no greater cost.
//!
//! Along the raw state `x`, the projected control is `ξ̂ = min(ξ⁺, x̂ / dt)`
//! and `ρ̂ = min(ρ⁺, x̂⁻)`. While `x̂ > 0` this gives `x̂ <= x`, and once `x̂`
//! reaches zero it stays there, so `|ξ̂| <= |ξ|`, `|ρ̂| <= |ρ|` and
//! `x̂ <= |x|` node by node.

use crate::error::{HjbError, Result};
use crate::model::ModelSpec;
use crate::sim::noise::{draw_path_noise, TimeGrid};
use crate::sim::policy::CustomControl;
use crate::sim::trajectory::{evaluate_cost, CostBreakdown, Trajectory};

#[derive(Clone, Debug)]
pub struct MonotonizedRun {
    pub raw: Trajectory,
    /// Path under `(ξ̂, ρ̂)`; `xi` and the fill events carry the projected control.
    pub monotone: Trajectory,
    pub raw_cost: CostBreakdown,
    pub monotone_cost: CostBreakdown,
}

/// Runs `control` and its projection on the same noise. With
/// `force_terminal`, both sell everything in the last step.
#[allow(clippy::too_many_arguments)]
pub fn monotonize_control(
    spec: &ModelSpec,
    control: &CustomControl,
    x0: f64,
    y0: f64,
    grid: &TimeGrid,
    seed: u64,
    path_index: u64,
    force_terminal: bool,
) -> Result<MonotonizedRun> {
    if !(x0 >= 0.0 && x0.is_finite()) {
        return Err(HjbError::InvalidParameter(format!(
            "monotonization needs x0 >= 0, got {x0}; use monotonize_control_signed"
        )));
    }
    let noise = draw_path_noise(spec, y0, grid, seed, path_index);
    let atoms = &spec.dark_pool.atoms;
    let n_atoms = atoms.len();
    let steps = grid.steps;
    let dt = grid.dt();
    let times = grid.times();
    let mut raw = Trajectory::start(times.clone(), noise.y.clone(), x0, n_atoms);
    let mut hat = Trajectory::start(times.clone(), noise.y.clone(), x0, n_atoms);
    raw.forced_terminal = force_terminal;
    hat.forced_terminal = force_terminal;
    let clip = |request: f64, cap: f64| request.max(0.0).min(cap);
    let mut jumps = noise.jumps.iter().peekable();

    for i in 0..steps {
        let (t0, t1) = (times[i], times[i + 1]);
        let (y0, y1) = (noise.y[i], noise.y[i + 1]);
        let (x, xh) = (raw.x_post[i], hat.x_post[i]);
        let forced = force_terminal && i + 1 == steps;

        for k in 0..n_atoms {
            let r = (control.fill)(t0, y0, x, k);
            raw.rho_start[i * n_atoms + k] = r;
            hat.rho_start[i * n_atoms + k] = clip(r, xh);
        }

        let (xm, xhm) = if forced {
            raw.xi[i] = x / dt;
            hat.xi[i] = xh / dt;
            (0.0, 0.0)
        } else {
            let rate = (control.rate)(t0, y0, x);
            raw.xi[i] = rate;
            let cap = xh / dt;
            if rate > cap {
                hat.xi[i] = cap;
                (x - rate * dt, 0.0)
            } else {
                let r = rate.max(0.0);
                hat.xi[i] = r;
                (x - rate * dt, xh - r * dt)
            }
        };

        let (mut x_now, mut xh_now) = (xm, xhm);
        while let Some(jump) = jumps.next_if(|j| j.step == i) {
            let id = atoms[jump.atom].id;
            if forced {
                raw.record_fill(i, jump.t, id, 0.0);
                hat.record_fill(i, jump.t, id, 0.0);
                continue;
            }
            let r = (control.fill)(t1, y1, x_now, jump.atom);
            let rh = clip(r, xh_now);
            x_now -= r;
            xh_now = if rh == xh_now { 0.0 } else { xh_now - rh };
            raw.record_fill(i, jump.t, id, r);
            hat.record_fill(i, jump.t, id, rh);
        }
        raw.x_pre[i + 1] = xm;
        raw.x_post[i + 1] = x_now;
        hat.x_pre[i + 1] = xhm;
        hat.x_post[i + 1] = xh_now;

        for k in 0..n_atoms {
            let r = (control.fill)(t1, y1, xm, k);
            raw.rho_end[i * n_atoms + k] = r;
            hat.rho_end[i * n_atoms + k] = clip(r, xhm);
        }
    }
    raw.accumulate(spec);
    hat.accumulate(spec);
    Ok(MonotonizedRun {
        raw_cost: evaluate_cost(&raw, spec),
        monotone_cost: evaluate_cost(&hat, spec),
        raw,
        monotone: hat,
    })
}

/// [`monotonize_control`] for either sign of `x0`; a short position is
/// handled on the mirrored problem and mapped back.
#[allow(clippy::too_many_arguments)]
pub fn monotonize_control_signed(
    spec: &ModelSpec,
    control: &CustomControl,
    x0: f64,
    y0: f64,
    grid: &TimeGrid,
    seed: u64,
    path_index: u64,
    force_terminal: bool,
) -> Result<MonotonizedRun> {
    if x0 >= 0.0 {
        return monotonize_control(spec, control, x0, y0, grid, seed, path_index, force_terminal);
    }
    let run = monotonize_control(spec, &control.mirrored(), -x0, y0, grid, seed, path_index, force_terminal)?;
    Ok(MonotonizedRun {
        raw: run.raw.negated(),
        monotone: run.monotone.negated(),
        raw_cost: run.raw_cost,
        monotone_cost: run.monotone_cost,
    })
}
