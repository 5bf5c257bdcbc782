//! Backward finite-difference solver for the finite-terminal HJB equation
//! `-∂_t u = a ∂²_y u + b ∂_y u + F(t, y, u)`, `u(T) = N`, and the singular
//! solution obtained by doubling `N`.
//!
//! Each step solves one tridiagonal system. Diffusion is implicit central,
//! drift implicit upwind, and the absorption part of `F` is linearised around
//! the previous (later-in-time) row with the truncation `M ∧ u`. The system
//! matrix is an M-matrix with a nonnegative right-hand side, so every row is
//! nonnegative and the discrete scheme inherits comparison.

use std::fmt;

use crate::closed_form::barriers;
use crate::error::{HjbError, Result};
use crate::model::{fill_fraction, validate_assumptions, ModelSpec};
use crate::pde::checks::{check_barriers, BarrierReport};
use crate::pde::field::{Grid1D, Terminal, ValueField};

/// Discretisation of the drift term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DriftScheme {
    #[default]
    Upwind,
    /// Central differences; not monotone once `|b| Δy > 2a`. Only used as a
    /// negative control for the comparison suite.
    Central,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SchemeOptions {
    pub drift: DriftScheme,
}

const NEGATIVE_TOLERANCE: f64 = 1e-12;

/// Node-wise coefficients; the families are time-homogeneous, so one
/// evaluation serves every step.
struct NodeData {
    a: Vec<f64>,
    b: Vec<f64>,
    lambda: Vec<f64>,
    inv_eta: Vec<f64>,
    /// `(μ_k, γ_k(y_j))` per atom.
    atoms: Vec<(f64, Vec<f64>)>,
}

impl NodeData {
    fn new(spec: &ModelSpec, ys: &[f64]) -> Self {
        NodeData {
            a: ys.iter().map(|&y| spec.diffusion(0.0, y)).collect(),
            b: ys.iter().map(|&y| spec.drift.eval(0.0, y)).collect(),
            lambda: ys.iter().map(|&y| spec.lambda.eval(0.0, y)).collect(),
            inv_eta: ys.iter().map(|&y| 1.0 / spec.eta.eval(0.0, y)).collect(),
            atoms: spec
                .dark_pool
                .atoms
                .iter()
                .map(|atom| (atom.mu, ys.iter().map(|&y| atom.gamma.eval(0.0, y)).collect()))
                .collect(),
        }
    }

    #[inline]
    fn absorption(&self, j: usize, u_old: f64, cap: f64) -> f64 {
        let pool: f64 = self.atoms.iter().map(|(mu, gamma)| mu * fill_fraction(gamma[j], u_old)).sum();
        pool + cap.min(u_old) * self.inv_eta[j]
    }
}

/// Solves the truncated finite-terminal problem with `u(T) = level` and
/// truncation `cap` (the `M` in `M ∧ u`).
pub fn solve_finite_terminal(spec: &ModelSpec, level: f64, cap: f64, grid: &Grid1D) -> Result<ValueField> {
    solve_finite_terminal_with(spec, level, cap, grid, SchemeOptions::default())
}

pub fn solve_finite_terminal_with(
    spec: &ModelSpec,
    level: f64,
    cap: f64,
    grid: &Grid1D,
    options: SchemeOptions,
) -> Result<ValueField> {
    validate_assumptions(spec).into_result()?;
    grid.validate()?;
    if (grid.horizon - spec.horizon).abs() > 1e-12 * spec.horizon.max(1.0) {
        return Err(HjbError::InvalidParameter(format!(
            "grid horizon {} differs from model horizon {}",
            grid.horizon, spec.horizon
        )));
    }
    if !(level >= 0.0 && level.is_finite()) {
        return Err(HjbError::InvalidParameter(format!("terminal level N must be nonnegative, got {level}")));
    }
    if !(cap > 0.0) {
        return Err(HjbError::InvalidParameter(format!("truncation level M must be positive, got {cap}")));
    }

    let n = grid.n_y;
    let steps = grid.steps();
    let ys = grid.ys();
    let times = grid.times();
    let nodes = NodeData::new(spec, &ys);
    let dy = grid.dy();
    let inv_dy2 = 1.0 / (dy * dy);

    let mut values = vec![0.0; (steps + 1) * n];
    values[steps * n..].fill(level);

    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut scratch = vec![0.0; n];

    for i in (0..steps).rev() {
        let dt = times[i + 1] - times[i];
        let inv_dt = 1.0 / dt;
        let (head, tail) = values.split_at_mut((i + 1) * n);
        let old = &tail[..n];
        let new = &mut head[i * n..];

        for j in 0..n {
            let a = nodes.a[j];
            let b = nodes.b[j];
            let k = nodes.absorption(j, old[j], cap);
            let (lo, up) = if j == 0 {
                (0.0, 2.0 * a * inv_dy2)
            } else if j == n - 1 {
                (2.0 * a * inv_dy2, 0.0)
            } else {
                match options.drift {
                    DriftScheme::Upwind => {
                        (a * inv_dy2 + (-b).max(0.0) / dy, a * inv_dy2 + b.max(0.0) / dy)
                    }
                    DriftScheme::Central => (a * inv_dy2 - 0.5 * b / dy, a * inv_dy2 + 0.5 * b / dy),
                }
            };
            lower[j] = -lo;
            upper[j] = -up;
            diag[j] = inv_dt + k + lo + up;
            rhs[j] = old[j] * inv_dt + nodes.lambda[j];
        }
        thomas(&lower, &diag, &upper, &mut rhs, &mut scratch);

        for j in 0..n {
            let v = rhs[j];
            if !(v >= -NEGATIVE_TOLERANCE) {
                return Err(HjbError::NegativeValue { t: times[i], y: ys[j], value: v });
            }
            new[j] = v.max(0.0);
        }
    }

    Ok(ValueField { grid: *grid, times, values, terminal: Terminal::Finite(level) })
}

/// Tridiagonal solve in place; `rhs` becomes the solution.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], c_prime: &mut [f64]) {
    let n = diag.len();
    c_prime[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for j in 1..n {
        let m = diag[j] - lower[j] * c_prime[j - 1];
        c_prime[j] = upper[j] / m;
        rhs[j] = (rhs[j] - lower[j] * rhs[j - 1]) / m;
    }
    for j in (0..n - 1).rev() {
        rhs[j] -= c_prime[j] * rhs[j + 1];
    }
}

/// The truncation level above which the finite-`N` solution no longer depends on `M`.
pub fn inactive_cap(spec: &ModelSpec, level: f64) -> f64 {
    level + spec.constants().bound * spec.horizon + 1.0
}

/// Finite-terminal solve with an inactive truncation; asserts `0 <= u <= N + ΛT`.
pub fn solve_finite(spec: &ModelSpec, level: f64, grid: &Grid1D) -> Result<ValueField> {
    solve_finite_with(spec, level, grid, SchemeOptions::default())
}

pub fn solve_finite_with(spec: &ModelSpec, level: f64, grid: &Grid1D, options: SchemeOptions) -> Result<ValueField> {
    let field = solve_finite_terminal_with(spec, level, inactive_cap(spec, level), grid, options)?;
    let bound = level + spec.constants().bound * spec.horizon;
    let max = field.max_value();
    if max > bound * (1.0 + 1e-10) + 1e-12 {
        return Err(HjbError::BoundViolated { bound, value: max });
    }
    Ok(field)
}

/// Controls for [`solve_singular`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingularOptions {
    /// Width of the excluded terminal layer `(T - delta, T]`.
    pub delta: f64,
    /// Relative sup-norm tolerance between consecutive rungs.
    pub tol: f64,
    /// First rung `N₀`.
    pub n0: f64,
    pub max_rungs: usize,
}

impl SingularOptions {
    /// `delta = 0.05 T`, `tol = 1e-4`, `N₀ = 8 / delta`.
    pub fn for_horizon(horizon: f64) -> Self {
        let delta = 0.05 * horizon;
        SingularOptions { delta, tol: 1e-4, n0: 8.0 / delta, max_rungs: 40 }
    }
}

#[derive(Clone, Debug)]
pub struct SingularSolveReport {
    /// Terminal levels `N₀ 2^k` that were solved.
    pub ladder: Vec<f64>,
    /// `sup |u^{2N} - u^N| / u^N` on `t <= T - delta`, one per doubling.
    pub deltas: Vec<f64>,
    pub deltas_decreasing: bool,
    pub converged: bool,
    pub barrier: BarrierReport,
    /// Last rung restricted to `t <= T - delta`.
    pub field: ValueField,
    pub delta: f64,
    pub tol: f64,
    /// Ellipticity below `1e-6`: outside the regime the scheme was validated for.
    pub weak_ellipticity: bool,
}

impl fmt::Display for SingularSolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "singular solve: delta={} tol={:e} rungs={}", self.delta, self.tol, self.ladder.len())?;
        for (k, level) in self.ladder.iter().enumerate() {
            match k.checked_sub(1).and_then(|d| self.deltas.get(d)) {
                Some(d) => writeln!(f, "  rung {k:2}  N={level:<14e} rel_delta={d:.6e}")?,
                None => writeln!(f, "  rung {k:2}  N={level:<14e}")?,
            }
        }
        writeln!(f, "deltas decreasing: {}", self.deltas_decreasing)?;
        writeln!(f, "converged: {}", self.converged)?;
        if self.weak_ellipticity {
            writeln!(f, "warning: kappa < 1e-6, outside the validated regime")?;
        }
        write!(f, "{}", self.barrier)
    }
}

/// Doubles `N` from `N₀` until consecutive fields agree to `tol` (relative,
/// sup over nodes with `t <= T - delta`).
pub fn solve_singular(spec: &ModelSpec, grid: &Grid1D, options: &SingularOptions) -> Result<SingularSolveReport> {
    solve_singular_with(spec, grid, options, SchemeOptions::default())
}

pub fn solve_singular_with(
    spec: &ModelSpec,
    grid: &Grid1D,
    options: &SingularOptions,
    scheme: SchemeOptions,
) -> Result<SingularSolveReport> {
    let SingularOptions { delta, tol, n0, max_rungs } = *options;
    if !(delta > 0.0 && delta < spec.horizon) {
        return Err(HjbError::InvalidParameter(format!("terminal cutoff must lie in (0, T), got {delta}")));
    }
    if !(tol > 0.0) {
        return Err(HjbError::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    if !(n0 > 0.0 && n0.is_finite()) {
        return Err(HjbError::InvalidParameter(format!("first rung must be positive, got {n0}")));
    }
    let pair = barriers(spec)?;
    let t_cut = spec.horizon - delta;
    let rows = grid.times().iter().take_while(|&&t| t <= t_cut + 1e-12).count();
    if rows == 0 {
        return Err(HjbError::InvalidParameter("no grid rows below T - delta".into()));
    }
    let active = rows * grid.n_y;

    let mut level = n0;
    let mut ladder = vec![level];
    let mut deltas = Vec::new();
    let mut current = solve_finite_with(spec, level, grid, scheme)?;
    let mut converged = tol.is_infinite();

    while !converged {
        if ladder.len() >= max_rungs {
            return Err(HjbError::LadderDiverged {
                rungs: ladder.len(),
                last_delta: deltas.last().copied().unwrap_or(f64::NAN),
            });
        }
        let next_level = 2.0 * level;
        let next = solve_finite_with(spec, next_level, grid, scheme)?;
        let mut worst = 0.0_f64;
        let mut worst_drop = 0.0_f64;
        for (lo, hi) in current.values[..active].iter().zip(&next.values[..active]) {
            worst_drop = worst_drop.min(hi - lo);
            let rel = if *lo > 0.0 {
                (hi - lo).abs() / lo
            } else if *hi > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            worst = worst.max(rel);
        }
        if worst_drop < -1e-8 {
            return Err(HjbError::MonotonicityViolated { n: level, gap: worst_drop });
        }
        deltas.push(worst);
        ladder.push(next_level);
        level = next_level;
        current = next;
        converged = worst < tol;
    }

    let deltas_decreasing = deltas.windows(2).all(|w| w[1] < w[0]);
    let mut field = current.restricted(t_cut);
    field.terminal = Terminal::Singular { level, delta };
    let barrier = check_barriers(&field, &pair, delta);
    Ok(SingularSolveReport {
        ladder,
        deltas,
        deltas_decreasing,
        converged,
        barrier,
        field,
        delta,
        tol,
        weak_ellipticity: spec.constants().kappa < 1e-6,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{u_bar_n, u_tilde_n};
    use crate::model::{CoefficientField, DarkPoolMeasure};

    fn constant_spec(lambda: f64, eta: f64, pool: DarkPoolMeasure) -> ModelSpec {
        ModelSpec {
            drift: CoefficientField::constant(0.0),
            sigma: CoefficientField::constant(0.0),
            sigma_bar: CoefficientField::constant(1.0),
            eta: CoefficientField::constant(eta),
            lambda: CoefficientField::constant(lambda),
            dark_pool: pool,
            horizon: 1.0,
        }
    }

    fn small_grid(dt: f64) -> Grid1D {
        Grid1D::new(-2.0, 2.0, 9, dt, 1.0).unwrap()
    }

    #[test]
    fn thomas_solves_a_known_system() {
        let lower = [0.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0];
        let upper = [-1.0, -1.0, 0.0];
        let mut rhs = [1.0, 0.0, 1.0];
        let mut scratch = [0.0; 3];
        thomas(&lower, &diag, &upper, &mut rhs, &mut scratch);
        for v in rhs {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn upper_envelope_is_reproduced() {
        let spec = constant_spec(1.0, 1.0, DarkPoolMeasure::empty());
        let field = solve_finite(&spec, 10.0, &small_grid(1e-3)).unwrap();
        for (i, t) in field.times.iter().enumerate() {
            let exact = u_tilde_n(1.0, 10.0, 1.0, *t).unwrap();
            for &u in field.row(i) {
                assert!((u - exact).abs() / exact < 1e-3, "t={t}: {u} vs {exact}");
            }
        }
    }

    #[test]
    fn lower_envelope_is_reproduced() {
        let spec = constant_spec(0.0, 1.0, DarkPoolMeasure::single(CoefficientField::constant(0.0), 1.0));
        let field = solve_finite(&spec, 10.0, &small_grid(1e-3)).unwrap();
        for (i, t) in field.times.iter().enumerate() {
            let exact = u_bar_n(1.0, 1.0, 10.0, 1.0, *t).unwrap();
            for &u in field.row(i) {
                assert!((u - exact).abs() / exact < 1e-3, "t={t}: {u} vs {exact}");
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let spec = constant_spec(0.0, 1.0, DarkPoolMeasure::empty());
        let field = solve_finite(&spec, 0.0, &small_grid(0.01)).unwrap();
        assert!(field.values.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn truncation_is_inactive_above_threshold() {
        let mut spec = constant_spec(2.0, 1.5, DarkPoolMeasure::single(CoefficientField::constant(0.5), 1.0));
        spec.lambda = CoefficientField::tanh_affine(1.0, 1.0, 1.0);
        spec.sigma_bar = CoefficientField::constant(2.0);
        let grid = small_grid(0.01);
        let a = solve_finite_terminal(&spec, 10.0, 13.0, &grid).unwrap();
        let b = solve_finite_terminal(&spec, 10.0, 50.0, &grid).unwrap();
        assert!(a.sup_distance(&b) <= 1e-10);
        let bound = 10.0 + 2.0;
        assert!(a.max_value() <= bound);
    }

    #[test]
    fn active_truncation_changes_the_solution() {
        let spec = constant_spec(1.0, 1.0, DarkPoolMeasure::empty());
        let grid = small_grid(0.01);
        let capped = solve_finite_terminal(&spec, 10.0, 1.0, &grid).unwrap();
        let free = solve_finite(&spec, 10.0, &grid).unwrap();
        assert!(capped.at(0, 4) > free.at(0, 4) + 1e-3);
    }

    #[test]
    fn rejects_failed_assumptions_and_bad_inputs() {
        let bad = constant_spec(1.0, 0.0, DarkPoolMeasure::empty());
        assert!(matches!(solve_finite(&bad, 1.0, &small_grid(0.01)), Err(HjbError::AssumptionFailed { .. })));
        let spec = constant_spec(1.0, 1.0, DarkPoolMeasure::empty());
        assert!(solve_finite_terminal(&spec, 1.0, 0.0, &small_grid(0.01)).is_err());
        assert!(solve_finite(&spec, -1.0, &small_grid(0.01)).is_err());
    }

    #[test]
    fn singular_with_infinite_tolerance_returns_first_rung() {
        let spec = constant_spec(1.0, 1.0, DarkPoolMeasure::empty());
        let grid = small_grid(0.01);
        let mut options = SingularOptions::for_horizon(1.0);
        options.tol = f64::INFINITY;
        let report = solve_singular(&spec, &grid, &options).unwrap();
        assert_eq!(report.ladder, vec![options.n0]);
        assert!(report.deltas.is_empty());
        let first = solve_finite(&spec, options.n0, &grid).unwrap().restricted(1.0 - options.delta);
        assert_eq!(report.field.values, first.values);
        assert!(report.field.t_end() <= 0.95 + 1e-12);
    }

    #[test]
    fn singular_ladder_converges_monotonically() {
        let mut spec = constant_spec(1.0, 1.0, DarkPoolMeasure::single(CoefficientField::constant(1.0), 0.5));
        spec.lambda = CoefficientField::tanh_affine(0.8, 0.2, 1.0);
        let grid = Grid1D::new(-3.0, 3.0, 13, 0.01, 1.0).unwrap();
        let report = solve_singular(&spec, &grid, &SingularOptions::for_horizon(1.0)).unwrap();
        assert!(report.converged);
        assert!(report.deltas_decreasing, "{:?}", report.deltas);
        assert!(report.barrier.passed, "{}", report.barrier);
    }

    #[test]
    fn singular_rejects_bad_cutoff() {
        let spec = constant_spec(1.0, 1.0, DarkPoolMeasure::empty());
        let mut options = SingularOptions::for_horizon(1.0);
        options.delta = 1.5;
        assert!(solve_singular(&spec, &small_grid(0.01), &options).is_err());
    }

    #[test]
    fn ladder_cap_is_enforced() {
        let spec = constant_spec(1.0, 1.0, DarkPoolMeasure::empty());
        let mut options = SingularOptions::for_horizon(1.0);
        options.tol = 1e-300;
        options.max_rungs = 3;
        assert!(matches!(
            solve_singular(&spec, &small_grid(0.01), &options),
            Err(HjbError::LadderDiverged { rungs: 3, .. })
        ));
    }
}
