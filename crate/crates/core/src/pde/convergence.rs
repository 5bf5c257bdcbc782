//! Grid-refinement studies: temporal error against the ODE oracle, spatial
//! self-differences, and sensitivity to the truncated factor box.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::closed_form::riccati_solve;
use crate::error::{HjbError, Result};
use crate::model::ModelSpec;
use crate::pde::field::Grid1D;
use crate::pde::solver::solve_finite;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    /// Relative error against the ODE oracle.
    Temporal,
    /// Sup difference between consecutive spatial refinements.
    Spatial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub dy: f64,
    pub level: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub kind: StudyKind,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceStudy {
    fn step(&self, row: &ConvergenceRow) -> f64 {
        match self.kind {
            StudyKind::Temporal => row.dt,
            StudyKind::Spatial => row.dy,
        }
    }

    /// Orders between consecutive rows, `ln(e_k/e_{k+1}) / ln(h_k/h_{k+1})`.
    pub fn pairwise_orders(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| (w[0].error / w[1].error).ln() / (self.step(&w[0]) / self.step(&w[1])).ln())
            .collect()
    }

    /// Least-squares slope of `ln e` against `ln h`; `None` with fewer than two rows.
    pub fn observed_order(&self) -> Option<f64> {
        if self.rows.len() < 2 {
            return None;
        }
        let pts: Vec<(f64, f64)> = self.rows.iter().map(|r| (self.step(r).ln(), r.error.ln())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let label = match self.kind {
            StudyKind::Temporal => "error_vs_oracle",
            StudyKind::Spatial => "self_difference",
        };
        writeln!(out, "dt,dy,N,{label}")?;
        for r in &self.rows {
            writeln!(out, "{:.6e},{:.6e},{},{:.12e}", r.dt, r.dy, r.level, r.error)?;
        }
        Ok(())
    }
}

impl fmt::Display for ConvergenceStudy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            StudyKind::Temporal => "temporal",
            StudyKind::Spatial => "spatial",
        };
        writeln!(f, "{name} study ({} rows)", self.rows.len())?;
        for r in &self.rows {
            writeln!(f, "  dt={:<10.3e} dy={:<10.3e} N={:<8} err={:.6e}", r.dt, r.dy, r.level, r.error)?;
        }
        if let Some(p) = self.observed_order() {
            writeln!(f, "  observed order {p:.3}")?;
        }
        Ok(())
    }
}

/// Relative sup error of the PDE solution against the ODE oracle for each `dt`.
pub fn temporal_study(spec: &ModelSpec, level: f64, y_box: (f64, f64), n_y: usize, dts: &[f64]) -> Result<ConvergenceStudy> {
    let mut rows = Vec::with_capacity(dts.len());
    for &dt in dts {
        let grid = Grid1D::new(y_box.0, y_box.1, n_y, dt, spec.horizon)?;
        let field = solve_finite(spec, level, &grid)?;
        let oracle = riccati_solve(spec, level, &field.times)?;
        // oracle times run from T downwards
        let steps = field.n_times() - 1;
        let mut error = 0.0_f64;
        for (k, &w) in oracle.values.iter().enumerate() {
            let row = field.row(steps - k);
            for &u in row {
                let rel = if w > 0.0 { (u - w).abs() / w } else { u.abs() };
                error = error.max(rel);
            }
        }
        rows.push(ConvergenceRow { dt, dy: grid.dy(), level, error });
    }
    Ok(ConvergenceStudy { kind: StudyKind::Temporal, rows })
}

/// Sup difference at `t = 0` between solutions on `n_y` and `2 n_y - 1` nodes,
/// then between `2 n_y - 1` and `4 n_y - 3`, and so on, on the coarser nodes.
pub fn spatial_study(
    spec: &ModelSpec,
    level: f64,
    y_box: (f64, f64),
    n_y: usize,
    refinements: usize,
    dt: f64,
) -> Result<ConvergenceStudy> {
    let mut counts = vec![n_y];
    for _ in 0..=refinements {
        let last = *counts.last().unwrap();
        counts.push(2 * last - 1);
    }
    let mut initial_rows = Vec::with_capacity(counts.len());
    for &n in &counts {
        let grid = Grid1D::new(y_box.0, y_box.1, n, dt, spec.horizon)?;
        let field = solve_finite(spec, level, &grid)?;
        initial_rows.push((grid.dy(), field.row(0).to_vec()));
    }
    let rows = initial_rows
        .windows(2)
        .map(|w| {
            let (dy, coarse) = (&w[0].0, &w[0].1);
            let fine = &w[1].1;
            let error = coarse.iter().enumerate().map(|(j, c)| (c - fine[2 * j]).abs()).fold(0.0, f64::max);
            ConvergenceRow { dt, dy: *dy, level, error }
        })
        .collect();
    Ok(ConvergenceStudy { kind: StudyKind::Spatial, rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DomainDoublingReport {
    pub half_width: f64,
    /// `max |u_wide - u_narrow| / u_narrow` over all times on `|y| <= half_width / 2`.
    pub max_relative_change: f64,
}

/// Compares `[-L, L]` with `[-2L, 2L]` at equal spacing.
pub fn domain_doubling(spec: &ModelSpec, level: f64, half_width: f64, n_y: usize, dt: f64) -> Result<DomainDoublingReport> {
    if n_y.is_multiple_of(2) {
        return Err(HjbError::InvalidParameter("domain doubling needs an odd node count".into()));
    }
    let narrow = Grid1D::new(-half_width, half_width, n_y, dt, spec.horizon)?;
    let wide = Grid1D::new(-2.0 * half_width, 2.0 * half_width, 2 * n_y - 1, dt, spec.horizon)?;
    let u_narrow = solve_finite(spec, level, &narrow)?;
    let u_wide = solve_finite(spec, level, &wide)?;
    let offset = (n_y - 1) / 2;
    let ys = narrow.ys();
    let mut worst = 0.0_f64;
    for i in 0..u_narrow.n_times() {
        for (j, &y) in ys.iter().enumerate() {
            if y.abs() > 0.5 * half_width + 1e-12 {
                continue;
            }
            let a = u_narrow.at(i, j);
            let b = u_wide.at(i, j + offset);
            worst = worst.max(if a > 0.0 { (a - b).abs() / a } else { b.abs() });
        }
    }
    Ok(DomainDoublingReport { half_width, max_relative_change: worst })
}
