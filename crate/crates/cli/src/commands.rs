//! The four subcommands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;
use singular_hjb::closed_form::{barriers, riccati_solve};
use singular_hjb::model::{validate_assumptions, CoefficientField, ModelSpec};
use singular_hjb::pde::{
    check_comparison_with, inactive_cap, solve_finite_terminal_with, solve_finite_with, solve_singular_with,
    spatial_study, temporal_study, SchemeOptions, ValueField,
};
use singular_hjb::sim::{
    check_admissibility_estimate, check_state_decay, decay_bound, mc_value_estimate_with_workers,
    monotonize_control, simulate_liquidation, CustomControl, McEstimate, Policy, ValueSource,
};
use singular_hjb::sim::checks::DECAY_SLACK;
use singular_hjb::HjbError;

use crate::config::{PolicyName, Run, Suite};

/// Outcome of a subcommand that did not fault.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    VerificationFailed,
}

pub const THREADS_VAR: &str = "SINGULAR_HJB_THREADS";

/// Worker cap from `SINGULAR_HJB_THREADS`, else the available parallelism.
pub fn workers() -> Result<usize> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("{THREADS_VAR}={v:?} is not a count"))?;
            ensure!(n >= 1, "{THREADS_VAR} must be at least 1");
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn scheme(run: &Run) -> SchemeOptions {
    SchemeOptions { drift: run.drift() }
}

pub fn cmd_solve(run: &Run) -> Result<Status> {
    let spec = &run.model.spec;
    let assumptions = validate_assumptions(spec);
    let text = assumptions.to_string();
    assumptions.into_result()?;
    let report = solve_singular_with(spec, &run.grid()?, &run.singular_options(), scheme(run))?;

    let mut csv = create(&run.out, "field.csv")?;
    report.field.write_csv(&mut csv)?;
    csv.flush()?;
    let mut bin = create(&run.out, "field.bin")?;
    report.field.write_binary(&mut bin)?;
    bin.flush()?;
    let mut txt = create(&run.out, "solve_report.txt")?;
    write!(txt, "{text}\n{report}")?;
    txt.flush()?;

    print!("{report}");
    Ok(if report.barrier.passed { Status::Success } else { Status::VerificationFailed })
}

fn load_field(path: &Path) -> Result<ValueField> {
    let f = File::open(path).with_context(|| format!("opening field file {}", path.display()))?;
    ValueField::read_binary(std::io::BufReader::new(f)).with_context(|| format!("reading field file {}", path.display()))
}

/// Field file from `[mc].field`, the closed form of a preset, or `<out>/field.bin`.
fn value_source(run: &Run) -> Result<ValueSource> {
    let path: PathBuf = match (&run.config.mc.field, &run.model.preset) {
        (Some(p), _) => run.base_dir.join(p),
        (None, Some(p)) => return Ok(p.value.clone()),
        (None, None) => run.out.join("field.bin"),
    };
    let field = load_field(&path)?;
    let (a, b) = (field.horizon(), run.horizon());
    ensure!((a - b).abs() <= 1e-12 * b, "field horizon {a} does not match the model horizon {b}");
    Ok(ValueSource::field(field))
}

pub fn cmd_simulate(run: &Run) -> Result<Status> {
    let spec = &run.model.spec;
    validate_assumptions(spec).into_result()?;
    let mc = &run.config.mc;
    let grid = run.time_grid()?;
    let workers = workers()?;
    let needs_value = mc.policies.contains(&PolicyName::Feedback);
    let value = if needs_value { Some(value_source(run)?) } else { None };

    let mut lines = String::new();
    let mut estimates: Vec<(PolicyName, McEstimate)> = Vec::new();
    for &name in &mc.policies {
        let policy = match name {
            PolicyName::Feedback => Policy::Feedback(value.clone().expect("loaded above")),
            PolicyName::Twap => Policy::Twap,
        };
        let est = mc_value_estimate_with_workers(spec, &policy, mc.x0, mc.y0, &grid, mc.paths, mc.seed, workers)?;
        lines.push_str(&format!("{} {est}\n", name.as_str()));
        for k in 0..mc.trajectories.min(mc.paths) {
            let traj = simulate_liquidation(spec, &policy, mc.x0, mc.y0, &grid, mc.seed, k as u64)?;
            let mut out = create(&run.out.join("trajectories"), &format!("{}_{k:05}.csv", name.as_str()))?;
            traj.write_csv(&mut out)?;
            out.flush()?;
        }
        estimates.push((name, est));
    }
    let find = |n: PolicyName| estimates.iter().find(|e| e.0 == n).map(|e| e.1);
    if let (Some(fb), Some(tw)) = (find(PolicyName::Feedback), find(PolicyName::Twap)) {
        let se = (fb.se * fb.se + tw.se * tw.se).sqrt();
        lines.push_str(&format!("gap twap-feedback={:.12} se={:.12}\n", tw.mean - fb.mean, se));
    }
    let mut out = create(&run.out, "mc_estimates.txt")?;
    out.write_all(lines.as_bytes())?;
    out.flush()?;
    print!("{lines}");
    Ok(Status::Success)
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub suite: &'static str,
    pub status: &'static str,
    /// Distance to the failure threshold; negative means failed.
    pub worst_margin: f64,
    pub detail: String,
}

fn verdict(suite: Suite, passed: bool, worst_margin: f64, detail: String) -> SuiteResult {
    SuiteResult { suite: suite.as_str(), status: if passed { "pass" } else { "fail" }, worst_margin, detail }
}

fn shifted(field: &CoefficientField, by: f64) -> CoefficientField {
    match *field {
        CoefficientField::Constant { value } => CoefficientField::constant(value + by),
        CoefficientField::TanhAffine { base, amplitude, slope } => CoefficientField::tanh_affine(base + by, amplitude, slope),
        CoefficientField::BoundedSin { base, amplitude, frequency } => {
            CoefficientField::bounded_sin(base + by, amplitude, frequency)
        }
    }
}

fn suite_oracle(run: &Run) -> Result<SuiteResult> {
    let spec = &run.model.spec;
    let level = run.config.verify.level;
    if !spec.is_factor_independent() {
        return Ok(SuiteResult {
            suite: Suite::Oracle.as_str(),
            status: "skipped",
            worst_margin: f64::NAN,
            detail: "model depends on the factor; no ODE oracle".into(),
        });
    }
    let field = solve_finite_with(spec, level, &run.grid()?, scheme(run))?;
    let ode = riccati_solve(spec, level, &field.times)?;
    let steps = field.n_times() - 1;
    let mut err = 0.0_f64;
    for (k, &w) in ode.values.iter().enumerate() {
        for &u in field.row(steps - k) {
            err = err.max((u - w).abs() / w);
        }
    }
    let tol = 1e-3;
    Ok(verdict(Suite::Oracle, err < tol, tol - err, format!("max rel err vs ODE {err:.3e} (< {tol:e})")))
}

fn suite_m_independence(run: &Run) -> Result<SuiteResult> {
    let spec = &run.model.spec;
    let level = run.config.verify.level;
    let grid = run.grid()?;
    let cap = inactive_cap(spec, level);
    let a = solve_finite_terminal_with(spec, level, cap, &grid, scheme(run))?;
    let b = solve_finite_terminal_with(spec, level, 10.0 * (cap - 1.0), &grid, scheme(run))?;
    let d = a.sup_distance(&b);
    let tol = 1e-10;
    Ok(verdict(Suite::MIndependence, d <= tol, tol - d, format!("sup |u(M) - u(10M)| = {d:.3e} (<= {tol:e})")))
}

fn suite_n_monotonicity(run: &Run) -> Result<SuiteResult> {
    let spec = &run.model.spec;
    let grid = run.grid()?;
    let mut level = run.config.verify.level;
    let mut lower = solve_finite_with(spec, level, &grid, scheme(run))?;
    let mut gap = f64::INFINITY;
    for _ in 0..4 {
        level *= 2.0;
        let upper = solve_finite_with(spec, level, &grid, scheme(run))?;
        for (lo, hi) in lower.values.iter().zip(&upper.values) {
            gap = gap.min(hi - lo);
        }
        lower = upper;
    }
    let tol = 1e-8;
    Ok(verdict(
        Suite::NMonotonicity,
        gap >= -tol,
        gap + tol,
        format!("min(u^2N - u^N) over 4 doublings = {gap:.3e} (>= -{tol:e})"),
    ))
}

fn suite_comparison(run: &Run) -> Result<SuiteResult> {
    let low = &run.model.spec;
    let high = match &run.config.verify.compare_with {
        Some(name) => crate::config::resolve_model(name, &run.base_dir)?.spec,
        None => ModelSpec { lambda: shifted(&low.lambda, 0.5), ..low.clone() },
    };
    let level = run.config.verify.level;
    match check_comparison_with(low, &high, level, &run.grid()?, scheme(run)) {
        Ok(rep) => Ok(verdict(
            Suite::Comparison,
            rep.passed,
            (rep.min_gap + singular_hjb::pde::checks::COMPARISON_TOLERANCE).min(rep.min_value),
            format!("min(u_high - u_low) = {:.3e} at t={:.4} y={:.4}; min value {:.3e}", rep.min_gap, rep.worst_t, rep.worst_y, rep.min_value),
        )),
        // a scheme that loses positivity has already failed the comparison principle
        Err(HjbError::NegativeValue { t, y, value }) => Ok(verdict(
            Suite::Comparison,
            false,
            value,
            format!("negative value {value:.3e} at t={t:.4} y={y:.4}"),
        )),
        Err(e) => Err(e.into()),
    }
}

fn suite_barriers(run: &Run) -> Result<(SuiteResult, ValueField)> {
    let report = solve_singular_with(&run.model.spec, &run.grid()?, &run.singular_options(), scheme(run))?;
    let b = &report.barrier;
    let margin = b.lower_margin.min(b.upper_margin) + b.tolerance;
    let detail = format!(
        "lower margin {:.4} upper margin {:.4} (>= -{}), {} rungs",
        b.lower_margin,
        b.upper_margin,
        b.tolerance,
        report.ladder.len()
    );
    Ok((verdict(Suite::Barriers, b.passed, margin, detail), report.field))
}

fn suite_decay(run: &Run, field: Option<ValueField>) -> Result<SuiteResult> {
    let spec = &run.model.spec;
    let value = match (&run.model.preset, field) {
        (Some(p), _) => p.value.clone(),
        (None, Some(f)) => ValueSource::Field(Arc::new(f)),
        (None, None) => {
            ValueSource::field(solve_singular_with(spec, &run.grid()?, &run.singular_options(), scheme(run))?.field)
        }
    };
    let pair = barriers(spec)?;
    let bound = spec.constants().bound;
    let policy = Policy::Feedback(value);
    let mc = &run.config.mc;
    let grid = run.time_grid()?;
    let (mut worst, mut all, mut zero) = (0.0_f64, true, true);
    for k in 0..run.config.verify.paths {
        let t = simulate_liquidation(spec, &policy, mc.x0, mc.y0, &grid, mc.seed, k as u64)?;
        let d = check_state_decay(&t, &pair, bound);
        all &= d.passed;
        zero &= d.terminal_zero;
        worst = worst.max(d.worst_ratio);
    }
    let exponent = pair.c0 / bound;
    Ok(verdict(
        Suite::Decay,
        all && zero,
        1.0 + DECAY_SLACK - worst,
        format!(
            "{} paths: worst |x| / {:.3e}-envelope ratio {worst:.4} (<= {}), x(T)=0 on all: {zero}",
            run.config.verify.paths,
            decay_bound(1.0, 0.0, spec.horizon, exponent),
            1.0 + DECAY_SLACK
        ),
    ))
}

/// Weyl sequence in `[0, 1)`.
fn weyl(k: u64, alpha: f64) -> f64 {
    (k as f64 * alpha).fract()
}

fn probe_control(k: u64) -> (CustomControl, f64) {
    let a = -0.5 + 2.5 * weyl(k + 1, 0.618_033_988_749_895);
    let b = -1.0 + 4.0 * weyl(k + 1, 0.414_213_562_373_095);
    let c = 1.5 * weyl(k + 1, 0.732_050_807_568_877);
    let w = 10.0 * weyl(k + 1, 0.236_067_977_499_79);
    let phi = -0.3 + 0.6 * weyl(k + 1, 0.645_751_311_064_59);
    let x0 = 2.0 * weyl(k + 1, 0.162_277_660_168_379);
    (CustomControl::new(move |t, y, x| a + b * x + c * (w * t + y).sin(), move |_, _, x, _| phi * x), x0)
}

fn suite_monotonization(run: &Run) -> Result<SuiteResult> {
    let spec = &run.model.spec;
    let mc = &run.config.mc;
    let grid = run.time_grid()?;
    let n = run.config.verify.paths;
    let (mut worst_excess, mut bad, mut flagged, mut c_max) = (f64::NEG_INFINITY, 0, 0, 0.0_f64);
    let mut threshold = 0.0;
    for k in 0..n as u64 {
        let (control, x0) = probe_control(k);
        let r = monotonize_control(spec, &control, x0, mc.y0, &grid, mc.seed, k, true)?;
        let excess = r.monotone_cost.total - r.raw_cost.total;
        worst_excess = worst_excess.max(excess);
        if excess > 1e-12 || !r.monotone.is_monotone() {
            bad += 1;
        }
        let est = check_admissibility_estimate(&r.monotone, spec.dark_pool.total_mass());
        threshold = est.threshold;
        c_max = c_max.max(est.c_hat);
        if est.flagged {
            flagged += 1;
        }
    }
    Ok(verdict(
        Suite::Monotonization,
        bad == 0 && flagged == 0,
        0.0 - worst_excess,
        format!(
            "{n} controls: not dominated or not monotone {bad}; max(cost_hat - cost) {worst_excess:.3e}; \
             C_hat max {c_max:.3} vs {threshold:.3}, flagged {flagged}"
        ),
    ))
}

pub fn run_suites(run: &Run) -> Result<Vec<SuiteResult>> {
    let suites = &run.config.verify.suites;
    if !suites.is_empty() {
        validate_assumptions(&run.model.spec).into_result()?;
    }
    let mut results = Vec::new();
    let mut field = None;
    for &suite in Suite::ALL.iter().filter(|s| suites.contains(s)) {
        let r = match suite {
            Suite::Oracle => suite_oracle(run)?,
            Suite::MIndependence => suite_m_independence(run)?,
            Suite::NMonotonicity => suite_n_monotonicity(run)?,
            Suite::Comparison => suite_comparison(run)?,
            Suite::Barriers => {
                let (r, f) = suite_barriers(run)?;
                field = Some(f);
                r
            }
            Suite::Decay => suite_decay(run, field.take())?,
            Suite::Monotonization => suite_monotonization(run)?,
        };
        results.push(r);
    }
    Ok(results)
}

pub fn cmd_verify(run: &Run) -> Result<Status> {
    let results = run_suites(run)?;
    let mut out = create(&run.out, "verify_summary.json")?;
    serde_json::to_writer_pretty(&mut out, &results)?;
    writeln!(out)?;
    out.flush()?;
    for r in &results {
        println!("{:<16} {:<8} margin={:<12.4e} {}", r.suite, r.status, r.worst_margin, r.detail);
    }
    let failed = results.iter().filter(|r| r.status == "fail").count();
    println!("{} suites, {failed} failed", results.len());
    Ok(if failed == 0 { Status::Success } else { Status::VerificationFailed })
}

pub fn cmd_convergence(run: &Run) -> Result<Status> {
    let spec = &run.model.spec;
    validate_assumptions(spec).into_result()?;
    let c = &run.config.convergence;
    let g = &run.config.grid;
    let mut ran = false;
    if !c.dts.is_empty() {
        let study = temporal_study(spec, c.level, (g.y_min, g.y_max), g.n_y, &c.dts)?;
        let mut out = create(&run.out, "convergence_temporal.csv")?;
        study.write_csv(&mut out)?;
        out.flush()?;
        print!("{study}");
        ran = true;
    }
    if c.spatial {
        let study = spatial_study(spec, c.level, (g.y_min, g.y_max), g.n_y, c.refinements - 1, g.dt)?;
        let mut out = create(&run.out, "convergence_spatial.csv")?;
        study.write_csv(&mut out)?;
        out.flush()?;
        print!("{study}");
        ran = true;
    }
    if !ran {
        bail!("[convergence] selects no study: set dts or spatial = true");
    }
    Ok(Status::Success)
}
