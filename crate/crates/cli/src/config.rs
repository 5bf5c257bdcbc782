//! Run configuration. One TOML file per experiment.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::Deserialize;
use singular_hjb::model::ModelSpec;
use singular_hjb::pde::{DriftScheme, Grid1D, SingularOptions};
use singular_hjb::sim::TimeGrid;
use singular_hjb::{preset, Preset, PRESET_NAMES};

use crate::model_file::load_model;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Preset name or path to a model file, relative to the config file.
    pub model: String,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub singular: SingularSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub y_min: f64,
    pub y_max: f64,
    pub n_y: usize,
    pub dt: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { y_min: -4.0, y_max: 4.0, n_y: 41, dt: 1e-3 }
    }
}

/// Unset fields fall back to `delta = 0.05 T`, `tol = 1e-4`, `n0 = 8 / delta`.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingularSection {
    pub delta: Option<f64>,
    /// A number or `"inf"`.
    pub tol: Option<Float>,
    #[serde(alias = "N0")]
    pub n0: Option<f64>,
    pub max_rungs: Option<usize>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(untagged)]
pub enum Float {
    Num(f64),
    Text(FloatWord),
}

#[derive(Clone, Copy, Debug, Deserialize)]
pub enum FloatWord {
    #[serde(rename = "inf", alias = "infinity", alias = "+inf")]
    Inf,
}

impl Float {
    pub fn value(self) -> f64 {
        match self {
            Float::Num(v) => v,
            Float::Text(FloatWord::Inf) => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub paths: usize,
    pub seed: u64,
    pub x0: f64,
    pub y0: f64,
    pub dt: f64,
    pub policies: Vec<PolicyName>,
    /// Number of leading paths per policy written as trajectory CSVs.
    pub trajectories: usize,
    /// Binary field dump; defaults to `<out>/field.bin` for non-preset models.
    pub field: Option<PathBuf>,
}

impl Default for McSection {
    fn default() -> Self {
        McSection {
            paths: 10_000,
            seed: 0,
            x0: 1.0,
            y0: 0.0,
            dt: 1e-3,
            policies: vec![PolicyName::Feedback, PolicyName::Twap],
            trajectories: 0,
            field: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    Feedback,
    Twap,
}

impl PolicyName {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyName::Feedback => "feedback",
            PolicyName::Twap => "twap",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Oracle,
    MIndependence,
    NMonotonicity,
    Comparison,
    Barriers,
    Decay,
    Monotonization,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Oracle,
        Suite::MIndependence,
        Suite::NMonotonicity,
        Suite::Comparison,
        Suite::Barriers,
        Suite::Decay,
        Suite::Monotonization,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Oracle => "oracle",
            Suite::MIndependence => "m_independence",
            Suite::NMonotonicity => "n_monotonicity",
            Suite::Comparison => "comparison",
            Suite::Barriers => "barriers",
            Suite::Decay => "decay",
            Suite::Monotonization => "monotonization",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftFlag {
    #[default]
    Upwind,
    /// Test hook: central drift differences, not monotone.
    Central,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub suites: Vec<Suite>,
    /// Terminal level for the finite-N suites.
    pub level: f64,
    /// Dominating model for the comparison suite; default is `λ + 0.5`.
    pub compare_with: Option<String>,
    pub drift: DriftFlag,
    /// Paths for the decay and monotonization suites.
    pub paths: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            suites: Suite::ALL.to_vec(),
            level: 10.0,
            compare_with: None,
            drift: DriftFlag::Upwind,
            paths: 200,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSection {
    pub level: f64,
    /// Temporal ladder; empty skips the temporal study.
    pub dts: Vec<f64>,
    pub spatial: bool,
    /// Spatial study rows; each row doubles the resolution once more.
    pub refinements: usize,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        ConvergenceSection { level: 10.0, dts: vec![0.02, 0.01, 0.005, 0.0025], spatial: true, refinements: 3 }
    }
}

/// A model resolved from the config: either a preset or a file.
#[derive(Clone, Debug)]
pub struct ResolvedModel {
    pub spec: ModelSpec,
    pub preset: Option<Preset>,
}

/// A parsed and validated configuration with paths resolved.
#[derive(Clone, Debug)]
pub struct Run {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub model: ResolvedModel,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

pub fn resolve_model(name: &str, base_dir: &Path) -> Result<ResolvedModel> {
    if let Some(p) = preset(name) {
        return Ok(ResolvedModel { spec: p.spec.clone(), preset: Some(p) });
    }
    let path = base_dir.join(name);
    if !path.exists() {
        bail!("model {name:?} is neither a preset ({}) nor an existing file", PRESET_NAMES.join(", "));
    }
    Ok(ResolvedModel { spec: load_model(&path)?, preset: None })
}

impl Run {
    pub fn new(config_path: &Path, overrides: &Overrides) -> Result<Run> {
        let mut config = RunConfig::load(config_path)?;
        if let Some(seed) = overrides.seed {
            config.mc.seed = seed;
        }
        if let Some(paths) = overrides.paths {
            config.mc.paths = paths;
        }
        let base_dir = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let model = resolve_model(&config.model, &base_dir)?;
        let out = match &overrides.out {
            Some(dir) => dir.clone(),
            None => base_dir.join(&config.out),
        };
        let run = Run { config, base_dir, model, out };
        run.validate()?;
        Ok(run)
    }

    pub fn horizon(&self) -> f64 {
        self.model.spec.horizon
    }

    pub fn grid(&self) -> Result<Grid1D> {
        let g = &self.config.grid;
        Ok(Grid1D::new(g.y_min, g.y_max, g.n_y, g.dt, self.horizon())?)
    }

    pub fn singular_options(&self) -> SingularOptions {
        let s = &self.config.singular;
        let mut o = SingularOptions::for_horizon(self.horizon());
        if let Some(d) = s.delta {
            o.delta = d;
            o.n0 = 8.0 / d;
        }
        if let Some(t) = s.tol {
            o.tol = t.value();
        }
        if let Some(n) = s.n0 {
            o.n0 = n;
        }
        if let Some(r) = s.max_rungs {
            o.max_rungs = r;
        }
        o
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        Ok(TimeGrid::from_dt(self.horizon(), self.config.mc.dt)?)
    }

    pub fn drift(&self) -> DriftScheme {
        match self.config.verify.drift {
            DriftFlag::Upwind => DriftScheme::Upwind,
            DriftFlag::Central => DriftScheme::Central,
        }
    }

    /// Checks every numeric field before anything runs.
    pub fn validate(&self) -> Result<()> {
        self.grid().context("[grid]")?;
        let o = self.singular_options();
        let t = self.horizon();
        ensure!(o.delta > 0.0 && o.delta < t, "[singular] delta must lie in (0, T), got {}", o.delta);
        ensure!(o.tol > 0.0, "[singular] tol must be positive, got {}", o.tol);
        ensure!(o.n0 > 0.0 && o.n0.is_finite(), "[singular] n0 must be positive, got {}", o.n0);
        ensure!(o.max_rungs >= 1, "[singular] max_rungs must be at least 1");
        let mc = &self.config.mc;
        ensure!(mc.paths >= 2, "[mc] paths must be at least 2, got {}", mc.paths);
        ensure!(mc.x0.is_finite() && mc.y0.is_finite(), "[mc] x0 and y0 must be finite");
        self.time_grid().context("[mc] dt")?;
        let v = &self.config.verify;
        ensure!(v.level > 0.0 && v.level.is_finite(), "[verify] level must be positive, got {}", v.level);
        ensure!(v.paths >= 1, "[verify] paths must be at least 1");
        let c = &self.config.convergence;
        ensure!(c.level > 0.0 && c.level.is_finite(), "[convergence] level must be positive, got {}", c.level);
        ensure!(!c.spatial || c.refinements >= 1, "[convergence] refinements must be at least 1");
        for &dt in &c.dts {
            ensure!(dt > 0.0 && dt < t, "[convergence] dts must lie in (0, T), got {dt}");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
}
