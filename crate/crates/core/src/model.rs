//! Liquidation model: coefficient families, the dark-pool measure, the
//! standing assumptions and the HJB nonlinearity.
//!
//! All coefficients are deterministic, time-homogeneous functions of a scalar
//! factor `y`. The parametric families are restricted so that their bounds,
//! ranges and Lipschitz constants are available in closed form; assumption
//! validation never samples.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{HjbError, Result};

/// A scalar coefficient `f(t, y)` drawn from one of three closed-form families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CoefficientField {
    /// `f = value`. `value = +inf` is admitted only as a slippage sentinel.
    Constant {
        #[serde(with = "extended_float")]
        value: f64,
    },
    /// `f = base + amplitude * tanh(slope * y)`.
    TanhAffine { base: f64, amplitude: f64, slope: f64 },
    /// `f = base + amplitude * sin(frequency * y)`.
    BoundedSin { base: f64, amplitude: f64, frequency: f64 },
}

impl CoefficientField {
    pub fn constant(value: f64) -> Self {
        CoefficientField::Constant { value }
    }

    /// The `+inf` sentinel used for dark-pool venues that never execute.
    pub fn infinite() -> Self {
        CoefficientField::Constant { value: f64::INFINITY }
    }

    pub fn tanh_affine(base: f64, amplitude: f64, slope: f64) -> Self {
        CoefficientField::TanhAffine { base, amplitude, slope }
    }

    pub fn bounded_sin(base: f64, amplitude: f64, frequency: f64) -> Self {
        CoefficientField::BoundedSin { base, amplitude, frequency }
    }

    #[inline]
    pub fn eval(&self, _t: f64, y: f64) -> f64 {
        match *self {
            CoefficientField::Constant { value } => value,
            CoefficientField::TanhAffine { base, amplitude, slope } => base + amplitude * (slope * y).tanh(),
            CoefficientField::BoundedSin { base, amplitude, frequency } => {
                base + amplitude * (frequency * y).sin()
            }
        }
    }

    /// Closure of the range `[inf f, sup f]` over all `(t, y)`.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            CoefficientField::Constant { value } => (value, value),
            CoefficientField::TanhAffine { base, amplitude, slope } => {
                if slope == 0.0 {
                    (base, base)
                } else {
                    (base - amplitude.abs(), base + amplitude.abs())
                }
            }
            CoefficientField::BoundedSin { base, amplitude, frequency } => {
                if frequency == 0.0 {
                    (base, base)
                } else {
                    (base - amplitude.abs(), base + amplitude.abs())
                }
            }
        }
    }

    pub fn sup_abs(&self) -> f64 {
        let (lo, hi) = self.range();
        lo.abs().max(hi.abs())
    }

    /// Infimum of `f²` over the range.
    pub fn inf_square(&self) -> f64 {
        let (lo, hi) = self.range();
        if lo <= 0.0 && hi >= 0.0 {
            0.0
        } else {
            (lo * lo).min(hi * hi)
        }
    }

    /// Global Lipschitz constant in `y`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            CoefficientField::Constant { .. } => 0.0,
            CoefficientField::TanhAffine { amplitude, slope, .. } => (amplitude * slope).abs(),
            CoefficientField::BoundedSin { amplitude, frequency, .. } => (amplitude * frequency).abs(),
        }
    }

    pub fn is_factor_independent(&self) -> bool {
        self.lipschitz() == 0.0
    }

    fn params_finite(&self) -> bool {
        match *self {
            CoefficientField::Constant { value } => value.is_finite(),
            CoefficientField::TanhAffine { base, amplitude, slope } => {
                base.is_finite() && amplitude.is_finite() && slope.is_finite()
            }
            CoefficientField::BoundedSin { base, amplitude, frequency } => {
                base.is_finite() && amplitude.is_finite() && frequency.is_finite()
            }
        }
    }

    fn is_infinite_sentinel(&self) -> bool {
        matches!(*self, CoefficientField::Constant { value } if value == f64::INFINITY)
    }

    /// `true` when `self >= other` holds at every `(t, y)` and this can be
    /// decided from the parameters alone.
    pub fn dominates(&self, other: &CoefficientField) -> bool {
        if self == other {
            return true;
        }
        let (self_lo, _) = self.range();
        let (_, other_hi) = other.range();
        if self_lo >= other_hi {
            return true;
        }
        match (self, other) {
            (
                CoefficientField::TanhAffine { base: b1, amplitude: a1, slope: s1 },
                CoefficientField::TanhAffine { base: b0, amplitude: a0, slope: s0 },
            ) if s1 == s0 => b1 - b0 >= (a1 - a0).abs(),
            (
                CoefficientField::BoundedSin { base: b1, amplitude: a1, frequency: w1 },
                CoefficientField::BoundedSin { base: b0, amplitude: a0, frequency: w0 },
            ) if w1 == w0 => b1 - b0 >= (a1 - a0).abs(),
            _ => false,
        }
    }
}

/// One atom `z_k` of the dark-pool characteristic measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DarkPoolAtom {
    pub id: i64,
    /// Slippage cost `γ(t, y, z_k)`, valued in `[0, +inf]`.
    pub gamma: CoefficientField,
    /// Weight `μ({z_k})`.
    pub mu: f64,
}

/// Finite measure on the dark-pool mark space, represented by atoms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DarkPoolMeasure {
    #[serde(default)]
    pub atoms: Vec<DarkPoolAtom>,
}

impl DarkPoolMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(gamma: CoefficientField, mu: f64) -> Self {
        DarkPoolMeasure { atoms: vec![DarkPoolAtom { id: 0, gamma, mu }] }
    }

    /// `μ(Z)`.
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mu).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dominates(&self, other: &DarkPoolMeasure) -> bool {
        self.atoms.len() == other.atoms.len()
            && self
                .atoms
                .iter()
                .zip(&other.atoms)
                .all(|(hi, lo)| hi.gamma.dominates(&lo.gamma) && hi.mu <= lo.mu)
    }
}

/// Model coefficients on a scalar factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Factor drift `b`.
    pub drift: CoefficientField,
    /// Volatility `σ` against `W`.
    pub sigma: CoefficientField,
    /// Volatility `σ̄` against `B`.
    pub sigma_bar: CoefficientField,
    /// Market impact `η`.
    pub eta: CoefficientField,
    /// Risk aversion `λ`.
    pub lambda: CoefficientField,
    #[serde(default)]
    pub dark_pool: DarkPoolMeasure,
    /// Liquidation horizon `T`.
    pub horizon: f64,
}

/// Closed-form constants of a [`ModelSpec`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelConstants {
    /// Common bound `Λ` on `|b|, |σ|, |σ̄|, η, λ`.
    pub bound: f64,
    /// Ellipticity `κ` with `σ̄² >= 2κ`.
    pub kappa: f64,
    /// Lower bound `κ₀` of `η`.
    pub kappa0: f64,
    /// Lipschitz constant `L` of `b + σ + σ̄`.
    pub lipschitz: f64,
    /// `μ(Z)`.
    pub mu_total: f64,
}

impl ModelSpec {
    #[inline]
    pub fn diffusion(&self, t: f64, y: f64) -> f64 {
        let s = self.sigma.eval(t, y);
        let sb = self.sigma_bar.eval(t, y);
        0.5 * (s * s + sb * sb)
    }

    pub fn constants(&self) -> ModelConstants {
        let bound = [
            self.drift.sup_abs(),
            self.sigma.sup_abs(),
            self.sigma_bar.sup_abs(),
            self.eta.sup_abs(),
            self.lambda.sup_abs(),
        ]
        .into_iter()
        .fold(0.0_f64, f64::max);
        ModelConstants {
            bound,
            kappa: 0.5 * self.sigma_bar.inf_square(),
            kappa0: self.eta.range().0.max(0.0),
            lipschitz: self.drift.lipschitz() + self.sigma.lipschitz() + self.sigma_bar.lipschitz(),
            mu_total: self.dark_pool.total_mass(),
        }
    }

    /// `true` when every coefficient is constant in the factor.
    pub fn is_factor_independent(&self) -> bool {
        self.first_factor_dependent().is_none()
    }

    pub(crate) fn first_factor_dependent(&self) -> Option<String> {
        let named = [
            ("b", &self.drift),
            ("sigma", &self.sigma),
            ("sigma_bar", &self.sigma_bar),
            ("eta", &self.eta),
            ("lambda", &self.lambda),
        ];
        for (name, field) in named {
            if !field.is_factor_independent() {
                return Some(name.to_string());
            }
        }
        self.dark_pool
            .atoms
            .iter()
            .find(|a| !a.gamma.is_factor_independent())
            .map(|a| format!("gamma[{}]", a.id))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Assumption {
    /// Measurability and boundedness by `Λ`; sign constraints.
    A1,
    /// Lipschitz continuity of `b, σ, σ̄`.
    A2,
    /// Uniform ellipticity and `η >= κ₀ > 0`.
    A3,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assumption::A1 => write!(f, "(A1) boundedness"),
            Assumption::A2 => write!(f, "(A2) Lipschitz"),
            Assumption::A3 => write!(f, "(A3) ellipticity/impact floor"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub assumption: Assumption,
    pub passed: bool,
    pub offending: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub verdicts: [Verdict; 3],
    pub constants: ModelConstants,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, which: Assumption) -> &Verdict {
        &self.verdicts[which as usize]
    }

    /// First failing assumption as an error.
    pub fn into_result(self) -> Result<ModelConstants> {
        match self.verdicts.iter().find(|v| !v.passed) {
            None => Ok(self.constants),
            Some(v) => Err(HjbError::AssumptionFailed {
                assumption: v.assumption,
                detail: v.offending.join("; "),
            }),
        }
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.verdicts {
            let status = if v.passed { "pass" } else { "FAIL" };
            write!(f, "{}: {}", v.assumption, status)?;
            if !v.offending.is_empty() {
                write!(f, " ({})", v.offending.join("; "))?;
            }
            writeln!(f)?;
        }
        let c = &self.constants;
        writeln!(
            f,
            "Lambda={} kappa={} kappa0={} L={} mu(Z)={}",
            c.bound, c.kappa, c.kappa0, c.lipschitz, c.mu_total
        )
    }
}

pub fn validate_assumptions(spec: &ModelSpec) -> AssumptionReport {
    let constants = spec.constants();
    let named = [
        ("b", &spec.drift),
        ("sigma", &spec.sigma),
        ("sigma_bar", &spec.sigma_bar),
        ("eta", &spec.eta),
        ("lambda", &spec.lambda),
    ];

    let mut a1 = Vec::new();
    for (name, field) in named {
        if !field.params_finite() {
            a1.push(format!("{name} has non-finite parameters"));
        }
    }
    if spec.eta.range().0 < 0.0 {
        a1.push("eta takes negative values".into());
    }
    if spec.lambda.range().0 < 0.0 {
        a1.push("lambda takes negative values".into());
    }
    for atom in &spec.dark_pool.atoms {
        if !(atom.gamma.params_finite() || atom.gamma.is_infinite_sentinel()) {
            a1.push(format!("gamma[{}] has non-finite parameters", atom.id));
        } else if atom.gamma.range().0 < 0.0 {
            a1.push(format!("gamma[{}] takes negative values", atom.id));
        }
        if !(atom.mu.is_finite() && atom.mu >= 0.0) {
            a1.push(format!("mu[{}] = {} is not a finite nonnegative weight", atom.id, atom.mu));
        }
    }
    if !(spec.horizon.is_finite() && spec.horizon > 0.0) {
        a1.push(format!("horizon T = {} must be finite and positive", spec.horizon));
    }
    if !(constants.bound.is_finite() && constants.bound > 0.0) {
        a1.push(format!("Lambda = {} must be finite and positive", constants.bound));
    }

    let mut a2 = Vec::new();
    if !constants.lipschitz.is_finite() {
        a2.push("Lipschitz constant of (b, sigma, sigma_bar) is not finite".into());
    }

    let mut a3 = Vec::new();
    if !(constants.kappa > 0.0 && constants.kappa.is_finite()) {
        a3.push(format!("kappa = {} (sigma_bar^2 must stay away from 0)", constants.kappa));
    }
    if !(constants.kappa0 > 0.0 && constants.kappa0.is_finite()) {
        a3.push(format!("kappa0 = {} (eta must stay away from 0)", constants.kappa0));
    }

    let verdict = |assumption, offending: Vec<String>| Verdict {
        assumption,
        passed: offending.is_empty(),
        offending,
    };
    AssumptionReport {
        verdicts: [
            verdict(Assumption::A1, a1),
            verdict(Assumption::A2, a2),
            verdict(Assumption::A3, a3),
        ],
        constants,
    }
}

/// `φ / (γ + φ)`, the executed fraction of a dark-pool order; zero when both vanish.
#[inline]
pub(crate) fn fill_fraction(gamma: f64, phi: f64) -> f64 {
    let denom = gamma + phi;
    if denom == 0.0 {
        0.0
    } else {
        phi / denom
    }
}

/// Linear absorption coefficient `k` so that the truncated nonlinearity reads
/// `λ - k(φ_old) φ_new`.
#[inline]
pub(crate) fn absorption(spec: &ModelSpec, t: f64, y: f64, phi_old: f64, cap: f64) -> f64 {
    let pool: f64 = spec
        .dark_pool
        .atoms
        .iter()
        .map(|a| a.mu * fill_fraction(a.gamma.eval(t, y), phi_old))
        .sum();
    pool + cap.min(phi_old) / spec.eta.eval(t, y)
}

/// `F(t, y, φ) = λ - Σ μ_k φ²/(γ_k + φ) - φ²/η` for `φ >= 0`.
pub fn eval_f(spec: &ModelSpec, t: f64, y: f64, phi: f64) -> Result<f64> {
    if phi.is_nan() || phi < 0.0 {
        return Err(HjbError::InvalidParameter(format!(
            "F is defined for nonnegative arguments, got {phi}"
        )));
    }
    Ok(spec.lambda.eval(t, y) - absorption(spec, t, y, phi, f64::INFINITY) * phi)
}

/// `F̂(t, y, φ) = F(t, y, |φ|)`.
pub fn eval_f_hat(spec: &ModelSpec, t: f64, y: f64, phi: f64) -> f64 {
    let phi = phi.abs();
    spec.lambda.eval(t, y) - absorption(spec, t, y, phi, f64::INFINITY) * phi
}

/// Semi-implicit truncated nonlinearity, linear in `phi_new`:
/// `λ - Σ μ_k φ_old φ_new/(γ_k + φ_old) - (M ∧ φ_old) φ_new/η`.
pub fn eval_f_truncated(
    spec: &ModelSpec,
    t: f64,
    y: f64,
    phi_old: f64,
    phi_new: f64,
    cap: f64,
) -> Result<f64> {
    if !(cap > 0.0) {
        return Err(HjbError::InvalidParameter(format!("truncation level M must be positive, got {cap}")));
    }
    if phi_old.is_nan() || phi_old < 0.0 {
        return Err(HjbError::InvalidParameter(format!(
            "linearisation point must be nonnegative, got {phi_old}"
        )));
    }
    Ok(spec.lambda.eval(t, y) - absorption(spec, t, y, phi_old, cap) * phi_new)
}

/// Weight `θ(y) = (1 + y²)^{-q}`.
pub fn theta(q: u32, y: f64) -> f64 {
    (1.0 + y * y).powi(-(q as i32))
}

/// Coefficients of the operator conjugated by `θ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedCoefficients {
    pub b_tilde: f64,
    pub beta: f64,
    pub c: f64,
    pub theta: f64,
}

pub fn weighted_coefficients(spec: &ModelSpec, q: u32, t: f64, y: f64) -> Result<WeightedCoefficients> {
    if q < 2 {
        return Err(HjbError::InvalidParameter(format!("weight exponent q must exceed the dimension, got {q}")));
    }
    let qf = q as f64;
    let a = spec.diffusion(t, y);
    let b = spec.drift.eval(t, y);
    let sigma = spec.sigma.eval(t, y);
    let p = 1.0 + y * y;
    Ok(WeightedCoefficients {
        b_tilde: b + 4.0 * qf * a * y / p,
        beta: 2.0 * qf * sigma * y / p,
        c: 2.0 * qf / p * (a + y * b + 2.0 * (qf - 1.0) * a * y * y / p),
        theta: theta(q, y),
    })
}

/// Serde support for floats that may be `+inf`, spelled `"inf"` in JSON.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
                "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {other:?}"))),
            },
        }
    }
}
