use thiserror::Error;

use crate::model::Assumption;

#[derive(Debug, Error)]
pub enum HjbError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("assumption {assumption} failed: {detail}")]
    AssumptionFailed { assumption: Assumption, detail: String },

    #[error("time {t} is outside the admissible range {range}")]
    OutOfRange { t: f64, range: String },

    #[error("coefficient `{0}` depends on the factor; the ODE oracle needs factor-independent data")]
    FactorDependent(String),

    #[error("scheme produced a negative value {value:e} at t={t}, y={y}")]
    NegativeValue { t: f64, y: f64, value: f64 },

    #[error("N-ladder did not converge within {rungs} rungs (last relative delta {last_delta:e})")]
    LadderDiverged { rungs: usize, last_delta: f64 },

    #[error("ladder monotonicity violated at N={n}: u^2N - u^N = {gap:e}")]
    MonotonicityViolated { n: f64, gap: f64 },

    #[error("value {value} exceeds the a-priori bound {bound}")]
    BoundViolated { bound: f64, value: f64 },

    #[error("cannot verify domination: {0}")]
    DominationUnverifiable(String),

    #[error("fill of size {fill} exceeds pre-jump inventory {inventory} at t={t}")]
    Overshoot { t: f64, fill: f64, inventory: f64 },

    #[error("malformed value-field dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HjbError>;
