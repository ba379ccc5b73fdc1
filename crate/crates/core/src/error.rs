use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("kernel profile has zero mass on its support")]
    ZeroMass,

    #[error("non-finite value {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(
        "domain of {points} points is too narrow for a kernel stencil of {stencil} points \
         (needs more than 2 * truncation radius)"
    )]
    DomainTooNarrow { points: usize, stencil: usize },

    #[error("window [{a}, {b}] is not contained in the grid domain [{x_min}, {x_max}]")]
    WindowOutOfRange {
        a: f64,
        b: f64,
        x_min: f64,
        x_max: f64,
    },

    #[error("exponential moment at mu = {mu} overflows; admissible range is ({lo}, {hi})")]
    MomentRange { mu: f64, lo: f64, hi: f64 },

    #[error("series truncation order would exceed the ceiling of {ceiling} terms (t = {t}, tolerance = {tolerance})")]
    SeriesCeiling {
        t: f64,
        tolerance: f64,
        ceiling: usize,
    },

    #[error("horizon {horizon} is not an integer multiple of the step {dt}")]
    StepMismatch { horizon: f64, dt: f64 },

    #[error("accuracy guard violated: dt * k_f = {product} must be below 1")]
    AccuracyGuard { product: f64 },

    #[error(
        "state left the invariant interval at t = {t}, x = {x}: value {value} vs cap {cap}; \
         reduce the time step (currently {dt})"
    )]
    RangeViolation {
        t: f64,
        x: f64,
        value: f64,
        cap: f64,
        dt: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("steady state did not converge by t = {time}: residual {residual} > {tolerance}")]
    SteadyStateNotConverged {
        time: f64,
        residual: f64,
        tolerance: f64,
    },

    #[error("solution went extinct (sup = {sup}) while searching for a steady state")]
    Extinction { sup: f64 },

    #[error("power iteration did not converge after {iterations} iterations (gap {gap})")]
    PowerIteration { iterations: usize, gap: f64 },

    #[error("c(mu) is not unimodal on [{lo}, {hi}]; choose a different bracket")]
    NotUnimodal { lo: f64, hi: f64 },

    #[error("minimizer of c(mu) sits at the bracket edge mu = {mu}; widen [{lo}, {hi}]")]
    EdgeMinimizer { mu: f64, lo: f64, hi: f64 },

    #[error("front level {level} is never attained")]
    LevelNotAttained { level: f64 },

    #[error("front at level {level} reached the right boundary")]
    FrontAtBoundary { level: f64 },

    #[error("front fit needs at least {needed} snapshots in the window, found {found}")]
    UnderdeterminedFit { needed: usize, found: usize },

    #[error("ensemble member {index} leaves [0, cap]")]
    MemberOutOfRange { index: usize },

    #[error("{what} = {value} is out of range {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: String,
    },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite, got {value}"),
        })
    }
}
