use thiserror::Error;

/// Errors produced anywhere in the calibration pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("at least {needed} reference values are required, got {got}")]
    InsufficientReferences { needed: usize, got: usize },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("forecast covariance is numerically singular (reciprocal condition {rcond:.3e})")]
    SingularForecastCovariance { rcond: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no real root: observation lies beyond the curve extremum (vertex at {vertex})")]
    NoRealRoot { vertex: f64 },

    #[error("calibration curve is flat; inverse prediction undefined")]
    FlatCurve,

    #[error("vertical tangent at the estimate; interval undefined")]
    VerticalTangent,

    #[error("residual variance unavailable: {dof} residual degrees of freedom")]
    VarianceUnavailable { dof: i64 },

    #[error("all candidate weights are degenerate")]
    DegenerateWeights,

    #[error("quadratic has no vertex (leading coefficient is zero)")]
    NoVertex,

    #[error("invalid shock specification: {0}")]
    InvalidShockSpec(String),

    #[error("campaign has no replications")]
    EmptyCampaign,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{file}: line {line}, column {column}: {message}")]
    Parse {
        file: String,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("{file}: line {line}: time index {got} does not follow {prev}")]
    InputOrder { file: String, line: u64, prev: f64, got: f64 },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("at time step {t}: {source}")]
    AtTime { t: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn at(self, t: usize) -> Error {
        Error::AtTime {
            t,
            source: Box::new(self),
        }
    }

    /// True for problems with user-supplied files or settings, as opposed to
    /// failures during computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self.root(),
            Error::Parse { .. } | Error::InputOrder { .. } | Error::Io { .. } | Error::Config(_)
        )
    }

    /// Strips any time-index wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
