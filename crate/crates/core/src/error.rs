use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    // TLE ingestion
    #[error("TLE checksum mismatch on input line {line}: expected {expected}, found {found}")]
    ChecksumMismatch { line: usize, expected: u8, found: u8 },
    #[error("malformed TLE field `{field}` (columns {}-{}) on input line {line}", .columns.0, .columns.1)]
    MalformedField {
        line: usize,
        field: &'static str,
        columns: (usize, usize),
    },
    #[error("truncated TLE input after line {line}")]
    TruncatedInput { line: usize },

    // propagation
    #[error("SGP4 propagation diverged: {0}")]
    PropagationDiverged(String),
    #[error("requested epoch is {days:.2} days from the element epoch (limit 7)")]
    EpochOutOfRange { days: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("requested maximum elevation {target_deg}° is below the {mask_deg}° mask")]
    TargetUnreachable { target_deg: f64, mask_deg: f64 },

    // geometry
    #[error("point is too close to the Earth's centre for a geodetic solution")]
    NearSingularOrigin,
    #[error("position and velocity are (nearly) parallel or zero")]
    DegenerateState,
    #[error("satellite never rises above the mask in the search window")]
    NoPassInWindow,
    #[error("search window contains more than one local minimum")]
    MultipleMinima,
    #[error("user and satellite positions coincide")]
    CoincidentPoints,

    // measurement model and estimator
    #[error("measurement {index} has non-positive elevation")]
    ZeroElevation { index: usize },
    #[error("satellite state has no acceleration")]
    MissingAcceleration,
    #[error("normal matrix is singular (condition estimate {condition:.3e})")]
    SingularNormalMatrix { condition: f64 },
    #[error("solver did not converge in {iterations} iterations")]
    DidNotConverge { iterations: usize },

    // DDOP
    #[error("orbit radius {a_orb} m is not above the Earth radius")]
    OrbitBelowSurface { a_orb: f64 },
    #[error("geometry is singular; least observable scaled direction {direction:?}")]
    SingularGeometry { direction: Vec<f64> },
    #[error("covariance is degenerate")]
    DegenerateCovariance,

    // Monte Carlo
    #[error("only {converged} of {trials} trials converged (90% required)")]
    TooFewConverged { converged: usize, trials: usize },
    #[error("samples are degenerate (rank-deficient covariance)")]
    DegenerateSamples,

    // experiments
    #[error("observation window is not visible from the user")]
    WindowNotVisible,
    #[error("observations fall outside the visible pass")]
    PassExceeded,
    #[error("no grid node sees the pass")]
    EmptyGrid,

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-greppable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ChecksumMismatch { .. } => "CHECKSUM_MISMATCH",
            Error::MalformedField { .. } => "MALFORMED_FIELD",
            Error::TruncatedInput { .. } => "TRUNCATED_INPUT",
            Error::PropagationDiverged(_) => "PROPAGATION_DIVERGED",
            Error::EpochOutOfRange { .. } => "EPOCH_OUT_OF_RANGE",
            Error::InvalidParameter(_) => "INVALID_PARAMETER",
            Error::TargetUnreachable { .. } => "TARGET_UNREACHABLE",
            Error::NearSingularOrigin => "NEAR_SINGULAR_ORIGIN",
            Error::DegenerateState => "DEGENERATE_STATE",
            Error::NoPassInWindow => "NO_PASS_IN_WINDOW",
            Error::MultipleMinima => "MULTIPLE_MINIMA",
            Error::CoincidentPoints => "COINCIDENT_POINTS",
            Error::ZeroElevation { .. } => "ZERO_ELEVATION",
            Error::MissingAcceleration => "MISSING_ACCELERATION",
            Error::SingularNormalMatrix { .. } => "SINGULAR_NORMAL_MATRIX",
            Error::DidNotConverge { .. } => "DID_NOT_CONVERGE",
            Error::OrbitBelowSurface { .. } => "ORBIT_BELOW_SURFACE",
            Error::SingularGeometry { .. } => "SINGULAR_GEOMETRY",
            Error::DegenerateCovariance => "DEGENERATE_COVARIANCE",
            Error::TooFewConverged { .. } => "TOO_FEW_CONVERGED",
            Error::DegenerateSamples => "DEGENERATE_SAMPLES",
            Error::WindowNotVisible => "WINDOW_NOT_VISIBLE",
            Error::PassExceeded => "PASS_EXCEEDED",
            Error::EmptyGrid => "EMPTY_GRID",
            Error::Io(_) => "IO",
            Error::Csv(_) => "CSV",
        }
    }

    /// True for failures of the numerics (singular geometry, divergence) as
    /// opposed to bad input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PropagationDiverged(_)
                | Error::SingularNormalMatrix { .. }
                | Error::DidNotConverge { .. }
                | Error::SingularGeometry { .. }
                | Error::DegenerateCovariance
                | Error::TooFewConverged { .. }
                | Error::DegenerateSamples
                | Error::DegenerateState
                | Error::MultipleMinima
        )
    }
}
