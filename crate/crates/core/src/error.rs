//! Error type shared by every module, with a stable mapping to process exit
//! codes: 2 for invalid input, 3 for numerical failure, 4 for I/O failure.

/// Everything that can go wrong while building a problem or integrating it.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad grid construction parameters (bounds, point counts, non-uniform nodes).
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Coefficient tables violating a structural requirement (signs, shapes).
    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),

    /// Configuration file problems: parse errors, unknown keys, bad values.
    #[error("invalid config: {0}")]
    Config(String),

    /// Two objects that must share a grid or length do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The adaptive stability guard ran out of halvings, or a state went
    /// non-finite; carries the simulation time where integration stopped.
    #[error("numerical blow-up at t = {t}: {detail}")]
    BlowUp { t: f64, detail: String },

    /// A Lyapunov evaluation hit `ln` of a nonpositive density on the
    /// steady-state support.
    #[error("nonpositive density at node {node} (x = {x}): Lyapunov functional undefined")]
    NonPositiveDensity { node: usize, x: f64 },

    /// A dissipation evaluation divided by a vanishing resource value.
    #[error("nonpositive resource at node {node}: dissipation integrand undefined")]
    NonPositiveResource { node: usize },

    /// The linear system on a proposed steady-state support is singular.
    #[error("singular linear system on the proposed support")]
    SingularSupportSystem,

    /// Solving on a proposed support produced a nonpositive weight, so no
    /// steady state with exactly that support exists.
    #[error("infeasible support: solved weight {weight} at node {node} (x = {x}) is not positive")]
    InfeasibleSupport { node: usize, x: f64, weight: f64 },

    /// Filesystem failure, with the offending path.
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed CSV content (structure or values), with the offending path.
    #[error("CSV error in {path}: {detail}")]
    Csv { path: String, detail: String },
}

impl Error {
    /// Process exit code for the CLI: 2 invalid input, 3 numerical failure,
    /// 4 I/O failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidGrid(_)
            | Error::InvalidCoefficients(_)
            | Error::Config(_)
            | Error::DimensionMismatch(_)
            | Error::Csv { .. } => 2,
            Error::BlowUp { .. }
            | Error::NonPositiveDensity { .. }
            | Error::NonPositiveResource { .. }
            | Error::SingularSupportSystem
            | Error::InfeasibleSupport { .. } => 3,
            Error::Io { .. } => 4,
        }
    }

    /// Shorthand for an [`Error::Io`] carrying its path.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
