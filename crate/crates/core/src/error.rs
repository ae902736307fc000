use std::path::PathBuf;

/// Errors produced anywhere in the localization pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("degenerate neighborhood{}: rank {rank} < {required}", point_suffix(*.point))]
    DegenerateNeighborhood {
        point: Option<usize>,
        rank: usize,
        required: usize,
    },

    #[error("neighbor graph is disconnected, component sizes {sizes:?}")]
    Disconnected { sizes: Vec<usize> },

    #[error("query is {distance:.6e} from the nearest sample, beyond cutoff {cutoff:.6e}")]
    Extrapolation { distance: f64, cutoff: f64 },

    #[error("query outside kernel support, nearest anchor at {nearest:.6e}")]
    OutOfSupport { nearest: f64 },

    #[error("ill-conditioned {context}: condition number {condition:.3e}")]
    Conditioning { context: String, condition: f64 },

    #[error("insufficient scale range: {usable} usable radii, need at least 3")]
    InsufficientScale { usable: usize },

    #[error("degenerate distance between points {i} and {j}")]
    DegenerateDistance { i: usize, j: usize },

    #[error("insufficient sample: {got} entries, need at least {need}")]
    InsufficientSample { got: usize, need: usize },

    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(String),

    #[error("invalid {field}: {message}")]
    Format { field: String, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn point_suffix(point: Option<usize>) -> String {
    match point {
        Some(i) => format!(" at point {i}"),
        None => String::new(),
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 validation, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::OutOfDomain(_)
            | Error::Format { .. }
            | Error::Config(_)
            | Error::InsufficientSample { .. } => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}
