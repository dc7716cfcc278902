//! Error type shared by every module of the crate.

use std::fmt;

/// All failure modes of the library.
///
/// Every variant carries a stable machine-readable code (see [`Error::code`])
/// that the CLI prints as a single-line prefix before the human message.
#[derive(Debug)]
pub enum Error {
    /// Two grids that must be congruent have different dimensions.
    DimsMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    /// A mask with zero foreground voxels was supplied or constructed.
    EmptyMask,
    /// A translation would move foreground voxels outside the grid.
    OutOfBounds,
    /// More seeds requested than foreground voxels available.
    TooManySeeds { requested: usize, available: usize },
    /// Grid initialisation left zero seed points inside the mask.
    NoSeedsInMask,
    /// Input data has zero variance where variance is required.
    DegenerateData,
    /// Fewer items than clusters requested.
    TooFewItems { requested: usize, available: usize },
    /// Percentage error increase is undefined for a zero reference error.
    DivisionByZero,
    /// Volume file does not start with the expected magic bytes.
    BadMagic,
    /// Volume file declares a format version this build does not read.
    VersionUnsupported(u32),
    /// Volume file payload is shorter than the header promises.
    TruncatedPayload { expected: u64, got: u64 },
    /// Phantom descriptor string could not be parsed.
    BadSpec(String),
    /// Construction-time validation failure (shape, finiteness, parameter bounds).
    InvalidInput(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl Error {
    /// Stable machine-parsable code for this error.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimsMismatch { .. } => "E_DIMS_MISMATCH",
            Error::EmptyMask => "E_EMPTY_MASK",
            Error::OutOfBounds => "E_OUT_OF_BOUNDS",
            Error::TooManySeeds { .. } => "E_TOO_MANY_SEEDS",
            Error::NoSeedsInMask => "E_NO_SEEDS_IN_MASK",
            Error::DegenerateData => "E_DEGENERATE_DATA",
            Error::TooFewItems { .. } => "E_TOO_FEW_ITEMS",
            Error::DivisionByZero => "E_DIVISION_BY_ZERO",
            Error::BadMagic => "E_BAD_MAGIC",
            Error::VersionUnsupported(_) => "E_VERSION_UNSUPPORTED",
            Error::TruncatedPayload { .. } => "E_TRUNCATED_PAYLOAD",
            Error::BadSpec(_) => "E_BAD_SPEC",
            Error::InvalidInput(_) => "E_INVALID_INPUT",
            Error::Io(_) => "E_IO",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimsMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected:?}, got {got:?}")
            }
            Error::EmptyMask => write!(f, "mask has no foreground voxels"),
            Error::OutOfBounds => write!(f, "translation moves foreground outside the grid"),
            Error::TooManySeeds {
                requested,
                available,
            } => write!(
                f,
                "requested {requested} seeds but the mask has only {available} voxels"
            ),
            Error::NoSeedsInMask => write!(f, "no grid seed points fall inside the mask"),
            Error::DegenerateData => write!(f, "data has zero variance"),
            Error::TooFewItems {
                requested,
                available,
            } => {
                write!(f, "requested {requested} clusters for {available} items")
            }
            Error::DivisionByZero => {
                write!(f, "reference error is zero (infinite improvement)")
            }
            Error::BadMagic => write!(f, "bad magic bytes (expected \"MSLC\")"),
            Error::VersionUnsupported(v) => write!(f, "unsupported format version {v}"),
            Error::TruncatedPayload { expected, got } => {
                write!(
                    f,
                    "payload truncated: header promises {expected} bytes, found {got}"
                )
            }
            Error::BadSpec(s) => write!(f, "bad phantom spec: {s}"),
            Error::InvalidInput(s) => write!(f, "invalid input: {s}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
