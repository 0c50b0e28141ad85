use thiserror::Error;

/// Errors produced while loading, encoding or verifying networks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document: {0}")]
    Parse(String),

    #[error("unsupported document format {found} (expected {expected})")]
    Format { found: u64, expected: u64 },

    #[error("{message} at block {block} (field `{field}`){detail}")]
    InvalidBlock {
        block: usize,
        field: &'static str,
        message: &'static str,
        detail: String,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid property: {0}")]
    InvalidProperty(String),

    #[error("invalid bounds: lower {lower} exceeds upper {upper}")]
    InvalidBounds { lower: f64, upper: f64 },

    #[error("input set is empty")]
    EmptyInputSet,

    #[error("input set is unbounded along input {0}")]
    UnboundedInputSet(usize),

    #[error("output assertion has no constraints; it holds for every output")]
    VacuousAssertion,

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("invalid identifier `{0}`")]
    InvalidName(String),

    #[error("duplicate identifier `{0}`")]
    DuplicateName(String),

    #[error("assignment has {found} values, problem declares {expected} variables")]
    MissingValue { expected: usize, found: usize },

    #[error("input set is not enumerable: {0}")]
    NotEnumerable(String),

    #[error("enumeration needs {found} free binary inputs, cap is {cap}")]
    TooLarge { found: usize, cap: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
