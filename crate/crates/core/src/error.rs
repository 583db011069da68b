use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index ({row}, {col}) out of range for a {n_rows}x{n_cols} graph")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("graph is disconnected")]
    Disconnected,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty least-squares problem")]
    EmptyTargets,

    #[error("zero denominator: all neighbor values vanish")]
    ZeroDenominator,

    #[error("{side} vertex {index}: {source}")]
    Vertex {
        side: Side,
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Which side of the bipartite graph a vertex belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Row,
    Col,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Row => f.write_str("row"),
            Side::Col => f.write_str("column"),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
