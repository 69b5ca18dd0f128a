use std::fmt;

/// Crate-wide error type. Variants are grouped by failure class rather than
/// by module so that callers can map them onto process exit codes without
/// inspecting message text.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Dimension mismatch between operands, or an empty operand where a
    /// non-empty one is required.
    Shape { op: &'static str, detail: String },
    /// Malformed input file. `line` is 1-based; 0 means the problem is not
    /// tied to a specific line.
    Parse { path: String, line: usize, msg: String },
    /// Underlying I/O failure (file missing, unreadable, unwritable).
    Io { path: String, msg: String },
    /// A dataset cannot be partitioned as requested.
    Split(String),
    /// An attribute is unusable for the requested computation, e.g. a class
    /// with zero labelled samples.
    DegenerateAttribute(String),
    /// A metric is undefined on the given inputs, e.g. a class absent from
    /// the ground truth.
    DegenerateMetric(String),
    /// Invalid data values (NaN scores, unknown ids, mismatched columns).
    Data(String),
    /// An argument is outside its documented domain.
    Range(String),
    /// A batch violates the constraints of the requested forward mode.
    Batch(String),
    /// Internal bookkeeping mismatch, e.g. a forward cache applied to a
    /// model whose parameters have changed since the cache was built.
    Consistency(String),
    /// Malformed serialized model (bad magic, version, checksum, length).
    Format(String),
    /// Non-finite values where finite ones are required, named by source.
    Numeric(String),
    /// Invalid configuration value or key.
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, detail } => write!(f, "shape error in {op}: {detail}"),
            Error::Parse { path, line, msg } => {
                if *line == 0 {
                    write!(f, "parse error in {path}: {msg}")
                } else {
                    write!(f, "parse error in {path}, line {line}: {msg}")
                }
            }
            Error::Io { path, msg } => write!(f, "io error on {path}: {msg}"),
            Error::Split(msg) => write!(f, "split error: {msg}"),
            Error::DegenerateAttribute(msg) => write!(f, "degenerate attribute: {msg}"),
            Error::DegenerateMetric(msg) => write!(f, "degenerate metric: {msg}"),
            Error::Data(msg) => write!(f, "data error: {msg}"),
            Error::Range(msg) => write!(f, "range error: {msg}"),
            Error::Batch(msg) => write!(f, "batch error: {msg}"),
            Error::Consistency(msg) => write!(f, "consistency error: {msg}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl Error {
    /// True for errors that indicate a bug in this crate rather than bad
    /// input: callers surface these differently (exit code 3 in the CLI).
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Consistency(_) | Error::Numeric(_))
    }
}
