use std::io;

/// Errors raised by graph construction, expression checking and kernel execution.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("edge ({src}, {dst}) out of range for a {num_src}x{num_dst} graph")]
    IndexOutOfRange {
        src: u64,
        dst: u64,
        num_src: usize,
        num_dst: usize,
    },
    #[error("duplicate edge ({src}, {dst})")]
    DuplicateEdge { src: u32, dst: u32 },
    #[error("{what}: expected {expected} entries, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("graph too large: {0}")]
    TooLarge(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing \"num_src num_dst\" header line")]
    MissingHeader,
    #[error("invalid container: {0}")]
    Format(String),
    #[error("degree {degree} exceeds population of {population} vertices")]
    DegreeExceedsPopulation { degree: usize, population: usize },
    #[error("invalid partition count {requested} for {num_src} source vertices")]
    InvalidPartitionCount { requested: usize, num_src: usize },
    #[error("tensor shape {0:?} has a zero-sized dimension")]
    ZeroSizeShape(Vec<usize>),
    #[error("shape mismatch on axis `{axis}`: {detail}")]
    ShapeMismatch { axis: String, detail: String },
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("missing parameter `{0}`")]
    MissingParameter(String),
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
    #[error("bad parameters for `{name}`: {detail}")]
    BadParams { name: String, detail: String },
    #[error("incompatible schedule: {0}")]
    IncompatibleSchedule(String),
    #[error("tuning space is empty")]
    EmptySpace,
    #[error("unsupported forward udf: {0}")]
    UnsupportedForwardUdf(String),
    #[error("oracle size guard: {n} vertices exceeds limit {limit}")]
    SizeGuard { n: usize, limit: usize },
    #[error("no candidate schedule passed validation")]
    AllCandidatesInvalid,
    #[error("schedule {schedule} disagrees with default schedule (max rel err {max_rel:e})")]
    CorrectnessFailure { schedule: String, max_rel: f64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
