use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("entry {0:?} repeats an index")]
    DiagonalEntry(Vec<usize>),
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("expected {expected} variable groups, found {found}")]
    GroupCount { expected: usize, found: usize },
    #[error("tensor order {found} not supported here (expected {expected})")]
    OrderMismatch { expected: String, found: usize },
    #[error("unsupported degree {0}")]
    UnsupportedDegree(usize),
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{what} has size {size}, above the cap {cap}")]
    SizeCap { what: String, size: usize, cap: usize },
    #[error("polynomial degree {degree} exceeds the pseudo-distribution degree {limit}")]
    DegreeOverflow { degree: usize, limit: usize },
    #[error("monomial {0} is not covered by the moment basis")]
    BasisCoverage(String),
    #[error("reweighting mass {mass:e} is below tolerance")]
    DegenerateReweight { mass: f64 },
    #[error("invalid moment: {0}")]
    InvalidMoment(String),
    #[error("extraction failed: {0}")]
    Extraction(String),
    #[error("rounding failed: {0}")]
    Rounding(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("malformed DIMACS header on line {0}")]
    DimacsHeader(usize),
    #[error("clause on line {line} has {width} literals, expected 3")]
    ClauseWidth { line: usize, width: usize },
    #[error("clause on line {0} repeats a variable")]
    RepeatedVariable(usize),
    #[error("clause on line {0} reuses a variable triple")]
    DuplicateTriple(usize),
    #[error("literal {literal} on line {line} is outside 1..={n}")]
    LiteralRange { line: usize, literal: i64, n: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
