//! Crate-wide error type.

/// Error raised by graph construction, boundary resolution, solves, and
/// operator assembly.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid tree parameters: {0}")]
    InvalidTreeSpec(String),
    #[error("edge {0} has nonpositive length {1}")]
    NonpositiveLength(String, f64),
    #[error("graph is not connected")]
    Disconnected,
    #[error("degree-1 vertex {0} is not tagged as boundary")]
    UntaggedLeaf(String),
    #[error("unknown vertex {0:?}")]
    UnknownVertex(String),
    #[error("invalid graph point: {0}")]
    InvalidPoint(String),
    #[error("invalid address word {0:?}: {1}")]
    BadWord(String, String),
    #[error("invalid partition: {0}")]
    BadPartition(String),
    #[error("word {0:?} is deeper than truncation depth {1}")]
    WordTooDeep(String, u32),
    #[error("cannot separate at this truncation: {0}")]
    CannotSeparate(String),
    #[error("cutoff regions overlap: {0}")]
    RegionsOverlap(String),
    #[error("functions live on different graphs")]
    GraphMismatch,
    #[error("operation requires a tree graph built from a tree spec")]
    NotATree,
    #[error("level set meets a boundary region at t = {0}")]
    LevelMeetsBoundary(f64),
    #[error("no descent direction at {0}")]
    NoDescent(String),
    #[error("no admissible threshold at this truncation: {0}")]
    NoThreshold(String),
    #[error("invalid boundary condition: {0}")]
    BadBoundaryCondition(String),
    #[error("infinite tail mass: {0}")]
    InfiniteTailMass(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("function is not compactly supported in the interior: {0}")]
    NotCompactlySupported(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("requested {0} eigenvalues but the operator has {1} degrees of freedom")]
    TooManyEigenvalues(usize, usize),
}

pub type Result<T> = std::result::Result<T, Error>;
