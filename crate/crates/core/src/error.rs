use thiserror::Error;

pub type Result<T> = std::result::Result<T, HardyError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HardyError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("point outside the closure of the domain: {0:?}")]
    OutsideDomain(Vec<f64>),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("operation not supported for {0}")]
    UnsupportedVariant(&'static str),
    #[error("invalid boundary partition: {0}")]
    Partition(String),
    #[error("invalid mesh: {0}")]
    Mesh(String),
    #[error("field and weight do not belong to the same discretization")]
    NonMatchingMesh,
    #[error("degenerate field: weighted norm is zero")]
    DegenerateField,
    #[error("infeasible profile: {0}")]
    InfeasibleProfile(String),
    #[error("every node is pinned by a Dirichlet condition")]
    AllPinned,
    #[error("non-finite quotient encountered in line search at iteration {0}")]
    LineSearchNan(usize),
    #[error("parameters outside the regime of the inequality: {0}")]
    OutOfRegime(String),
}
