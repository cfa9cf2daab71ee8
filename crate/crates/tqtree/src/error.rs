use thiserror::Error;

use crate::traj::UserId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("trajectory {0} has fewer than two points")]
    TooFewPoints(UserId),
    #[error("trajectory {0} contains a non-finite coordinate")]
    NonFiniteCoordinate(UserId),
    #[error("facility {0} has no stops")]
    EmptyFacility(u64),
    #[error("trajectory {0} lies outside the index bounds")]
    OutOfBounds(UserId),
    #[error("trajectory id {0} is already indexed")]
    DuplicateId(UserId),
    #[error("duplicate facility id {0}")]
    DuplicateFacilityId(u64),
    #[error("psi must be positive, got {0}")]
    InvalidPsi(f64),
    #[error("invalid rectangle: min ({0}, {1}) exceeds max ({2}, {3})")]
    InvalidRect(f64, f64, f64, f64),
    #[error("facility group is empty")]
    EmptyGroup,
    #[error("query service mode {query:?} does not match index service mode {index:?}")]
    ModeMismatch {
        query: crate::service::ServiceMode,
        index: crate::service::ServiceMode,
    },
    #[error("{combinations} candidate combinations exceed the exact-solver budget of {budget}")]
    CombinationBudget { combinations: u128, budget: u64 },
    #[error("snapshot format error: {0}")]
    Snapshot(String),
    #[error("dataset format error: {0}")]
    Dataset(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
