use thiserror::Error;

use crate::fock::ModeLabel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state has no nonzero amplitude")]
    DegenerateState,

    #[error("tensor product of states sharing mode {0}")]
    OverlappingModes(ModeLabel),

    #[error("truncation at n_max = {n_max} removes every term of the state")]
    FullyTruncated { n_max: u32 },

    #[error("beam splitter needs distinct ports, got {0}")]
    IdenticalPorts(String),

    #[error("transform is not unitary (max |U^dag U - I| = {deviation:.3e})")]
    NonUnitary { deviation: f64 },

    #[error("transforms act on different mode universes")]
    MismatchedUniverse,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("input occupies output mode {0}; source states live on ports a and b")]
    WrongPorts(ModeLabel),

    #[error("count tables do not describe matching configurations: {0}")]
    MismatchedTables(String),

    #[error("subtracted coincidence total is zero; insufficient statistics")]
    InsufficientStatistics,

    #[error("visibility fit is degenerate: {0}")]
    DegenerateFit(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
