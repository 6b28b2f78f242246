use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("item `{0}` is not present in the group catalog")]
    UnknownItem(String),

    #[error("item `{0}` has no group assignment")]
    UngroupedItem(String),

    #[error("invalid score {score} for user `{user}`, item `{item}`: scores must be finite and >= 0")]
    InvalidScore { user: String, item: String, score: f64 },

    #[error("utility vector is degenerate (empty, all zero, negative or non-finite)")]
    DegenerateUtility,

    #[error("tax base t = 1 is a jump point of the fairness family; request a one-sided limit")]
    SingularTaxBase,

    #[error("tax base t = {0} is not allowed here")]
    InvalidTaxBase(f64),

    #[error("utility must be strictly positive, got {0}")]
    NonPositiveUtility(f64),

    #[error("group id {0} is out of range")]
    UnknownGroup(usize),

    #[error("adaptive quadrature did not converge on [{a}, {b}]; partial value {partial}")]
    NonConvergent { a: f64, b: f64, partial: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("dataset is empty after preprocessing")]
    EmptyDataset,

    #[error("ranked lists disagree: {0}")]
    ListMismatch(String),

    #[error("no configuration reached the NDCG band [{lo}, {hi}] (closest {closest})")]
    BandNotReached { lo: f64, hi: f64, closest: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
