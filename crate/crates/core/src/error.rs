use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("translations have a relation within radius {r_free}: {detail}")]
    SmallRelation { r_free: u32, detail: String },
    #[error("orbit chart unavailable: {0}")]
    NoChart(String),
    #[error("scale too large for grid: {0}")]
    ScaleTooLarge(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unregistered locality procedure `{0}`")]
    UnknownProcedure(String),
    #[error("unresolvable base set `{0}`")]
    UnknownBase(String),
    #[error("window too small: {0}")]
    InsufficientWindow(String),
    #[error("infeasible divergence: {0}")]
    Infeasible(String),
    #[error("not a flow: {0}")]
    NotAFlow(String),
    #[error("integer overflow in dyadic arithmetic")]
    Overflow,
    #[error("construction bug: {0}")]
    Internal(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
