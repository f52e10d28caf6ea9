use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("operation requires sigma > 0 (got sigma = 0); use the deterministic limit instead")]
    DegenerateVolatility,

    #[error("deterministic limit requires sigma = 0 (got sigma = {0})")]
    NotDeterministic(f64),

    #[error("level {requested} needs levels below it solved, but only 0..={solved} are available")]
    LevelOrder { requested: usize, solved: usize },

    #[error("level {level} is out of range for a grid with top level {max}")]
    LevelOutOfRange { level: usize, max: usize },

    #[error("no finite bracket for the minimum found (search reached x = {x_hi})")]
    BracketFailure { x_hi: f64 },

    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("not applicable: {0}")]
    NotApplicable(&'static str),

    #[error("path {path}, step {step}: ratcheting strategy asked to raise the rate from {from} to {to}")]
    InadmissibleStrategy {
        path: u64,
        step: u64,
        from: f64,
        to: f64,
    },

    #[error("optimization failed: {0}")]
    OptimizationFailure(String),

    #[error("mesh sizes must be ascending and each must divide the next: {0:?}")]
    NonNestedMeshes(Vec<usize>),

    #[error("failed to write {what}: {message}")]
    Export { what: &'static str, message: String },
}
