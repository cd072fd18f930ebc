use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),

    #[error("not a reflection: {0}")]
    NotAReflection(String),

    #[error("element is not in the group")]
    NotInGroup,

    #[error("point lies outside the fundamental chamber")]
    OutsideChamber,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("grid too large for direct summation ({nodes} nodes, limit {limit})")]
    TooLarge { nodes: usize, limit: usize },

    #[error("group acts on {rank} coordinates but the grid has {dims}")]
    RankExceedsDimension { rank: usize, dims: usize },

    #[error("placement radius {radius} exceeds the admissible {limit}; copies would wrap")]
    Placement { radius: f64, limit: f64 },

    #[error("nonlocal interaction vanishes; Nehari scaling undefined")]
    ZeroInteraction,

    #[error("iterate collapsed to zero (norm {0:e})")]
    CollapseToZero(f64),

    #[error("too few populated shells for a decay fit ({0}, need 5)")]
    TooFewShells(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
