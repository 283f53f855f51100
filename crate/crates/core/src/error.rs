use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("band mismatch: {0}")]
    BandMismatch(String),

    #[error("quadrature grid of {points} points exceeds the memory cap of {cap}")]
    GridTooLarge { points: usize, cap: usize },

    #[error("exactness budget exceeded: {0}")]
    Exactness(String),

    #[error("x-band overflow: {0}")]
    XBandOverflow(String),

    #[error("order overflow: requested {requested}, configured maximum {max}")]
    OrderOverflow { requested: usize, max: usize },

    #[error("rank deficiency in the jet system at order {0}")]
    RankDeficient(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("near-singular pencil at {witness} (condition {cond:.3e})")]
    NearSingular { witness: String, cond: f64 },

    #[error("matrix is not positive definite at {0}")]
    NotPositiveDefinite(String),

    #[error("spectrum meets the branch cut at {0}")]
    BranchCut(String),

    #[error("contour: {0}")]
    Contour(String),

    #[error("every shell is singular")]
    AllSingular,

    #[error("orders must be strictly decreasing")]
    NonMonotoneOrders,

    #[error("lower bound violated: {0}")]
    LowerBound(String),

    #[error("malformed file at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
