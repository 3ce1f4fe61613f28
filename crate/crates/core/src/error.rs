use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("b = 0 gives a tube domain, which is not supported (need b >= 1)")]
    TubeDomain,
    #[error("rank r must be at least 1")]
    ZeroRank,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("matrix is not Hermitian")]
    NotHermitian,
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
    #[error("point is outside the domain (I - ZZ* is not positive definite)")]
    OutsideDomain,
    #[error("matrix is not in SU(r, r+b): residual {0:.3e}")]
    OutsideGroup(f64),
    #[error("not a Shilov boundary point: residual {0:.3e}")]
    OffBoundary(f64),
    #[error("restricted root check failed: {0}")]
    RootMismatch(String),
    #[error("s = {re}{im:+}i is not admissible: need Re(s) > (a/2)(r-1) = {threshold}")]
    Inadmissible { re: f64, im: f64, threshold: f64 },
    #[error("operation requires rank one (r = 1), got r = {0}")]
    RankOneOnly(usize),
    #[error("term budget exceeded: {0}")]
    TooManyTerms(String),
    #[error("non-finite function value at {0}")]
    NonFinite(String),
    #[error("did not converge: {0}")]
    NonConvergence(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("invariant failed: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate(_) | Error::NonFinite(_) => 3,
            Error::Invalid(_) | Error::TubeDomain | Error::ZeroRank | Error::RankOneOnly(_) | Error::Inadmissible { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
