use crate::numtheory::Rational;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// The iteration budget ran out before the cofactor could be split.
    #[error("factorization incomplete: cofactor {cofactor} left unsplit after budget exhausted")]
    FactorizationIncomplete { cofactor: String },

    #[error("singular parameter k = {0}")]
    SingularParameter(Rational),

    #[error("singular model: discriminant is zero")]
    SingularModel,

    #[error("point is not on the curve")]
    PointNotOnCurve,

    #[error("bad reduction at p = {0}")]
    BadReduction(u64),

    #[error("{0} is not the square of a rational number")]
    NotASquare(Rational),

    #[error("closed form and structural derivation disagree for {what} at k = {k}")]
    ClosedFormMismatch { what: &'static str, k: Rational },

    #[error("fewer than {needed} primes of good reduction below {searched}")]
    InsufficientGoodPrimes { needed: usize, searched: u64 },

    #[error("no rational point found with height bound {0}")]
    SearchExhausted(u64),

    #[error("model cubic does not split over the rationals")]
    NotSplit,

    #[error("empty input")]
    EmptyInput,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An internal invariant failed; always a bug.
    #[error("internal consistency failure: {0}")]
    Internal(String),
}
