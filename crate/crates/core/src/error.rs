use thiserror::Error;

/// Errors raised by the laboratory.
///
/// Variants are grouped by [`ErrorKind`] so that batch front-ends can map
/// them onto process exit codes without matching every variant.
#[derive(Debug, Error)]
pub enum Error {
    #[error("leading coefficient {value:e} is below the floor {floor:e}")]
    ZeroLeadingCoefficient { value: f64, floor: f64 },
    #[error("coefficient {index} is negative ({value:e})")]
    NegativeCoefficient { index: usize, value: f64 },
    #[error("coefficient {index} is not positive ({value:e})")]
    NonPositiveCoefficient { index: usize, value: f64 },
    #[error("coefficient {index} is not finite")]
    NonFiniteCoefficient { index: usize },
    #[error("|z| = {modulus} lies outside the closed unit disk")]
    OutOfDomain { modulus: f64 },
    #[error("exponent {0} must exceed 1")]
    BadExponent(f64),
    #[error("support of the return law has gcd {0} > 1")]
    PeriodicSupport(u64),
    #[error("return law sums to {0}, not 1")]
    NotNormalized(f64),
    #[error("truncation too small: {0}")]
    TruncationTooSmall(String),
    #[error("ergodic degree {0} is too small for this identity (needs > 1)")]
    DegreeTooSmall(f64),
    #[error("ergodic degree is infinite; the polynomial-rate asymptotics are degenerate")]
    InfiniteDegree,
    #[error("value at n = {0} is zero; cannot take logarithms")]
    ZeroValueInWindow(u64),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("chain is positive recurrent")]
    NotNullRecurrent,
    #[error("pairing u.v diverges for the declared tails")]
    DivergentPairing,
    #[error("z = 1 is the singular point of the generating functions")]
    SingularPoint,
    #[error("branch {0} has zero probability; breakpoints must be distinct")]
    ZeroProbabilityBranch(usize),
    #[error("orbit entered partition depth beyond the resolvable cap {cap}")]
    SymbolCapExceeded { cap: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse classification used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data or arguments.
    Input,
    /// A mathematical precondition of the requested computation fails.
    Precondition,
    /// Truncation is too short for the requested accuracy.
    Truncation,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            ZeroLeadingCoefficient { .. }
            | DegreeTooSmall(_)
            | InfiniteDegree
            | PreconditionViolated(_)
            | NotNullRecurrent
            | DivergentPairing
            | SingularPoint
            | PeriodicSupport(_)
            | ZeroValueInWindow(_) => ErrorKind::Precondition,
            TruncationTooSmall(_) | SymbolCapExceeded { .. } => ErrorKind::Truncation,
            Io(_) | Csv(_) => ErrorKind::Io,
            _ => ErrorKind::Input,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
