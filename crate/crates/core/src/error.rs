use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes shared by every analytic routine in the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the formula.
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    /// `f(lo) - target` and `f(hi) - target` have the same sign.
    Bracket { lo: f64, hi: f64 },
    /// An iterative method used up its iteration budget.
    NotConverged { iterations: usize, residual: f64 },
    /// The requested receiver concentration needs more than full
    /// receptor occupancy at the transmitter.
    Saturated { requested: f64, limit: f64 },
    /// The distinct-poles cascade solution was asked for with `b1 == b2`.
    DegenerateRates { rate: f64 },
    LengthMismatch { expected: usize, found: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain {
                name,
                value,
                expected,
            } => write!(f, "{name} = {value} is out of domain (expected {expected})"),
            Error::Bracket { lo, hi } => {
                write!(f, "root is not bracketed by [{lo}, {hi}]")
            }
            Error::NotConverged {
                iterations,
                residual,
            } => write!(
                f,
                "no convergence after {iterations} iterations (residual {residual:e})"
            ),
            Error::Saturated { requested, limit } => write!(
                f,
                "concentration {requested} nM is unreachable (saturation at {limit} nM)"
            ),
            Error::DegenerateRates { rate } => write!(
                f,
                "distinct-poles solution requires b1 != b2 (both are {rate})"
            ),
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
        }
    }
}

impl core::error::Error for Error {}

/// Returns a domain error unless `ok` holds.
pub(crate) fn ensure(ok: bool, name: &'static str, value: f64, expected: &'static str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            expected,
        })
    }
}
