use alloc::string::String;
use core::fmt;

/// Failures of the engine. Every variant is a refusal to produce a wrong
/// answer: nothing is ever silently truncated past its known validity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Error {
    /// Operands live on different variable sets or have incompatible shapes.
    Structural(String),
    /// A function was evaluated outside its domain (e.g. `log` of a jet whose
    /// constant term is not 1).
    Domain(String),
    /// An exponential series does not terminate on the declared grading.
    Divergence(String),
    /// The input jets are too shallow for the requested order.
    Depth { needed: i32, available: i32, what: String },
    /// The Hessian of the potential is singular at the base point.
    DegenerateChart,
    /// The operator is not the quantization of a fibrewise polynomial.
    NotASymbol(String),
    /// A linear system that must be solvable by theory was not. Indicates a
    /// bug upstream.
    Inconsistent(String),
    /// An element violates the `ν`-filtration it is declared to satisfy.
    Filtration(String),
    /// Malformed textual input.
    Parse(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Structural(s) => write!(f, "structural error: {s}"),
            Error::Domain(s) => write!(f, "domain error: {s}"),
            Error::Divergence(s) => write!(f, "divergent exponential: {s}"),
            Error::Depth { needed, available, what } => {
                write!(f, "insufficient jet depth for {what}: need valid degree {needed}, have {available}")
            }
            Error::DegenerateChart => write!(f, "degenerate chart: Hessian singular at the base point"),
            Error::NotASymbol(s) => write!(f, "not a symbol: {s}"),
            Error::Inconsistent(s) => write!(f, "internal inconsistency: {s}"),
            Error::Filtration(s) => write!(f, "filtration violated: {s}"),
            Error::Parse(s) => write!(f, "parse error: {s}"),
        }
    }
}
