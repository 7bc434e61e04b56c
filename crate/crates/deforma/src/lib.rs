//! Chart ingestion, verification suites and reports for the `deforma`
//! command-line tool.

use std::fmt;

pub mod commands;
pub mod expr;
pub mod random;
pub mod report;
pub mod session;
pub mod spec;
pub mod suites;

pub use report::Report;
pub use session::{Session, Which};
pub use spec::{Chart, ChartSpec};
pub use suites::{Samples, Suite};

/// Why a command produced no verdict, or a failing one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Failure {
    /// Malformed or unusable input.
    Input(String),
    Core(deforma_core::Error),
}

impl Failure {
    /// Exit status: 2 for input errors, 1 for everything that refutes an
    /// identity.
    pub fn exit_code(&self) -> i32 {
        use deforma_core::Error as E;
        match self {
            Failure::Input(_) => 2,
            Failure::Core(E::Depth { .. } | E::DegenerateChart | E::Parse(_)) => 2,
            Failure::Core(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(s) => write!(f, "input error: {s}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<deforma_core::Error> for Failure {
    fn from(e: deforma_core::Error) -> Failure {
        Failure::Core(e)
    }
}
