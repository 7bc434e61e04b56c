//! Outcomes of verification routines.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// One verified identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Witness on success, first counterexample on failure.
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
        Check { name: name.into(), pass, detail: detail.into() }
    }

    pub fn pass(name: impl Into<String>, detail: impl Into<String>) -> Check {
        Check::new(name, true, detail)
    }

    pub fn fail(name: impl Into<String>, detail: impl Into<String>) -> Check {
        Check::new(name, false, detail)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// True when every check passed.
pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// Folds many checks into one, keeping the first failure as the detail.
pub fn summarize(name: &str, checks: Vec<Check>) -> Check {
    let n = checks.len();
    match checks.into_iter().find(|c| !c.pass) {
        Some(c) => Check::fail(name, alloc::format!("{}: {}", c.name, c.detail)),
        None => Check::pass(name, alloc::format!("{n} cases")),
    }
}
