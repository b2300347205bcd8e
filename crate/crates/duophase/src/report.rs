//! Pass/fail reports for structural hypothesis checks.
//!
//! Validation never errors: each inequality or sampled estimate becomes one
//! entry, and the report as a whole passes iff every entry does.

use std::fmt;

/// One named check with its outcome and a human-readable detail string.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Ordered list of checks; `passed()` is the conjunction.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self { checks: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for check in &self.checks {
            writeln!(
                f,
                "[{}] {}: {}",
                if check.passed { "pass" } else { "FAIL" },
                check.name,
                check.detail
            )?;
        }
        Ok(())
    }
}
