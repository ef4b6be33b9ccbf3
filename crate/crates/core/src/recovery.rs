use std::fmt;

use serde::Serialize;

/// One violated recovery condition. Indices are 1-based, matching how the
/// conditions are usually written (`q = 1..Q`, `t = 1..T`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionFailure {
    pub name: String,
    pub indices: Vec<(String, usize)>,
    /// Magnitude of the offending near-zero quantity (determinant, entry of
    /// `E` or smallest singular value).
    pub magnitude: f64,
}

impl fmt::Display for ConditionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at (", self.name)?;
        for (i, (label, idx)) in self.indices.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{label}={idx}")?;
        }
        write!(f, "): |value| = {:.3e}", self.magnitude)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub passed: bool,
    pub failures: Vec<ConditionFailure>,
    /// Requirements that cannot be checked from the profile alone.
    pub notes: Vec<String>,
}

impl RecoveryReport {
    pub fn from_failures(failures: Vec<ConditionFailure>, notes: Vec<String>) -> Self {
        Self {
            passed: failures.is_empty(),
            failures,
            notes,
        }
    }
}

impl fmt::Display for RecoveryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "recovery conditions: {}", if self.passed { "PASS" } else { "FAIL" })?;
        for failure in &self.failures {
            writeln!(f, "  {failure}")?;
        }
        for note in &self.notes {
            writeln!(f, "  note: {note}")?;
        }
        Ok(())
    }
}
