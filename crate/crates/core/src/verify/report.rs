use serde::{Deserialize, Serialize};

/// One numerically evaluated inequality `lhs ≤ rhs` (or `lhs < rhs` when
/// `strict`).
///
/// A non-strict check passes when `lhs ≤ rhs + slack·|rhs| + abs_slack`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub abs_slack: f64,
    pub strict: bool,
    pub pass: bool,
    /// Where the tested field came from (seed, solve id, ...).
    pub provenance: String,
}

impl CheckReport {
    pub fn leq(name: impl Into<String>, lhs: f64, rhs: f64, slack: f64, abs_slack: f64) -> Self {
        let pass = lhs <= rhs + slack * rhs.abs() + abs_slack;
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack,
            abs_slack,
            strict: false,
            pass,
            provenance: String::new(),
        }
    }

    pub fn lt(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack: 0.0,
            abs_slack: 0.0,
            strict: true,
            pass: lhs < rhs,
            provenance: String::new(),
        }
    }

    /// A pass/fail report for a condition that is not an inequality.
    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        let v = if pass { 0.0 } else { 1.0 };
        Self {
            pass,
            ..Self::leq(name, v, 0.0, 0.0, 0.0)
        }
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    /// `rhs - lhs`: positive when the inequality holds with room to spare.
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

pub fn all_pass(reports: &[CheckReport]) -> bool {
    reports.iter().all(|r| r.pass)
}
