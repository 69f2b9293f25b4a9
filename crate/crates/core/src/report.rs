use serde::{Deserialize, Serialize};

/// Outcome of an exact certificate check. Only the first violation is kept.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertReport {
    pub check: String,
    pub passed: bool,
    /// Number of indices (or grid points) examined.
    pub checked: usize,
    pub violation: Option<Violation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Violation {
    pub index: usize,
    pub detail: String,
}

impl CertReport {
    pub fn pass(check: impl Into<String>, checked: usize) -> Self {
        CertReport { check: check.into(), passed: true, checked, violation: None }
    }

    pub fn fail(check: impl Into<String>, checked: usize, index: usize, detail: impl Into<String>) -> Self {
        CertReport {
            check: check.into(),
            passed: false,
            checked,
            violation: Some(Violation { index, detail: detail.into() }),
        }
    }

    pub fn first_violation(&self) -> Option<usize> {
        self.violation.as_ref().map(|v| v.index)
    }
}
