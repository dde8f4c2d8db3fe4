//! Localized findings shared by every validator.

use serde::Serialize;

/// One violated identity: which check, where (cell, lift or chart names),
/// and the offending values.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Finding {
    pub check: String,
    pub at: Vec<String>,
    pub detail: String,
}

impl Finding {
    pub fn new<S: Into<String>>(check: &str, at: impl IntoIterator<Item = S>, detail: impl Into<String>) -> Self {
        Finding { check: check.into(), at: at.into_iter().map(Into::into).collect(), detail: detail.into() }
    }
}

pub fn fmt_vec(v: &[i64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(","))
}

/// Findings that fail a check, and warnings that do not.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Report {
    pub findings: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl Report {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}
