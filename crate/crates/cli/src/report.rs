//! The JSON report written by every command.

use lamina::graph_transform::TransformConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;

pub const SCHEMA: &str = "lamina-report/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridInfo {
    pub nodes: Vec<usize>,
    pub depth: usize,
    pub codes: usize,
    pub node_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema: String,
    pub command: String,
    pub scenario: String,
    pub params: BTreeMap<String, f64>,
    pub grid: GridInfo,
    pub pipeline: String,
    pub seed: u64,
    pub transform: TransformConfig,
    pub status: Status,
    pub error: Option<ErrorInfo>,
    /// Pipeline output: transform, plane, hyperbolic, family or sweep reports.
    pub result: Value,
    pub checks: Vec<CheckResult>,
    /// Margins, shadow reports and the expansiveness profile, when requested.
    pub verification: Value,
    pub timestamp: String,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.status == Status::Ok && self.checks.iter().all(|c| c.pass)
    }
}

pub fn error_kind(e: &lamina::Error) -> &'static str {
    use lamina::Error::*;
    match e {
        Input(_) => "input",
        Numeric { .. } => "numeric",
        Domain(_) => "domain",
        Geometry { .. } => "geometry",
        Transversality { .. } => "transversality",
        NonContraction { .. } => "non_contraction",
        Hyperbolicity(_) => "hyperbolicity",
        Immersion(_) => "immersion",
        Truncation(_) => "truncation",
        Scheme(_) => "scheme",
        Continuation { .. } => "continuation",
        Locality { .. } => "locality",
        Hypothesis(_) => "hypothesis",
        Containment(_) => "containment",
    }
}

pub fn error_info(e: &lamina::Error) -> ErrorInfo {
    ErrorInfo {
        kind: error_kind(e).into(),
        message: e.to_string(),
    }
}

pub fn timestamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix:{secs}")
}
