use std::fmt;

use crate::domain::ScenarioIssue;

pub type Result<T, E = OffloadError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum OffloadError {
    #[error("invalid scenario: {}", IssueList(.0))]
    InvalidScenario(Vec<ScenarioIssue>),

    #[error("vehicle {vehicle} at x = {x} m is not covered by any RSU")]
    Uncovered { vehicle: usize, x: f64 },

    #[error("uncovered at reply: request {request} (vehicle {vehicle}) is at x = {x} m when its reply is ready at t = {t_s} s")]
    UncoveredAtReply {
        request: usize,
        vehicle: usize,
        x: f64,
        t_s: f64,
    },

    #[error("transfer needs a positive payload and bandwidth (payload = {payload_kb} KB, bandwidth = {bw_gbps} Gbps)")]
    NonPositiveTransfer { payload_kb: f64, bw_gbps: f64 },

    #[error("overlap inconsistency on server {server}: request {request} has negative remaining work")]
    OverlapInconsistency { server: usize, request: usize },

    #[error("assignment has {found} genes but the scenario has {expected} requests")]
    AssignmentLength { expected: usize, found: usize },

    #[error("gene {gene} of request {request} names a cloud that does not exist ({clouds} clouds)")]
    UnknownCloud {
        request: usize,
        gene: u16,
        clouds: usize,
    },

    #[error("instance too large for exhaustive search: {required} assignments exceed the limit of {limit}")]
    InstanceTooLarge { required: u128, limit: u64 },

    #[error("invalid GA parameters: {0}")]
    InvalidParams(String),

    #[error("invalid workload spec: {0}")]
    InvalidWorkload(String),

    #[error("trajectory input, row {row}: {message}")]
    Trajectory { row: usize, message: String },

    #[error("the roulette wheel has no fitness mass")]
    EmptyWheel,

    #[error("unsupported schema version {found} (expected {expected})")]
    Schema { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    TomlDecode(#[from] toml::de::Error),

    #[error(transparent)]
    TomlEncode(#[from] toml::ser::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

struct IssueList<'a>(&'a [ScenarioIssue]);

impl fmt::Display for IssueList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}
