//! Mobility-aware edge-cloud offloading for vehicular requests.
//!
//! A [`Scenario`] describes servers, RSU coverage, bandwidths, vehicles and
//! their requests. An [`Assignment`] sends each request either to the edge
//! covering its vehicle or to one of the clouds. [`Evaluator`] turns an
//! assignment into per-request communication, processing and I/O times plus
//! SLA violations; [`ga::run`] searches for a fast assignment that respects
//! the SLA, and [`oracle::solve_exhaustive`] finds the exact optimum of small
//! instances.
//!
//! ```
//! use iov_offload::{generate_scenario, Assignment, Evaluator, WorkloadSpec};
//!
//! let s = generate_scenario(&WorkloadSpec { requests: 4, ..WorkloadSpec::default() }, 1)?;
//! let report = Evaluator::new(&s)?.report(&Assignment::all_home_edge(4))?;
//! assert!(report.objective.total_time_s > 0.0);
//! # Ok::<(), iov_offload::OffloadError>(())
//! ```

pub mod constraints;
pub mod domain;
mod error;
pub mod exec;
pub mod ga;
pub mod mobility;
pub mod oracle;
pub mod workload;

pub use constraints::{ResourceRule, ViolationVector};
pub use domain::{validate_scenario, Assignment, Gene, Request, Scenario, Server, Vehicle};
pub use error::{OffloadError, Result};
pub use exec::{evaluate_assignment, EvaluationReport, Evaluator, SolutionScore};
pub use ga::{GaParams, GaTrace, Mode};
pub use oracle::{solve_exhaustive, OracleResult};
pub use workload::{generate_scenario, WorkloadSpec};
