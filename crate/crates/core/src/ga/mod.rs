//! The SLA-aware adaptive genetic algorithm and its two baselines.
//!
//! ```
//! use iov_offload::ga::{run, GaParams, Mode};
//! use iov_offload::workload::{generate_scenario, WorkloadSpec};
//!
//! let spec = WorkloadSpec { requests: 6, ..WorkloadSpec::default() };
//! let scenario = generate_scenario(&spec, 1).unwrap();
//! let params = GaParams { max_generations: 20, ..GaParams::table_v(6, 1) };
//! let trace = run(&scenario, &params).unwrap();
//! assert_eq!(trace.generations.len(), 20);
//! assert_eq!(trace.best.len(), 6);
//! # let _ = Mode::SlaAware;
//! ```

mod engine;
pub mod fitness;
pub mod operators;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{OffloadError, Result};

pub use engine::{run, run_with, GaTrace, GenerationStats, KnownOptimum};
pub use fitness::{fitness, FitnessChain, PenaltyBranch, PenaltyFrame, PopulationEval};
pub use operators::{
    init_population, mutate, mutation_count, parent_count, select_parents, single_point_crossover,
    RouletteWheel,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Adaptive penalty over the SLA constraints.
    #[default]
    SlaAware,
    /// Total time only, constraints ignored during the search.
    #[serde(rename = "qos-ga", alias = "qos-only")]
    QosOnly,
    /// One uniformly random assignment, no search.
    Random,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::SlaAware, Mode::QosOnly, Mode::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SlaAware => "sla-aware",
            Mode::QosOnly => "qos-ga",
            Mode::Random => "random",
        }
    }

    pub fn penalty_enabled(self) -> bool {
        self != Mode::QosOnly
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = OffloadError;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .or((s == "qos-only").then_some(Mode::QosOnly))
            .ok_or_else(|| OffloadError::InvalidParams(format!("unknown mode {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaParams {
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub population_size: usize,
    pub max_generations: usize,
    pub rng_seed: u64,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_optimum: Option<KnownOptimum>,
}

impl GaParams {
    pub const DEFAULT_CROSSOVER_RATE: f64 = 0.95;
    pub const DEFAULT_MUTATION_RATE: f64 = 0.01;
    pub const DEFAULT_MAX_GENERATIONS: usize = 1000;

    /// Tuned defaults: population twice the request count.
    pub fn table_v(requests: usize, seed: u64) -> Self {
        Self {
            crossover_rate: Self::DEFAULT_CROSSOVER_RATE,
            mutation_rate: Self::DEFAULT_MUTATION_RATE,
            population_size: (2 * requests).max(2),
            max_generations: Self::DEFAULT_MAX_GENERATIONS,
            rng_seed: seed,
            mode: Mode::SlaAware,
            known_optimum: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(OffloadError::InvalidParams(m));
        if !(self.crossover_rate > 0.0 && self.crossover_rate <= 1.0) {
            return bad(format!("crossover rate {} outside (0, 1]", self.crossover_rate));
        }
        if !(self.mutation_rate >= 0.0 && self.mutation_rate < 1.0) {
            return bad(format!("mutation rate {} outside [0, 1)", self.mutation_rate));
        }
        if self.population_size < 2 || self.population_size % 2 != 0 {
            return bad(format!(
                "population size {} must be even and at least 2",
                self.population_size
            ));
        }
        if self.max_generations == 0 {
            return bad("at least one generation is required".into());
        }
        Ok(())
    }
}
