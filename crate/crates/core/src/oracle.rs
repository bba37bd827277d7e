//! Exhaustive search over every assignment of a small instance.
//!
//! ```
//! use iov_offload::oracle::solve_exhaustive;
//! use iov_offload::workload::{generate_scenario, WorkloadSpec};
//!
//! let spec = WorkloadSpec { requests: 3, edges: 1, clouds: 2, ..WorkloadSpec::default() };
//! let s = generate_scenario(&spec, 4).unwrap();
//! let r = solve_exhaustive(&s, 1_000_000).unwrap();
//! assert_eq!(r.enumeration_count, 27);
//! ```

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Assignment, Gene, Scenario};
use crate::error::{OffloadError, Result};
use crate::exec::{Evaluator, SolutionScore};
use crate::ga::{KnownOptimum, Mode, PenaltyFrame};

pub const DEFAULT_LIMIT: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCandidate {
    pub assignment: Assignment,
    pub score: SolutionScore,
    /// Penalized fitness in the frame of the whole enumeration.
    pub penalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub enumeration_count: u64,
    /// Frame built over every enumerated assignment.
    pub frame: PenaltyFrame,
    /// Fastest assignment without violations.
    pub best_feasible: Option<OracleCandidate>,
    /// Lowest penalized fitness in the enumeration frame.
    pub best_overall_penalized: OracleCandidate,
    /// Fastest assignment, constraints ignored.
    pub best_unconstrained: OracleCandidate,
}

impl OracleResult {
    /// The best feasible assignment when one exists, otherwise the
    /// penalized best.
    pub fn optimum(&self) -> &OracleCandidate {
        self.best_feasible
            .as_ref()
            .unwrap_or(&self.best_overall_penalized)
    }

    /// Early-stop target for a GA run in `mode`.
    pub fn known_optimum(&self, mode: Mode) -> KnownOptimum {
        if mode.penalty_enabled() {
            let o = self.optimum();
            KnownOptimum {
                frame: self.frame,
                penalized: o.penalized,
                feasible: o.score.feasible(),
                penalty_enabled: true,
            }
        } else {
            KnownOptimum {
                frame: self.frame,
                penalized: self.frame.chain(&self.best_unconstrained.score, false).penalized,
                feasible: false,
                penalty_enabled: false,
            }
        }
    }
}

/// Number of assignments of `requests` genes over `alphabet` values.
pub fn enumeration_size(requests: usize, alphabet: usize) -> Option<u128> {
    (alphabet as u128).checked_pow(u32::try_from(requests).ok()?)
}

/// The assignment at lexicographic position `index`.
pub fn decode(mut index: u64, requests: usize, alphabet: usize) -> Assignment {
    let mut genes = vec![Gene::HOME_EDGE; requests];
    for g in genes.iter_mut().rev() {
        *g = Gene::from_index((index % alphabet as u64) as usize);
        index /= alphabet as u64;
    }
    Assignment::new(genes)
}

pub fn solve_exhaustive(s: &Scenario, limit: u64) -> Result<OracleResult> {
    solve_exhaustive_with(&Evaluator::new(s)?, limit)
}

fn pick(
    a: Option<(u64, f64, f64)>,
    b: Option<(u64, f64, f64)>,
) -> Option<(u64, f64, f64)> {
    // (index, primary, secondary): lower primary, then secondary, then index
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            let ord = x
                .1
                .total_cmp(&y.1)
                .then(x.2.total_cmp(&y.2))
                .then(x.0.cmp(&y.0));
            Some(if ord == Ordering::Greater { y } else { x })
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Bests {
    feasible: Option<(u64, f64, f64)>,
    penalized: Option<(u64, f64, f64)>,
    unconstrained: Option<(u64, f64, f64)>,
}

impl Bests {
    fn merge(self, o: Bests) -> Bests {
        Bests {
            feasible: pick(self.feasible, o.feasible),
            penalized: pick(self.penalized, o.penalized),
            unconstrained: pick(self.unconstrained, o.unconstrained),
        }
    }
}

pub fn solve_exhaustive_with(ev: &Evaluator<'_>, limit: u64) -> Result<OracleResult> {
    let requests = ev.requests();
    let alphabet = Assignment::alphabet_size(ev.clouds());
    let required = enumeration_size(requests, alphabet).unwrap_or(u128::MAX);
    if required > u128::from(limit) {
        return Err(OffloadError::InstanceTooLarge { required, limit });
    }
    let count = required as u64;
    let score_at = |i: u64| ev.score(&decode(i, requests, alphabet));

    let frame = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut f = PenaltyFrame::empty();
            f.absorb(&score_at(i)?);
            f.population_size = 1;
            Ok::<_, OffloadError>(f)
        })
        .try_reduce(PenaltyFrame::empty, |a, b| Ok(a.merge(&b)))?;

    let bests = (0..count)
        .into_par_iter()
        .map(|i| {
            let s = score_at(i)?;
            let p = frame.chain(&s, true).penalized;
            Ok::<_, OffloadError>(Bests {
                feasible: s.feasible().then_some((i, s.total_time_s, 0.0)),
                penalized: Some((i, p, s.total_time_s)),
                unconstrained: Some((i, s.total_time_s, 0.0)),
            })
        })
        .try_reduce(Bests::default, |a, b| Ok(a.merge(b)))?;

    let candidate = |i: u64| -> Result<OracleCandidate> {
        let assignment = decode(i, requests, alphabet);
        let score = ev.score(&assignment)?;
        Ok(OracleCandidate {
            penalized: frame.chain(&score, true).penalized,
            assignment,
            score,
        })
    };
    Ok(OracleResult {
        enumeration_count: count,
        frame,
        best_feasible: bests.feasible.map(|b| candidate(b.0)).transpose()?,
        best_overall_penalized: candidate(bests.penalized.expect("non-empty enumeration").0)?,
        best_unconstrained: candidate(bests.unconstrained.expect("non-empty enumeration").0)?,
    })
}
