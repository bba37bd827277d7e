//! Adaptive-penalty fitness.
//!
//! Raw total time is min-max normalized over the population. Each of the five
//! violation magnitudes is divided by its population maximum and the five
//! ratios are averaged. The two are blended according to the feasible share
//! `gamma` of the population:
//!
//! * no feasible solution: penalized = normalized violation;
//! * feasible solution: penalized = normalized time;
//! * otherwise: `sqrt(t^2 + p^2) + (1 - gamma) p + gamma t`.
//!
//! Final fitness is `1 / (penalized + 1)`, so it lies in `(0, 1]`.

use serde::{Deserialize, Serialize};

use crate::exec::SolutionScore;

/// Normalization constants of one population.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyFrame {
    pub min_time_s: f64,
    pub max_time_s: f64,
    /// Population maxima of latency, processing, deadline, CPU, memory.
    pub max_violation: [f64; 5],
    pub feasible_count: usize,
    pub population_size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyBranch {
    /// Nobody in the population is feasible.
    NoFeasible,
    /// This solution violates nothing.
    Feasible,
    /// Mixed population, infeasible solution.
    Blended,
    /// Penalty switched off (time-only optimization).
    Disabled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessChain {
    pub norm_time: f64,
    pub norm_penalty: f64,
    pub penalized: f64,
    pub fitness: f64,
    pub branch: PenaltyBranch,
}

impl PenaltyFrame {
    pub fn from_scores(scores: &[SolutionScore]) -> Self {
        let mut frame = PenaltyFrame {
            min_time_s: f64::INFINITY,
            max_time_s: f64::NEG_INFINITY,
            max_violation: [0.0; 5],
            feasible_count: 0,
            population_size: scores.len(),
        };
        for s in scores {
            frame.absorb(s);
        }
        frame
    }

    /// Empty frame to be grown with [`PenaltyFrame::absorb`].
    pub fn empty() -> Self {
        Self::from_scores(&[])
    }

    pub fn absorb(&mut self, s: &SolutionScore) {
        self.min_time_s = self.min_time_s.min(s.total_time_s);
        self.max_time_s = self.max_time_s.max(s.total_time_s);
        for (m, c) in self.max_violation.iter_mut().zip(s.violations.components()) {
            *m = m.max(c);
        }
        if s.feasible() {
            self.feasible_count += 1;
        }
    }

    /// Combines two frames built over disjoint populations.
    pub fn merge(mut self, other: &PenaltyFrame) -> Self {
        self.min_time_s = self.min_time_s.min(other.min_time_s);
        self.max_time_s = self.max_time_s.max(other.max_time_s);
        for (m, o) in self.max_violation.iter_mut().zip(other.max_violation) {
            *m = m.max(o);
        }
        self.feasible_count += other.feasible_count;
        self.population_size += other.population_size;
        self
    }

    /// Feasible share of the population.
    pub fn gamma(&self) -> f64 {
        if self.population_size == 0 {
            0.0
        } else {
            self.feasible_count as f64 / self.population_size as f64
        }
    }

    /// Min-max normalized time. A degenerate population maps to 0; values
    /// below the population minimum (offspring scored against their parents'
    /// frame) clamp to 0.
    pub fn norm_time(&self, total_time_s: f64) -> f64 {
        let span = self.max_time_s - self.min_time_s;
        if span > 0.0 {
            ((total_time_s - self.min_time_s) / span).max(0.0)
        } else if total_time_s <= self.min_time_s {
            0.0
        } else {
            1.0
        }
    }

    /// Mean of the five max-normalized violation terms; a term whose
    /// population maximum is zero contributes 0 (or 1 for an outsider that
    /// does violate it).
    pub fn norm_penalty(&self, s: &SolutionScore) -> f64 {
        let sum: f64 = s
            .violations
            .components()
            .iter()
            .zip(self.max_violation)
            .map(|(&v, max)| {
                if max > 0.0 {
                    v / max
                } else if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            })
            .sum();
        sum / 5.0
    }

    pub fn chain(&self, s: &SolutionScore, penalty_enabled: bool) -> FitnessChain {
        let norm_time = self.norm_time(s.total_time_s);
        let norm_penalty = self.norm_penalty(s);
        let (penalized, branch) = if !penalty_enabled {
            (norm_time, PenaltyBranch::Disabled)
        } else if self.feasible_count == 0 {
            (norm_penalty, PenaltyBranch::NoFeasible)
        } else if norm_penalty == 0.0 {
            (norm_time, PenaltyBranch::Feasible)
        } else {
            let gamma = self.gamma();
            (
                norm_time.hypot(norm_penalty) + (1.0 - gamma) * norm_penalty + gamma * norm_time,
                PenaltyBranch::Blended,
            )
        };
        FitnessChain {
            norm_time,
            norm_penalty,
            penalized,
            fitness: 1.0 / (penalized + 1.0),
            branch,
        }
    }
}

/// Fitness of every member of one generation plus its roulette wheel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationEval {
    pub frame: PenaltyFrame,
    pub chains: Vec<FitnessChain>,
    pub prob: Vec<f64>,
    pub cumm: Vec<f64>,
}

impl PopulationEval {
    pub fn feasible_count(&self) -> usize {
        self.frame.feasible_count
    }

    pub fn gamma(&self) -> f64 {
        self.frame.gamma()
    }

    pub fn fitness(&self) -> impl Iterator<Item = f64> + '_ {
        self.chains.iter().map(|c| c.fitness)
    }

    /// Index of the fittest member (first on ties).
    pub fn best(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, c) in self.chains.iter().enumerate() {
            if best.is_none_or(|b| c.fitness > self.chains[b].fitness) {
                best = Some(i);
            }
        }
        best
    }

    pub fn mean_fitness(&self) -> f64 {
        if self.chains.is_empty() {
            0.0
        } else {
            self.fitness().sum::<f64>() / self.chains.len() as f64
        }
    }
}

/// Scores a whole population.
pub fn fitness(scores: &[SolutionScore], penalty_enabled: bool) -> PopulationEval {
    let frame = PenaltyFrame::from_scores(scores);
    let chains: Vec<FitnessChain> = scores
        .iter()
        .map(|s| frame.chain(s, penalty_enabled))
        .collect();
    let total: f64 = chains.iter().map(|c| c.fitness).sum();
    let prob: Vec<f64> = chains.iter().map(|c| c.fitness / total).collect();
    let cumm = prob
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    PopulationEval {
        frame,
        chains,
        prob,
        cumm,
    }
}
