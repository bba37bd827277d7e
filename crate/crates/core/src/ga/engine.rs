use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fitness::{fitness, PenaltyFrame};
use super::operators::{
    draw_cut, init_population, mutate, random_assignment, select_parents, single_point_crossover,
    two_fittest,
};
use super::{GaParams, Mode};
use crate::domain::{Assignment, Scenario};
use crate::error::Result;
use crate::exec::{EvaluationReport, Evaluator, SolutionScore};

/// A target to stop at, expressed in the frame of an exhaustive enumeration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownOptimum {
    pub frame: PenaltyFrame,
    /// Penalized fitness of the optimum in `frame`.
    pub penalized: f64,
    /// Whether a hit must also be feasible.
    pub feasible: bool,
    pub penalty_enabled: bool,
}

impl KnownOptimum {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn matches(&self, s: &SolutionScore) -> bool {
        if self.feasible && !s.feasible() {
            return false;
        }
        let p = self.frame.chain(s, self.penalty_enabled).penalized;
        (p - self.penalized).abs() <= Self::TOLERANCE
    }
}

/// One line of the convergence trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    #[serde(rename = "best_F")]
    pub best_fitness: f64,
    #[serde(rename = "mean_F")]
    pub mean_fitness: f64,
    pub n_f: usize,
    pub best_feasible_time_s: Option<f64>,
    /// Total time of the best-so-far assignment after this generation.
    pub best_so_far_time_s: f64,
    pub best_so_far_feasible: bool,
}

impl GenerationStats {
    fn with_incumbent(self, s: &SolutionScore) -> Self {
        Self {
            best_so_far_time_s: s.total_time_s,
            best_so_far_feasible: s.feasible(),
            ..self
        }
    }

    /// The generation after which the best-so-far record never changed.
    pub fn settled_at(generations: &[GenerationStats]) -> usize {
        let Some(last) = generations.last() else {
            return 0;
        };
        generations
            .iter()
            .rev()
            .take_while(|g| {
                g.best_so_far_time_s == last.best_so_far_time_s
                    && g.best_so_far_feasible == last.best_so_far_feasible
            })
            .last()
            .map_or(0, |g| g.generation)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaTrace {
    pub mode: Mode,
    pub seed: u64,
    pub generations: Vec<GenerationStats>,
    /// Best assignment seen in any generation.
    pub best: Assignment,
    pub report: EvaluationReport,
    /// Generation at which the known optimum was reached.
    pub hit_generation: Option<usize>,
    /// Distinct assignments evaluated.
    pub evaluations: usize,
}

impl GaTrace {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for g in &self.generations {
            out.serialize(g)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Generation-independent order used for the best-so-far record: feasible
/// solutions first by time; infeasible ones by violating requests, summed
/// SLA excess, resource overload, then time. Time only without penalty.
fn incumbent_cmp(a: &SolutionScore, b: &SolutionScore, penalty: bool) -> Ordering {
    if !penalty {
        return a.total_time_s.total_cmp(&b.total_time_s);
    }
    let key = |s: &SolutionScore| {
        let v = &s.violations;
        (
            !s.feasible(),
            v.counts.distinct,
            v.lat + v.proc + v.deadline,
            v.cpu + v.mem,
        )
    };
    let (ia, da, ea, ra) = key(a);
    let (ib, db, eb, rb) = key(b);
    ia.cmp(&ib)
        .then(da.cmp(&db))
        .then(ea.total_cmp(&eb))
        .then(ra.total_cmp(&rb))
        .then(a.total_time_s.total_cmp(&b.total_time_s))
}

struct ScoreCache<'e, 's> {
    ev: &'e Evaluator<'s>,
    map: HashMap<Assignment, SolutionScore>,
}

impl ScoreCache<'_, '_> {
    fn score_all(&mut self, pop: &[Assignment]) -> Result<Vec<SolutionScore>> {
        let mut misses: Vec<&Assignment> = Vec::new();
        for a in pop {
            if !self.map.contains_key(a) && !misses.contains(&a) {
                misses.push(a);
            }
        }
        let ev = self.ev;
        let fresh = misses
            .par_iter()
            .map(|a| ev.score(a))
            .collect::<Result<Vec<_>>>()?;
        for (a, s) in misses.into_iter().zip(fresh) {
            self.map.insert(a.clone(), s);
        }
        Ok(pop.iter().map(|a| self.map[a].clone()).collect())
    }

    fn score(&mut self, a: &Assignment) -> Result<SolutionScore> {
        if let Some(s) = self.map.get(a) {
            return Ok(s.clone());
        }
        let s = self.ev.score(a)?;
        self.map.insert(a.clone(), s.clone());
        Ok(s)
    }
}

pub fn run(s: &Scenario, p: &GaParams) -> Result<GaTrace> {
    run_with(&Evaluator::new(s)?, p)
}

pub fn run_with(ev: &Evaluator<'_>, p: &GaParams) -> Result<GaTrace> {
    p.validate()?;
    let genes = ev.requests();
    let alphabet = Assignment::alphabet_size(ev.clouds());
    let penalty = p.mode.penalty_enabled();
    let mut rng = ChaCha8Rng::seed_from_u64(p.rng_seed);
    let mut cache = ScoreCache {
        ev,
        map: HashMap::new(),
    };

    if p.mode == Mode::Random {
        let a = random_assignment(genes, alphabet, &mut rng);
        let score = cache.score(&a)?;
        let eval = fitness(std::slice::from_ref(&score), penalty);
        let stats = GenerationStats {
            generation: 1,
            best_fitness: eval.chains[0].fitness,
            mean_fitness: eval.mean_fitness(),
            n_f: eval.feasible_count(),
            best_feasible_time_s: score.feasible().then_some(score.total_time_s),
            best_so_far_time_s: score.total_time_s,
            best_so_far_feasible: score.feasible(),
        };
        let hit = p.known_optimum.as_ref().is_some_and(|k| k.matches(&score));
        return Ok(GaTrace {
            mode: p.mode,
            seed: p.rng_seed,
            generations: vec![stats],
            report: ev.report(&a)?,
            best: a,
            hit_generation: hit.then_some(1),
            evaluations: 1,
        });
    }

    let mut pop = init_population(genes, alphabet, p.population_size, &mut rng);
    let mut generations = Vec::new();
    let mut best: Option<(Assignment, SolutionScore)> = None;
    let mut hit_generation = None;

    for generation in 1..=p.max_generations {
        let mut scores = cache.score_all(&pop)?;
        let eval = fitness(&scores, penalty);
        let stats = GenerationStats {
            generation,
            best_fitness: eval.fitness().fold(0.0, f64::max),
            mean_fitness: eval.mean_fitness(),
            n_f: eval.feasible_count(),
            best_feasible_time_s: scores
                .iter()
                .filter(|s| s.feasible())
                .map(|s| s.total_time_s)
                .min_by(f64::total_cmp),
            best_so_far_time_s: 0.0,
            best_so_far_feasible: false,
        };

        if let Some(k) = &p.known_optimum {
            if let Some(i) = scores.iter().position(|s| k.matches(s)) {
                best = Some((pop[i].clone(), scores[i].clone()));
                hit_generation = Some(generation);
                generations.push(stats.with_incumbent(&scores[i]));
                break;
            }
        }
        for (a, s) in pop.iter().zip(&scores) {
            let better = best
                .as_ref()
                .is_none_or(|(_, b)| incumbent_cmp(s, b, penalty) == Ordering::Less);
            if better {
                best = Some((a.clone(), s.clone()));
            }
        }
        let (_, incumbent) = best.as_ref().expect("population is not empty");
        generations.push(stats.with_incumbent(incumbent));
        if generation == p.max_generations {
            break;
        }

        let pairs = select_parents(&eval, p.crossover_rate, &mut rng)?;
        let key = |s: &SolutionScore| (eval.frame.chain(s, penalty).penalized, s.total_time_s);
        for (i, j) in pairs {
            let Some(cut) = draw_cut(genes, &mut rng) else {
                continue;
            };
            if pop[i] == pop[j] {
                continue;
            }
            let (c1, c2) = single_point_crossover(&pop[i], &pop[j], cut);
            let s1 = cache.score(&c1)?;
            let s2 = cache.score(&c2)?;
            let keyed = [key(&scores[i]), key(&scores[j]), key(&s1), key(&s2)];
            let [first, second] = two_fittest(&keyed);
            let mut cands = [
                Some((pop[i].clone(), scores[i].clone())),
                Some((pop[j].clone(), scores[j].clone())),
                Some((c1, s1)),
                Some((c2, s2)),
            ];
            let (a, sa) = cands[first].take().expect("distinct winners");
            let (b, sb) = cands[second].take().expect("distinct winners");
            pop[i] = a;
            scores[i] = sa;
            pop[j] = b;
            scores[j] = sb;
        }
        mutate(&mut pop, alphabet, p.mutation_rate, &mut rng);
    }

    let (best, _) = best.expect("at least one generation ran");
    Ok(GaTrace {
        mode: p.mode,
        seed: p.rng_seed,
        generations,
        report: ev.report(&best)?,
        best,
        hit_generation,
        evaluations: cache.map.len(),
    })
}
