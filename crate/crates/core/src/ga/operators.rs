//! Initialization, roulette-wheel selection, single-point crossover and
//! mutation. Every random draw comes from the caller's stream, in a fixed
//! order.

use rand::seq::index;
use rand::Rng;

use crate::domain::{Assignment, Gene};
use crate::error::{OffloadError, Result};
use crate::ga::fitness::PopulationEval;

/// `size` assignments of `genes` genes, each uniform over `alphabet` values.
pub fn init_population<R: Rng + ?Sized>(
    genes: usize,
    alphabet: usize,
    size: usize,
    rng: &mut R,
) -> Vec<Assignment> {
    (0..size).map(|_| random_assignment(genes, alphabet, rng)).collect()
}

pub fn random_assignment<R: Rng + ?Sized>(genes: usize, alphabet: usize, rng: &mut R) -> Assignment {
    Assignment::new(
        (0..genes)
            .map(|_| Gene::from_index(rng.random_range(0..alphabet)))
            .collect(),
    )
}

/// Inverse-CDF lookup over cumulative selection probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct RouletteWheel {
    cumm: Vec<f64>,
}

impl RouletteWheel {
    pub fn new(fitness: &[f64]) -> Result<Self> {
        let total: f64 = fitness.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(OffloadError::EmptyWheel);
        }
        let mut acc = 0.0;
        let cumm = fitness
            .iter()
            .map(|f| {
                acc += f / total;
                acc
            })
            .collect();
        Ok(Self { cumm })
    }

    pub fn from_eval(eval: &PopulationEval) -> Result<Self> {
        if eval.cumm.last().is_none_or(|&c| !(c > 0.0)) {
            return Err(OffloadError::EmptyWheel);
        }
        Ok(Self {
            cumm: eval.cumm.clone(),
        })
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumm
    }

    /// Slot whose cumulative band contains `u` in `[0, 1)`.
    pub fn lookup(&self, u: f64) -> usize {
        self.cumm
            .partition_point(|&c| c <= u)
            .min(self.cumm.len() - 1)
    }

    pub fn spin<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.lookup(rng.random::<f64>())
    }
}

/// `floor(rate * population)`, rounded down to an even number.
pub fn parent_count(crossover_rate: f64, population: usize) -> usize {
    let n = (crossover_rate * population as f64 + 1e-9).floor() as usize;
    n.min(population) & !1
}

/// Draws parents with replacement and pairs consecutive draws.
pub fn select_parents<R: Rng + ?Sized>(
    eval: &PopulationEval,
    crossover_rate: f64,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    let wheel = RouletteWheel::from_eval(eval)?;
    let n = parent_count(crossover_rate, eval.chains.len());
    Ok((0..n / 2)
        .map(|_| {
            let a = wheel.spin(rng);
            let b = wheel.spin(rng);
            (a, b)
        })
        .collect())
}

/// Swaps the suffixes starting at `cut`.
pub fn single_point_crossover(a: &Assignment, b: &Assignment, cut: usize) -> (Assignment, Assignment) {
    debug_assert_eq!(a.len(), b.len());
    let mut c1 = a.genes[..cut].to_vec();
    c1.extend_from_slice(&b.genes[cut..]);
    let mut c2 = b.genes[..cut].to_vec();
    c2.extend_from_slice(&a.genes[cut..]);
    (Assignment::new(c1), Assignment::new(c2))
}

/// Uniform cutoff in `1..len`, or `None` when there is nothing to cut.
pub fn draw_cut<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Option<usize> {
    (len >= 2).then(|| rng.random_range(1..len))
}

/// Positions of the two best candidates, best first. Lower `penalized` wins,
/// then lower time, then earlier position.
pub fn two_fittest(candidates: &[(f64, f64); 4]) -> [usize; 2] {
    let mut order = [0, 1, 2, 3];
    order.sort_by(|&i, &j| {
        let (pi, ti) = candidates[i];
        let (pj, tj) = candidates[j];
        pi.total_cmp(&pj).then(ti.total_cmp(&tj)).then(i.cmp(&j))
    });
    [order[0], order[1]]
}

/// `round(genes * population * rate)` with halves rounded up, capped at the
/// number of genes.
pub fn mutation_count(genes: usize, population: usize, mutation_rate: f64) -> usize {
    let total = genes * population;
    let n = (total as f64 * mutation_rate + 0.5 + 1e-9).floor() as usize;
    n.min(total)
}

/// Changes `mutation_count` distinct genes across the whole population, each
/// to a different value. Returns the touched `(slot, gene)` positions.
pub fn mutate<R: Rng + ?Sized>(
    population: &mut [Assignment],
    alphabet: usize,
    mutation_rate: f64,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let genes = population.first().map_or(0, Assignment::len);
    let total = genes * population.len();
    let n = mutation_count(genes, population.len(), mutation_rate);
    if n == 0 || alphabet < 2 {
        return Vec::new();
    }
    let mut touched = Vec::with_capacity(n);
    for flat in index::sample(rng, total, n).into_iter() {
        let (slot, pos) = (flat / genes, flat % genes);
        let old = population[slot].genes[pos].index();
        // uniform over the other alphabet - 1 values
        let mut new = rng.random_range(0..alphabet - 1);
        if new >= old {
            new += 1;
        }
        population[slot].genes[pos] = Gene::from_index(new);
        touched.push((slot, pos));
    }
    touched
}
