//! The generational loop: random initial population, cost evaluation,
//! roulette-wheel parent selection, elitism and crossover offspring.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compat::CompatibilityTable;
use crate::crossover::{crossover, ParentView};
use crate::model::{Chromosome, Face, ModelError, Placement, PuzzleSpec, Rotation};

#[derive(Debug, Error, PartialEq)]
pub enum GaError {
    #[error("population must hold at least 2 members, got {0}")]
    Population(usize),
    #[error("elite count {elites} must be below the population size {population}")]
    Elites { elites: usize, population: usize },
    #[error("mutation rate {0} is not a probability")]
    Mutation(f64),
    #[error("table covers {table} pieces but the puzzle has {spec}")]
    TableMismatch { table: usize, spec: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub elite_count: usize,
    pub mutation_rate: f64,
    pub master_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 1000,
            generations: 30,
            elite_count: 4,
            mutation_rate: 0.05,
            master_seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), GaError> {
        if self.population_size < 2 {
            return Err(GaError::Population(self.population_size));
        }
        if self.elite_count >= self.population_size {
            return Err(GaError::Elites {
                elites: self.elite_count,
                population: self.population_size,
            });
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(GaError::Mutation(self.mutation_rate));
        }
        Ok(())
    }
}

/// Sum of seam costs over every grid adjacency, without validation. For
/// two-sided puzzles each seam counts on both faces.
pub fn assembly_cost(chromosome: &Chromosome, table: &CompatibilityTable) -> f64 {
    chromosome.adjacencies().map(|r| table.seam_cost(&r)).sum()
}

/// Cost of a chromosome (lower is better).
pub fn fitness_cost(chromosome: &Chromosome, table: &CompatibilityTable, spec: &PuzzleSpec) -> Result<f64, ModelError> {
    chromosome.validate(spec)?;
    Ok(assembly_cost(chromosome, table))
}

/// A uniformly random assembly in the puzzle's native shape.
pub fn random_chromosome<R: Rng>(spec: &PuzzleSpec, rng: &mut R) -> Chromosome {
    let mut ids: Vec<usize> = (0..spec.piece_count()).collect();
    ids.shuffle(rng);
    let cells = ids
        .into_iter()
        .map(|piece| {
            let rotation = if spec.puzzle_type.rotatable() {
                Rotation::new(rng.gen_range(0..4))
            } else {
                Rotation::ZERO
            };
            let face = if spec.puzzle_type.two_sided() && rng.gen_bool(0.5) {
                Face::Back
            } else {
                Face::Front
            };
            Placement::new(piece, rotation, face)
        })
        .collect();
    Chromosome::new(spec.rows, spec.cols, cells)
}

/// Roulette-wheel weights for a generation's costs: `max - cost + eps` with
/// `eps = 1e-6 * max`, so the cheapest member gets the largest slice and
/// even the most expensive keeps a sliver.
pub fn selection_weights(costs: &[f64]) -> Vec<f64> {
    let max = costs.iter().copied().fold(0.0, f64::max);
    let eps = 1e-6 * max;
    costs.iter().map(|c| max - c + eps).collect()
}

/// Samples indices with probability proportional to their weights. An
/// all-zero wheel samples uniformly.
#[derive(Debug, Clone)]
pub struct Roulette {
    cumulative: Vec<f64>,
}

impl Roulette {
    pub fn new(weights: &[f64]) -> Roulette {
        assert!(!weights.is_empty(), "roulette needs at least one member");
        let mut total = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                total += w.max(0.0);
                total
            })
            .collect();
        Roulette { cumulative }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let n = self.cumulative.len();
        let total = self.cumulative[n - 1];
        if !(total > 0.0 && total.is_finite()) {
            return rng.gen_range(0..n);
        }
        let x = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= x).min(n - 1)
    }
}

/// Roulette draw over explicit weights.
pub fn select_parent<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    Roulette::new(weights).sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_cost: f64,
    pub mean_cost: f64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub best: Chromosome,
    pub best_cost: f64,
    pub history: Vec<GenerationStats>,
}

fn stream_rng(seed: u64, generation: usize, member: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | member as u64);
    rng
}

/// Runs the genetic algorithm. Generation 0 is the random population; each
/// later generation keeps the `elite_count` cheapest members and fills the
/// rest with children of roulette-selected parents. Stops early once an
/// assembly of cost 0 appears. `observer` sees each generation's statistics
/// and its best member.
///
/// Every random draw comes from a stream keyed by (seed, generation,
/// member), so the result does not depend on the number of worker threads.
pub fn evolve(
    spec: &PuzzleSpec,
    table: &CompatibilityTable,
    config: &GaConfig,
    mut observer: impl FnMut(&GenerationStats, &Chromosome),
) -> Result<Evolution, GaError> {
    config.validate()?;
    if table.piece_count() != spec.piece_count() {
        return Err(GaError::TableMismatch {
            table: table.piece_count(),
            spec: spec.piece_count(),
        });
    }
    let start = Instant::now();
    let labels = spec.label_count();
    let size = config.population_size;

    let mut population: Vec<Chromosome> = (0..size)
        .into_par_iter()
        .map(|k| random_chromosome(spec, &mut stream_rng(config.master_seed, 0, k)))
        .collect();

    let mut history = Vec::with_capacity(config.generations + 1);
    let mut best: Option<(Chromosome, f64)> = None;
    let mut generation = 0;
    loop {
        let costs: Vec<f64> = population.par_iter().map(|c| assembly_cost(c, table)).collect();
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
        let leader = order[0];
        let stats = GenerationStats {
            generation,
            best_cost: costs[leader],
            mean_cost: costs.iter().sum::<f64>() / size as f64,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        if best.as_ref().is_none_or(|(_, c)| costs[leader] < *c) {
            best = Some((population[leader].clone(), costs[leader]));
        }
        observer(&stats, &population[leader]);
        history.push(stats);
        if generation == config.generations || costs[leader] == 0.0 {
            break;
        }
        generation += 1;

        let views: Vec<ParentView> = population.par_iter().map(|c| ParentView::new(c, labels)).collect();
        let wheel = Roulette::new(&selection_weights(&costs));
        let children: Vec<Chromosome> = (config.elite_count..size)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream_rng(config.master_seed, generation, k);
                let a = wheel.sample(&mut rng);
                let b = wheel.sample(&mut rng);
                crossover(&views[a], &views[b], table, spec, config.mutation_rate, &mut rng)
            })
            .collect();
        let mut next: Vec<Chromosome> = order[..config.elite_count].iter().map(|&i| population[i].clone()).collect();
        next.extend(children);
        population = next;
    }
    let (best, best_cost) = best.expect("at least one generation is evaluated");
    Ok(Evolution { best, best_cost, history })
}
