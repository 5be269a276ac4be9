//! The generational loop.
//!
//! One call to [`Population::evolve_generation`] evaluates every genome,
//! records statistics, groups genomes into species, drops stagnant species
//! outside the protected top ranks, and breeds the next population at the
//! scheduled size.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::foraging::FitnessRecord;
use crate::genome::{
    compatibility_distance, crossover, mutate_add_connection, mutate_add_node, mutate_weights, Coefficients,
    FitterParent, Genome, GenomeConfig, GenomeError, InitMode, InnovationRegistry, IoSpec,
};
use crate::seed::rng_from_seed;

pub type BoxError = Box<dyn std::error::Error + Send + Sync + 'static>;

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("generation {generation} is outside 0..{generations}")]
    GenerationOutOfRange { generation: usize, generations: usize },
    #[error("evaluation of genome {index} failed in generation {generation}: {source}")]
    Evaluation {
        generation: usize,
        index: usize,
        #[source]
        source: BoxError,
    },
    #[error("reproduction requires at least one species")]
    NoSpecies,
    #[error("genome {0} has not been evaluated")]
    Unevaluated(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Genome(#[from] GenomeError),
}

/// Shape of the population-size ramp.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampShape {
    #[default]
    Linear,
    Geometric,
    /// Starting size for the first half of the run, full size afterwards.
    Step,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub ramp_start: usize,
    pub ramp_shape: RampShape,
    pub generations: usize,
    pub stagnation_limit: usize,
    /// Species ranked this high by best fitness are never removed for stagnation.
    pub elite_species: usize,
    pub compatibility_threshold: f64,
    pub coefficients: Coefficients,
    /// Champions copied unchanged per species.
    pub elitism: usize,
    /// Species smaller than this get no elite copy.
    pub elitism_min_species_size: usize,
    pub survival_fraction: f64,
    /// Chance an offspring is produced by crossover rather than cloning.
    pub crossover_prob: f64,
    pub genome: GenomeConfig,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 500,
            ramp_start: 200,
            ramp_shape: RampShape::Linear,
            generations: 500,
            stagnation_limit: 20,
            elite_species: 3,
            compatibility_threshold: 3.0,
            coefficients: Coefficients::default(),
            elitism: 1,
            elitism_min_species_size: 5,
            survival_fraction: 0.2,
            crossover_prob: 0.75,
            genome: GenomeConfig::default(),
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        if self.population_size == 0 || self.ramp_start == 0 {
            return Err(EvolutionError::Config("population sizes must be positive".into()));
        }
        if self.ramp_start > self.population_size {
            return Err(EvolutionError::Config(format!(
                "ramp start {} exceeds population size {}",
                self.ramp_start, self.population_size
            )));
        }
        if self.generations == 0 {
            return Err(EvolutionError::Config("at least one generation is required".into()));
        }
        if !(0.0..=1.0).contains(&self.survival_fraction) {
            return Err(EvolutionError::Config("survival fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Population size for generation `generation`.
///
/// Without the ramp the size is constant. With the linear ramp it is
/// `round(start + (full - start) * g / (G - 1))`, computed in integers with
/// halves rounded up.
pub fn target_population_size(
    generation: usize,
    cfg: &EvolutionConfig,
    ramp_enabled: bool,
) -> Result<usize, EvolutionError> {
    if generation >= cfg.generations {
        return Err(EvolutionError::GenerationOutOfRange { generation, generations: cfg.generations });
    }
    let full = cfg.population_size;
    let start = cfg.ramp_start.min(full);
    if !ramp_enabled || cfg.generations == 1 {
        return Ok(full);
    }
    let last = cfg.generations - 1;
    Ok(match cfg.ramp_shape {
        RampShape::Linear => {
            let num = 2 * (full - start) * generation + last;
            start + num / (2 * last)
        }
        RampShape::Geometric => {
            let ratio = full as f64 / start as f64;
            let size = (start as f64 * ratio.powf(generation as f64 / last as f64)).round() as usize;
            size.clamp(start, full)
        }
        RampShape::Step => {
            if 2 * generation < cfg.generations {
                start
            } else {
                full
            }
        }
    })
}

/// Toggles that vary between experiment variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSettings {
    pub allow_recurrent: bool,
    pub init_mode: InitMode,
    pub ramp: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self { allow_recurrent: false, init_mode: InitMode::Partial, ramp: false }
    }
}

#[derive(Clone, Debug)]
pub struct Species {
    pub id: u64,
    pub representative: Genome,
    /// Indices into the population the species was built from.
    pub members: Vec<usize>,
    /// Best member fitness, one entry per generation the species existed.
    pub best_history: Vec<f64>,
    pub best_ever: f64,
    pub last_improved: usize,
    pub created: usize,
}

impl Species {
    pub fn new(id: u64, representative: Genome, generation: usize) -> Self {
        Self {
            id,
            representative,
            members: Vec::new(),
            best_history: Vec::new(),
            best_ever: f64::NEG_INFINITY,
            last_improved: generation,
            created: generation,
        }
    }

    pub fn current_best(&self) -> f64 {
        self.best_history.last().copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// Generations since the best fitness last improved.
    pub fn stagnation(&self, generation: usize) -> usize {
        generation.saturating_sub(self.last_improved)
    }

    /// Appends this generation's best member fitness.
    pub fn record(&mut self, best: f64, generation: usize) {
        self.best_history.push(best);
        if best > self.best_ever {
            self.best_ever = best;
            self.last_improved = generation;
        }
    }
}

/// Assigns each genome to the first species whose representative is within
/// the compatibility threshold, creating species as needed. Prior species
/// that attract no members are dropped; survivors get a new representative
/// drawn uniformly from their members.
pub fn speciate<R: Rng + ?Sized>(
    population: &[Genome],
    previous: Vec<Species>,
    cfg: &EvolutionConfig,
    next_id: &mut u64,
    generation: usize,
    rng: &mut R,
) -> Vec<Species> {
    let mut species = previous;
    for s in &mut species {
        s.members.clear();
    }
    for (index, genome) in population.iter().enumerate() {
        let found = species.iter().position(|s| {
            compatibility_distance(&s.representative, genome, &cfg.coefficients) < cfg.compatibility_threshold
        });
        match found {
            Some(k) => species[k].members.push(index),
            None => {
                let mut s = Species::new(*next_id, genome.clone(), generation);
                *next_id += 1;
                s.members.push(index);
                species.push(s);
            }
        }
    }
    species.retain(|s| !s.members.is_empty());
    for s in &mut species {
        let pick = *s.members.choose(rng).expect("non-empty");
        s.representative = population[pick].clone();
    }
    species
}

/// Species order used to pick the protected top ranks: best current fitness
/// first, older species first on ties.
fn rank_order(a: &Species, b: &Species) -> Ordering {
    b.current_best().partial_cmp(&a.current_best()).unwrap_or(Ordering::Equal).then(a.id.cmp(&b.id))
}

/// Drops species that have not improved for more than `stagnation_limit`
/// generations, unless they rank in the top `elite_species`. At least one
/// species always survives.
pub fn remove_stagnant(species: Vec<Species>, cfg: &EvolutionConfig, generation: usize) -> Vec<Species> {
    let mut ranked: Vec<usize> = (0..species.len()).collect();
    ranked.sort_by(|&a, &b| rank_order(&species[a], &species[b]));
    let mut keep = vec![false; species.len()];
    for (rank, &k) in ranked.iter().enumerate() {
        keep[k] = rank < cfg.elite_species || species[k].stagnation(generation) <= cfg.stagnation_limit;
    }
    if !keep.iter().any(|&k| k) {
        if let Some(&best) = ranked.first() {
            keep[best] = true;
        }
    }
    species.into_iter().zip(keep).filter_map(|(s, k)| k.then_some(s)).collect()
}

/// Splits `total` proportionally to `weights` with largest-remainder rounding.
/// All-zero weights share equally. Remainder ties go to the earlier entry.
pub fn allocate(weights: &[f64], total: usize) -> Vec<usize> {
    if weights.is_empty() {
        return Vec::new();
    }
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = if sum > 0.0 {
        weights.iter().map(|w| w / sum * total as f64).collect()
    } else {
        vec![total as f64 / weights.len() as f64; weights.len()]
    };
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.partial_cmp(&ra).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    for &k in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

fn fitness_of(population: &[Genome], index: usize) -> Result<f64, EvolutionError> {
    population[index].fitness_value().ok_or(EvolutionError::Unevaluated(index))
}

/// Breeds exactly `target_size` offspring.
///
/// Offspring are allocated to species in proportion to the sum of their
/// members' shared fitness (fitness divided by species size). Within a
/// species the weakest members are culled to `survival_fraction`, the
/// champion is copied unchanged when the species is large enough, and the
/// rest are crossover or clone children of survivors, then mutated.
pub fn reproduce<R: Rng + ?Sized>(
    species: &[Species],
    population: &[Genome],
    target_size: usize,
    registry: &mut InnovationRegistry,
    cfg: &EvolutionConfig,
    settings: &RunSettings,
    rng: &mut R,
) -> Result<Vec<Genome>, EvolutionError> {
    if species.is_empty() {
        return Err(EvolutionError::NoSpecies);
    }
    let mut weights = Vec::with_capacity(species.len());
    for s in species {
        let size = s.members.len() as f64;
        let mut shared = 0.0;
        for &m in &s.members {
            shared += fitness_of(population, m)? / size;
        }
        weights.push(shared.max(0.0));
    }
    let counts = allocate(&weights, target_size);

    let mut offspring = Vec::with_capacity(target_size);
    for (s, &count) in species.iter().zip(&counts) {
        if count == 0 {
            continue;
        }
        let mut ranked = s.members.clone();
        ranked.sort_by(|&a, &b| {
            let (fa, fb) = (population[a].fitness_value(), population[b].fitness_value());
            fb.partial_cmp(&fa).unwrap_or(Ordering::Equal).then(a.cmp(&b))
        });

        let mut produced = 0;
        if ranked.len() >= cfg.elitism_min_species_size {
            for &m in ranked.iter().take(cfg.elitism.min(count)) {
                let mut elite = population[m].clone();
                elite.fitness = None;
                offspring.push(elite);
                produced += 1;
            }
        }

        let survivors = ((ranked.len() as f64 * cfg.survival_fraction).ceil() as usize).clamp(1, ranked.len());
        let parents = &ranked[..survivors];
        while produced < count {
            let first = *parents.choose(rng).expect("non-empty");
            let child = if parents.len() > 1 && rng.gen_bool(cfg.crossover_prob.clamp(0.0, 1.0)) {
                let second = *parents.choose(rng).expect("non-empty");
                let (a, b) = (&population[first], &population[second]);
                let order = FitterParent::compare(fitness_of(population, first)?, fitness_of(population, second)?);
                crossover(a, b, order, &cfg.genome, rng)
            } else {
                let mut clone = population[first].clone();
                clone.fitness = None;
                clone
            };
            offspring.push(mutate(&child, registry, cfg, settings, rng));
            produced += 1;
        }
    }
    debug_assert_eq!(offspring.len(), target_size);
    Ok(offspring)
}

fn mutate<R: Rng + ?Sized>(
    genome: &Genome,
    registry: &mut InnovationRegistry,
    cfg: &EvolutionConfig,
    settings: &RunSettings,
    rng: &mut R,
) -> Genome {
    let mut child = mutate_weights(genome, &cfg.genome, rng);
    if rng.gen_bool(cfg.genome.add_connection_prob.clamp(0.0, 1.0)) {
        child = mutate_add_connection(&child, settings.allow_recurrent, registry, &cfg.genome, rng);
    }
    if rng.gen_bool(cfg.genome.add_node_prob.clamp(0.0, 1.0)) {
        child = mutate_add_node(&child, registry, rng);
    }
    child
}

/// Scores genomes. Implementations must be pure in `(genome, generation,
/// index)` so parallel and serial evaluation agree.
pub trait Evaluator: Sync {
    fn evaluate(&self, genome: &Genome, generation: usize, index: usize) -> Result<FitnessRecord, BoxError>;

    /// Network activations performed by one call to [`Evaluator::evaluate`].
    fn activations_per_evaluation(&self) -> u64 {
        0
    }
}

impl<F> Evaluator for F
where
    F: Fn(&Genome, usize, usize) -> Result<FitnessRecord, BoxError> + Sync,
{
    fn evaluate(&self, genome: &Genome, generation: usize, index: usize) -> Result<FitnessRecord, BoxError> {
        self(genome, generation, index)
    }
}

#[derive(Clone, Debug)]
pub struct GenerationStats {
    pub generation: usize,
    pub pop_size: usize,
    pub champion_fitness: f64,
    pub mean_fitness: f64,
    /// Population standard deviation.
    pub std_fitness: f64,
    pub species_count: usize,
    pub champion: Genome,
    pub fitness_values: Vec<f64>,
    pub evaluations_cumulative: u64,
    pub activations_cumulative: u64,
}

impl GenerationStats {
    pub fn champion_nodes(&self) -> usize {
        self.champion.nodes.len()
    }

    pub fn champion_connections(&self) -> usize {
        self.champion.enabled_connections().count()
    }
}

pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Evolving population plus everything needed to continue the run.
pub struct Population {
    pub genomes: Vec<Genome>,
    pub species: Vec<Species>,
    pub registry: InnovationRegistry,
    settings: RunSettings,
    next_species_id: u64,
    rng: ChaCha8Rng,
    evaluations: u64,
    activations: u64,
}

impl Population {
    pub fn new(io: IoSpec, cfg: &EvolutionConfig, settings: RunSettings, seed: u64) -> Result<Self, EvolutionError> {
        cfg.validate()?;
        let mut rng = rng_from_seed(seed);
        let size = target_population_size(0, cfg, settings.ramp)?;
        let genomes =
            (0..size).map(|_| Genome::new(io, settings.init_mode, &cfg.genome, &mut rng)).collect::<Result<_, _>>()?;
        Ok(Self {
            genomes,
            species: Vec::new(),
            registry: InnovationRegistry::new(io),
            settings,
            next_species_id: 0,
            rng,
            evaluations: 0,
            activations: 0,
        })
    }

    pub fn settings(&self) -> RunSettings {
        self.settings
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Evaluates, records statistics, then breeds the next generation.
    pub fn evolve_generation<E: Evaluator>(
        &mut self,
        evaluator: &E,
        cfg: &EvolutionConfig,
        generation: usize,
    ) -> Result<GenerationStats, EvolutionError> {
        let results: Vec<Result<FitnessRecord, BoxError>> = self
            .genomes
            .par_iter()
            .enumerate()
            .map(|(i, g)| evaluator.evaluate(g, generation, i))
            .collect();
        for (index, (genome, result)) in self.genomes.iter_mut().zip(results).enumerate() {
            let record = result.map_err(|source| EvolutionError::Evaluation { generation, index, source })?;
            genome.fitness = Some(record);
        }
        let evaluated = self.genomes.len() as u64;
        self.evaluations += evaluated;
        self.activations += evaluated * evaluator.activations_per_evaluation();

        let fitness_values: Vec<f64> = self.genomes.iter().map(|g| g.fitness_value().unwrap_or(0.0)).collect();
        let (mean_fitness, std_fitness) = mean_and_std(&fitness_values);
        let champion_index = fitness_values
            .iter()
            .enumerate()
            .fold(0, |best, (i, &f)| if f > fitness_values[best] { i } else { best });

        let previous = std::mem::take(&mut self.species);
        let mut species =
            speciate(&self.genomes, previous, cfg, &mut self.next_species_id, generation, &mut self.rng);
        for s in &mut species {
            let best = s.members.iter().map(|&m| fitness_values[m]).fold(f64::NEG_INFINITY, f64::max);
            s.record(best, generation);
        }
        let species_count = species.len();
        let species = remove_stagnant(species, cfg, generation);

        let next_generation = (generation + 1).min(cfg.generations.saturating_sub(1));
        let target = target_population_size(next_generation, cfg, self.settings.ramp)?;
        let offspring =
            reproduce(&species, &self.genomes, target, &mut self.registry, cfg, &self.settings, &mut self.rng)?;
        self.registry.clear_generation();

        let stats = GenerationStats {
            generation,
            pop_size: self.genomes.len(),
            champion_fitness: fitness_values[champion_index],
            mean_fitness,
            std_fitness,
            species_count,
            champion: self.genomes[champion_index].clone(),
            fitness_values,
            evaluations_cumulative: self.evaluations,
            activations_cumulative: self.activations,
        };
        self.species = species;
        self.genomes = offspring;
        Ok(stats)
    }
}
