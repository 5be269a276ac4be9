//! Neuroevolution of augmenting topologies (NEAT) with three optional
//! improvements, evaluated on the dangerous foraging domain.
//!
//! The crate is split along the experiment's layers:
//!
//! - [`genome`]: genotype, historical markings, mutation, crossover and
//!   compatibility distance.
//! - [`network`]: compilation of a genome into an executable phenotype with
//!   acyclic or one-step-delayed recurrent evaluation.
//! - [`foraging`]: the eight-trial foraging simulation and its fitness.
//! - [`evolution`]: speciation, stagnation, fitness sharing, reproduction and
//!   the population-size schedule.
//! - [`harness`]: variants, repetitions, CSV logs, summaries and SVG plots.
//!
//! The three improvements are toggled per run: recurrent connections,
//! feature-selective initialization (one connected input) and an increasing
//! population size.

pub mod config;
pub mod evolution;
pub mod foraging;
pub mod genome;
pub mod harness;
pub mod network;
pub mod seed;

pub use config::LabConfig;
pub use evolution::{EvolutionConfig, GenerationStats, Population, RunSettings};
pub use foraging::{FitnessRecord, ForagingConfig, TrialSet};
pub use genome::{Genome, GenomeConfig, InitMode, InnovationRegistry, IoSpec};
pub use harness::VariantSpec;
pub use network::Phenotype;
