//! Experiment runner.
//!
//! A variant is one combination of the three improvements. Each repetition of
//! a variant evolves a fresh population with a seed derived from
//! `(master seed, variant name, repetition)` and writes:
//!
//! - `<variant>_rep<k>.csv`: one row per generation,
//! - `<variant>_rep<k>_champions.jsonl`: the champion genome of every generation,
//! - `<variant>_rep<k>.svg`: champion, mean and mean + σ fitness curves,
//!
//! and the experiment writes `<variant>.summary.json` once all repetitions finish.

mod csv_log;
mod plot;
mod summary;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::LabConfig;
use crate::evolution::{BoxError, EvolutionError, Evaluator, GenerationStats, Population, RunSettings};
use crate::foraging::{build_trial_set, evaluate, FitnessRecord, ForagingConfig, TrialSet, TRIALS};
use crate::genome::{Genome, InitMode, IoSpec};
use crate::seed::derive_seed;

pub use csv_log::{read_run_csv, write_run_csv, GenerationRow, CSV_HEADER};
pub use plot::{emit_plot, render_svg, PlotSeries};
pub use summary::{summarize, summarize_dir, SummaryDocument, VariantSummary, SUCCESS_CONVENTION};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown variant {0:?}; expected one of base, rc, fs, ips, rc+fs, rc+ips, fs+ips, rc+fs+ips")]
    UnknownVariant(String),
    #[error("at least one repetition is required")]
    NoRepetitions,
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv error on {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{0} contains no generations")]
    EmptyRun(String),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.display().to_string(), source }
}

/// Which improvements are switched on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VariantSpec {
    pub recurrent: bool,
    pub feature_select: bool,
    pub pop_ramp: bool,
}

impl VariantSpec {
    pub const BASE: VariantSpec = VariantSpec { recurrent: false, feature_select: false, pop_ramp: false };

    /// The eight combinations in canonical order.
    pub fn all() -> [VariantSpec; 8] {
        let v = |recurrent, feature_select, pop_ramp| VariantSpec { recurrent, feature_select, pop_ramp };
        [
            v(false, false, false),
            v(true, false, false),
            v(false, true, false),
            v(false, false, true),
            v(true, true, false),
            v(true, false, true),
            v(false, true, true),
            v(true, true, true),
        ]
    }

    pub fn name(&self) -> String {
        let parts: Vec<&str> = [(self.recurrent, "rc"), (self.feature_select, "fs"), (self.pop_ramp, "ips")]
            .iter()
            .filter_map(|&(on, name)| on.then_some(name))
            .collect();
        if parts.is_empty() {
            "base".to_string()
        } else {
            parts.join("+")
        }
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            allow_recurrent: self.recurrent,
            init_mode: if self.feature_select { InitMode::FeatureSelect } else { InitMode::Partial },
            ramp: self.pop_ramp,
        }
    }

    fn rank(&self) -> usize {
        Self::all().iter().position(|v| v == self).expect("all variants enumerated")
    }
}

impl fmt::Display for VariantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for VariantSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::all().into_iter().find(|v| v.name() == s).ok_or_else(|| HarnessError::UnknownVariant(s.to_string()))
    }
}

/// First generation `g` with champion fitness `>= target` for all of
/// `g..g + window`. A window of zero is treated as one.
pub fn detect_consistent_success(champions: &[f64], window: usize, target: f64) -> Option<usize> {
    let window = window.max(1);
    let mut run = 0;
    for (g, &f) in champions.iter().enumerate() {
        if f >= target {
            run += 1;
            if run == window {
                return Some(g + 1 - window);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Seed of one repetition.
pub fn run_seed(master_seed: u64, variant: &VariantSpec, repetition: usize) -> u64 {
    derive_seed(master_seed, &variant.name(), repetition as u64)
}

/// Scores genomes on the foraging domain.
///
/// Trial layouts come from `(run seed, generation)`, so every genome of a
/// generation faces the same eight layouts, unless `per_genome_layouts` is
/// set, in which case the genome index is mixed in as well.
#[derive(Clone, Debug)]
pub struct ForagingEvaluator {
    pub cfg: ForagingConfig,
    pub run_seed: u64,
}

impl ForagingEvaluator {
    pub fn trial_set(&self, generation: usize, index: usize) -> TrialSet {
        let mut seed = derive_seed(self.run_seed, "trials", generation as u64);
        if self.cfg.per_genome_layouts {
            seed = derive_seed(seed, "genome", index as u64);
        }
        build_trial_set(seed, &self.cfg)
    }
}

impl Evaluator for ForagingEvaluator {
    fn evaluate(&self, genome: &Genome, generation: usize, index: usize) -> Result<FitnessRecord, BoxError> {
        Ok(evaluate(genome, &self.trial_set(generation, index), &self.cfg)?)
    }

    fn activations_per_evaluation(&self) -> u64 {
        (TRIALS * self.cfg.timesteps) as u64
    }
}

/// Outcome of one repetition.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub variant: VariantSpec,
    pub repetition: usize,
    pub seed: u64,
    pub rows: Vec<GenerationRow>,
    pub success_generation: Option<usize>,
    pub csv_path: PathBuf,
    pub champion_archive: PathBuf,
    pub plot_path: PathBuf,
    /// Set when the run aborted; `rows` then holds the completed generations.
    pub failure: Option<String>,
    pub evaluations: u64,
    pub activations: u64,
}

impl RunRecord {
    pub fn champion_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.champion_fitness).collect()
    }
}

pub fn run_file_stem(variant: &VariantSpec, repetition: usize) -> String {
    format!("{}_rep{}", variant.name(), repetition)
}

/// Progress callback: `(variant, repetition, stats)` after each generation.
pub type Progress<'a> = &'a (dyn Fn(&VariantSpec, usize, &GenerationStats) + Sync);

/// Evolves one repetition and writes its CSV, champion archive and plot.
pub fn run_single(
    variant: VariantSpec,
    repetition: usize,
    lab: &LabConfig,
    master_seed: u64,
    out_dir: &Path,
    progress: Option<Progress<'_>>,
) -> Result<RunRecord, HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let stem = run_file_stem(&variant, repetition);
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let archive_path = out_dir.join(format!("{stem}_champions.jsonl"));
    let plot_path = out_dir.join(format!("{stem}.svg"));

    let seed = run_seed(master_seed, &variant, repetition);
    let cfg = &lab.evolution;
    let evaluator = ForagingEvaluator { cfg: lab.foraging.clone(), run_seed: seed };
    let mut population = Population::new(IoSpec::FORAGING, cfg, variant.settings(), seed)?;

    let mut csv = csv::Writer::from_path(&csv_path)
        .map_err(|source| HarnessError::Csv { path: csv_path.display().to_string(), source })?;
    let archive_file = File::create(&archive_path).map_err(io_err(&archive_path))?;
    let mut archive = BufWriter::new(archive_file);

    let mut rows = Vec::with_capacity(cfg.generations);
    let mut failure = None;
    let mut activations = 0;
    for generation in 0..cfg.generations {
        let stats = match population.evolve_generation(&evaluator, cfg, generation) {
            Ok(stats) => stats,
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        };
        let row = GenerationRow::from(&stats);
        csv.serialize(&row).map_err(|source| HarnessError::Csv { path: csv_path.display().to_string(), source })?;
        writeln!(archive, "{}", stats.champion.to_json()).map_err(io_err(&archive_path))?;
        activations = stats.activations_cumulative;
        if let Some(report) = progress {
            report(&variant, repetition, &stats);
        }
        rows.push(row);
    }
    csv.flush().map_err(io_err(&csv_path))?;
    archive.flush().map_err(io_err(&archive_path))?;
    if !rows.is_empty() {
        emit_plot(&rows, &format!("{} repetition {}", variant.name(), repetition), &plot_path)?;
    }

    let champions: Vec<f64> = rows.iter().map(|r| r.champion_fitness).collect();
    Ok(RunRecord {
        variant,
        repetition,
        seed,
        success_generation: detect_consistent_success(&champions, lab.success.window, lab.success.fitness),
        evaluations: population.evaluations(),
        rows,
        csv_path,
        champion_archive: archive_path,
        plot_path,
        failure,
        activations,
    })
}

/// Runs `reps` repetitions of `variant` and writes `<variant>.summary.json`.
pub fn run_experiment(
    variant: VariantSpec,
    reps: usize,
    lab: &LabConfig,
    master_seed: u64,
    out_dir: &Path,
    progress: Option<Progress<'_>>,
) -> Result<(Vec<RunRecord>, SummaryDocument), HarnessError> {
    if reps == 0 {
        return Err(HarnessError::NoRepetitions);
    }
    let records = (0..reps)
        .map(|rep| run_single(variant, rep, lab, master_seed, out_dir, progress))
        .collect::<Result<Vec<_>, _>>()?;
    let mut doc = summarize(&records, &lab.success);
    doc.master_seed = Some(master_seed);
    doc.config = Some(lab.clone());
    let path = out_dir.join(format!("{}.summary.json", variant.name()));
    doc.write(&path)?;
    Ok((records, doc))
}
