//! Per-variant success tables.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{detect_consistent_success, io_err, read_run_csv, HarnessError, RunRecord, VariantSpec};
use crate::config::{LabConfig, SuccessConfig};

pub const SUCCESS_CONVENTION: &str = "success generation = first generation of the earliest window of \
`window` consecutive generations whose champion fitness is at least `success_fitness`";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub reps: usize,
    /// One entry per repetition, `None` when no success window was found.
    pub success_generations: Vec<Option<usize>>,
    pub successes: usize,
    pub mean_success_generation: Option<f64>,
    /// Repetitions that aborted.
    pub failed_runs: Vec<usize>,
    pub evaluations: Vec<u64>,
    pub activations: Vec<u64>,
}

impl VariantSummary {
    pub fn new(variant: String, success_generations: Vec<Option<usize>>) -> Self {
        let found: Vec<usize> = success_generations.iter().flatten().copied().collect();
        let mean = (!found.is_empty()).then(|| found.iter().sum::<usize>() as f64 / found.len() as f64);
        Self {
            variant,
            reps: success_generations.len(),
            successes: found.len(),
            mean_success_generation: mean,
            success_generations,
            failed_runs: Vec::new(),
            evaluations: Vec::new(),
            activations: Vec::new(),
        }
    }
}

impl fmt::Display for VariantSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mean_success_generation {
            Some(mean) => write!(f, "{}/{}, mean {}", self.successes, self.reps, mean),
            None => write!(f, "{}/{}, mean n/a", self.successes, self.reps),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub convention: String,
    pub window: usize,
    pub success_fitness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<LabConfig>,
    pub variants: Vec<VariantSummary>,
}

impl SummaryDocument {
    fn new(success: &SuccessConfig, variants: Vec<VariantSummary>) -> Self {
        Self {
            convention: SUCCESS_CONVENTION.to_string(),
            window: success.window,
            success_fitness: success.fitness,
            master_seed: None,
            config: None,
            variants,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_json() + "\n").map_err(io_err(path))
    }

    /// Plain-text table, one line per variant.
    pub fn table(&self) -> String {
        let mut out = format!("# {}\n", self.convention);
        out.push_str(&format!("# window = {}, success_fitness = {}\n", self.window, self.success_fitness));
        out.push_str(&format!("{:<10} {:<18} {}\n", "variant", "result", "success generations"));
        for v in &self.variants {
            let gens: Vec<String> =
                v.success_generations.iter().map(|g| g.map_or("none".to_string(), |g| g.to_string())).collect();
            out.push_str(&format!("{:<10} {:<18} {}\n", v.variant, v.to_string(), gens.join(" ")));
        }
        out
    }
}

/// Groups records by variant (canonical order) and tabulates successes.
pub fn summarize(records: &[RunRecord], success: &SuccessConfig) -> SummaryDocument {
    let mut groups: BTreeMap<usize, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.variant.rank()).or_default().push(r);
    }
    let variants = groups
        .into_values()
        .map(|mut runs| {
            runs.sort_by_key(|r| r.repetition);
            let mut v = VariantSummary::new(
                runs[0].variant.name(),
                runs.iter().map(|r| r.success_generation).collect(),
            );
            v.failed_runs = runs.iter().filter(|r| r.failure.is_some()).map(|r| r.repetition).collect();
            v.evaluations = runs.iter().map(|r| r.evaluations).collect();
            v.activations = runs.iter().map(|r| r.activations).collect();
            v
        })
        .collect();
    SummaryDocument::new(success, variants)
}

/// Rebuilds the summary from the `<variant>_rep<k>.csv` files in `dir`.
pub fn summarize_dir(dir: &Path, success: &SuccessConfig) -> Result<SummaryDocument, HarnessError> {
    // rank -> (variant, [(repetition, success generation, evaluations)])
    type Runs = Vec<(usize, Option<usize>, u64)>;
    let mut groups: BTreeMap<usize, (VariantSpec, Runs)> = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some((variant, rep)) = name.strip_suffix(".csv").and_then(|s| s.rsplit_once("_rep")) else { continue };
        let (Ok(variant), Ok(rep)) = (variant.parse::<VariantSpec>(), rep.parse::<usize>()) else { continue };
        let rows = read_run_csv(&path)?;
        let champions: Vec<f64> = rows.iter().map(|r| r.champion_fitness).collect();
        let success_generation = detect_consistent_success(&champions, success.window, success.fitness);
        let evaluations = rows.last().map_or(0, |r| r.evaluations_cumulative);
        groups.entry(variant.rank()).or_insert_with(|| (variant, Vec::new())).1.push((rep, success_generation, evaluations));
    }
    let variants = groups
        .into_values()
        .map(|(variant, mut runs)| {
            runs.sort_by_key(|r| r.0);
            let mut v = VariantSummary::new(variant.name(), runs.iter().map(|r| r.1).collect());
            v.evaluations = runs.iter().map(|r| r.2).collect();
            v
        })
        .collect();
    Ok(SummaryDocument::new(success, variants))
}
