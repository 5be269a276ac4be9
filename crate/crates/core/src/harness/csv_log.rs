use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::evolution::GenerationStats;

pub const CSV_HEADER: &str = "generation,pop_size,champion_fitness,mean_fitness,std_fitness,species_count,\
champion_nodes,champion_connections,evaluations_cumulative";

/// One line of a run CSV. `champion_connections` counts enabled genes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRow {
    pub generation: usize,
    pub pop_size: usize,
    pub champion_fitness: f64,
    pub mean_fitness: f64,
    pub std_fitness: f64,
    pub species_count: usize,
    pub champion_nodes: usize,
    pub champion_connections: usize,
    pub evaluations_cumulative: u64,
}

impl From<&GenerationStats> for GenerationRow {
    fn from(s: &GenerationStats) -> Self {
        Self {
            generation: s.generation,
            pop_size: s.pop_size,
            champion_fitness: s.champion_fitness,
            mean_fitness: s.mean_fitness,
            std_fitness: s.std_fitness,
            species_count: s.species_count,
            champion_nodes: s.champion_nodes(),
            champion_connections: s.champion_connections(),
            evaluations_cumulative: s.evaluations_cumulative,
        }
    }
}

pub fn write_run_csv(rows: &[GenerationRow], path: &Path) -> Result<(), HarnessError> {
    let csv_err = |source| HarnessError::Csv { path: path.display().to_string(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(super::io_err(path))
}

pub fn read_run_csv(path: &Path) -> Result<Vec<GenerationRow>, HarnessError> {
    let csv_err = |source| HarnessError::Csv { path: path.display().to_string(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<Result<Vec<GenerationRow>, _>>().map_err(csv_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let row = GenerationRow {
            generation: 0,
            pop_size: 200,
            champion_fitness: 41.0,
            mean_fitness: 33.25,
            std_fitness: 1.5,
            species_count: 4,
            champion_nodes: 17,
            champion_connections: 20,
            evaluations_cumulative: 200,
        };
        write_run_csv(std::slice::from_ref(&row), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(read_run_csv(&path).unwrap(), vec![row]);
    }
}
