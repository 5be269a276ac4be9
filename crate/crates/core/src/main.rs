use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use neatlab::config::LabConfig;
use neatlab::harness::{emit_plot, read_run_csv, run_experiment, summarize_dir, VariantSpec};

#[derive(Parser)]
#[command(name = "neatlab", version, about = "NEAT variants on the dangerous foraging domain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one variant for several repetitions.
    Run {
        #[arg(long)]
        variant: VariantSpec,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long)]
        gens: Option<usize>,
        /// Full population size. Unless --ramp-start is given, the ramp start
        /// keeps the configured start/full ratio.
        #[arg(long)]
        pop: Option<usize>,
        #[arg(long)]
        ramp_start: Option<usize>,
        /// Consecutive generations at the success fitness.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// TOML configuration; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print one line per generation.
        #[arg(long)]
        verbose: bool,
    },
    /// List the eight variants.
    Variants,
    /// Render a run CSV as an SVG fitness plot.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate success over every run CSV in a directory.
    Summarize {
        dir: PathBuf,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the default configuration file.
    Config,
}

fn load_config(path: Option<&PathBuf>) -> Result<LabConfig, Box<dyn std::error::Error>> {
    Ok(match path {
        Some(p) => LabConfig::load(p)?,
        None => LabConfig::default(),
    })
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Variants => {
            for v in VariantSpec::all() {
                println!("{v}");
            }
        }
        Command::Config => print!("{}", LabConfig::default().to_toml()),
        Command::Run { variant, reps, gens, pop, ramp_start, window, seed, out, config, verbose } => {
            let mut lab = load_config(config.as_ref())?;
            let evo = &mut lab.evolution;
            if let Some(g) = gens {
                evo.generations = g;
            }
            if let Some(p) = pop {
                let ratio = evo.ramp_start as f64 / evo.population_size as f64;
                evo.population_size = p;
                evo.ramp_start = ((p as f64 * ratio).round() as usize).clamp(1, p);
            }
            if let Some(r) = ramp_start {
                evo.ramp_start = r;
            }
            if let Some(w) = window {
                lab.success.window = w;
            }
            let report = |v: &VariantSpec, rep: usize, s: &neatlab::GenerationStats| {
                if verbose {
                    eprintln!(
                        "{v} rep {rep} gen {:>4} pop {:>3} champion {:>5} mean {:>7.3} species {}",
                        s.generation, s.pop_size, s.champion_fitness, s.mean_fitness, s.species_count
                    );
                }
            };
            let (records, doc) = run_experiment(variant, reps, &lab, seed, &out, Some(&report))?;
            for r in &records {
                let status = match (&r.failure, r.success_generation) {
                    (Some(e), _) => format!("failed: {e}"),
                    (None, Some(g)) => format!("success at generation {g}"),
                    (None, None) => "no success".to_string(),
                };
                println!("{} -> {}", r.csv_path.display(), status);
            }
            print!("{}", doc.table());
        }
        Command::Plot { csv, out } => {
            let rows = read_run_csv(&csv)?;
            let title = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string();
            emit_plot(&rows, &title, &out)?;
        }
        Command::Summarize { dir, window, config } => {
            let mut success = load_config(config.as_ref())?.success;
            if let Some(w) = window {
                success.window = w;
            }
            let doc = summarize_dir(&dir, &success)?;
            doc.write(&dir.join("summary.json"))?;
            print!("{}", doc.table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
