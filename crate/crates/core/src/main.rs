use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use paal::datagen::{generate_cohort, write_dataset_csv};
use paal::harness::{self, load_cohort_spec, load_experiment_config, read_curves, run_experiment, summarize, write_outputs};
use paal::{Error, QueryStrategy};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "paal", version, about = "Patient-aware active learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic patient cohort and write train/test CSVs.
    GenData {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_train: PathBuf,
        #[arg(long)]
        out_test: PathBuf,
    },
    /// Run an active-learning experiment over one or more seeds.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Wrap the strategy with patient-aware selection.
        #[arg(long)]
        patient_aware: bool,
        /// random | least_confidence | margin | entropy | badge
        #[arg(long)]
        strategy: Option<String>,
        /// Comma-separated seed list, e.g. 1,2,3,4,5
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Continue each round from the previous round's weights.
        #[arg(long)]
        warm_start: bool,
        /// Output directory (overrides `output` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute summary.csv from the curve files in a run directory.
    Summarize { dir: PathBuf },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidSpec(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn gen_data(spec: &Path, out_train: &Path, out_test: &Path) -> Result<(), Error> {
    let spec = load_cohort_spec(spec)?;
    let cohort = generate_cohort(&spec)?;
    write_dataset_csv(&cohort.train, out_train)?;
    write_dataset_csv(&cohort.test, out_test)?;
    eprintln!(
        "wrote {} train samples ({} patients) and {} test samples ({} patients)",
        cohort.train.len(),
        cohort.train.patient_ids().len(),
        cohort.test.len(),
        cohort.test.patient_ids().len()
    );
    Ok(())
}

fn run(
    config: &Path,
    patient_aware: bool,
    strategy: Option<String>,
    seeds: Option<Vec<u64>>,
    warm_start: bool,
    out: Option<PathBuf>,
) -> Result<bool, Error> {
    let mut cfg = load_experiment_config(config)?;
    cfg.patient_aware |= patient_aware;
    cfg.warm_start |= warm_start;
    if let Some(name) = strategy {
        cfg.strategy = name.parse::<QueryStrategy>()?;
    }
    if let Some(seeds) = seeds {
        cfg.seeds = seeds;
    }
    cfg.validate()?;
    let out = out
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set `output`".into()))?;

    let (train, test) = cfg.load_data()?;
    let result = run_experiment(&cfg, &train, &test)?;
    write_outputs(&out, &result, &train)?;

    if let Ok(summary) = result.summary() {
        if let Some(last) = summary.last() {
            eprintln!(
                "{}{}: {} labeled -> mean accuracy {:.4} (stderr {:.4}, {} seeds)",
                if cfg.patient_aware { "patient-aware " } else { "" },
                cfg.strategy,
                last.labeled_count,
                last.mean_accuracy,
                last.standard_error,
                summary.num_seeds
            );
        }
    }
    let mut clean = true;
    for (seed, error) in result.failures() {
        eprintln!("seed {seed} failed: {error}");
        clean = false;
    }
    Ok(clean)
}

fn summarize_dir(dir: &Path) -> Result<(), Error> {
    let curves: Vec<_> = read_curves(dir)?.into_iter().map(|(_, c)| c).collect();
    let summary: harness::CurveSummary = summarize(&curves)?;
    let text = summary.to_csv();
    std::fs::write(dir.join("summary.csv"), &text)?;
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenData {
            spec,
            out_train,
            out_test,
        } => gen_data(&spec, &out_train, &out_test).map(|_| true),
        Command::Run {
            config,
            patient_aware,
            strategy,
            seeds,
            warm_start,
            out,
        } => run(&config, patient_aware, strategy, seeds, warm_start, out),
        Command::Summarize { dir } => summarize_dir(&dir).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_RUNTIME),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
