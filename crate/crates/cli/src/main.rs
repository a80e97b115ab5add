use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use engage_eeg::config::{fingerprint_of, RunConfig};
use engage_eeg::eval::{experiment_matrix, render_table, ResultsFile};
use engage_eeg::io::{load_dataset, save_dataset, write_json, Manifest, Stage, RATINGS_FILE};
use engage_eeg::preprocess::{preprocess_epochs, PreprocessLog};
use engage_eeg::signal::Epoch;
use engage_eeg::stats::{aggregate_labels, stats_report, RatingTable};
use engage_eeg::synth::{generate_dataset, GeneratorSpec, GroundTruth};
use engage_eeg::Error;

pub const TRUTH_FILE: &str = "truth.json";
pub const PREPROCESS_LOG_FILE: &str = "preprocess_log.json";
pub const RESULTS_JSON: &str = "results.json";
pub const RESULTS_TABLE: &str = "results.txt";
pub const STATS_FILE: &str = "stats.json";

#[derive(Parser)]
#[command(name = "engage-eeg", version, about = "Engagement prediction from EEG: generate, preprocess, evaluate, stats")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (epochs, manifest, ratings, ground truth).
    Generate(Common),
    /// Clean a dataset: noisy-epoch rejection, band-pass, ICA, baseline.
    Preprocess {
        #[command(flatten)]
        common: Common,
        /// Dataset directory; overrides the config's `dataset`.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Run the classifier x window experiment matrix.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Rating statistics: histogram, labels, attribute correlations.
    Stats {
        #[command(flatten)]
        common: Common,
        /// Ratings CSV; defaults to `<dataset>/ratings.csv`.
        #[arg(long)]
        ratings: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config (generator spec for `generate`, run config otherwise).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

/// A failure with its process exit code: 2 bad input, 3 I/O, 4 pipeline.
struct Failure {
    code: u8,
    message: String,
}

type CliResult<T> = Result<T, Failure>;

fn fail(code: u8, context: impl std::fmt::Display, err: impl std::fmt::Display) -> Failure {
    Failure { code, message: format!("{context}: {err}") }
}

fn input_code(err: &Error, otherwise: u8) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::InvalidSpec(_) | Error::Parse { .. } | Error::Json { .. } => 2,
        Error::Io { .. } => 3,
        _ => otherwise,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ENGAGE_EEG_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let common = match &cli.command {
        Command::Generate(c) => c,
        Command::Preprocess { common, .. } | Command::Evaluate { common, .. } | Command::Stats { common, .. } => common,
    };
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| fail(2, "--jobs", e))?;
    }
    match &cli.command {
        Command::Generate(c) => cmd_generate(c),
        Command::Preprocess { common, dataset } => cmd_preprocess(common, dataset.as_deref()),
        Command::Evaluate { common, dataset } => cmd_evaluate(common, dataset.as_deref()),
        Command::Stats { common, ratings } => cmd_stats(common, ratings.as_deref()),
    }
}

fn load_run_config(common: &Common) -> CliResult<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path).map_err(|e| fail(input_code(&e, 2), "config", e))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config = config.with_seed(seed);
    }
    config.output_dir = Some(common.out.clone());
    Ok(config)
}

fn create_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| fail(3, format!("creating {}", dir.display()), e))
}

fn write_out<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_json(path, value).map_err(|e| fail(3, "output", e))
}

#[derive(Serialize)]
struct TruthFile<'a> {
    config_fingerprint: &'a str,
    spec: &'a GeneratorSpec,
    #[serde(flatten)]
    truth: &'a GroundTruth,
}

fn cmd_generate(common: &Common) -> CliResult<()> {
    let mut spec: GeneratorSpec = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| fail(3, format!("reading {}", path.display()), e))?;
            serde_json::from_str(&text).map_err(|e| fail(2, format!("invalid spec {}", path.display()), e))?
        }
        None => GeneratorSpec::default(),
    };
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    spec.validate().map_err(|e| fail(2, "generate", e))?;
    let fingerprint = fingerprint_of(&spec);
    info!("generating {} epochs (fingerprint {fingerprint})", spec.surviving_epochs());

    let data = generate_dataset(&spec).map_err(|e| fail(input_code(&e, 4), "generate", e))?;
    let out = &common.out;
    create_out(out)?;
    let manifest = Manifest {
        config_fingerprint: fingerprint.clone(),
        channels: data.epochs.first().map(|e| e.layout.clone()).ok_or_else(|| fail(2, "generate", "no epochs"))?,
        epochs: data.epochs.iter().map(Epoch::id).collect(),
        applied_stages: Vec::new(),
    };
    save_dataset(out, &manifest, &data.epochs).map_err(|e| fail(3, "generate", e))?;
    data.ratings.save(&out.join(RATINGS_FILE)).map_err(|e| fail(3, "generate", e))?;
    write_out(
        &out.join(TRUTH_FILE),
        &TruthFile { config_fingerprint: &fingerprint, spec: &spec, truth: &data.truth },
    )?;

    let high = data.epochs.iter().filter(|e| e.label.is_some_and(|l| l.is_high())).count();
    let ads_high = data.truth.labels.values().filter(|l| l.is_high()).count();
    println!("dataset:     {}", out.display());
    println!("epochs:      {} ({} dropped)", data.epochs.len(), data.truth.dropped_epochs.len());
    println!("ads:         {} ({} high / {} low)", spec.n_ads, ads_high, spec.n_ads - ads_high);
    println!("subjects:    {}", spec.n_subjects);
    println!("balance:     {} high / {} low epochs", high, data.epochs.len() - high);
    println!("ratings:     {}", data.ratings.len());
    println!("fingerprint: {fingerprint}");
    Ok(())
}

#[derive(Serialize)]
struct PreprocessLogFile<'a> {
    config_fingerprint: &'a str,
    input_fingerprint: &'a str,
    #[serde(flatten)]
    log: &'a PreprocessLog,
}

/// Loads the dataset and runs every preprocessing stage it has not had yet.
fn load_and_clean(config: &RunConfig) -> CliResult<(Manifest, Vec<Epoch>, PreprocessLog)> {
    let dir = config.dataset_dir();
    let (manifest, epochs) = load_dataset(&dir).map_err(|e| fail(4, format!("stage load ({})", dir.display()), e))?;
    let cleaned = preprocess_epochs(epochs, &config.preprocess, &manifest.applied_stages)
        .map_err(|e| {
            let code = if matches!(e, Error::InvalidConfig(_)) { 2 } else { 4 };
            fail(code, "stage preprocess", e)
        })?;
    info!(
        "preprocess: {} epochs kept, {} rejected, skipped {:?}",
        cleaned.epochs.len(),
        cleaned.log.rejected_epochs.len(),
        cleaned.log.skipped_stages
    );
    Ok((manifest, cleaned.epochs, cleaned.log))
}

fn merged_stages(before: &[Stage], log: &PreprocessLog) -> Vec<Stage> {
    let mut stages = before.to_vec();
    stages.extend(log.applied_stages.iter().copied().filter(|s| !before.contains(s)));
    stages
}

fn cmd_preprocess(common: &Common, dataset: Option<&Path>) -> CliResult<()> {
    let mut config = load_run_config(common)?;
    if let Some(d) = dataset {
        config.dataset = d.to_path_buf();
        config.base_dir = PathBuf::from(".");
    }
    let fingerprint = config.fingerprint();
    let (manifest, epochs, log) = load_and_clean(&config)?;

    let out = &common.out;
    create_out(out)?;
    let cleaned = Manifest {
        config_fingerprint: fingerprint.clone(),
        channels: manifest.channels.clone(),
        epochs: epochs.iter().map(Epoch::id).collect(),
        applied_stages: merged_stages(&manifest.applied_stages, &log),
    };
    save_dataset(out, &cleaned, &epochs).map_err(|e| fail(3, "preprocess", e))?;
    let ratings = config.dataset_dir().join(RATINGS_FILE);
    if ratings.exists() && ratings != out.join(RATINGS_FILE) {
        fs::copy(&ratings, out.join(RATINGS_FILE)).map_err(|e| fail(3, "copying ratings", e))?;
    }
    write_out(
        &out.join(PREPROCESS_LOG_FILE),
        &PreprocessLogFile { config_fingerprint: &fingerprint, input_fingerprint: &manifest.config_fingerprint, log: &log },
    )?;
    println!(
        "{} epochs kept, {} rejected, {} subjects through ICA",
        epochs.len(),
        log.rejected_epochs.len(),
        log.ica.len()
    );
    Ok(())
}

/// Replaces epoch labels with those aggregated from the dataset's ratings,
/// when a ratings file is present.
fn relabel_from_ratings(dataset: &Path, epochs: &mut [Epoch]) -> CliResult<()> {
    let path = dataset.join(RATINGS_FILE);
    if !path.exists() {
        return Ok(());
    }
    let table = RatingTable::load(&path).map_err(|e| fail(input_code(&e, 4), "ratings", e))?;
    let model = aggregate_labels(&table).map_err(|e| fail(4, "stage labeling", e))?;
    for e in epochs.iter_mut() {
        match model.labels.get(&e.ad_id) {
            Some(l) => e.label = Some(*l),
            None => return Err(fail(4, "stage labeling", format!("ad {} has no ratings", e.ad_id))),
        }
    }
    Ok(())
}

fn cmd_evaluate(common: &Common, dataset: Option<&Path>) -> CliResult<()> {
    let mut config = load_run_config(common)?;
    if let Some(d) = dataset {
        config.dataset = d.to_path_buf();
        config.base_dir = PathBuf::from(".");
    }
    let fingerprint = config.fingerprint();
    let (manifest, mut epochs, log) = load_and_clean(&config)?;
    relabel_from_ratings(&config.dataset_dir(), &mut epochs)?;

    let cells = experiment_matrix(
        &epochs,
        &config.classifiers(),
        &config.features,
        &config.model,
        &config.plan(),
        &fingerprint,
    )
    .map_err(|e| fail(4, "stage evaluate", e))?;
    let results = ResultsFile::new(&fingerprint, cells);

    let out = &common.out;
    create_out(out)?;
    write_out(&out.join(RESULTS_JSON), &results)?;
    let table = render_table(&results);
    fs::write(out.join(RESULTS_TABLE), &table).map_err(|e| fail(3, "writing results table", e))?;
    if !log.applied_stages.is_empty() {
        write_out(
            &out.join(PREPROCESS_LOG_FILE),
            &PreprocessLogFile { config_fingerprint: &fingerprint, input_fingerprint: &manifest.config_fingerprint, log: &log },
        )?;
    }
    print!("{table}");
    Ok(())
}

fn cmd_stats(common: &Common, ratings: Option<&Path>) -> CliResult<()> {
    let config = load_run_config(common)?;
    let path = ratings.map(Path::to_path_buf).unwrap_or_else(|| config.ratings_path());
    let table = RatingTable::load(&path).map_err(|e| fail(input_code(&e, 2), "ratings", e))?;
    let fingerprint = config.fingerprint();
    let report = stats_report(&table, &config.stats, &fingerprint).map_err(|e| fail(4, "stage stats", e))?;
    if report.correlation.is_none() {
        warn!("valence/arousal columns missing; correlation matrix omitted");
    }
    let out = &common.out;
    create_out(out)?;
    write_out(&out.join(STATS_FILE), &report)?;
    println!(
        "{} ratings from {} annotators over {} ads; {} high / {} low (grand mean {:.4})",
        report.n_ratings,
        report.n_annotators,
        report.n_ads,
        report.labels.n_high,
        report.labels.n_low,
        report.labels.grand_mean
    );
    Ok(())
}
