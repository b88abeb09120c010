//! `fuzzkd`: image preparation, distillation training, GA model selection and
//! evaluation from one TOML config.
//!
//! Exit status is 0 on success, 1 when the input or configuration is invalid
//! and 2 on runtime failure. Failures are printed to stderr as
//! `error: <validation|runtime>: <message>`, one line per problem.

mod experiment;
mod images;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fuzzkd::config::{ExperimentConfig, FitnessKind};
use fuzzkd::dataset::SplitName;
use fuzzkd::loss::WeightMode;
use fuzzkd::Error;

#[derive(Parser)]
#[command(
    name = "fuzzkd",
    version,
    about = "Fuzzy-weighted knowledge distillation toolkit"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (TOML). Missing sections use defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for image commands; defaults to the number of cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Gamma-correct every image (pix1) and optionally equalize it (pix2).
    Enhance {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        scale: Option<f64>,
        /// Also write histogram-equalized copies under `pix2/`.
        #[arg(long)]
        histeq: bool,
    },
    /// Wavelet-fuse images with matching relative paths in two trees.
    Fuse {
        #[arg(long)]
        pix1: PathBuf,
        #[arg(long)]
        pix2: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        levels: Option<usize>,
        /// Output side length.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Split a class-per-directory tree into a train/valid/test manifest.
    Split {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Oversample minority classes in train and valid.
        #[arg(long)]
        balance: bool,
    },
    /// Train a student against a teacher; writes checkpoint and history.
    Train {
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<WeightMode>,
    },
    /// Run the genetic algorithm; writes the best genome and GA history.
    Select {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_parser = parse_fitness)]
        fitness: Option<FitnessKind>,
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long)]
        population: Option<usize>,
    },
    /// Score a checkpoint or a predictions CSV; writes a metrics report.
    Evaluate {
        #[arg(
            long,
            conflicts_with = "predictions",
            required_unless_present = "predictions"
        )]
        checkpoint: Option<PathBuf>,
        /// CSV with header `truth,predicted[,score_0,..]`.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long, default_value = "test", value_parser = parse_split)]
        split: SplitName,
        #[arg(long)]
        output: PathBuf,
    },
    /// Render a metrics report as a table.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// Write the table here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_mode(s: &str) -> Result<WeightMode, String> {
    match s {
        "static" => Ok(WeightMode::Static),
        "fuzzy_mamdani" => Ok(WeightMode::FuzzyMamdani),
        "fuzzy_weighted_sum" => Ok(WeightMode::FuzzyWeightedSum),
        _ => Err(format!(
            "unknown mode '{s}' (static, fuzzy_mamdani, fuzzy_weighted_sum)"
        )),
    }
}

fn parse_fitness(s: &str) -> Result<FitnessKind, String> {
    match s {
        "onemax" => Ok(FitnessKind::Onemax),
        "sphere" => Ok(FitnessKind::Sphere),
        "proxy-distill" => Ok(FitnessKind::ProxyDistill),
        _ => Err(format!(
            "unknown fitness '{s}' (onemax, sphere, proxy-distill)"
        )),
    }
}

fn parse_split(s: &str) -> Result<SplitName, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_config(global: &Global) -> fuzzkd::Result<ExperimentConfig> {
    let mut cfg = match &global.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn apply_overrides(cfg: &mut ExperimentConfig, command: &Command) {
    match command {
        Command::Enhance {
            gamma,
            scale,
            histeq,
            ..
        } => {
            cfg.imaging.gamma = gamma.unwrap_or(cfg.imaging.gamma);
            cfg.imaging.scale = scale.unwrap_or(cfg.imaging.scale);
            cfg.imaging.histeq |= histeq;
        }
        Command::Fuse { levels, size, .. } => {
            cfg.imaging.levels = levels.unwrap_or(cfg.imaging.levels);
            cfg.imaging.size = size.unwrap_or(cfg.imaging.size);
        }
        Command::Split { balance, .. } => cfg.data.balance |= balance,
        Command::Train {
            epochs,
            learning_rate,
            batch_size,
            mode,
            ..
        } => {
            cfg.train.epochs = epochs.unwrap_or(cfg.train.epochs);
            cfg.train.learning_rate = learning_rate.unwrap_or(cfg.train.learning_rate);
            cfg.train.batch_size = batch_size.unwrap_or(cfg.train.batch_size);
            cfg.loss.weight_mode = mode.unwrap_or(cfg.loss.weight_mode);
        }
        Command::Select {
            fitness,
            generations,
            population,
            ..
        } => {
            cfg.ga.fitness = fitness.unwrap_or(cfg.ga.fitness);
            cfg.ga.max_generations = generations.unwrap_or(cfg.ga.max_generations);
            cfg.ga.population = population.unwrap_or(cfg.ga.population);
        }
        Command::Evaluate { .. } | Command::Report { .. } => {}
    }
}

fn run(cli: Cli) -> fuzzkd::Result<()> {
    let mut cfg = load_config(&cli.global)?;
    apply_overrides(&mut cfg, &cli.command);
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(vec![format!("worker pool: {e}")]))?;
    match cli.command {
        Command::Enhance { input, output, .. } => {
            pool.install(|| images::enhance(&cfg, &input, &output))
        }
        Command::Fuse {
            pix1, pix2, output, ..
        } => pool.install(|| images::fuse(&cfg, &pix1, &pix2, &output)),
        Command::Split { root, output, .. } => images::split(&cfg, &root, &output),
        Command::Train { output, .. } => experiment::train(&cfg, &output),
        Command::Select { output, .. } => pool.install(|| experiment::select(&cfg, &output)),
        Command::Evaluate {
            checkpoint,
            predictions,
            split,
            output,
        } => match (checkpoint, predictions) {
            (Some(ck), _) => experiment::evaluate_checkpoint(&cfg, &ck, split, &output),
            (None, Some(csv)) => experiment::evaluate_predictions(&csv, &output),
            (None, None) => Err(Error::Config(vec![
                "evaluate needs --checkpoint or --predictions".into(),
            ])),
        },
        Command::Report { input, output } => experiment::report(&input, output.as_deref()),
    }
}

fn report_error(e: &Error) -> ExitCode {
    let (kind, code) = if e.is_validation() {
        ("validation", 1)
    } else {
        ("runtime", 2)
    };
    match e {
        Error::Config(list) => {
            for msg in list {
                eprintln!("error: {kind}: {msg}");
            }
        }
        other => eprintln!("error: {kind}: {}", other.to_string().replace('\n', " ")),
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FUZZKD_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}
