mod commands;
mod config;
mod logging;
mod manifest;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{error, LevelFilter};
use scgrec::eval::Phase;

use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "scgrec", version, about = "Social and contextual game recommendation")]
struct Cli {
    /// JSON configuration file. Missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set training.lr=0.01`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print debug messages.
    #[arg(short, long, global = true)]
    verbose: bool,
    /// Print only warnings and errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Validation,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset into `data_dir`.
    GenSynthetic,
    /// Write the exploratory analysis tables.
    Analyze,
    /// Split the data and write the five-relation context graph.
    BuildGraph,
    /// Train the model and write the checkpoint.
    Train,
    /// Score the checkpoint and the popularity baselines.
    Evaluate {
        /// Also train and score the reduced models.
        #[arg(long)]
        ablations: bool,
        #[arg(long, value_enum, default_value = "test")]
        phase: PhaseArg,
    },
    /// Print a user's top-k games.
    Recommend {
        #[arg(long)]
        user: u64,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Compare analytic and numeric gradients on a small instance.
    GradCheck,
    /// Train over a grid of fusion weights.
    Sweep,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenSynthetic => "gen-synthetic",
            Command::Analyze => "analyze",
            Command::BuildGraph => "build-graph",
            Command::Train => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Recommend { .. } => "recommend",
            Command::GradCheck => "grad-check",
            Command::Sweep => "sweep",
        }
    }

    /// Whether the command reads the engagement, social and catalog tables.
    fn reads_data(&self) -> bool {
        !matches!(self, Command::GenSynthetic | Command::GradCheck)
    }
}

fn run(cli: &Cli, config: &RunConfig) -> anyhow::Result<()> {
    match &cli.command {
        Command::GenSynthetic => commands::gen_synthetic(config),
        Command::Analyze => commands::analyze(config),
        Command::BuildGraph => commands::build_graph(config),
        Command::Train => commands::train(config),
        Command::Evaluate { ablations, phase } => {
            let phase = match phase {
                PhaseArg::Validation => Phase::Validation,
                PhaseArg::Test => Phase::Test,
            };
            commands::evaluate_cmd(config, phase, *ablations)
        }
        Command::Recommend { user, k } => commands::recommend_cmd(config, *user, *k),
        Command::GradCheck => commands::grad_check(config),
        Command::Sweep => commands::sweep(config),
    }?;
    let inputs = if cli.command.reads_data() {
        pipeline::input_files(config)
    } else {
        Vec::new()
    };
    manifest::record(config, cli.command.name(), &inputs, cli.threads)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match config::load(cli.config.as_deref(), &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.threads == Some(0) {
        eprintln!("error: --threads must be >= 1");
        return ExitCode::from(2);
    }
    if let Err(e) = std::fs::create_dir_all(&config.output_dir) {
        eprintln!("error: cannot create {}: {e}", config.output_dir.display());
        return ExitCode::from(1);
    }
    let level = match (cli.verbose, cli.quiet) {
        (true, _) => LevelFilter::Debug,
        (_, true) => LevelFilter::Warn,
        _ => LevelFilter::Info,
    };
    if let Err(e) = logging::init(level, Some(&config.output_dir.join("log.jsonl"))) {
        eprintln!("error: cannot open the log file: {e}");
        return ExitCode::from(1);
    }
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli, &config)),
            Err(e) => Err(e.into()),
        },
        None => run(&cli, &config),
    };
    log::logger().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e:#}");
            log::logger().flush();
            ExitCode::from(1)
        }
    }
}
