use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use manifold_nets_cli::{execute, generate, write_outputs, CliError, ExperimentConfig, ExperimentKind, Overrides};

#[derive(Parser)]
#[command(name = "mnets", version, about = "Run manifold network experiments from a config file")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment and write metrics and provenance.
    Run(Common),
    /// Check the config and list every violation without running.
    Validate(Common),
    /// Write the configured dataset only.
    Generate(Common),
    /// Run the convergence-rate experiment of the config.
    RateCheck(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML, or JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for splits and replications.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
    /// Suppress the summary and warnings.
    #[arg(long)]
    quiet: bool,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, usize::from)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(args: &Common, force_rate: bool) -> Result<ExperimentConfig, CliError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if force_rate {
        config.kind = ExperimentKind::RateCheck;
    }
    config.resolve(&Overrides {
        seed: args.seed,
        out: args.out.clone(),
    })
}

fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Validate(args) => {
            let mut config = ExperimentConfig::load(&args.config)?;
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            let v = config.violations();
            if v.is_empty() {
                if !args.quiet {
                    println!("ok: {} ({})", args.config.display(), config.fingerprint());
                }
                Ok(ExitCode::SUCCESS)
            } else {
                for v in &v {
                    println!("{v}");
                }
                Ok(ExitCode::from(2))
            }
        }
        Command::Generate(args) => {
            let config = load(&args, false)?;
            let dir = generate(&config)?;
            if !args.quiet {
                println!("wrote {}", dir.join("dataset.csv").display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => run(args, false),
        Command::RateCheck(args) => run(args, true),
    }
}

fn run(args: Common, force_rate: bool) -> Result<ExitCode, CliError> {
    let config = load(&args, force_rate)?;
    let outcome = execute(&config, args.jobs)?;
    write_outputs(&config, &outcome)?;
    if !args.quiet {
        for w in outcome.warnings() {
            eprintln!("warning: {w}");
        }
        for line in outcome.summary() {
            println!("{line}");
        }
    }
    Ok(ExitCode::SUCCESS)
}
