use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seqtherm_cli::config::MAX_SEED;
use seqtherm_cli::presets::{preset, PRESET_IDS};
use seqtherm_cli::{run_to_dir, threads_from_env, CliError, ExperimentConfig, Result, ScenarioRegistry};

#[derive(Parser)]
#[command(name = "seqtherm", version, about = "Sequential-measurement thermometry experiments")]
struct Cli {
    /// Worker threads; overrides SEQTHERM_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named figure preset.
    Preset {
        figure_id: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Print the preset config instead of running it.
        #[arg(long)]
        print: bool,
    },
    /// List scenarios and presets.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = match cli.threads {
        Some(0) => return Err(CliError::Config("--threads must be positive".into())),
        Some(n) => Some(n),
        None => threads_from_env()?,
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
    }

    match cli.command {
        Command::Run { config, out } => {
            let text = std::fs::read_to_string(&config).map_err(|source| CliError::Io {
                path: config.clone(),
                source,
            })?;
            let cfg = ExperimentConfig::from_toml(&text).map_err(|e| {
                CliError::Config(format!(
                    "{}: {}",
                    config.display(),
                    e.to_string().trim_start_matches("config error: ")
                ))
            })?;
            let dir = out
                .or_else(|| cfg.output.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            report(run_to_dir(&cfg, &dir)?);
        }
        Command::Preset {
            figure_id,
            seed,
            out,
            print,
        } => {
            let mut cfg = preset(&figure_id)?;
            if let Some(s) = seed {
                if s > MAX_SEED {
                    return Err(CliError::Config(format!("--seed must be at most {MAX_SEED}")));
                }
                cfg.seed = s;
            }
            if print {
                print!("{}", cfg.to_toml()?);
                return Ok(());
            }
            report(run_to_dir(&cfg, &out)?);
        }
        Command::List => {
            println!("scenarios:");
            for (name, about) in ScenarioRegistry::with_builtin().describe() {
                println!("  {name:<20} {about}");
            }
            println!("presets: {}", PRESET_IDS.join(", "));
        }
    }
    Ok(())
}

fn report(paths: Vec<PathBuf>) {
    for p in paths {
        println!("{}", p.display());
    }
}
