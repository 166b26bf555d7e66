use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use korovkin_lab::cli;

#[derive(Parser)]
#[command(name = "korovkin-lab", version, about = "Summability-method Korovkin experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the registered scenarios.
    ListScenarios,
    /// Check a config and print it with defaults filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("KOROVKIN_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("KOROVKIN_LAB_THREADS: expected a nonnegative integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn load(path: &PathBuf) -> Result<cli::ExperimentConfig, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("config: cannot read {}: {e}", path.display());
        ExitCode::from(1)
    })?;
    cli::validate(&text).map_err(|errors| {
        for e in &errors {
            eprintln!("{e}");
        }
        if errors.iter().any(|e| e.starts_with("scenario: unknown")) {
            eprintln!("\nregistered scenarios:\n{}", cli::registry_listing());
        }
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = init_threads() {
        eprintln!("{e}");
        return ExitCode::from(1);
    }
    match args.command {
        Command::ListScenarios => {
            print!("{}", cli::registry_listing());
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                println!("{}", serde_json::to_string_pretty(&cfg.to_json()).expect("config serializes"));
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Run { config, output_dir, seed } => {
            let mut cfg = match load(&config) {
                Ok(cfg) => cfg,
                Err(code) => return code,
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = cli::resolve_output_dir(&cfg, output_dir.as_deref());
            match cli::run(&cfg, &dir) {
                Ok(result) => {
                    print!("{}", cli::summary_text(&cfg, &result.outcome));
                    println!("\nwrote {} files to {}", result.files.len(), dir.display());
                    ExitCode::from(result.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
