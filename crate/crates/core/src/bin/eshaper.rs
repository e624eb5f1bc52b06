use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eshaper_core::cli;
use eshaper_core::Error;

/// Electron wave-function shaping for selective excitation and entanglement
/// of optical and vibrational modes.
#[derive(Parser)]
#[command(name = "eshaper", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the sample mode basis and write the mode report.
    Modes {
        /// Run configuration (or a manifest from a previous run).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: `<output.dir>-modes`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Invert the transfer relation for the configured target state.
    Shape {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Propagate a stored incident field and write maps, spectra and
    /// fraction metrics.
    Forward {
        #[arg(long)]
        config: PathBuf,
        /// Incident field written by `shape` (default:
        /// `<output.dir>-shape/incident_alpha.txt`).
        #[arg(long)]
        alpha: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a finished run directory.
    Report {
        /// Run directory (with manifest.toml); alternatively derived from
        /// the config's output directory.
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Configuration(_) | Error::Parameter(_) | Error::Ingestion(_) => 2,
        Error::Io { .. } => 4,
        _ => 3,
    }
}

fn run() -> Result<(), Error> {
    // single-threaded BLAS keeps runs bit-reproducible across machines with
    // different core counts; set before the first LAPACK call
    if std::env::var_os("OPENBLAS_NUM_THREADS").is_none() {
        std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    }
    let args = Args::parse();
    match args.command {
        Command::Modes { config, out } => {
            let cfg = cli::load_config_or_manifest(&config)?;
            let dir = cli::cmd_modes(&cfg, out.as_deref())?;
            println!("modes report written to {}", dir.display());
        }
        Command::Shape { config, out } => {
            let cfg = cli::load_config_or_manifest(&config)?;
            let dir = cli::cmd_shape(&cfg, out.as_deref())?;
            println!("shaping run written to {}", dir.display());
        }
        Command::Forward { config, alpha, out } => {
            let cfg = cli::load_config_or_manifest(&config)?;
            let alpha_path = alpha.unwrap_or_else(|| {
                let base = &cfg.output.dir;
                let name = base
                    .file_name()
                    .map(|n| n.to_string_lossy().to_string())
                    .unwrap_or_else(|| "run".into());
                base.with_file_name(format!("{name}-shape"))
                    .join("incident_alpha.txt")
            });
            let dir = cli::cmd_forward(&cfg, &alpha_path, out.as_deref())?;
            println!("forward run written to {}", dir.display());
        }
        Command::Report { run, config } => {
            let dir = match (run, config) {
                (Some(dir), _) => dir,
                (None, Some(cfg_path)) => {
                    let cfg = cli::load_config_or_manifest(&cfg_path)?;
                    cfg.output.dir.clone()
                }
                (None, None) => {
                    return Err(Error::configuration(
                        "report needs --run <dir> or --config <path>",
                    ))
                }
            };
            let summary = cli::cmd_report(&dir)?;
            print!("{summary}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
