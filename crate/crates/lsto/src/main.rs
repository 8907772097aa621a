use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lsto::presets::{self, PresetName};
use lsto::{AppError, RunConfig};

#[derive(Parser)]
#[command(name = "lsto", about = "Level-set topology optimization with density-informed hole nucleation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the optimization described by a TOML configuration.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.directory`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a benchmark preset.
    Preset {
        #[arg(value_parser = parse_preset)]
        name: PresetName,
        /// Coarsening factor for the grid and the continuation spans.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        scale: u32,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Print the resolved configuration instead of running it.
        #[arg(long)]
        print_config: bool,
    },
    /// Compare adjoint gradients with central finite differences.
    Gradcheck { config: PathBuf },
    /// Print the version.
    Version,
}

fn parse_preset(s: &str) -> Result<PresetName, String> {
    s.parse()
}

fn run(cfg: &mut RunConfig, output: Option<PathBuf>) -> Result<(), AppError> {
    if let Some(dir) = output {
        cfg.output.directory = dir;
    }
    let report = lsto::run(cfg)?;
    let s = &report.summary;
    let b = &s.last.breakdown;
    println!(
        "{}: {:?} after {} iterations, z = {:.6}, F = {:.6}, mass fraction = {:.4}, voids = {}",
        cfg.preset, s.termination, s.iterations, b.z, b.f, b.mass_fraction, b.void_components
    );
    println!("results in {}", report.directory.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<ExitCode, AppError> {
    match cli.command {
        Command::Run { config, output } => {
            let mut cfg = RunConfig::load(&config)?;
            run(&mut cfg, output)?;
        }
        Command::Preset {
            name,
            scale,
            output,
            print_config,
        } => {
            let mut cfg = presets::preset(name, scale as usize);
            if print_config {
                print!("{}", cfg.to_toml());
            } else {
                run(&mut cfg, output)?;
            }
        }
        Command::Gradcheck { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = lsto::gradcheck(&cfg)?;
            let worst = report.max_relative_error();
            println!(
                "checked {} derivatives ({} variables skipped at branch points)",
                report.entries.len(),
                report.skipped
            );
            println!("max relative error {worst:.3e} (tolerance {:.1e})", cfg.gradcheck.tolerance);
            if !(worst <= cfg.gradcheck.tolerance) {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Version => println!("lsto {}", env!("CARGO_PKG_VERSION")),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
