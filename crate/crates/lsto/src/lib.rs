//! Configuration, presets, result files and the run/gradcheck drivers behind
//! the `lsto` command.

pub mod config;
pub mod output;
pub mod presets;

use std::path::{Path, PathBuf};

use serde_json::json;

use lsto_core::field::extract_interface;
use lsto_core::opt::{
    gradient_check, run_optimization, Design, Evaluation, GradientCheck, IterationObserver, Problem,
    RunSummary, Termination,
};

pub use config::RunConfig;
use output::HistoryWriter;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("configuration: {0}")]
    Parse(String),
    #[error("configuration key `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error(transparent)]
    Core(#[from] lsto_core::Error),
}

/// Outcome of a `run`.
#[derive(Debug)]
pub struct RunReport {
    pub summary: RunSummary,
    pub directory: PathBuf,
}

fn create_dir(dir: &Path) -> Result<(), AppError> {
    std::fs::create_dir_all(dir).map_err(|source| AppError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Runs an optimization and writes every result file into `cfg.output.directory`.
///
/// History rows are written as iterations complete; if the run fails, the rows
/// written so far stay on disk.
pub fn run(cfg: &RunConfig) -> Result<RunReport, AppError> {
    let dir = cfg.output.directory.clone();
    create_dir(&dir)?;
    let problem = Problem::new(cfg.problem_spec()?, cfg.fixture()?)?;
    let grid = problem.grid().clone();
    let mut history = HistoryWriter::create(&dir.join("history.csv"))?;
    let stride = cfg.output.stride;
    let mut failure: Option<AppError> = None;
    let mut observer = |it: usize, ev: &Evaluation, _: &Design| {
        if failure.is_some() {
            return;
        }
        let mut step = || -> Result<(), AppError> {
            history.append(it, &ev.breakdown)?;
            if it == 0 || (stride > 0 && it % stride == 0) {
                output::write_evaluation_vtk(&dir.join(format!("fields_{it:05}.vtk")), &grid, ev)?;
            }
            Ok(())
        };
        if let Err(e) = step() {
            failure = Some(e);
        }
    };
    let summary = run_optimization(&problem, Some(&mut observer as &mut dyn IterationObserver))?;
    if let Some(e) = failure {
        return Err(e);
    }
    let last = &summary.last;
    output::write_evaluation_vtk(&dir.join("fields_final.vtk"), &grid, last)?;
    output::write_interface(
        &dir.join("final_interface.csv"),
        &extract_interface(&grid, &last.fields.phi),
    )?;
    let b = &last.breakdown;
    let meta = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "termination": match summary.termination {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max_iterations",
        },
        "iterations": summary.iterations,
        "variables": problem.variable_count(),
        "final": {
            "z": b.z,
            "F": b.f,
            "psi": b.psi,
            "psi0": b.psi0,
            "mass_fraction": b.mass_fraction,
            "g_mass": b.g_mass,
            "g_stress": b.g_stress,
            "void_components": b.void_components,
            "interface_length": b.interface_length,
            "max_tau": b.max_tau,
        },
    });
    output::write_json(&dir.join("run.json"), &meta)?;
    Ok(RunReport {
        summary,
        directory: dir,
    })
}

/// Finite-difference check of the adjoint gradients with the `gradcheck` section.
pub fn gradcheck(cfg: &RunConfig) -> Result<GradientCheck, AppError> {
    let problem = Problem::new(cfg.problem_spec()?, cfg.fixture()?)?;
    let g = &cfg.gradcheck;
    Ok(gradient_check(&problem, &g.iterations, g.samples, g.step, g.seed)?)
}
