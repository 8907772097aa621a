//! Result files: `history.csv`, legacy VTK field dumps, `final_interface.csv`
//! and `run.json`.
//!
//! `history.csv` header (one row per evaluated iteration, floats in shortest
//! round-trip form, empty `g_stress` without a stress constraint):
//!
//! ```text
//! iter,z,F,P_Per,P_Reg,P_coupling,g_mass,g_stress,rho_sh,rho_th,void_components,interface_length,psi,mass_fraction,w1,w2,w3,w4,density_gradient_norm,max_tau
//! ```
//!
//! VTK files are `DATASET STRUCTURED_POINTS` with `(nx+1) x (ny+1) x 1` points
//! and scalar point data `phi`, `rho`, `rho_tilde`, `tau`, `u_norm`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lsto_core::field::InterfacePolyline;
use lsto_core::opt::{Evaluation, ObjectiveBreakdown};
use lsto_core::Grid;

use crate::AppError;

pub const HISTORY_HEADER: [&str; 20] = [
    "iter",
    "z",
    "F",
    "P_Per",
    "P_Reg",
    "P_coupling",
    "g_mass",
    "g_stress",
    "rho_sh",
    "rho_th",
    "void_components",
    "interface_length",
    "psi",
    "mass_fraction",
    "w1",
    "w2",
    "w3",
    "w4",
    "density_gradient_norm",
    "max_tau",
];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AppError + '_ {
    move |source| AppError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> AppError + '_ {
    move |e| AppError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

/// Appends one history row per iteration and flushes it, so the file is
/// complete up to the last evaluated iteration even if a later one fails.
pub struct HistoryWriter {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl HistoryWriter {
    pub fn create(path: &Path) -> Result<Self, AppError> {
        let mut writer = csv::Writer::from_path(path).map_err(csv_err(path))?;
        writer.write_record(HISTORY_HEADER).map_err(csv_err(path))?;
        writer.flush().map_err(io_err(path))?;
        Ok(HistoryWriter {
            path: path.to_path_buf(),
            writer,
        })
    }

    pub fn append(&mut self, iteration: usize, b: &ObjectiveBreakdown) -> Result<(), AppError> {
        let row = history_row(iteration, b);
        self.writer.write_record(&row).map_err(csv_err(&self.path))?;
        self.writer.flush().map_err(io_err(&self.path))
    }
}

pub fn history_row(iteration: usize, b: &ObjectiveBreakdown) -> Vec<String> {
    let f = |v: f64| v.to_string();
    vec![
        iteration.to_string(),
        f(b.z),
        f(b.f),
        f(b.p_per),
        f(b.p_reg),
        f(b.p_coupling),
        f(b.g_mass),
        b.g_stress.map(f).unwrap_or_default(),
        f(b.rho_sh),
        f(b.rho_th),
        b.void_components.to_string(),
        f(b.interface_length),
        f(b.psi),
        f(b.mass_fraction),
        f(b.weights[0]),
        f(b.weights[1]),
        f(b.weights[2]),
        f(b.weights[3]),
        f(b.density_gradient_norm),
        f(b.max_tau),
    ]
}

/// Writes scalar point fields as a legacy ASCII VTK structured-points file.
pub fn write_vtk(path: &Path, grid: &Grid, fields: &[(&str, &[f64])]) -> Result<(), AppError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let o = grid.origin();
    let h = grid.h();
    (||-> std::io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "lsto fields")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET STRUCTURED_POINTS")?;
        writeln!(w, "DIMENSIONS {} {} 1", grid.nx() + 1, grid.ny() + 1)?;
        writeln!(w, "ORIGIN {} {} 0", o[0], o[1])?;
        writeln!(w, "SPACING {h} {h} 1")?;
        writeln!(w, "POINT_DATA {}", grid.node_count())?;
        for (name, values) in fields {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values.iter() {
                writeln!(w, "{v}")?;
            }
        }
        w.flush()
    })()
    .map_err(io_err(path))
}

/// Field dump of one evaluation.
pub fn write_evaluation_vtk(path: &Path, grid: &Grid, ev: &Evaluation) -> Result<(), AppError> {
    let u = &ev.solution.u;
    let u_norm: Vec<f64> = (0..grid.node_count())
        .map(|i| u[2 * i].hypot(u[2 * i + 1]))
        .collect();
    write_vtk(
        path,
        grid,
        &[
            ("phi", ev.fields.phi.values()),
            ("rho", ev.fields.rho.values()),
            ("rho_tilde", ev.fields.rho_tilde.values()),
            ("tau", &ev.stress.tau),
            ("u_norm", &u_norm),
        ],
    )
}

/// Interface segments as `element,x0,y0,x1,y1`.
pub fn write_interface(path: &Path, poly: &InterfacePolyline) -> Result<(), AppError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["element", "x0", "y0", "x1", "y1"]).map_err(csv_err(path))?;
    for s in &poly.segments {
        w.write_record([
            s.element.to_string(),
            s.a[0].to_string(),
            s.a[1].to_string(),
            s.b[0].to_string(),
            s.b[1].to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), AppError> {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vtk_layout() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(3, 2, 0.5, [0.0, 0.0]).unwrap();
        let v: Vec<f64> = (0..12).map(f64::from).collect();
        let p = dir.path().join("f.vtk");
        write_vtk(&p, &g, &[("phi", &v)]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("DIMENSIONS 4 3 1"));
        assert!(text.contains("POINT_DATA 12"));
        assert_eq!(text.lines().count(), 8 + 2 + 12);
    }

    #[test]
    fn history_row_matches_header() {
        let b = ObjectiveBreakdown::default();
        assert_eq!(history_row(0, &b).len(), HISTORY_HEADER.len());
        assert_eq!(history_row(0, &b)[7], "");
    }
}
