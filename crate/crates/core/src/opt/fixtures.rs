use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Result;
use crate::grid::{Grid, Side};
use crate::solve::BoundaryConditions;

/// Geometry, supports, loads and non-design regions of a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: String,
    pub grid: Grid,
    pub bc: BoundaryConditions,
    /// Nodes whose level set and density are prescribed solid.
    pub non_design_nodes: Vec<bool>,
    /// Elements with all four nodes in the design domain.
    pub design_elements: Vec<bool>,
}

/// Width of the prescribed solid bands, in elements.
const BAND: usize = 2;

fn finish(name: &str, grid: Grid, bc: BoundaryConditions, solid_elements: &[bool]) -> Fixture {
    let mut non_design_nodes = alloc::vec![false; grid.node_count()];
    for (e, &s) in solid_elements.iter().enumerate() {
        if s {
            for n in grid.element_nodes(e) {
                non_design_nodes[n] = true;
            }
        }
    }
    let design_elements = (0..grid.element_count())
        .map(|e| grid.element_nodes(e).iter().all(|&n| !non_design_nodes[n]))
        .collect();
    Fixture {
        name: name.into(),
        grid,
        bc,
        non_design_nodes,
        design_elements,
    }
}

/// Half of a block under uniform pressure: traction `(0, load)` on the top edge,
/// clamped along the first `BAND` elements of the bottom edge, symmetry (`u_x = 0`)
/// on the right edge. Solid bands cover the loaded top rows and the support.
pub fn example1_fixture(nx: usize, ny: usize, h: f64, load: f64) -> Result<Fixture> {
    let grid = Grid::new(nx, ny, h, [0.0, 0.0])?;
    let band = BAND.min(nx).min(ny);
    let support = band as f64 * h * (1.0 + 1e-9);
    let mut bc = BoundaryConditions::default();
    bc.fix_side(&grid, Side::Bottom, &[0, 1], |x| x[0] <= support);
    bc.fix_side(&grid, Side::Right, &[0], |_| true);
    bc.load_side(&grid, Side::Top, [0.0, load], |_| true);
    let solid: Vec<bool> = (0..grid.element_count())
        .map(|e| {
            let (i, j) = grid.element_lattice(e);
            j + band >= ny || (i < band && j < band)
        })
        .collect();
    Ok(finish("ex1", grid, bc, &solid))
}

/// Half of a simply supported beam: roller under the left end of the bottom edge,
/// symmetry on the right edge, traction `(0, load)` on the last `BAND` top edges
/// next to the symmetry plane. Solid blocks sit under the load and over the support.
pub fn beam2d_fixture(nx: usize, ny: usize, h: f64, load: f64) -> Result<Fixture> {
    let grid = Grid::new(nx, ny, h, [0.0, 0.0])?;
    let band = BAND.min(nx).min(ny);
    let reach = band as f64 * h * (1.0 + 1e-9);
    let width = grid.width();
    let mut bc = BoundaryConditions::default();
    bc.fix_side(&grid, Side::Bottom, &[1], |x| x[0] <= reach);
    bc.fix_side(&grid, Side::Right, &[0], |_| true);
    bc.load_side(&grid, Side::Top, [0.0, load], |x| x[0] >= width - reach);
    let solid: Vec<bool> = (0..grid.element_count())
        .map(|e| {
            let (i, j) = grid.element_lattice(e);
            (i + band >= nx && j + band >= ny) || (i < band && j < band)
        })
        .collect();
    Ok(finish("beam2d", grid, bc, &solid))
}
