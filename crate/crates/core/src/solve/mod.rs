//! Plane-stress bilinear elasticity on the structured grid.
//!
//! Material enters through Gauss-point moduli
//! `E_g = E_void + H_eps(phi_g) (E0 rho~_g^beta - E_void)` with `eps = h`, so the
//! stiffness is a smooth function of the nodal level set and densities.
//! Dirichlet conditions are homogeneous and eliminated strongly.

mod components;
mod stress;

pub use components::{connected_components, spring_nodes, void_components, Components};
pub use stress::{
    stress_penalty, von_mises, von_mises_and_smooth, StressField, StressPenalty, StressSettings,
};

use alloc::format;
use alloc::vec::Vec;

use crate::couple::MaterialModel;
use crate::error::{Error, Result};
use crate::field::{smoothed_delta, smoothed_heaviside, NodalField};
use crate::grid::{GaussTable, Grid, Side};
use crate::linalg::{self, CsrMatrix, SkylineCholesky, TripletBuilder};
use crate::math;

/// Relative residual required from every linear solve.
pub const SOLVER_TOLERANCE: f64 = 1e-9;

/// Nodal spring factor: `k = gamma_S E0 / h^2`.
pub const SPRING_FACTOR: f64 = 1e-6;

/// Homogeneous Dirichlet condition on one displacement component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedDof {
    pub node: usize,
    pub axis: usize,
}

/// Constant traction (force per length) on the boundary edge between two nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Traction {
    pub nodes: [usize; 2],
    pub value: [f64; 2],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryConditions {
    pub fixed: Vec<FixedDof>,
    pub tractions: Vec<Traction>,
}

impl BoundaryConditions {
    pub fn fix(&mut self, node: usize, axis: usize) {
        let dof = FixedDof { node, axis };
        if !self.fixed.contains(&dof) {
            self.fixed.push(dof);
        }
    }

    /// Fixes `axes` at every node of `side` accepted by `filter` (given node coordinates).
    pub fn fix_side(
        &mut self,
        grid: &Grid,
        side: Side,
        axes: &[usize],
        filter: impl Fn([f64; 2]) -> bool,
    ) {
        for n in grid.side_nodes(side) {
            if filter(grid.node_coords(n)) {
                for &a in axes {
                    self.fix(n, a);
                }
            }
        }
    }

    /// Applies `value` on every edge of `side` whose midpoint passes `filter`.
    pub fn load_side(
        &mut self,
        grid: &Grid,
        side: Side,
        value: [f64; 2],
        filter: impl Fn([f64; 2]) -> bool,
    ) {
        let nodes = grid.side_nodes(side);
        for w in nodes.windows(2) {
            let (a, b) = (grid.node_coords(w[0]), grid.node_coords(w[1]));
            if filter([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]) {
                self.tractions.push(Traction {
                    nodes: [w[0], w[1]],
                    value,
                });
            }
        }
    }

    pub fn fixed_node_mask(&self, grid: &Grid) -> Vec<bool> {
        let mut mask = alloc::vec![false; grid.node_count()];
        for d in &self.fixed {
            mask[d.node] = true;
        }
        mask
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        if self.fixed.is_empty() {
            return Err(Error::param("boundary conditions", "no fixed degrees of freedom"));
        }
        for d in &self.fixed {
            grid.check_node(d.node)?;
            if d.axis > 1 {
                return Err(Error::param("fixed dof", format!("axis must be 0 or 1, got {}", d.axis)));
            }
        }
        for t in &self.tractions {
            for &n in &t.nodes {
                grid.check_node(n)?;
            }
        }
        Ok(())
    }
}

/// Which linear solver handles the reduced system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    Direct,
    Iterative,
}

/// Design-independent data of an elasticity problem: grid, supports, loads and
/// unit element matrices.
#[derive(Debug, Clone)]
pub struct ElasticModel {
    grid: Grid,
    bc: BoundaryConditions,
    nu: f64,
    solver: SolverKind,
    gauss: GaussTable,
    /// Global DOF -> reduced index (band-friendly ordering).
    reduced: Vec<Option<usize>>,
    free: usize,
    /// Unit-modulus Gauss-point stiffness `w B^T D0 B`.
    kg: [[[f64; 8]; 8]; 4],
    /// Unit-modulus stress operator `D0 B` at each Gauss point.
    db: [[[f64; 8]; 3]; 4],
    load: Vec<f64>,
}

impl ElasticModel {
    pub fn new(grid: &Grid, bc: BoundaryConditions, nu: f64, solver: SolverKind) -> Result<Self> {
        bc.validate(grid)?;
        if !(nu > 0.0 && nu < 0.5) {
            return Err(Error::param("nu", format!("must lie in (0, 0.5), got {nu}")));
        }
        let n = grid.node_count();
        let mut is_fixed = alloc::vec![false; 2 * n];
        for d in &bc.fixed {
            is_fixed[2 * d.node + d.axis] = true;
        }
        let mut reduced = alloc::vec![None; 2 * n];
        let mut free = 0;
        for node in grid.band_order() {
            for a in 0..2 {
                if !is_fixed[2 * node + a] {
                    reduced[2 * node + a] = Some(free);
                    free += 1;
                }
            }
        }

        let gauss = grid.gauss();
        let d0 = plane_stress_unit(nu);
        let mut kg = [[[0.0; 8]; 8]; 4];
        let mut db = [[[0.0; 8]; 3]; 4];
        for g in 0..4 {
            let b = strain_operator(&gauss.grad[g]);
            for r in 0..3 {
                for c in 0..8 {
                    db[g][r][c] = (0..3).map(|k| d0[r][k] * b[k][c]).sum();
                }
            }
            for p in 0..8 {
                for q in 0..8 {
                    kg[g][p][q] = gauss.weight * (0..3).map(|r| b[r][p] * db[g][r][q]).sum::<f64>();
                }
            }
        }

        let mut load = alloc::vec![0.0; 2 * n];
        for t in &bc.tractions {
            let (a, b) = (grid.node_coords(t.nodes[0]), grid.node_coords(t.nodes[1]));
            let len = math::hypot(b[0] - a[0], b[1] - a[1]);
            for &node in &t.nodes {
                for ax in 0..2 {
                    load[2 * node + ax] += 0.5 * len * t.value[ax];
                }
            }
        }

        Ok(ElasticModel {
            grid: grid.clone(),
            bc,
            nu,
            solver,
            gauss,
            reduced,
            free,
            kg,
            db,
            load,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn boundary_conditions(&self) -> &BoundaryConditions {
        &self.bc
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Consistent nodal load vector over all `2 N_s` DOFs.
    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn free_dofs(&self) -> usize {
        self.free
    }

    pub fn unit_gauss_stiffness(&self) -> &[[[f64; 8]; 8]; 4] {
        &self.kg
    }

    pub(crate) fn unit_stress_operator(&self) -> &[[[f64; 8]; 3]; 4] {
        &self.db
    }

    pub(crate) fn gauss(&self) -> &GaussTable {
        &self.gauss
    }

    #[inline]
    pub fn element_dofs(&self, e: usize) -> [usize; 8] {
        let n = self.grid.element_nodes(e);
        [
            2 * n[0],
            2 * n[0] + 1,
            2 * n[1],
            2 * n[1] + 1,
            2 * n[2],
            2 * n[2] + 1,
            2 * n[3],
            2 * n[3] + 1,
        ]
    }

    pub fn element_displacements(&self, u: &[f64], e: usize) -> [f64; 8] {
        let d = self.element_dofs(e);
        core::array::from_fn(|k| u[d[k]])
    }

    /// Gauss-point moduli of every element.
    pub fn moduli(&self, phi: &NodalField, rho_tilde: &NodalField, mat: &MaterialModel) -> Vec<[f64; 4]> {
        let h = self.grid.h();
        (0..self.grid.element_count())
            .map(|e| {
                element_stiffness_scale(
                    &self.gauss,
                    &phi.element_values(&self.grid, e),
                    &rho_tilde.element_values(&self.grid, e),
                    mat,
                    h,
                )
            })
            .collect()
    }

    fn reduced_matrix(&self, moduli: &[[f64; 4]], springs: &[usize], spring_k: f64) -> CsrMatrix {
        let mut t = TripletBuilder::with_capacity(self.free, 64 * self.grid.element_count());
        for (e, eg) in moduli.iter().enumerate() {
            let dofs = self.element_dofs(e);
            let red: [Option<usize>; 8] = core::array::from_fn(|k| self.reduced[dofs[k]]);
            for p in 0..8 {
                let Some(rp) = red[p] else { continue };
                for q in 0..8 {
                    let Some(rq) = red[q] else { continue };
                    let v = eg[0] * self.kg[0][p][q]
                        + eg[1] * self.kg[1][p][q]
                        + eg[2] * self.kg[2][p][q]
                        + eg[3] * self.kg[3][p][q];
                    t.push(rp, rq, v);
                }
            }
        }
        for &n in springs {
            for a in 0..2 {
                if let Some(r) = self.reduced[2 * n + a] {
                    t.push(r, r, spring_k);
                }
            }
        }
        t.build()
    }

    fn restrict(&self, full: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.free];
        for (g, r) in self.reduced.iter().enumerate() {
            if let Some(r) = r {
                out[*r] = full[g];
            }
        }
        out
    }

    fn extend(&self, reduced: &[f64]) -> Vec<f64> {
        self.reduced
            .iter()
            .map(|r| r.map_or(0.0, |r| reduced[r]))
            .collect()
    }

    /// Assembles `K` with the given Gauss moduli and springs and solves `K u = f`.
    pub fn solve_with_moduli(
        &self,
        moduli: Vec<[f64; 4]>,
        springs: Vec<usize>,
        mat: &MaterialModel,
    ) -> Result<ElasticSolution> {
        let h = self.grid.h();
        let spring_k = SPRING_FACTOR * mat.e0 / (h * h);
        let k = self.reduced_matrix(&moduli, &springs, spring_k);
        let factor = match self.solver {
            SolverKind::Direct => Factorization::Direct(SkylineCholesky::factor(&k)?),
            SolverKind::Iterative => Factorization::Iterative,
        };
        let mut sol = ElasticSolution {
            u: Vec::new(),
            strain_energy: 0.0,
            residual_norm: 0.0,
            moduli,
            springs,
            matrix: k,
            factor,
            reduced: self.reduced.clone(),
        };
        let f = self.restrict(&self.load);
        let (ur, residual) = sol.solve_reduced(&f)?;
        sol.u = self.extend(&ur);
        sol.residual_norm = residual;
        sol.strain_energy = 0.5 * linalg::dot(&f, &ur);
        Ok(sol)
    }

    /// Full analysis: moduli, free-floating component springs and the solve.
    pub fn assemble_and_solve(
        &self,
        phi: &NodalField,
        rho_tilde: &NodalField,
        mat: &MaterialModel,
    ) -> Result<(ElasticSolution, Components)> {
        for f in [phi, rho_tilde] {
            if f.len() != self.grid.node_count() {
                return Err(Error::DimensionMismatch {
                    expected: self.grid.node_count(),
                    got: f.len(),
                });
            }
        }
        let comps = connected_components(&self.grid, phi, &self.bc.fixed_node_mask(&self.grid));
        let springs = spring_nodes(&self.grid, &comps);
        let sol = self.solve_with_moduli(self.moduli(phi, rho_tilde, mat), springs, mat)?;
        Ok((sol, comps))
    }

    /// Mass `sum w theta0 rho~_g H(phi_g)` and its nodal derivatives.
    pub fn mass(&self, phi: &NodalField, rho_tilde: &NodalField, mat: &MaterialModel) -> MassResponse {
        mass(&self.grid, phi, rho_tilde, mat)
    }

    /// Nodal derivatives of a response through the Gauss moduli, given `dR/dE_g`.
    pub fn moduli_chain(
        &self,
        phi: &NodalField,
        rho_tilde: &NodalField,
        mat: &MaterialModel,
        d_moduli: &[[f64; 4]],
    ) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.node_count();
        let h = self.grid.h();
        let mut dphi = alloc::vec![0.0; n];
        let mut drho = alloc::vec![0.0; n];
        for (e, de) in d_moduli.iter().enumerate() {
            let nodes = self.grid.element_nodes(e);
            let pv = phi.element_values(&self.grid, e);
            let rv = rho_tilde.element_values(&self.grid, e);
            for g in 0..4 {
                if de[g] == 0.0 {
                    continue;
                }
                let pg = self.gauss.interp(g, &pv);
                let rg = self.gauss.interp(g, &rv);
                let (solid, dsolid) = mat.solid_modulus(rg);
                let d_e_dphi = smoothed_delta(pg, h) * (solid - mat.e_void);
                let d_e_drho = smoothed_heaviside(pg, h) * dsolid;
                for k in 0..4 {
                    let nk = self.gauss.n[g][k];
                    dphi[nodes[k]] += de[g] * d_e_dphi * nk;
                    drho[nodes[k]] += de[g] * d_e_drho * nk;
                }
            }
        }
        (dphi, drho)
    }

    /// `dPsi/dE_g = -1/2 u_e^T k_g u_e`.
    pub fn compliance_moduli_sensitivity(&self, sol: &ElasticSolution) -> Vec<[f64; 4]> {
        self.adjoint_moduli_term(&sol.u, &sol.u, -0.5)
    }

    /// `scale * lambda_e^T k_g u_e` for every element and Gauss point.
    pub fn adjoint_moduli_term(&self, lambda: &[f64], u: &[f64], scale: f64) -> Vec<[f64; 4]> {
        (0..self.grid.element_count())
            .map(|e| {
                let ue = self.element_displacements(u, e);
                let le = self.element_displacements(lambda, e);
                core::array::from_fn(|g| {
                    let mut s = 0.0;
                    for p in 0..8 {
                        let row: f64 = (0..8).map(|q| self.kg[g][p][q] * ue[q]).sum();
                        s += le[p] * row;
                    }
                    scale * s
                })
            })
            .collect()
    }
}

/// Gauss-point moduli of one element from its corner level-set and shifted-density values.
pub fn element_stiffness_scale(
    gauss: &GaussTable,
    phi: &[f64; 4],
    rho_tilde: &[f64; 4],
    mat: &MaterialModel,
    eps: f64,
) -> [f64; 4] {
    core::array::from_fn(|g| {
        let h = smoothed_heaviside(gauss.interp(g, phi), eps);
        let (solid, _) = mat.solid_modulus(gauss.interp(g, rho_tilde));
        mat.e_void + h * (solid - mat.e_void)
    })
}

#[derive(Debug, Clone)]
enum Factorization {
    Direct(SkylineCholesky),
    Iterative,
}

#[derive(Debug, Clone)]
pub struct ElasticSolution {
    /// Displacements over all `2 N_s` DOFs, interleaved `(x, y)` per node.
    pub u: Vec<f64>,
    /// `1/2 f^T u`.
    pub strain_energy: f64,
    /// `|K u - f| / |f|` on the free DOFs.
    pub residual_norm: f64,
    pub moduli: Vec<[f64; 4]>,
    pub springs: Vec<usize>,
    matrix: CsrMatrix,
    factor: Factorization,
    reduced: Vec<Option<usize>>,
}

impl ElasticSolution {
    fn solve_reduced(&self, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
        let x = match &self.factor {
            Factorization::Direct(chol) => chol.solve(rhs)?,
            Factorization::Iterative => {
                linalg::pcg(&self.matrix, rhs, SOLVER_TOLERANCE * 1e-2, 20 * rhs.len().max(100))?.x
            }
        };
        let b_norm = linalg::norm(rhs);
        let residual = if b_norm == 0.0 {
            0.0
        } else {
            let ax = self.matrix.mul_vec(&x)?;
            let r: Vec<f64> = ax.iter().zip(rhs).map(|(a, b)| a - b).collect();
            linalg::norm(&r) / b_norm
        };
        if residual > SOLVER_TOLERANCE {
            return Err(Error::NoConvergence {
                iterations: 0,
                residual,
            });
        }
        Ok((x, residual))
    }

    /// Solves `K lambda = rhs` with the same matrix; fixed DOFs are ignored and return zero.
    pub fn solve_adjoint(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.reduced.len() {
            return Err(Error::DimensionMismatch {
                expected: self.reduced.len(),
                got: rhs.len(),
            });
        }
        let mut r = alloc::vec![0.0; self.matrix.size()];
        for (g, red) in self.reduced.iter().enumerate() {
            if let Some(k) = red {
                r[*k] = rhs[g];
            }
        }
        let (x, _) = self.solve_reduced(&r)?;
        Ok(self
            .reduced
            .iter()
            .map(|red| red.map_or(0.0, |k| x[k]))
            .collect())
    }

    /// `1/2 u^T K u` evaluated with the assembled matrix.
    pub fn energy_from_matrix(&self) -> f64 {
        let ur: Vec<f64> = {
            let mut v = alloc::vec![0.0; self.matrix.size()];
            for (g, red) in self.reduced.iter().enumerate() {
                if let Some(k) = red {
                    v[*k] = self.u[g];
                }
            }
            v
        };
        let ku = self.matrix.mul_vec(&ur).unwrap_or_default();
        0.5 * linalg::dot(&ur, &ku)
    }

    pub fn max_displacement(&self) -> f64 {
        self.u
            .chunks_exact(2)
            .map(|c| math::hypot(c[0], c[1]))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassResponse {
    pub mass: f64,
    pub d_phi: Vec<f64>,
    pub d_rho_tilde: Vec<f64>,
}

pub fn mass(grid: &Grid, phi: &NodalField, rho_tilde: &NodalField, mat: &MaterialModel) -> MassResponse {
    let gauss = grid.gauss();
    let h = grid.h();
    let n = grid.node_count();
    let mut out = MassResponse {
        mass: 0.0,
        d_phi: alloc::vec![0.0; n],
        d_rho_tilde: alloc::vec![0.0; n],
    };
    for e in 0..grid.element_count() {
        let nodes = grid.element_nodes(e);
        let pv = phi.element_values(grid, e);
        let rv = rho_tilde.element_values(grid, e);
        for g in 0..4 {
            let pg = gauss.interp(g, &pv);
            let rg = gauss.interp(g, &rv);
            let hv = smoothed_heaviside(pg, h);
            let w = gauss.weight * mat.theta0;
            out.mass += w * rg * hv;
            let dh = smoothed_delta(pg, h);
            for k in 0..4 {
                let nk = gauss.n[g][k];
                out.d_phi[nodes[k]] += w * rg * dh * nk;
                out.d_rho_tilde[nodes[k]] += w * hv * nk;
            }
        }
    }
    out
}

/// Unit-modulus plane-stress constitutive matrix.
pub fn plane_stress_unit(nu: f64) -> [[f64; 3]; 3] {
    let c = 1.0 / (1.0 - nu * nu);
    [
        [c, c * nu, 0.0],
        [c * nu, c, 0.0],
        [0.0, 0.0, c * 0.5 * (1.0 - nu)],
    ]
}

/// Strain-displacement matrix for `(eps_xx, eps_yy, gamma_xy)`.
fn strain_operator(grad: &[[f64; 2]; 4]) -> [[f64; 8]; 3] {
    let mut b = [[0.0; 8]; 3];
    for k in 0..4 {
        b[0][2 * k] = grad[k][0];
        b[1][2 * k + 1] = grad[k][1];
        b[2][2 * k] = grad[k][1];
        b[2][2 * k + 1] = grad[k][0];
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couple::MaterialModel;

    fn bar(nx: usize, ny: usize, h: f64, t: f64) -> (ElasticModel, MaterialModel) {
        let g = Grid::new(nx, ny, h, [0.0, 0.0]).unwrap();
        let mut bc = BoundaryConditions::default();
        bc.fix_side(&g, Side::Left, &[0], |_| true);
        bc.fix(0, 1);
        bc.load_side(&g, Side::Right, [t, 0.0], |_| true);
        let m = MaterialModel::default();
        (ElasticModel::new(&g, bc, m.nu, SolverKind::Direct).unwrap(), m)
    }

    fn full(g: &Grid) -> (NodalField, NodalField) {
        (NodalField::constant(g, 10.0 * g.h()), NodalField::constant(g, 1.0))
    }

    #[test]
    fn stiffness_scale_examples() {
        let gauss = GaussTable::new(1.0);
        let m = MaterialModel::default();
        let e = element_stiffness_scale(&gauss, &[2.0; 4], &[1.0; 4], &m, 1.0);
        assert!(e.iter().all(|&v| (v - m.e0).abs() < 1e-9));
        let e = element_stiffness_scale(&gauss, &[-2.0; 4], &[1.0; 4], &m, 1.0);
        assert!(e.iter().all(|&v| v == m.e_void));
        let e = element_stiffness_scale(&gauss, &[0.0; 4], &[1.0; 4], &m, 1.0);
        assert!(e.iter().all(|&v| (v - (m.e_void + 0.5 * (m.e0 - m.e_void))).abs() < 1e-12));
    }

    #[test]
    fn uniaxial_bar_matches_analytic_solution() {
        let t = 3.0;
        let (model, m) = bar(10, 4, 0.5, t);
        let g = model.grid().clone();
        let (phi, rho) = full(&g);
        let (sol, comps) = model.assemble_and_solve(&phi, &rho, &m).unwrap();
        assert_eq!(comps.count(), 1);
        assert!(sol.springs.is_empty());
        let exact = t * g.width() / m.e0;
        for n in g.side_nodes(Side::Right) {
            assert!(((sol.u[2 * n] - exact) / exact).abs() < 1e-8);
        }
        // Lateral contraction -nu * strain * y.
        let top = g.node_index(g.nx(), g.ny());
        let lateral = -m.nu * t / m.e0 * g.height();
        assert!(((sol.u[2 * top + 1] - lateral) / lateral).abs() < 1e-8);
        assert!(sol.residual_norm <= SOLVER_TOLERANCE);
    }

    #[test]
    fn compliance_identity_and_energy() {
        let (model, m) = bar(8, 6, 1.0, 1.0);
        let g = model.grid().clone();
        let phi = NodalField::from_fn(&g, |x| 3.0 - 0.6 * (x[0] - 4.0).abs() + 0.2 * x[1]);
        let rho = NodalField::from_fn(&g, |x| 0.3 + 0.05 * x[0]);
        let (sol, _) = model.assemble_and_solve(&phi, &rho, &m).unwrap();
        let fu = linalg::dot(model.load(), &sol.u);
        assert!(((fu - 2.0 * sol.strain_energy) / fu).abs() < 1e-8);
        assert!(((sol.energy_from_matrix() - sol.strain_energy) / fu).abs() < 1e-8);
        assert!(sol.strain_energy > 0.0);
    }

    #[test]
    fn zero_load_gives_zero_solution() {
        let (model, m) = bar(4, 3, 1.0, 0.0);
        let (phi, rho) = full(model.grid());
        let (sol, _) = model.assemble_and_solve(&phi, &rho, &m).unwrap();
        assert!(sol.u.iter().all(|&v| v == 0.0));
        assert_eq!(sol.strain_energy, 0.0);
    }

    #[test]
    fn bar_error_decreases_with_refinement() {
        // Bending-free cantilever tip under shear, compared with the finest run.
        let run = |k: usize| {
            let g = Grid::new(4 * k, k, 1.0 / k as f64, [0.0, 0.0]).unwrap();
            let mut bc = BoundaryConditions::default();
            bc.fix_side(&g, Side::Left, &[0, 1], |_| true);
            bc.load_side(&g, Side::Right, [0.0, -1.0], |_| true);
            let m = MaterialModel::default();
            let model = ElasticModel::new(&g, bc, m.nu, SolverKind::Direct).unwrap();
            let (phi, rho) = (NodalField::constant(&g, 10.0), NodalField::constant(&g, 1.0));
            model.assemble_and_solve(&phi, &rho, &m).unwrap().0.strain_energy
        };
        let reference = run(16);
        let e1 = (run(2) - reference).abs();
        let e2 = (run(4) - reference).abs();
        assert!(e2 < e1);
    }

    #[test]
    fn iterative_solver_agrees_with_direct() {
        let (model, m) = bar(12, 5, 0.5, 2.0);
        let g = model.grid().clone();
        let phi = NodalField::from_fn(&g, |x| 1.0 - 0.3 * x[0]);
        let rho = NodalField::constant(&g, 0.6);
        let (direct, _) = model.assemble_and_solve(&phi, &rho, &m).unwrap();
        let iter_model =
            ElasticModel::new(&g, model.boundary_conditions().clone(), m.nu, SolverKind::Iterative).unwrap();
        let (cg, _) = iter_model.assemble_and_solve(&phi, &rho, &m).unwrap();
        assert!(((cg.strain_energy - direct.strain_energy) / direct.strain_energy).abs() < 1e-8);
    }

    #[test]
    fn springs_remove_rigid_modes_only() {
        // Free-free patch held by springs alone: rigid translation stores only spring energy.
        let g = Grid::new(3, 3, 1.0, [0.0, 0.0]).unwrap();
        let mut bc = BoundaryConditions::default();
        bc.fix(0, 0);
        let m = MaterialModel::default();
        let model = ElasticModel::new(&g, bc, m.nu, SolverKind::Direct).unwrap();
        let moduli = alloc::vec![[m.e0; 4]; g.element_count()];
        let translation: Vec<f64> = (0..2 * g.node_count()).map(|k| if k % 2 == 1 { 1.0 } else { 0.0 }).collect();
        let zero = model.adjoint_moduli_term(&translation, &translation, 0.5);
        assert!(zero.iter().flatten().all(|v| v.abs() < 1e-9));
        let all: Vec<usize> = (0..g.node_count()).collect();
        assert!(model.solve_with_moduli(moduli, all, &m).is_ok());
    }

    #[test]
    fn missing_supports_rejected() {
        let g = Grid::new(2, 2, 1.0, [0.0, 0.0]).unwrap();
        assert!(ElasticModel::new(&g, BoundaryConditions::default(), 0.3, SolverKind::Direct).is_err());
        let mut bc = BoundaryConditions::default();
        bc.fix(99, 0);
        assert!(ElasticModel::new(&g, bc, 0.3, SolverKind::Direct).is_err());
    }

    #[test]
    fn mass_examples() {
        let g = Grid::new(20, 10, 0.5, [0.0, 0.0]).unwrap();
        let m = MaterialModel::default();
        let one = NodalField::constant(&g, 1.0);
        assert!((mass(&g, &NodalField::constant(&g, 1.0), &one, &m).mass - g.area()).abs() < 1e-10);
        assert_eq!(mass(&g, &NodalField::constant(&g, -1.0), &one, &m).mass, 0.0);
        let half = NodalField::from_fn(&g, |x| x[0] - 5.0);
        let got = mass(&g, &half, &one, &m).mass;
        assert!(((got - 0.5 * g.area()) / (0.5 * g.area())).abs() < 0.02);
    }

    #[test]
    fn mass_gradient_matches_finite_differences() {
        let g = Grid::new(5, 4, 0.5, [0.0, 0.0]).unwrap();
        let m = MaterialModel::default();
        let phi = NodalField::from_fn(&g, |x| 0.4 * (x[0] - 1.1) - 0.1 * x[1]);
        let rho = NodalField::from_fn(&g, |x| 0.3 + 0.1 * x[1]);
        let r = mass(&g, &phi, &rho, &m);
        for i in 0..g.node_count() {
            let step = 1e-6;
            let mut p = phi.clone();
            p.values_mut()[i] += step;
            let up = mass(&g, &p, &rho, &m).mass;
            p.values_mut()[i] -= 2.0 * step;
            let down = mass(&g, &p, &rho, &m).mass;
            assert!(((up - down) / (2.0 * step) - r.d_phi[i]).abs() < 1e-8);
            let mut q = rho.clone();
            q.values_mut()[i] += step;
            let up = mass(&g, &phi, &q, &m).mass;
            q.values_mut()[i] -= 2.0 * step;
            let down = mass(&g, &phi, &q, &m).mass;
            assert!(((up - down) / (2.0 * step) - r.d_rho_tilde[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn compliance_gradient_matches_finite_differences() {
        let (model, m) = bar(6, 4, 0.5, 1.0);
        let g = model.grid().clone();
        let phi = NodalField::from_fn(&g, |x| 0.8 - 0.35 * (x[0] - 1.5).abs() + 0.1 * x[1]);
        let rho = NodalField::from_fn(&g, |x| 0.4 + 0.1 * x[0]);
        let energy = |p: &NodalField, r: &NodalField| {
            let moduli = model.moduli(p, r, &m);
            model.solve_with_moduli(moduli, Vec::new(), &m).unwrap().strain_energy
        };
        let sol = model.solve_with_moduli(model.moduli(&phi, &rho, &m), Vec::new(), &m).unwrap();
        let de = model.compliance_moduli_sensitivity(&sol);
        let (dphi, drho) = model.moduli_chain(&phi, &rho, &m, &de);
        for i in (0..g.node_count()).step_by(3) {
            let step = 1e-6;
            let mut p = phi.clone();
            p.values_mut()[i] += step;
            let up = energy(&p, &rho);
            p.values_mut()[i] -= 2.0 * step;
            let fd = (up - energy(&p, &rho)) / (2.0 * step);
            assert!((fd - dphi[i]).abs() <= 1e-5 * fd.abs().max(1e-6), "phi {i}: {fd} vs {}", dphi[i]);
            let mut r = rho.clone();
            r.values_mut()[i] += step;
            let up = energy(&phi, &r);
            r.values_mut()[i] -= 2.0 * step;
            let fd = (up - energy(&phi, &r)) / (2.0 * step);
            assert!((fd - drho[i]).abs() <= 1e-5 * fd.abs().max(1e-6), "rho {i}: {fd} vs {}", drho[i]);
        }
    }
}
