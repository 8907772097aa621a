use alloc::vec::Vec;

use super::perimeter::perimeter_penalty;
use super::{Design, Mode, Problem};
use crate::couple::{coupling_penalty_integral, sfc_phi, sfc_rho, shift_density};
use crate::error::{Error, Result};
use crate::field::NodalField;
use crate::regularize::reg_penalty;
use crate::solve::{
    connected_components, stress_penalty, void_components, von_mises_and_smooth, ElasticSolution,
    StressField, StressSettings,
};

/// Quantities held fixed during a finite-difference check: the regularization
/// target and the spring set of floating components.
#[derive(Debug, Clone, PartialEq)]
pub struct Frozen {
    pub target: NodalField,
    pub springs: Vec<usize>,
}

/// Physical fields of one design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignFields {
    pub phi: NodalField,
    /// Unshifted density.
    pub rho: NodalField,
    pub rho_tilde: NodalField,
    /// SFC nodes with `phi >= 0` (density depends on the variable). All true for TFC.
    pub active: Vec<bool>,
}

/// Scalar report of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveBreakdown {
    pub z: f64,
    pub f: f64,
    pub psi: f64,
    pub psi0: f64,
    pub mass: f64,
    pub mass_fraction: f64,
    /// Interface length over the boundary length.
    pub p_per: f64,
    /// Zero-contour length.
    pub interface_length: f64,
    pub p_reg: f64,
    pub p_coupling: f64,
    pub g_mass: f64,
    pub g_stress: Option<f64>,
    pub weights: [f64; 4],
    pub rho_sh: f64,
    pub rho_th: f64,
    pub void_components: usize,
    pub solid_components: usize,
    pub floating_components: usize,
    pub max_tau: f64,
    /// Max-norm of `dz/drho` (vanishes once the shift reaches 1).
    pub density_gradient_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub breakdown: ObjectiveBreakdown,
    pub fields: DesignFields,
    /// `dz/dx` over the flat variables.
    pub dz: Vec<f64>,
    /// Constraint values `g_1` (mass) and optionally `g_3` (stress).
    pub g: Vec<f64>,
    pub dg: Vec<Vec<f64>>,
    pub solution: ElasticSolution,
    pub stress: StressField,
    pub target: NodalField,
}

/// Accumulates derivatives with respect to `phi`, `rho` and `rho~`.
struct NodalGradient {
    phi: Vec<f64>,
    rho: Vec<f64>,
    rho_tilde: Vec<f64>,
}

impl NodalGradient {
    fn zeros(n: usize) -> Self {
        NodalGradient {
            phi: alloc::vec![0.0; n],
            rho: alloc::vec![0.0; n],
            rho_tilde: alloc::vec![0.0; n],
        }
    }

    fn add(dst: &mut [f64], src: &[f64], scale: f64) {
        for (d, s) in dst.iter_mut().zip(src) {
            *d += scale * s;
        }
    }
}

impl Problem {
    /// Maps a design to its physical fields for continuation step `iteration`.
    pub fn design_fields(&self, design: &Design, iteration: usize) -> Result<DesignFields> {
        let grid = self.grid();
        let n = grid.node_count();
        let x = design.flat();
        if x.len() != self.variable_count() {
            return Err(Error::DimensionMismatch {
                expected: self.variable_count(),
                got: x.len(),
            });
        }
        let (hi, fixed) = (self.spec.phi_bounds().1, &self.fixture.non_design_nodes);
        let (mut phi, mut rho, active) = match self.spec.mode {
            Mode::Sfc => {
                let s_hat = self.filter.apply_field(grid, &x)?;
                let (rho, active) = sfc_rho(&s_hat, &self.spec.sfc);
                (sfc_phi(&s_hat, &self.spec.sfc), rho, active)
            }
            Mode::Tfc => (
                self.filter.apply_field(grid, &x[..n])?,
                self.filter.apply_field(grid, &x[n..])?,
                alloc::vec![true; n],
            ),
        };
        for i in (0..n).filter(|&i| fixed[i]) {
            phi.values_mut()[i] = hi;
            rho.values_mut()[i] = 1.0;
        }
        let rho_tilde = shift_density(&rho, self.spec.shift.value(iteration));
        Ok(DesignFields {
            phi,
            rho,
            rho_tilde,
            active,
        })
    }

    /// Regularization target for a level set.
    pub fn regularization_target(&self, phi: &NodalField) -> Result<NodalField> {
        self.heat.target_field(phi, &self.spec.reg)
    }

    /// Evaluates objective, constraints and their gradients.
    ///
    /// `psi0` normalizes the compliance; `None` uses the current compliance.
    pub fn evaluate(
        &self,
        design: &Design,
        iteration: usize,
        psi0: Option<f64>,
        frozen: Option<&Frozen>,
    ) -> Result<Evaluation> {
        let spec = &self.spec;
        let grid = self.grid();
        let n = grid.node_count();
        let mat = &spec.material;
        let area = grid.area();
        let fields = self.design_fields(design, iteration)?;
        let (phi, rho, rho_tilde) = (&fields.phi, &fields.rho, &fields.rho_tilde);
        let rho_sh = spec.shift.value(iteration);
        let rho_th = spec.threshold.value(iteration);
        let weights = spec.weights.at(iteration, spec.mode);

        let comps = connected_components(grid, phi, &self.fixture.bc.fixed_node_mask(grid));
        let sol = match frozen {
            Some(fz) => self.model.solve_with_moduli(
                self.model.moduli(phi, rho_tilde, mat),
                fz.springs.clone(),
                mat,
            )?,
            None => self.model.assemble_and_solve(phi, rho_tilde, mat)?.0,
        };
        let psi = sol.strain_energy;
        let psi0 = psi0.unwrap_or(psi);
        if !(psi0 > 0.0) {
            return Err(Error::param("psi0", "reference compliance must be positive"));
        }
        let mass = self.model.mass(phi, rho_tilde, mat);
        let q = spec.quantity;
        let f = q.compliance * psi / psi0 + q.mass * mass.mass / area;

        let mut gz = NodalGradient::zeros(n);
        // F through the stiffness and the mass.
        let d_moduli: Vec<[f64; 4]> = self
            .model
            .compliance_moduli_sensitivity(&sol)
            .into_iter()
            .map(|d| d.map(|v| v * weights[0] * q.compliance / psi0))
            .collect();
        let (dp, dr) = self.model.moduli_chain(phi, rho_tilde, mat, &d_moduli);
        NodalGradient::add(&mut gz.phi, &dp, 1.0);
        NodalGradient::add(&mut gz.rho_tilde, &dr, 1.0);
        NodalGradient::add(&mut gz.phi, &mass.d_phi, weights[0] * q.mass / area);
        NodalGradient::add(&mut gz.rho_tilde, &mass.d_rho_tilde, weights[0] * q.mass / area);

        let per = perimeter_penalty(grid, phi);
        NodalGradient::add(&mut gz.phi, &per.gradient, weights[1]);

        let target = match frozen {
            Some(fz) => fz.target.clone(),
            None => self.regularization_target(phi)?,
        };
        let (p_reg, d_reg) = reg_penalty(grid, phi, &target, &spec.reg)?;
        NodalGradient::add(&mut gz.phi, &d_reg, weights[2]);

        let p_coupling = match spec.mode {
            Mode::Sfc => 0.0,
            Mode::Tfc => {
                let (v, d) = coupling_penalty_integral(grid, phi, rho, rho_th, &spec.tfc)?;
                NodalGradient::add(&mut gz.phi, &d, weights[3]);
                v
            }
        };
        let z = weights[0] * f + weights[1] * per.value + weights[2] * p_reg + weights[3] * p_coupling;

        let mut g = alloc::vec![mass.mass / area - spec.gamma_m];
        let mut gm = NodalGradient::zeros(n);
        NodalGradient::add(&mut gm.phi, &mass.d_phi, 1.0 / area);
        NodalGradient::add(&mut gm.rho_tilde, &mass.d_rho_tilde, 1.0 / area);
        let mut constraint_grads = alloc::vec![gm];

        let (stress, g_stress) = match &spec.stress {
            Some(sc) => {
                let settings = StressSettings {
                    sigma_max: sc.sigma_max,
                    xi_tau: sc.xi_tau,
                };
                let p = stress_penalty(
                    &self.model,
                    &sol,
                    phi,
                    rho_tilde,
                    mat,
                    &settings,
                    &self.fixture.design_elements,
                )?;
                let mut gs = NodalGradient::zeros(n);
                NodalGradient::add(&mut gs.phi, &p.d_phi, sc.weight);
                NodalGradient::add(&mut gs.rho_tilde, &p.d_rho_tilde, sc.weight);
                constraint_grads.push(gs);
                g.push(sc.weight * p.value);
                (p.field, Some(sc.weight * p.value))
            }
            None => (von_mises_and_smooth(&self.model, &sol, phi), None),
        };

        let (dz, density_gradient_norm) = self.pull_back(&fields, gz, rho_sh)?;
        let dg = constraint_grads
            .into_iter()
            .map(|c| self.pull_back(&fields, c, rho_sh).map(|r| r.0))
            .collect::<Result<Vec<_>>>()?;

        let breakdown = ObjectiveBreakdown {
            z,
            f,
            psi,
            psi0,
            mass: mass.mass,
            mass_fraction: mass.mass / area,
            p_per: per.value,
            interface_length: per.interface_length,
            p_reg,
            p_coupling,
            g_mass: g[0],
            g_stress,
            weights,
            rho_sh,
            rho_th,
            void_components: void_components(grid, phi),
            solid_components: comps.count(),
            floating_components: comps.floating_count(),
            max_tau: stress.max_tau(),
            density_gradient_norm,
        };
        Ok(Evaluation {
            breakdown,
            fields,
            dz,
            g,
            dg,
            solution: sol,
            stress,
            target,
        })
    }

    /// Chains nodal derivatives back to the design variables. Also returns the
    /// max-norm of the derivative with respect to the unshifted density.
    fn pull_back(&self, fields: &DesignFields, mut gr: NodalGradient, rho_sh: f64) -> Result<(Vec<f64>, f64)> {
        let n = self.grid().node_count();
        let fixed = &self.fixture.non_design_nodes;
        for i in 0..n {
            gr.rho[i] += (1.0 - rho_sh) * gr.rho_tilde[i];
            if fixed[i] {
                gr.phi[i] = 0.0;
                gr.rho[i] = 0.0;
            }
        }
        let norm = gr.rho.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut out = match self.spec.mode {
            Mode::Sfc => {
                let cfg = &self.spec.sfc;
                let d_hat: Vec<f64> = (0..n)
                    .map(|i| {
                        let mut d = cfg.phi_rt * gr.phi[i];
                        if fields.active[i] {
                            d += gr.rho[i] / (1.0 - cfg.phi_sh);
                        }
                        d
                    })
                    .collect();
                self.filter.apply_transpose(&d_hat)?
            }
            Mode::Tfc => {
                let mut v = self.filter.apply_transpose(&gr.phi)?;
                v.extend(self.filter.apply_transpose(&gr.rho)?);
                v
            }
        };
        for (k, d) in out.iter_mut().enumerate() {
            if self.is_frozen_variable(k) {
                *d = 0.0;
            }
        }
        Ok((out, norm))
    }
}
