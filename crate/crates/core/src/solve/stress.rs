//! Von Mises stress, its material-weighted nodal projection and the smoothed
//! stress-exceedance penalty with adjoint sensitivities.

use alloc::vec::Vec;

use super::{ElasticModel, ElasticSolution};
use crate::couple::MaterialModel;
use crate::error::Result;
use crate::field::{smoothed_delta, smoothed_heaviside, NodalField};
use crate::math;

/// Plane-stress von Mises value of `(s11, s22, s12)`.
#[inline]
pub fn von_mises(s: [f64; 3]) -> f64 {
    math::sqrt((s[0] * s[0] - s[0] * s[1] + s[1] * s[1] + 3.0 * s[2] * s[2]).max(0.0))
}

fn von_mises_gradient(s: [f64; 3]) -> [f64; 3] {
    let vm = von_mises(s);
    if vm == 0.0 {
        return [0.0; 3];
    }
    [
        (2.0 * s[0] - s[1]) / (2.0 * vm),
        (2.0 * s[1] - s[0]) / (2.0 * vm),
        3.0 * s[2] / vm,
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressField {
    /// Von Mises stress per element and Gauss point.
    pub gauss_von_mises: Vec<[f64; 4]>,
    /// Projected nodal stress `tau`.
    pub tau: Vec<f64>,
}

impl StressField {
    pub fn max_tau(&self) -> f64 {
        self.tau.iter().cloned().fold(0.0, f64::max)
    }
}

/// Unit-modulus stress `D0 B_g u_e`.
fn unit_stress(model: &ElasticModel, ue: &[f64; 8], g: usize) -> [f64; 3] {
    let db = &model.unit_stress_operator()[g];
    core::array::from_fn(|r| (0..8).map(|c| db[r][c] * ue[c]).sum())
}

struct Projection {
    gauss_vm: Vec<[f64; 4]>,
    heav: Vec<[f64; 4]>,
    denom: Vec<f64>,
    tau: Vec<f64>,
}

fn project(model: &ElasticModel, sol: &ElasticSolution, phi: &NodalField) -> Projection {
    let grid = model.grid();
    let gauss = model.gauss();
    let n = grid.node_count();
    let mut numer = alloc::vec![0.0; n];
    let mut denom = alloc::vec![0.0; n];
    let mut gauss_vm = Vec::with_capacity(grid.element_count());
    let mut heav = Vec::with_capacity(grid.element_count());
    for e in 0..grid.element_count() {
        let ue = model.element_displacements(&sol.u, e);
        let nodes = grid.element_nodes(e);
        let pv = phi.element_values(grid, e);
        let mut vm = [0.0; 4];
        let mut hv = [0.0; 4];
        for g in 0..4 {
            let s = unit_stress(model, &ue, g);
            vm[g] = sol.moduli[e][g] * von_mises(s);
            hv[g] = smoothed_heaviside(gauss.interp(g, &pv), grid.h());
            for k in 0..4 {
                let w = gauss.weight * hv[g] * gauss.n[g][k];
                numer[nodes[k]] += w * vm[g];
                denom[nodes[k]] += w;
            }
        }
        gauss_vm.push(vm);
        heav.push(hv);
    }
    let tau = numer
        .iter()
        .zip(&denom)
        .map(|(a, w)| if *w > 0.0 { a / w } else { 0.0 })
        .collect();
    Projection {
        gauss_vm,
        heav,
        denom,
        tau,
    }
}

/// Gauss-point von Mises stresses and their `H`-weighted lumped nodal projection.
pub fn von_mises_and_smooth(model: &ElasticModel, sol: &ElasticSolution, phi: &NodalField) -> StressField {
    let p = project(model, sol, phi);
    StressField {
        gauss_von_mises: p.gauss_vm,
        tau: p.tau,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressSettings {
    pub sigma_max: f64,
    pub xi_tau: f64,
}

/// `sqrt((tau - sigma_max)^2 + xi^2) - xi` above the limit, zero below.
#[inline]
pub fn stress_excess(tau: f64, s: &StressSettings) -> (f64, f64) {
    let d = tau - s.sigma_max;
    if d <= 0.0 {
        (0.0, 0.0)
    } else {
        let r = math::sqrt(d * d + s.xi_tau * s.xi_tau);
        (r - s.xi_tau, d / r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressPenalty {
    pub value: f64,
    pub field: StressField,
    pub d_phi: Vec<f64>,
    pub d_rho_tilde: Vec<f64>,
}

/// `P_tau = sum_{design elements} sum_g w H_g excess(tau_g)` with one adjoint solve for its gradient.
///
/// Only the stiffness depends on the design besides the indicator, so the
/// adjoint load is `dP/du` and the gradient follows the Gauss moduli.
pub fn stress_penalty(
    model: &ElasticModel,
    sol: &ElasticSolution,
    phi: &NodalField,
    rho_tilde: &NodalField,
    mat: &MaterialModel,
    settings: &StressSettings,
    design_elements: &[bool],
) -> Result<StressPenalty> {
    let grid = model.grid();
    let gauss = model.gauss();
    let h = grid.h();
    let n = grid.node_count();
    let proj = project(model, sol, phi);

    // Direct part and dP/dtau_k.
    let mut value = 0.0;
    let mut a = alloc::vec![0.0; n];
    let mut d_phi = alloc::vec![0.0; n];
    for e in 0..grid.element_count() {
        if !design_elements[e] {
            continue;
        }
        let nodes = grid.element_nodes(e);
        let tv: [f64; 4] = core::array::from_fn(|k| proj.tau[nodes[k]]);
        let pv = phi.element_values(grid, e);
        for g in 0..4 {
            let (ex, dex) = stress_excess(gauss.interp(g, &tv), settings);
            let hg = proj.heav[e][g];
            value += gauss.weight * hg * ex;
            let dh = smoothed_delta(gauss.interp(g, &pv), h);
            for k in 0..4 {
                let nk = gauss.n[g][k];
                a[nodes[k]] += gauss.weight * hg * dex * nk;
                d_phi[nodes[k]] += gauss.weight * ex * dh * nk;
            }
        }
    }
    let b: Vec<f64> = a
        .iter()
        .zip(&proj.denom)
        .map(|(a, w)| if *w > 0.0 { a / w } else { 0.0 })
        .collect();

    // Through the projection: indicator weights and Gauss stresses.
    let mut d_moduli = alloc::vec![[0.0; 4]; grid.element_count()];
    let mut adjoint_load = alloc::vec![0.0; 2 * n];
    for e in 0..grid.element_count() {
        let nodes = grid.element_nodes(e);
        if nodes.iter().all(|&k| b[k] == 0.0) {
            continue;
        }
        let pv = phi.element_values(grid, e);
        let ue = model.element_displacements(&sol.u, e);
        let dofs = model.element_dofs(e);
        for g in 0..4 {
            let vm = proj.gauss_vm[e][g];
            let hg = proj.heav[e][g];
            let mut d_h = 0.0;
            let mut c = 0.0;
            for k in 0..4 {
                let nk = gauss.n[g][k];
                d_h += b[nodes[k]] * gauss.weight * nk * (vm - proj.tau[nodes[k]]);
                c += b[nodes[k]] * gauss.weight * hg * nk;
            }
            let dh = smoothed_delta(gauss.interp(g, &pv), h);
            if d_h != 0.0 && dh != 0.0 {
                for k in 0..4 {
                    d_phi[nodes[k]] += d_h * dh * gauss.n[g][k];
                }
            }
            if c == 0.0 {
                continue;
            }
            // vm_g = E_g vm(s_g) with s_g the unit-modulus stress.
            let s = unit_stress(model, &ue, g);
            d_moduli[e][g] += c * von_mises(s);
            let dvm = von_mises_gradient(s);
            let db = &model.unit_stress_operator()[g];
            let scale = c * sol.moduli[e][g];
            for q in 0..8 {
                let v: f64 = (0..3).map(|r| dvm[r] * db[r][q]).sum();
                adjoint_load[dofs[q]] += scale * v;
            }
        }
    }
    let lambda = sol.solve_adjoint(&adjoint_load)?;
    let implicit = model.adjoint_moduli_term(&lambda, &sol.u, -1.0);
    for (d, i) in d_moduli.iter_mut().zip(&implicit) {
        for g in 0..4 {
            d[g] += i[g];
        }
    }
    let (chain_phi, d_rho_tilde) = model.moduli_chain(phi, rho_tilde, mat, &d_moduli);
    for (d, c) in d_phi.iter_mut().zip(&chain_phi) {
        *d += c;
    }
    Ok(StressPenalty {
        value,
        field: StressField {
            gauss_von_mises: proj.gauss_vm,
            tau: proj.tau,
        },
        d_phi,
        d_rho_tilde,
    })
}
