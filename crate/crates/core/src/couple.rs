//! Coupling between the level-set field and the density field.
//!
//! Two schemes are provided:
//!
//! * **single-field coupling** (SFC): one filtered variable `S` drives both
//!   fields, `phi = phi_rt (S - phi_sh)` and `rho = (S - phi_sh) / (1 - phi_sh)`
//!   on the material side (`phi >= 0`). On the void side the density is
//!   undefined; it is stored as zero and flagged inactive.
//! * **two-field coupling** (TFC): independent level-set and density variables,
//!   tied together by a penalty that pushes the level set down wherever the
//!   density has dropped below a threshold `rho_th`. The penalty is blind to the
//!   density: its gradient with respect to the density variables is zero.
//!
//! Both schemes hand over from a density problem to a pure level-set problem
//! through the density shift `rho~ = rho_sh + (1 - rho_sh) rho`, with `rho_sh`
//! driven to one by a staircase continuation schedule.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::NodalField;
use crate::grid::Grid;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfcConfig {
    pub phi_sh: f64,
    pub phi_rt: f64,
}

impl SfcConfig {
    /// `phi_sh = 0.5`, `phi_rt = 4h`.
    pub fn default_for(h: f64) -> Self {
        SfcConfig {
            phi_sh: 0.5,
            phi_rt: 4.0 * h,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi_sh > 0.0 && self.phi_sh < 1.0) {
            return Err(Error::param("phi_sh", format!("must lie in (0, 1), got {}", self.phi_sh)));
        }
        if !(self.phi_rt > 0.0) {
            return Err(Error::param("phi_rt", format!("must be positive, got {}", self.phi_rt)));
        }
        Ok(())
    }

    /// Level-set range reachable from `S` in `[0, 1]`.
    pub fn phi_bounds(&self) -> (f64, f64) {
        (-self.phi_rt * self.phi_sh, self.phi_rt * (1.0 - self.phi_sh))
    }

    #[inline]
    pub fn phi(&self, s_hat: f64) -> f64 {
        self.phi_rt * (s_hat - self.phi_sh)
    }

    /// Density at a node and whether the node is in the material phase.
    #[inline]
    pub fn rho(&self, s_hat: f64) -> (f64, bool) {
        if self.phi(s_hat) >= 0.0 {
            ((s_hat - self.phi_sh) / (1.0 - self.phi_sh), true)
        } else {
            (0.0, false)
        }
    }

    pub fn variable_for_density(&self, rho: f64) -> f64 {
        self.phi_sh + rho * (1.0 - self.phi_sh)
    }
}

/// Nodal level set from filtered single-field variables.
pub fn sfc_phi(s_hat: &NodalField, cfg: &SfcConfig) -> NodalField {
    let mut out = s_hat.clone();
    for v in out.values_mut() {
        *v = cfg.phi(*v);
    }
    out
}

/// Nodal density from filtered single-field variables, with the activity mask.
pub fn sfc_rho(s_hat: &NodalField, cfg: &SfcConfig) -> (NodalField, Vec<bool>) {
    let mut out = s_hat.clone();
    let mut active = Vec::with_capacity(out.len());
    for v in out.values_mut() {
        let (rho, a) = cfg.rho(*v);
        *v = rho;
        active.push(a);
    }
    (out, active)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfcConfig {
    /// Level-set threshold below which the penalty vanishes (negative).
    pub phi_th: f64,
    pub phi_low: f64,
    pub phi_up: f64,
    pub xi: f64,
}

impl TfcConfig {
    /// Bounds `-/+ 2.5h`, `phi_th = 0.25 phi_low`, `xi = 0.5`.
    pub fn default_for(h: f64) -> Self {
        TfcConfig {
            phi_th: -0.625 * h,
            phi_low: -2.5 * h,
            phi_up: 2.5 * h,
            xi: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi_low < 0.0 && self.phi_up > 0.0) {
            return Err(Error::param(
                "phi bounds",
                format!("need phi_low < 0 < phi_up, got [{}, {}]", self.phi_low, self.phi_up),
            ));
        }
        if !(self.phi_th < 0.0 && self.phi_th > self.phi_low) {
            return Err(Error::param(
                "phi_th",
                format!("must lie in (phi_low, 0), got {}", self.phi_th),
            ));
        }
        if !(self.xi > 0.0) {
            return Err(Error::param("xi", format!("must be positive, got {}", self.xi)));
        }
        Ok(())
    }
}

/// Smooth two-field coupling penalty at a point, in `[0, 1]`.
pub fn tfc_penalty_point(phi: f64, rho: f64, rho_th: f64, cfg: &TfcConfig) -> f64 {
    tfc_penalty_with_derivative(phi, rho, rho_th, cfg).0
}

/// Penalty value and its derivative with respect to `phi`.
pub fn tfc_penalty_with_derivative(phi: f64, rho: f64, rho_th: f64, cfg: &TfcConfig) -> (f64, f64) {
    if rho >= rho_th {
        return (0.0, 0.0);
    }
    let span = cfg.phi_up - cfg.phi_th;
    let raw = (phi - cfg.phi_th) / span;
    let xi = cfg.xi;
    let norm = math::sqrt(1.0 + xi * xi) - xi;
    if raw <= 0.0 {
        return (0.0, 0.0);
    }
    let root = math::sqrt(raw * raw + xi * xi);
    ((root - xi) / norm, raw / root / norm / span)
}

/// Non-smooth penalty the smooth form approximates.
pub fn tfc_penalty_raw(phi: f64, rho: f64, rho_th: f64, cfg: &TfcConfig) -> f64 {
    if rho >= rho_th {
        0.0
    } else {
        ((phi - cfg.phi_th) / (cfg.phi_up - cfg.phi_th)).max(0.0)
    }
}

/// Lumped nodal areas `int N_i dV` (exact for bilinear interpolants).
pub fn nodal_areas(grid: &Grid) -> Vec<f64> {
    let quarter = 0.25 * grid.h() * grid.h();
    (0..grid.node_count())
        .map(|n| quarter * grid.node_elements(n).count() as f64)
        .collect()
}

/// Normalized coupling penalty `int p dV / |boundary|` and its gradient with respect to nodal `phi`.
///
/// The pointwise penalty is evaluated at the nodes and integrated as a
/// bilinear interpolant, which 2x2 Gauss quadrature integrates exactly.
pub fn coupling_penalty_integral(
    grid: &Grid,
    phi: &NodalField,
    rho: &NodalField,
    rho_th: f64,
    cfg: &TfcConfig,
) -> Result<(f64, Vec<f64>)> {
    for f in [phi, rho] {
        if f.len() != grid.node_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.node_count(),
                got: f.len(),
            });
        }
    }
    let areas = nodal_areas(grid);
    let perimeter = grid.boundary_length();
    let mut value = 0.0;
    let mut grad = alloc::vec![0.0; grid.node_count()];
    for (i, area) in areas.iter().enumerate() {
        let (p, dp) = tfc_penalty_with_derivative(phi.values()[i], rho.values()[i], rho_th, cfg);
        value += area * p;
        grad[i] = area * dp / perimeter;
    }
    Ok((value / perimeter, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Decreasing,
    Increasing,
}

/// Staircase continuation `v0 -> v1` over the first `span` iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationSchedule {
    pub initial: f64,
    pub terminal: f64,
    pub exponent: f64,
    pub step: usize,
    pub span: usize,
    pub direction: Direction,
}

impl ContinuationSchedule {
    /// Density threshold: `v0 (1 - (k/D_c)^eta)`, then zero.
    pub fn decreasing(initial: f64, exponent: f64, step: usize, span: usize) -> Self {
        ContinuationSchedule {
            initial,
            terminal: 0.0,
            exponent,
            step,
            span,
            direction: Direction::Decreasing,
        }
    }

    /// Density shift and perimeter weight: `v0 + (v1 - v0)(k/D_c)^eta`, then `v1`.
    pub fn increasing(initial: f64, terminal: f64, exponent: f64, step: usize, span: usize) -> Self {
        ContinuationSchedule {
            initial,
            terminal,
            exponent,
            step,
            span,
            direction: Direction::Increasing,
        }
    }

    pub fn constant(value: f64) -> Self {
        ContinuationSchedule::increasing(value, value, 1.0, 1, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.step == 0 || self.step > self.span {
            return Err(Error::param(
                "continuation step",
                format!("need 0 < step <= span, got step {} span {}", self.step, self.span),
            ));
        }
        if !(self.exponent >= 1.0) {
            return Err(Error::param(
                "continuation exponent",
                format!("must be at least 1, got {}", self.exponent),
            ));
        }
        Ok(())
    }

    /// Value in force at design iteration `iteration`.
    pub fn value(&self, iteration: usize) -> f64 {
        if iteration > self.span {
            return match self.direction {
                Direction::Decreasing => 0.0,
                Direction::Increasing => self.terminal,
            };
        }
        let reached = (iteration / self.step) * self.step;
        let fraction = math::powf(reached as f64 / self.span as f64, self.exponent);
        match self.direction {
            Direction::Decreasing => self.initial * (1.0 - fraction),
            Direction::Increasing => self.initial + (self.terminal - self.initial) * fraction,
        }
    }
}

/// `rho~ = rho_sh + (1 - rho_sh) rho`.
#[inline]
pub fn shift(rho: f64, rho_sh: f64) -> f64 {
    rho_sh + (1.0 - rho_sh) * rho
}

pub fn shift_density(rho: &NodalField, rho_sh: f64) -> NodalField {
    let mut out = rho.clone();
    for v in out.values_mut() {
        *v = shift(*v, rho_sh);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialModel {
    pub e0: f64,
    pub e_void: f64,
    pub nu: f64,
    pub theta0: f64,
    pub beta: f64,
}

impl Default for MaterialModel {
    fn default() -> Self {
        MaterialModel {
            e0: 2.0e3,
            e_void: 1.0e-8,
            nu: 0.4,
            theta0: 1.0,
            beta: 2.0,
        }
    }
}

impl MaterialModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_void > 0.0 && self.e0 > self.e_void) {
            return Err(Error::param(
                "young's moduli",
                format!("need e0 > e_void > 0, got e0 {} e_void {}", self.e0, self.e_void),
            ));
        }
        if !(self.nu > 0.0 && self.nu < 0.5) {
            return Err(Error::param("nu", format!("must lie in (0, 0.5), got {}", self.nu)));
        }
        if !(self.beta >= 1.0) {
            return Err(Error::param("beta", format!("must be at least 1, got {}", self.beta)));
        }
        if !(self.theta0 > 0.0) {
            return Err(Error::param("theta0", format!("must be positive, got {}", self.theta0)));
        }
        Ok(())
    }

    /// SIMP modulus and material density of the solid phase.
    pub fn simp_properties(&self, rho_tilde: f64) -> (f64, f64) {
        (self.e0 * math::powf(rho_tilde, self.beta), self.theta0 * rho_tilde)
    }

    /// Solid-phase modulus at a Gauss point, floored at `e_void` so a material
    /// region with zero shifted density stays as stiff as void, and its derivative.
    pub fn solid_modulus(&self, rho_tilde: f64) -> (f64, f64) {
        let e = self.e0 * math::powf(rho_tilde, self.beta);
        if e < self.e_void {
            (self.e_void, 0.0)
        } else {
            (e, self.simp_modulus_derivative(rho_tilde))
        }
    }

    /// `d E / d rho~`.
    pub fn simp_modulus_derivative(&self, rho_tilde: f64) -> f64 {
        if rho_tilde <= 0.0 {
            if self.beta == 1.0 {
                self.e0
            } else {
                0.0
            }
        } else {
            self.e0 * self.beta * math::powf(rho_tilde, self.beta - 1.0)
        }
    }
}
