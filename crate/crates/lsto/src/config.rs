//! Run configuration: a TOML document layered over a preset.
//!
//! Every key is optional in the file. Missing keys come from the preset named
//! by the top-level `preset` key (default `ex1-<mode>`); values that scale
//! with the element size follow the file's `grid.h`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lsto_core::couple::{ContinuationSchedule, MaterialModel, SfcConfig, TfcConfig};
use lsto_core::opt::{
    beam2d_fixture, example1_fixture, Fixture, MmaSettings, Mode, ProblemSpec, QuantityOfInterest,
    StressConstraint, Weights,
};
use lsto_core::regularize::RegConfig;
use lsto_core::solve::SolverKind;

use crate::presets::{self, PresetName};
use crate::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKey {
    Sfc,
    Tfc,
}

impl From<ModeKey> for Mode {
    fn from(m: ModeKey) -> Self {
        match m {
            ModeKey::Sfc => Mode::Sfc,
            ModeKey::Tfc => Mode::Tfc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixtureKey {
    Ex1,
    Beam2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKey {
    Direct,
    Iterative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSection {
    /// Vertical traction on the loaded edge.
    pub traction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub e0: f64,
    pub e_void: f64,
    pub nu: f64,
    pub theta0: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub rho0: f64,
    /// Initial level set of the TFC variables.
    pub phi0: f64,
    pub filter_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulesSection {
    pub d_st: usize,
    pub d_c: usize,
    pub d_max: usize,
    pub rho_sh0: f64,
    pub rho_th0: f64,
    pub eta_sh: f64,
    pub eta_th: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub phi_sh: f64,
    pub phi_rt: f64,
    pub phi_th: f64,
    pub phi_low: f64,
    pub phi_up: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub w1: f64,
    /// Perimeter weight at the start of continuation.
    pub w2: f64,
    /// Perimeter weight at the end of continuation.
    pub w2_final: f64,
    pub eta_w2: f64,
    /// Factor on the perimeter weight once continuation has ended.
    pub w2_after_factor: f64,
    pub w3: f64,
    pub w4: f64,
    pub w_phi1: f64,
    pub w_phi2: f64,
    pub w_grad1: f64,
    pub w_grad2: f64,
    pub gamma_reg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    pub a_psi: f64,
    pub a_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsSection {
    pub gamma_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_max: Option<f64>,
    pub xi_tau: f64,
    /// Scale of the stress constraint; defaults to `1 / (sigma_max * area)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stress_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub kind: SolverKey,
    pub tolerance: f64,
    pub constraint_slack: f64,
    pub move_limit: f64,
    /// Heat-method time step over `h^2`.
    pub t_heat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Field dumps every `stride` iterations; 0 keeps only the first and last.
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckSection {
    pub iterations: Vec<usize>,
    pub samples: usize,
    pub step: f64,
    pub seed: u64,
    pub tolerance: f64,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: String,
    pub scale: usize,
    pub fixture: FixtureKey,
    pub mode: ModeKey,
    pub grid: GridSection,
    pub load: LoadSection,
    pub material: MaterialSection,
    pub design: DesignSection,
    pub schedules: SchedulesSection,
    pub coupling: CouplingSection,
    pub weights: WeightsSection,
    pub objective: ObjectiveSection,
    pub constraints: ConstraintsSection,
    pub solver: SolverSection,
    pub output: OutputSection,
    pub gradcheck: GradcheckSection,
}

/// Overlays `top` onto `base`, recursing into tables.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn lookup<'a>(t: &'a toml::Table, path: &[&str]) -> Option<&'a toml::Value> {
    let (last, parents) = path.split_last()?;
    let mut cur = t;
    for p in parents {
        cur = cur.get(*p)?.as_table()?;
    }
    cur.get(*last)
}

fn key_error(key: &str, reason: impl Into<String>) -> AppError {
    AppError::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

impl RunConfig {
    /// Parses a configuration document and applies preset defaults.
    pub fn parse(text: &str) -> Result<Self, AppError> {
        let doc: toml::Table = toml::from_str(text).map_err(|e| AppError::Parse(e.to_string()))?;
        let preset = match lookup(&doc, &["preset"]) {
            Some(v) => {
                let name = v.as_str().ok_or_else(|| key_error("preset", "must be a string"))?;
                name.parse::<PresetName>().map_err(|e| key_error("preset", e))?
            }
            None => match lookup(&doc, &["mode"]).and_then(toml::Value::as_str) {
                Some("sfc") => PresetName::Ex1Sfc,
                _ => PresetName::Ex1Tfc,
            },
        };
        let scale = match lookup(&doc, &["scale"]) {
            Some(v) => v
                .as_integer()
                .filter(|s| *s >= 1)
                .ok_or_else(|| key_error("scale", "must be a positive integer"))? as usize,
            None => 1,
        };
        let mut base = presets::preset(preset, scale);
        // Element-size dependent defaults follow an overridden grid.
        if let Some(h) = lookup(&doc, &["grid", "h"]).and_then(|v| v.as_float().or(v.as_integer().map(|i| i as f64))) {
            base.rescale_h(h);
        }
        if let Some(m) = lookup(&doc, &["mode"]).and_then(toml::Value::as_str) {
            base.mode = match m {
                "sfc" => ModeKey::Sfc,
                "tfc" => ModeKey::Tfc,
                other => return Err(key_error("mode", format!("expected `sfc` or `tfc`, got `{other}`"))),
            };
            base.weights.w4 = presets::default_w4(preset, base.mode);
        }
        let mut table = toml::Table::try_from(&base).map_err(|e| AppError::Parse(e.to_string()))?;
        merge(&mut table, doc);
        let mut cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| AppError::Parse(e.to_string()))?;
        cfg.normalize();
        cfg.problem_spec()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|source| AppError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Resets every element-size dependent value for element size `h`.
    pub(crate) fn rescale_h(&mut self, h: f64) {
        self.grid.h = h;
        presets::apply_element_size(self);
    }

    /// Applies the threshold rule: a threshold at or above the initial density is clamped.
    fn normalize(&mut self) {
        let s = &mut self.schedules;
        if self.mode == ModeKey::Tfc && s.rho_th0 >= self.design.rho0 {
            let clamped = 0.99 * self.design.rho0;
            log::warn!(
                "initial density threshold {} is not below the initial density {}; using {clamped}",
                s.rho_th0,
                self.design.rho0
            );
            s.rho_th0 = clamped;
        }
    }

    pub fn fixture(&self) -> Result<Fixture, AppError> {
        let g = &self.grid;
        let f = match self.fixture {
            FixtureKey::Ex1 => example1_fixture(g.nx, g.ny, g.h, self.load.traction),
            FixtureKey::Beam2d => beam2d_fixture(g.nx, g.ny, g.h, self.load.traction),
        };
        f.map_err(AppError::Core)
    }

    /// Builds and validates the optimization problem description.
    pub fn problem_spec(&self) -> Result<ProblemSpec, AppError> {
        let g = &self.grid;
        if g.nx == 0 || g.ny == 0 || !(g.h > 0.0) {
            return Err(key_error("grid", "nx, ny must be positive and h > 0"));
        }
        let s = &self.schedules;
        if s.d_st == 0 {
            return Err(key_error("schedules.d_st", "must be positive"));
        }
        let c = &self.coupling;
        let mode: Mode = self.mode.into();
        let sfc = SfcConfig {
            phi_sh: c.phi_sh,
            phi_rt: c.phi_rt,
        };
        let tfc = TfcConfig {
            phi_th: c.phi_th,
            phi_low: c.phi_low,
            phi_up: c.phi_up,
            xi: c.xi,
        };
        let (lo, hi) = match mode {
            Mode::Sfc => sfc.phi_bounds(),
            Mode::Tfc => (tfc.phi_low, tfc.phi_up),
        };
        let w = &self.weights;
        let mut reg = RegConfig::with_bounds(lo, hi);
        reg.w_phi = [w.w_phi1, w.w_phi2];
        reg.w_grad = [w.w_grad1, w.w_grad2];
        reg.gamma = w.gamma_reg;
        let area = g.nx as f64 * g.ny as f64 * g.h * g.h;
        let k = &self.constraints;
        let stress = k.sigma_max.map(|sigma_max| StressConstraint {
            sigma_max,
            xi_tau: k.xi_tau,
            weight: k.stress_weight.unwrap_or(1.0 / (sigma_max * area)),
        });
        let m = &self.material;
        let mma = MmaSettings {
            move_limit: self.solver.move_limit,
            ..MmaSettings::default()
        };
        let spec = ProblemSpec {
            mode,
            material: MaterialModel {
                e0: m.e0,
                e_void: m.e_void,
                nu: m.nu,
                theta0: m.theta0,
                beta: m.beta,
            },
            sfc,
            tfc,
            reg,
            filter_radius: self.design.filter_radius,
            phi0: self.design.phi0,
            rho0: self.design.rho0,
            shift: ContinuationSchedule::increasing(s.rho_sh0, 1.0, s.eta_sh, s.d_st, s.d_c),
            threshold: ContinuationSchedule::decreasing(s.rho_th0, s.eta_th, s.d_st, s.d_c),
            weights: Weights {
                w1: w.w1,
                perimeter: ContinuationSchedule::increasing(w.w2, w.w2_final, w.eta_w2, s.d_st, s.d_c),
                perimeter_factor_after: w.w2_after_factor,
                w3: w.w3,
                w4: w.w4,
            },
            quantity: QuantityOfInterest {
                compliance: self.objective.a_psi,
                mass: self.objective.a_mass,
            },
            gamma_m: k.gamma_m,
            stress,
            max_iterations: s.d_max,
            tolerance: self.solver.tolerance,
            constraint_slack: self.solver.constraint_slack,
            mma,
            solver: match self.solver.kind {
                SolverKey::Direct => SolverKind::Direct,
                SolverKey::Iterative => SolverKind::Iterative,
            },
            t_heat: self.solver.t_heat * g.h * g.h,
        };
        spec.validate().map_err(AppError::Core)?;
        if mode == Mode::Sfc && !(self.design.rho0 > 0.0) {
            return Err(key_error("design.rho0", "must be positive"));
        }
        Ok(spec)
    }
}
