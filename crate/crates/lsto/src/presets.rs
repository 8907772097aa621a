//! Benchmark presets.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::config::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Ex1Sfc,
    Ex1Tfc,
    Beam2dSfc,
    Beam2dTfc,
    Ex1StressTfc,
}

impl PresetName {
    pub const ALL: [PresetName; 5] = [
        PresetName::Ex1Sfc,
        PresetName::Ex1Tfc,
        PresetName::Beam2dSfc,
        PresetName::Beam2dTfc,
        PresetName::Ex1StressTfc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Ex1Sfc => "ex1-sfc",
            PresetName::Ex1Tfc => "ex1-tfc",
            PresetName::Beam2dSfc => "beam2d-sfc",
            PresetName::Beam2dTfc => "beam2d-tfc",
            PresetName::Ex1StressTfc => "ex1-stress-tfc",
        }
    }

    fn fixture(self) -> FixtureKey {
        match self {
            PresetName::Beam2dSfc | PresetName::Beam2dTfc => FixtureKey::Beam2d,
            _ => FixtureKey::Ex1,
        }
    }

    fn mode(self) -> ModeKey {
        match self {
            PresetName::Ex1Sfc | PresetName::Beam2dSfc => ModeKey::Sfc,
            _ => ModeKey::Tfc,
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = PresetName::ALL.iter().map(|p| p.as_str()).collect();
                format!("unknown preset `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Stress limit of the stress preset: 0.6 times the largest smoothed von Mises
/// stress of the `ex1-tfc` design at scale 4.
pub const EX1_STRESS_LIMIT: f64 = 114.0;

/// Coupling weight of a preset in the given mode; single-field runs have none.
pub fn default_w4(preset: PresetName, mode: ModeKey) -> f64 {
    match (mode, preset.fixture()) {
        (ModeKey::Sfc, _) => 0.0,
        (ModeKey::Tfc, FixtureKey::Ex1) => 0.01,
        (ModeKey::Tfc, FixtureKey::Beam2d) => 0.05,
    }
}

/// Sets level-set bounds, coupling constants, initial level set and filter
/// radius from the element size.
pub fn apply_element_size(cfg: &mut RunConfig) {
    let h = cfg.grid.h;
    cfg.coupling.phi_rt = 4.0 * h;
    cfg.coupling.phi_low = -2.5 * h;
    cfg.coupling.phi_up = 2.5 * h;
    cfg.coupling.phi_th = 0.25 * cfg.coupling.phi_low;
    cfg.design.phi0 = 0.5 * cfg.coupling.phi_up;
    cfg.design.filter_radius = 1.6 * h;
}

fn scaled(n: usize, k: usize, min: usize) -> usize {
    (n / k).max(min)
}

/// Full configuration of a preset coarsened by `scale`: grid counts and
/// continuation spans are divided by `scale` (spans no lower than 5/25/40) and
/// the element size is multiplied by it.
pub fn preset(name: PresetName, scale: usize) -> RunConfig {
    let k = scale.max(1);
    let mode = name.mode();
    let fixture = name.fixture();
    let (nx, ny, h, d_st, d_c, d_max) = match fixture {
        FixtureKey::Ex1 => (120, 80, 0.5, 50, 400, 500),
        FixtureKey::Beam2d => (120, 40, 1.0, 20, 120, 150),
    };
    let (d_st, d_c, d_max) = if k > 1 {
        (scaled(d_st, k, 5), scaled(d_c, k, 25), scaled(d_max, k, 40))
    } else {
        (d_st, d_c, d_max)
    };
    let (rho0, rho_sh0, rho_th_factor, gamma_m) = match fixture {
        FixtureKey::Ex1 => (0.4, 0.0, 0.7, 0.4),
        FixtureKey::Beam2d => (0.2, 0.2, 0.75, 0.2),
    };
    let weights = match fixture {
        FixtureKey::Ex1 => WeightsSection {
            w1: 0.93,
            w2: 0.01,
            w2_final: 0.01,
            eta_w2: 1.0,
            w2_after_factor: 10.0,
            w3: 0.05,
            w4: default_w4(name, mode),
            w_phi1: 1.0,
            w_phi2: 1.0,
            w_grad1: 1.0,
            w_grad2: 1.0,
            gamma_reg: 36.8,
        },
        FixtureKey::Beam2d => WeightsSection {
            w1: 0.92,
            w2: 0.001,
            w2_final: 0.01,
            eta_w2: 3.0,
            w2_after_factor: 1.0,
            w3: 0.01,
            w4: default_w4(name, mode),
            w_phi1: 1.0,
            w_phi2: 1.0,
            w_grad1: 1.0,
            w_grad2: 1.0,
            gamma_reg: 36.8,
        },
    };
    let mut cfg = RunConfig {
        preset: name.as_str().into(),
        scale: k,
        fixture,
        mode,
        grid: GridSection {
            nx: (nx / k).max(1),
            ny: (ny / k).max(1),
            h: h * k as f64,
        },
        load: LoadSection { traction: -10.0 },
        material: MaterialSection {
            e0: 2.0e3,
            e_void: 1.0e-8,
            nu: 0.4,
            theta0: 1.0,
            beta: 2.0,
        },
        design: DesignSection {
            rho0,
            phi0: 0.0,
            filter_radius: 0.0,
        },
        schedules: SchedulesSection {
            d_st,
            d_c,
            d_max,
            rho_sh0,
            rho_th0: rho_th_factor * rho0,
            eta_sh: 2.0,
            eta_th: 2.0,
        },
        coupling: CouplingSection {
            phi_sh: 0.5,
            phi_rt: 0.0,
            phi_th: 0.0,
            phi_low: 0.0,
            phi_up: 0.0,
            xi: 0.5,
        },
        weights,
        objective: ObjectiveSection {
            a_psi: 1.0,
            a_mass: 0.0,
        },
        constraints: ConstraintsSection {
            gamma_m,
            sigma_max: None,
            xi_tau: 0.1,
            stress_weight: None,
        },
        solver: SolverSection {
            kind: SolverKey::Direct,
            tolerance: 1e-3,
            constraint_slack: 1e-6,
            move_limit: 0.1,
            t_heat: 1.0,
        },
        output: OutputSection {
            directory: PathBuf::from("out").join(name.as_str()),
            stride: 25,
        },
        gradcheck: GradcheckSection {
            iterations: vec![0, 10, 20],
            samples: 20,
            step: 1e-3,
            seed: 1,
            tolerance: 1e-3,
        },
    };
    if name == PresetName::Ex1StressTfc {
        cfg.objective = ObjectiveSection {
            a_psi: 0.1,
            a_mass: 1.0,
        };
        cfg.constraints.sigma_max = Some(EX1_STRESS_LIMIT);
        let w = &mut cfg.weights;
        w.w_grad1 = 0.0;
        w.w_phi1 = 0.5;
        w.w_phi2 = 0.5;
        w.w_grad2 = 0.5;
    }
    apply_element_size(&mut cfg);
    cfg
}
