//! Optimization problem, objective and constraint evaluation with adjoint
//! gradients, MMA updates and the continuation-driven outer loop.

mod driver;
mod evaluate;
mod fixtures;
mod gradcheck;
mod mma;
mod perimeter;

pub use driver::{run_optimization, IterationObserver, RunSummary, Termination};
pub use evaluate::{DesignFields, Evaluation, Frozen, ObjectiveBreakdown};
pub use fixtures::{beam2d_fixture, example1_fixture, Fixture};
pub use gradcheck::{gradient_check, GradientCheck, GradientCheckEntry};
pub use mma::{MmaSettings, MmaState};
pub use perimeter::{perimeter_penalty, smeared_perimeter, Perimeter};

use alloc::format;
use alloc::vec::Vec;

use crate::couple::{ContinuationSchedule, MaterialModel, SfcConfig, TfcConfig};
use crate::error::{Error, Result};
use crate::field::{DesignVector, FilterOperator};
use crate::regularize::{HeatMethod, RegConfig};
use crate::solve::{ElasticModel, SolverKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Single-field coupling: one variable per node.
    Sfc,
    /// Two-field coupling: level-set and density variables per node.
    Tfc,
}

/// Objective weights. The perimeter weight follows its own schedule and is
/// multiplied by `perimeter_factor_after` once continuation has ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub w1: f64,
    pub perimeter: ContinuationSchedule,
    pub perimeter_factor_after: f64,
    pub w3: f64,
    pub w4: f64,
}

impl Weights {
    pub fn at(&self, iteration: usize, mode: Mode) -> [f64; 4] {
        let mut w2 = self.perimeter.value(iteration);
        if iteration > self.perimeter.span {
            w2 *= self.perimeter_factor_after;
        }
        let w4 = match mode {
            Mode::Sfc => 0.0,
            Mode::Tfc => self.w4,
        };
        [self.w1, w2, self.w3, w4]
    }
}

/// Quantity of interest `F = a_psi Psi / Psi0 + a_mass M / |Omega|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantityOfInterest {
    pub compliance: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressConstraint {
    pub sigma_max: f64,
    pub xi_tau: f64,
    /// `g_3 = weight * P_tau`.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub mode: Mode,
    pub material: MaterialModel,
    pub sfc: SfcConfig,
    pub tfc: TfcConfig,
    pub reg: RegConfig,
    pub filter_radius: f64,
    /// Initial level set (TFC variables).
    pub phi0: f64,
    pub rho0: f64,
    pub shift: ContinuationSchedule,
    pub threshold: ContinuationSchedule,
    pub weights: Weights,
    pub quantity: QuantityOfInterest,
    pub gamma_m: f64,
    pub stress: Option<StressConstraint>,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub constraint_slack: f64,
    pub mma: MmaSettings,
    pub solver: SolverKind,
    pub t_heat: f64,
}

impl ProblemSpec {
    /// End of continuation, `D_c`.
    pub fn continuation_end(&self) -> usize {
        self.shift.span
    }

    /// Level-set bounds of the mode.
    pub fn phi_bounds(&self) -> (f64, f64) {
        match self.mode {
            Mode::Sfc => self.sfc.phi_bounds(),
            Mode::Tfc => (self.tfc.phi_low, self.tfc.phi_up),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        self.reg.validate()?;
        self.shift.validate()?;
        self.threshold.validate()?;
        self.weights.perimeter.validate()?;
        self.mma.validate()?;
        match self.mode {
            Mode::Sfc => self.sfc.validate()?,
            Mode::Tfc => self.tfc.validate()?,
        }
        let w = &self.weights;
        if [w.w1, w.w3, w.w4, w.perimeter.initial, w.perimeter.terminal, w.perimeter_factor_after]
            .iter()
            .any(|v| !(*v >= 0.0))
        {
            return Err(Error::param("weights", "must be non-negative"));
        }
        if !(self.gamma_m > 0.0 && self.gamma_m <= 1.0) {
            return Err(Error::param("gamma_m", format!("must lie in (0, 1], got {}", self.gamma_m)));
        }
        if !(self.rho0 > 0.0 && self.rho0 <= 1.0) {
            return Err(Error::param("rho0", format!("must lie in (0, 1], got {}", self.rho0)));
        }
        let (lo, hi) = self.phi_bounds();
        if self.mode == Mode::Tfc && !(self.phi0 > lo && self.phi0 <= hi) {
            return Err(Error::param("phi0", format!("must lie in ({lo}, {hi}], got {}", self.phi0)));
        }
        if !(self.filter_radius > 0.0) {
            return Err(Error::param("filter_radius", "must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::param("tolerance", "must be positive"));
        }
        if !(self.shift.initial >= 0.0 && self.shift.terminal <= 1.0) {
            return Err(Error::param("shift schedule", "values must lie in [0, 1]"));
        }
        if self.quantity.compliance < 0.0 || self.quantity.mass < 0.0 {
            return Err(Error::param("quantity of interest", "coefficients must be non-negative"));
        }
        if let Some(s) = &self.stress {
            if !(s.sigma_max > 0.0 && s.xi_tau > 0.0 && s.weight > 0.0) {
                return Err(Error::param("stress", "sigma_max, xi_tau and weight must be positive"));
            }
        }
        if !(self.t_heat > 0.0) {
            return Err(Error::param("t_heat", "must be positive"));
        }
        Ok(())
    }

    pub fn constraint_count(&self) -> usize {
        1 + usize::from(self.stress.is_some())
    }
}

/// Everything needed to evaluate designs on one fixture.
#[derive(Debug, Clone)]
pub struct Problem {
    spec: ProblemSpec,
    fixture: Fixture,
    filter: FilterOperator,
    model: ElasticModel,
    heat: HeatMethod,
}

impl Problem {
    pub fn new(spec: ProblemSpec, fixture: Fixture) -> Result<Self> {
        spec.validate()?;
        let grid = &fixture.grid;
        let filter = FilterOperator::new(grid, spec.filter_radius)?;
        let model = ElasticModel::new(grid, fixture.bc.clone(), spec.material.nu, spec.solver)?;
        let heat = HeatMethod::new(grid, spec.t_heat)?;
        Ok(Problem {
            spec,
            fixture,
            filter,
            model,
            heat,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn fixture(&self) -> &Fixture {
        &self.fixture
    }

    pub fn grid(&self) -> &crate::Grid {
        &self.fixture.grid
    }

    pub fn model(&self) -> &ElasticModel {
        &self.model
    }

    pub fn filter(&self) -> &FilterOperator {
        &self.filter
    }

    /// Number of optimization variables: `N_s` (SFC) or `2 N_s` (TFC).
    pub fn variable_count(&self) -> usize {
        let n = self.grid().node_count();
        match self.spec.mode {
            Mode::Sfc => n,
            Mode::Tfc => 2 * n,
        }
    }

    /// Uniform initial design; non-design nodes start at their prescribed values.
    pub fn initial_design(&self) -> Result<Design> {
        let n = self.grid().node_count();
        let fixed = &self.fixture.non_design_nodes;
        let pick = |free: f64, solid: f64| -> Vec<f64> {
            (0..n).map(|i| if fixed[i] { solid } else { free }).collect()
        };
        let fields = match self.spec.mode {
            Mode::Sfc => {
                let s0 = self.spec.sfc.variable_for_density(self.spec.rho0);
                alloc::vec![DesignVector::new(pick(s0, 1.0), 0.0, 1.0)?]
            }
            Mode::Tfc => {
                let (lo, hi) = self.spec.phi_bounds();
                alloc::vec![
                    DesignVector::new(pick(self.spec.phi0, hi), lo, hi)?,
                    DesignVector::new(pick(self.spec.rho0, 1.0), 0.0, 1.0)?,
                ]
            }
        };
        Ok(Design { fields })
    }

    /// Whether flat variable `k` belongs to a non-design node.
    pub fn is_frozen_variable(&self, k: usize) -> bool {
        self.fixture.non_design_nodes[k % self.grid().node_count()]
    }
}

/// Optimization variables: one design vector per field.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub fields: Vec<DesignVector>,
}

impl Design {
    pub fn flat(&self) -> Vec<f64> {
        self.fields.iter().flat_map(|f| f.values().iter().copied()).collect()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.fields
            .iter()
            .flat_map(|f| core::iter::repeat(f.lower()).take(f.len()))
            .collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.fields
            .iter()
            .flat_map(|f| core::iter::repeat(f.upper()).take(f.len()))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.fields.iter().map(DesignVector::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Replaces all values from a flat vector, clamping into the bounds.
    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        let mut offset = 0;
        for f in &mut self.fields {
            let n = f.len();
            f.set_clamped(&values[offset..offset + n])?;
            offset += n;
        }
        Ok(())
    }
}
