use alloc::vec::Vec;

use super::evaluate::{Evaluation, ObjectiveBreakdown};
use super::mma::MmaState;
use super::{Design, Problem};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Past continuation, objective stalled and constraints satisfied.
    Converged,
    /// Iteration budget exhausted.
    MaxIterations,
}

/// Called once per evaluated iteration, before the design update.
pub trait IterationObserver {
    fn observe(&mut self, iteration: usize, evaluation: &Evaluation, design: &Design);
}

impl<F: FnMut(usize, &Evaluation, &Design)> IterationObserver for F {
    fn observe(&mut self, iteration: usize, evaluation: &Evaluation, design: &Design) {
        self(iteration, evaluation, design)
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub history: Vec<ObjectiveBreakdown>,
    pub design: Design,
    pub last: Evaluation,
    pub termination: Termination,
    /// Index of the last evaluated iteration.
    pub iterations: usize,
}

/// Relative objective change used by the stopping test.
fn relative_change(z: f64, prev: f64) -> f64 {
    (z - prev).abs() / prev.abs().max(f64::MIN_POSITIVE)
}

/// Runs the outer loop: evaluate, record, test for termination, MMA update.
///
/// Terminates after continuation ends once the relative change of `z` and every
/// constraint drop below the tolerance, or at the iteration limit.
pub fn run_optimization(problem: &Problem, observer: Option<&mut dyn IterationObserver>) -> Result<RunSummary> {
    let spec = problem.spec();
    let mut observer = observer;
    let mut design = problem.initial_design()?;
    let initial = design.flat();
    let mut mma = MmaState::new(design.lower(), design.upper(), spec.mma)?;
    let mut history: Vec<ObjectiveBreakdown> = Vec::new();
    let mut psi0 = None;
    let mut it = 0;
    loop {
        let ev = problem
            .evaluate(&design, it, psi0, None)
            .map_err(|e| e.at_iteration(it))?;
        psi0.get_or_insert(ev.breakdown.psi);
        if let Some(obs) = observer.as_deref_mut() {
            obs.observe(it, &ev, &design);
        }
        let z = ev.breakdown.z;
        let stalled = history
            .last()
            .is_some_and(|prev| relative_change(z, prev.z) <= spec.tolerance);
        let feasible = ev.g.iter().all(|&g| g <= spec.tolerance);
        history.push(ev.breakdown);
        let termination = if it > spec.continuation_end() && stalled && feasible {
            Some(Termination::Converged)
        } else if it >= spec.max_iterations {
            Some(Termination::MaxIterations)
        } else {
            None
        };
        if let Some(termination) = termination {
            log::info!("stopped at iteration {it}: {termination:?}");
            return Ok(RunSummary {
                history,
                design,
                last: ev,
                termination,
                iterations: it,
            });
        }
        let x = design.flat();
        let g: Vec<f64> = ev.g.iter().map(|g| g - spec.constraint_slack).collect();
        let mut next = mma
            .update(&x, &ev.dz, &g, &ev.dg)
            .map_err(|e| e.at_iteration(it))?;
        for (k, v) in next.iter_mut().enumerate() {
            if problem.is_frozen_variable(k) {
                *v = initial[k];
            }
        }
        design.set_flat(&next)?;
        it += 1;
    }
}
