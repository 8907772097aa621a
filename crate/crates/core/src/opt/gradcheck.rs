use alloc::vec::Vec;

use rand::rngs::SmallRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use super::driver::{run_optimization, IterationObserver};
use super::evaluate::{DesignFields, Evaluation, Frozen};
use super::{Design, Problem};
use crate::error::{Error, Result};
use crate::solve::{connected_components, spring_nodes};

/// One compared derivative. `function` 0 is `z`, `k >= 1` is constraint `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheckEntry {
    pub iteration: usize,
    pub variable: usize,
    pub function: usize,
    pub analytic: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradientCheck {
    pub entries: Vec<GradientCheckEntry>,
    /// Variables skipped because the stencil crossed a branch of the model.
    pub skipped: usize,
}

impl GradientCheck {
    pub fn max_relative_error(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.relative_error))
    }
}

/// Discrete state of a design that makes the responses non-smooth when it changes.
#[derive(Debug, PartialEq)]
struct Branch {
    active: Vec<bool>,
    below_threshold: Vec<bool>,
    springs: Vec<usize>,
    /// Node and element-center signs of `phi`; the contour length has kinks there.
    signs: Vec<bool>,
}

impl Problem {
    fn branch(&self, fields: &DesignFields, iteration: usize) -> Branch {
        let grid = self.grid();
        let rho_th = self.spec.threshold.value(iteration);
        let comps = connected_components(grid, &fields.phi, &self.fixture.bc.fixed_node_mask(grid));
        Branch {
            active: fields.active.clone(),
            below_threshold: fields.rho.values().iter().map(|&r| r < rho_th).collect(),
            springs: spring_nodes(grid, &comps),
            signs: fields
                .phi
                .values()
                .iter()
                .map(|&p| p > 0.0)
                .chain((0..grid.element_count()).map(|e| fields.phi.element_values(grid, e).iter().sum::<f64>() > 0.0))
                .collect(),
        }
    }

    fn value_of(ev: &Evaluation, function: usize) -> f64 {
        if function == 0 {
            ev.breakdown.z
        } else {
            ev.g[function - 1]
        }
    }
}

/// Compares adjoint gradients against fourth-order central differences on the designs the
/// optimizer reaches at `iterations`.
///
/// The regularization target and the spring set are frozen at the base design.
/// `samples` free variables are drawn per iteration; a variable whose stencil
/// changes the SFC active set, the density threshold test, the floating
/// components or a sign of `phi` is replaced by another draw. The step is
/// `step * (upper - lower)`.
pub fn gradient_check(
    problem: &Problem,
    iterations: &[usize],
    samples: usize,
    step: f64,
    seed: u64,
) -> Result<GradientCheck> {
    if !(step > 0.0) {
        return Err(Error::param("step", "must be positive"));
    }
    let last = iterations.iter().copied().max().unwrap_or(0);
    let mut spec = problem.spec().clone();
    spec.max_iterations = last;
    // Never stop early: every requested iteration must be reached.
    spec.tolerance = 0.0;
    let runner = Problem {
        spec,
        ..problem.clone()
    };
    let mut captured: Vec<(usize, Design)> = Vec::new();
    let mut psi0 = None;
    {
        let mut obs = |it: usize, ev: &Evaluation, d: &Design| {
            psi0.get_or_insert(ev.breakdown.psi);
            if iterations.contains(&it) {
                captured.push((it, d.clone()));
            }
        };
        run_optimization(&runner, Some(&mut obs as &mut dyn IterationObserver))?;
    }
    let psi0 = psi0.ok_or_else(|| Error::param("iterations", "no iteration evaluated"))?;

    let mut rng = SmallRng::seed_from_u64(seed);
    let mut report = GradientCheck::default();
    for (it, design) in captured {
        let base_fields = problem.design_fields(&design, it)?;
        let base_branch = problem.branch(&base_fields, it);
        let frozen = Frozen {
            target: problem.regularization_target(&base_fields.phi)?,
            springs: base_branch.springs.clone(),
        };
        let ev = problem.evaluate(&design, it, Some(psi0), Some(&frozen))?;
        let grads: Vec<&[f64]> = core::iter::once(ev.dz.as_slice())
            .chain(ev.dg.iter().map(Vec::as_slice))
            .collect();
        let scales: Vec<f64> = grads
            .iter()
            .map(|g| g.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect();

        let x = design.flat();
        let (lo, hi) = (design.lower(), design.upper());
        let mut candidates: Vec<usize> = (0..x.len()).filter(|&k| !problem.is_frozen_variable(k)).collect();
        candidates.shuffle(&mut rng);
        let mut accepted = 0;
        for k in candidates {
            if accepted == samples {
                break;
            }
            let hk = step * (hi[k] - lo[k]);
            let probe = |delta: f64| -> Result<Option<Evaluation>> {
                let mut xp = x.clone();
                xp[k] += delta;
                if xp[k] < lo[k] || xp[k] > hi[k] {
                    return Ok(None);
                }
                let mut d = design.clone();
                d.set_flat(&xp)?;
                let fields = problem.design_fields(&d, it)?;
                if problem.branch(&fields, it) != base_branch {
                    return Ok(None);
                }
                problem.evaluate(&d, it, Some(psi0), Some(&frozen)).map(Some)
            };
            let (Some(up), Some(down), Some(up2), Some(down2)) =
                (probe(hk)?, probe(-hk)?, probe(2.0 * hk)?, probe(-2.0 * hk)?)
            else {
                report.skipped += 1;
                continue;
            };
            accepted += 1;
            for (f, g) in grads.iter().enumerate() {
                let v = |e: &Evaluation| Problem::value_of(e, f);
                let fd = (8.0 * (v(&up) - v(&down)) - (v(&up2) - v(&down2))) / (12.0 * hk);
                let a = g[k];
                let denom = a.abs().max(fd.abs()).max(1e-6 * scales[f]).max(f64::MIN_POSITIVE);
                report.entries.push(GradientCheckEntry {
                    iteration: it,
                    variable: k,
                    function: f,
                    analytic: a,
                    finite_difference: fd,
                    relative_error: (a - fd).abs() / denom,
                });
            }
        }
    }
    Ok(report)
}
