//! Method of moving asymptotes with artificial variables on the constraints.
//!
//! Each outer step builds the usual separable convex approximation and solves
//! its dual: by bisection for one constraint, by cyclic coordinate bisection
//! for several.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

const ASY_MIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmaSettings {
    pub asy_init: f64,
    pub asy_decrease: f64,
    pub asy_increase: f64,
    /// Move limit as a fraction of the variable range.
    pub move_limit: f64,
    pub albefa: f64,
    /// Smallest and largest asymptote distance as fractions of the range.
    pub asy_min: f64,
    pub asy_max: f64,
    pub raa0: f64,
    /// Linear and quadratic cost of the artificial variables.
    pub c: f64,
    pub d: f64,
}

impl Default for MmaSettings {
    fn default() -> Self {
        MmaSettings {
            asy_init: 0.5,
            asy_decrease: 0.7,
            asy_increase: 1.2,
            move_limit: 0.1,
            albefa: 0.1,
            asy_min: ASY_MIN,
            asy_max: 10.0,
            raa0: 1e-5,
            c: 1000.0,
            d: 1.0,
        }
    }
}

impl MmaSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0) {
            return Err(Error::param("move_limit", format!("must lie in (0, 1], got {}", self.move_limit)));
        }
        if !(self.asy_init > 0.0 && self.asy_decrease > 0.0 && self.asy_decrease < 1.0 && self.asy_increase > 1.0) {
            return Err(Error::param("asymptote factors", "need init > 0, 0 < decrease < 1 < increase"));
        }
        if !(self.asy_min > 0.0 && self.asy_min < self.asy_init && self.asy_max > self.asy_init) {
            return Err(Error::param("asymptote limits", "need 0 < asy_min < asy_init < asy_max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MmaState {
    settings: MmaSettings,
    lower_bound: Vec<f64>,
    upper_bound: Vec<f64>,
    low: Vec<f64>,
    upp: Vec<f64>,
    xold1: Vec<f64>,
    xold2: Vec<f64>,
    iteration: usize,
}

/// Per-variable approximation terms.
struct Approximation<'a> {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    low: &'a [f64],
    upp: &'a [f64],
    p0: Vec<f64>,
    q0: Vec<f64>,
    p: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl MmaState {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, settings: MmaSettings) -> Result<Self> {
        settings.validate()?;
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i])) {
            return Err(Error::param(
                "bounds",
                format!("variable {i}: lower {} not below upper {}", lower[i], upper[i]),
            ));
        }
        let n = lower.len();
        Ok(MmaState {
            settings,
            lower_bound: lower,
            upper_bound: upper,
            low: alloc::vec![0.0; n],
            upp: alloc::vec![0.0; n],
            xold1: Vec::new(),
            xold2: Vec::new(),
            iteration: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.lower_bound.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower_bound.is_empty()
    }

    pub fn asymptotes(&self) -> (&[f64], &[f64]) {
        (&self.low, &self.upp)
    }

    /// One MMA step for `min f0` subject to `g_i <= 0`. Returns the new iterate.
    pub fn update(&mut self, x: &[f64], df0: &[f64], g: &[f64], dg: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.len();
        for len in [x.len(), df0.len()].into_iter().chain(dg.iter().map(Vec::len)) {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        if dg.len() != g.len() {
            return Err(Error::DimensionMismatch {
                expected: g.len(),
                got: dg.len(),
            });
        }
        if df0.iter().chain(dg.iter().flatten()).chain(g).any(|v| !v.is_finite()) {
            return Err(Error::Subproblem("non-finite response or gradient".into()));
        }
        let s = self.settings;
        self.iteration += 1;
        for j in 0..n {
            let range = self.upper_bound[j] - self.lower_bound[j];
            if self.iteration <= 2 {
                self.low[j] = x[j] - s.asy_init * range;
                self.upp[j] = x[j] + s.asy_init * range;
            } else {
                let trend = (x[j] - self.xold1[j]) * (self.xold1[j] - self.xold2[j]);
                let factor = if trend < 0.0 {
                    s.asy_decrease
                } else if trend > 0.0 {
                    s.asy_increase
                } else {
                    1.0
                };
                self.low[j] = x[j] - factor * (self.xold1[j] - self.low[j]);
                self.upp[j] = x[j] + factor * (self.upp[j] - self.xold1[j]);
                self.low[j] = self.low[j].clamp(x[j] - s.asy_max * range, x[j] - s.asy_min * range);
                self.upp[j] = self.upp[j].clamp(x[j] + s.asy_min * range, x[j] + s.asy_max * range);
            }
        }

        let m = g.len();
        let mut ap = Approximation {
            alpha: alloc::vec![0.0; n],
            beta: alloc::vec![0.0; n],
            low: &self.low,
            upp: &self.upp,
            p0: alloc::vec![0.0; n],
            q0: alloc::vec![0.0; n],
            p: alloc::vec![alloc::vec![0.0; n]; m],
            q: alloc::vec![alloc::vec![0.0; n]; m],
            b: g.iter().map(|v| -v).collect(),
        };
        for j in 0..n {
            let range = self.upper_bound[j] - self.lower_bound[j];
            ap.alpha[j] = self.lower_bound[j]
                .max(self.low[j] + s.albefa * (x[j] - self.low[j]))
                .max(x[j] - s.move_limit * range);
            ap.beta[j] = self.upper_bound[j]
                .min(self.upp[j] - s.albefa * (self.upp[j] - x[j]))
                .min(x[j] + s.move_limit * range);
            let ux = self.upp[j] - x[j];
            let xl = x[j] - self.low[j];
            let split = |d: f64| -> (f64, f64) {
                let base = s.raa0 / range;
                (
                    ux * ux * (1.001 * d.max(0.0) + 0.001 * (-d).max(0.0) + base),
                    xl * xl * (0.001 * d.max(0.0) + 1.001 * (-d).max(0.0) + base),
                )
            };
            let (p0, q0) = split(df0[j]);
            ap.p0[j] = p0;
            ap.q0[j] = q0;
            for i in 0..m {
                let (pi, qi) = split(dg[i][j]);
                ap.p[i][j] = pi;
                ap.q[i][j] = qi;
                ap.b[i] += pi / ux + qi / xl;
            }
        }

        let lambda = solve_dual(&ap, &s)?;
        let x_new = primal(&ap, &lambda);
        self.xold2 = core::mem::replace(&mut self.xold1, x.to_vec());
        Ok(x_new)
    }
}

/// Minimizer of the Lagrangian in `x` for given multipliers.
fn primal(ap: &Approximation<'_>, lambda: &[f64]) -> Vec<f64> {
    (0..ap.p0.len())
        .map(|j| {
            let mut pj = ap.p0[j];
            let mut qj = ap.q0[j];
            for (i, l) in lambda.iter().enumerate() {
                pj += l * ap.p[i][j];
                qj += l * ap.q[i][j];
            }
            let (sp, sq) = (math::sqrt(pj), math::sqrt(qj));
            let x = (sp * ap.low[j] + sq * ap.upp[j]) / (sp + sq);
            x.clamp(ap.alpha[j], ap.beta[j])
        })
        .collect()
}

/// `dW/dlambda_i`: approximated constraint minus artificial variable.
fn dual_gradient(ap: &Approximation<'_>, s: &MmaSettings, lambda: &[f64], i: usize) -> f64 {
    let x = primal(ap, lambda);
    let mut gi = -ap.b[i];
    for j in 0..x.len() {
        gi += ap.p[i][j] / (ap.upp[j] - x[j]) + ap.q[i][j] / (x[j] - ap.low[j]);
    }
    let y = ((lambda[i] - s.c) / s.d).max(0.0);
    gi - y
}

fn solve_dual(ap: &Approximation<'_>, s: &MmaSettings) -> Result<Vec<f64>> {
    let m = ap.b.len();
    let mut lambda = alloc::vec![0.0; m];
    if m == 0 {
        return Ok(lambda);
    }
    let sweeps = if m == 1 { 1 } else { 200 };
    for _ in 0..sweeps {
        let mut moved: f64 = 0.0;
        for i in 0..m {
            let old = lambda[i];
            lambda[i] = 0.0;
            if dual_gradient(ap, s, &lambda, i) <= 0.0 {
                moved = moved.max(old);
                continue;
            }
            // The artificial variable makes the dual gradient negative for large lambda.
            let mut hi = s.c.max(1.0);
            let mut expansions = 0;
            loop {
                lambda[i] = hi;
                if dual_gradient(ap, s, &lambda, i) < 0.0 {
                    break;
                }
                hi *= 2.0;
                expansions += 1;
                if expansions > 60 {
                    return Err(Error::Subproblem(format!(
                        "no bracket for multiplier {i} (b = {:e})",
                        ap.b[i]
                    )));
                }
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                lambda[i] = mid;
                if dual_gradient(ap, s, &lambda, i) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-14 * hi.max(1.0) {
                    break;
                }
            }
            lambda[i] = 0.5 * (lo + hi);
            moved = moved.max((lambda[i] - old).abs() / lambda[i].max(1.0));
        }
        if moved < 1e-12 {
            break;
        }
    }
    Ok(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_gradient_leaves_design_unchanged() {
        let mut mma = MmaState::new(alloc::vec![0.0; 4], alloc::vec![1.0; 4], MmaSettings::default()).unwrap();
        let x = [0.1, 0.5, 0.7, 0.95];
        let out = mma.update(&x, &[0.0; 4], &[-1.0], &[alloc::vec![0.0; 4]]).unwrap();
        for (a, b) in out.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_converges_to_minimizer() {
        let mut mma = MmaState::new(alloc::vec![0.0], alloc::vec![1.0], MmaSettings::default()).unwrap();
        let mut x = alloc::vec![0.9];
        let mut hit = None;
        for it in 1..=50 {
            x = mma.update(&x, &[2.0 * (x[0] - 0.3)], &[], &[]).unwrap();
            assert!((0.0..=1.0).contains(&x[0]));
            if hit.is_none() && (x[0] - 0.3).abs() <= 1e-3 {
                hit = Some(it);
            }
        }
        assert!(hit.is_some());
        assert!((x[0] - 0.3).abs() <= 1e-3);
    }

    #[test]
    fn infeasible_start_reduces_constraint() {
        // g = sum x - 1 <= 0 from x = 0.8 each.
        let n = 5;
        let mut mma = MmaState::new(alloc::vec![0.0; n], alloc::vec![1.0; n], MmaSettings::default()).unwrap();
        let x = alloc::vec![0.8; n];
        let g = |x: &[f64]| x.iter().sum::<f64>() - 1.0;
        let out = mma.update(&x, &alloc::vec![0.0; n], &[g(&x)], &[alloc::vec![1.0; n]]).unwrap();
        assert!(g(&out) < g(&x));
    }

    #[test]
    fn constrained_linear_problem_reaches_vertex() {
        // min -x0 - 2 x1 s.t. x0 + x1 <= 1, x1 <= 0.6 on the unit box.
        let mut mma = MmaState::new(alloc::vec![0.0; 2], alloc::vec![1.0; 2], MmaSettings::default()).unwrap();
        let mut x = alloc::vec![0.2, 0.2];
        for _ in 0..80 {
            let g = [x[0] + x[1] - 1.0, x[1] - 0.6];
            x = mma
                .update(&x, &[-1.0, -2.0], &g, &[alloc::vec![1.0, 1.0], alloc::vec![0.0, 1.0]])
                .unwrap();
        }
        assert!((x[0] - 0.4).abs() < 1e-3 && (x[1] - 0.6).abs() < 1e-3, "{x:?}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(MmaState::new(alloc::vec![0.0], alloc::vec![0.0], MmaSettings::default()).is_err());
        let mut mma = MmaState::new(alloc::vec![0.0], alloc::vec![1.0], MmaSettings::default()).unwrap();
        assert!(mma.update(&[0.5, 0.5], &[0.0], &[], &[]).is_err());
        assert!(mma.update(&[0.5], &[f64::NAN], &[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn iterates_stay_within_bounds_and_asymptotes(
            x0 in prop::collection::vec(-1.0f64..2.0, 6),
            grads in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 4),
            gval in -1.0f64..1.0,
        ) {
            let lower = alloc::vec![-1.0; 6];
            let upper = alloc::vec![2.0; 6];
            let mut mma = MmaState::new(lower, upper, MmaSettings::default()).unwrap();
            let mut x = x0;
            for k in 0..4 {
                let dg = alloc::vec![grads[(k + 1) % 4].clone()];
                x = mma.update(&x, &grads[k], &[gval], &dg).unwrap();
                let (low, upp) = mma.asymptotes();
                for j in 0..6 {
                    prop_assert!(x[j] >= -1.0 && x[j] <= 2.0);
                    prop_assert!(low[j] < x[j] && x[j] < upp[j]);
                }
            }
        }
    }
}
