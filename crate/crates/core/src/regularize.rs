//! Level-set regularization toward a truncated signed-distance target.
//!
//! The target comes from the heat method: a short heat flow from the zero
//! contour gives a field whose normalized gradient points away from the
//! interface; a Poisson solve then recovers a distance with that gradient.
//! Nodes of cut elements are anchored to their exact distance to the contour.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{extract_interface, InterfacePolyline, NodalField};
use crate::grid::{shape_functions, Grid};
use crate::linalg::{CsrMatrix, SkylineCholesky, TripletBuilder};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegConfig {
    /// `w_phi` near the interface (`alpha = 1`) and far from it.
    pub w_phi: [f64; 2],
    /// Same split for the gradient term.
    pub w_grad: [f64; 2],
    pub gamma: f64,
    pub target_low: f64,
    pub target_up: f64,
    /// Normalization scale of the value term and of `alpha`.
    pub phi_bnd: f64,
}

impl RegConfig {
    /// Unit weights, `gamma = 36.8` and target bounds `[low, up]`.
    pub fn with_bounds(low: f64, up: f64) -> Self {
        RegConfig {
            w_phi: [1.0, 1.0],
            w_grad: [1.0, 1.0],
            gamma: 36.8,
            target_low: low,
            target_up: up,
            phi_bnd: up - low,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_phi.iter().chain(&self.w_grad).any(|w| !(*w >= 0.0)) {
            return Err(Error::param("regularization weights", "must be non-negative"));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::param("gamma", format!("must be positive, got {}", self.gamma)));
        }
        if !(self.target_low < 0.0 && self.target_up > 0.0) {
            return Err(Error::param(
                "target bounds",
                format!("need low < 0 < up, got [{}, {}]", self.target_low, self.target_up),
            ));
        }
        if !(self.phi_bnd > 0.0) {
            return Err(Error::param("phi_bnd", format!("must be positive, got {}", self.phi_bnd)));
        }
        Ok(())
    }

    /// `exp(-gamma (phi~ / phi_bnd)^2)`.
    #[inline]
    pub fn alpha(&self, target: f64) -> f64 {
        let r = target / self.phi_bnd;
        math::exp(-self.gamma * r * r)
    }

    fn weights(&self, target: f64) -> (f64, f64) {
        let a = self.alpha(target);
        (
            self.w_phi[0] * a + self.w_phi[1] * (1.0 - a),
            self.w_grad[0] * a + self.w_grad[1] * (1.0 - a),
        )
    }

    /// Value used where the design has no interface.
    fn saturated(&self, phi: f64) -> f64 {
        if phi > 0.0 {
            self.target_up
        } else {
            self.target_low
        }
    }
}

/// Pre-factored heat operator `M + t K` for one grid.
#[derive(Debug, Clone)]
pub struct HeatMethod {
    grid: Grid,
    order: Vec<usize>,
    position: Vec<usize>,
    heat: SkylineCholesky,
    /// Laplacian in natural node order.
    laplacian: CsrMatrix,
}

/// Element Laplacian and consistent mass for a square bilinear element.
fn element_matrices(grid: &Grid) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    let gauss = grid.gauss();
    let mut k = [[0.0; 4]; 4];
    let mut m = [[0.0; 4]; 4];
    for g in 0..4 {
        for a in 0..4 {
            for b in 0..4 {
                let ga = gauss.grad[g][a];
                let gb = gauss.grad[g][b];
                k[a][b] += gauss.weight * (ga[0] * gb[0] + ga[1] * gb[1]);
                m[a][b] += gauss.weight * gauss.n[g][a] * gauss.n[g][b];
            }
        }
    }
    (k, m)
}

impl HeatMethod {
    /// Heat time `t_heat`; the usual choice is `h^2`.
    pub fn new(grid: &Grid, t_heat: f64) -> Result<Self> {
        if !(t_heat > 0.0) {
            return Err(Error::param("t_heat", format!("must be positive, got {t_heat}")));
        }
        let n = grid.node_count();
        let order = grid.band_order();
        let mut position = alloc::vec![0; n];
        for (p, &node) in order.iter().enumerate() {
            position[node] = p;
        }
        let (ke, me) = element_matrices(grid);
        let mut heat = TripletBuilder::with_capacity(n, 16 * grid.element_count());
        let mut lap = TripletBuilder::with_capacity(n, 16 * grid.element_count());
        for e in 0..grid.element_count() {
            let nodes = grid.element_nodes(e);
            for a in 0..4 {
                for b in 0..4 {
                    heat.push(
                        position[nodes[a]],
                        position[nodes[b]],
                        me[a][b] + t_heat * ke[a][b],
                    );
                    lap.push(nodes[a], nodes[b], ke[a][b]);
                }
            }
        }
        Ok(HeatMethod {
            grid: grid.clone(),
            order,
            position,
            heat: SkylineCholesky::factor(&heat.build())?,
            laplacian: lap.build(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Truncated signed-distance target for `phi`.
    pub fn target_field(&self, phi: &NodalField, cfg: &RegConfig) -> Result<NodalField> {
        let grid = &self.grid;
        if phi.len() != grid.node_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.node_count(),
                got: phi.len(),
            });
        }
        let poly = extract_interface(grid, phi);
        if poly.is_empty() {
            return NodalField::new(grid, phi.values().iter().map(|&v| cfg.saturated(v)).collect());
        }
        let distance = self.unsigned_distance(&poly)?;
        let values = phi
            .values()
            .iter()
            .zip(&distance)
            .map(|(&p, &d)| {
                let signed = if p > 0.0 { d } else { -d };
                signed.clamp(cfg.target_low, cfg.target_up)
            })
            .collect();
        NodalField::new(grid, values)
    }

    fn unsigned_distance(&self, poly: &InterfacePolyline) -> Result<Vec<f64>> {
        let grid = &self.grid;
        let n = grid.node_count();
        let gauss = grid.gauss();

        // Heat source: line integrals of the shape functions along the contour.
        let mut source = alloc::vec![0.0; n];
        let q = 0.288_675_134_594_812_9; // 0.5 / sqrt(3)
        for s in &poly.segments {
            let nodes = grid.element_nodes(s.element);
            let origin = grid.node_coords(nodes[0]);
            let half = 0.5 * s.length();
            for t in [0.5 - q, 0.5 + q] {
                let x = [s.a[0] + t * (s.b[0] - s.a[0]), s.a[1] + t * (s.b[1] - s.a[1])];
                let xi = ((x[0] - origin[0]) / grid.h()).clamp(0.0, 1.0);
                let eta = ((x[1] - origin[1]) / grid.h()).clamp(0.0, 1.0);
                let nv = shape_functions(xi, eta);
                for k in 0..4 {
                    source[self.position[nodes[k]]] += half * nv[k];
                }
            }
        }
        let u_perm = self.heat.solve(&source)?;
        let mut u = alloc::vec![0.0; n];
        for (p, &node) in self.order.iter().enumerate() {
            u[node] = u_perm[p];
        }

        // Normalized flow direction per element and the Poisson load.
        let center = [0.5, 0.5];
        let grads = crate::grid::shape_gradients(center[0], center[1], grid.h());
        let mut rhs = alloc::vec![0.0; n];
        for e in 0..grid.element_count() {
            let nodes = grid.element_nodes(e);
            let mut gu = [0.0; 2];
            for k in 0..4 {
                gu[0] += grads[k][0] * u[nodes[k]];
                gu[1] += grads[k][1] * u[nodes[k]];
            }
            let len = math::hypot(gu[0], gu[1]);
            if len == 0.0 {
                continue;
            }
            let x = [-gu[0] / len, -gu[1] / len];
            for g in 0..4 {
                for k in 0..4 {
                    let gk = gauss.grad[g][k];
                    rhs[nodes[k]] += gauss.weight * (x[0] * gk[0] + x[1] * gk[1]);
                }
            }
        }

        // Anchor the nodes of cut elements to their exact distance.
        let mut anchored: Vec<Option<f64>> = alloc::vec![None; n];
        for s in &poly.segments {
            for node in grid.element_nodes(s.element) {
                if anchored[node].is_none() {
                    anchored[node] = Some(distance_to_polyline(grid.node_coords(node), poly));
                }
            }
        }
        let mut reduced = alloc::vec![usize::MAX; n];
        let mut free = 0;
        for &node in &self.order {
            if anchored[node].is_none() {
                reduced[node] = free;
                free += 1;
            }
        }
        let mut d: Vec<f64> = anchored.iter().map(|a| a.unwrap_or(0.0)).collect();
        if free > 0 {
            let mut t = TripletBuilder::with_capacity(free, self.laplacian.nnz());
            let mut b = alloc::vec![0.0; free];
            for i in 0..n {
                let ri = reduced[i];
                if ri == usize::MAX {
                    continue;
                }
                b[ri] += rhs[i];
                for (j, v) in self.laplacian.row(i) {
                    match anchored[j] {
                        Some(dj) => b[ri] -= v * dj,
                        None => t.push(ri, reduced[j], v),
                    }
                }
            }
            // Free regions cut off from every anchor have no unique solution;
            // the contour touches every component of the grid, so this only
            // fails on degenerate input.
            let x = SkylineCholesky::factor(&t.build())?.solve(&b)?;
            for i in 0..n {
                if reduced[i] != usize::MAX {
                    d[i] = x[reduced[i]].max(0.0);
                }
            }
        }
        Ok(d)
    }
}

fn distance_to_polyline(p: [f64; 2], poly: &InterfacePolyline) -> f64 {
    poly.segments
        .iter()
        .map(|s| {
            let ab = [s.b[0] - s.a[0], s.b[1] - s.a[1]];
            let ap = [p[0] - s.a[0], p[1] - s.a[1]];
            let len2 = ab[0] * ab[0] + ab[1] * ab[1];
            let t = if len2 > 0.0 {
                ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            math::hypot(ap[0] - t * ab[0], ap[1] - t * ab[1])
        })
        .fold(f64::INFINITY, f64::min)
}

/// `P_Reg` with its gradient with respect to nodal `phi` (target frozen).
pub fn reg_penalty(
    grid: &Grid,
    phi: &NodalField,
    target: &NodalField,
    cfg: &RegConfig,
) -> Result<(f64, Vec<f64>)> {
    for f in [phi, target] {
        if f.len() != grid.node_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.node_count(),
                got: f.len(),
            });
        }
    }
    let gauss = grid.gauss();
    let volume = grid.area();
    let value_norm = cfg.phi_bnd * cfg.phi_bnd * volume;
    let mut value = 0.0;
    let mut grad = alloc::vec![0.0; grid.node_count()];
    for e in 0..grid.element_count() {
        let nodes = grid.element_nodes(e);
        let pv = phi.element_values(grid, e);
        let tv = target.element_values(grid, e);
        let diff: [f64; 4] = core::array::from_fn(|k| pv[k] - tv[k]);
        for g in 0..4 {
            let (wv, wg) = cfg.weights(gauss.interp(g, &tv));
            let dv = gauss.interp(g, &diff);
            let dg = gauss.interp_grad(g, &diff);
            value += gauss.weight
                * (wv * dv * dv / value_norm + wg * (dg[0] * dg[0] + dg[1] * dg[1]) / volume);
            for k in 0..4 {
                let gk = gauss.grad[g][k];
                grad[nodes[k]] += gauss.weight
                    * (2.0 * wv * dv * gauss.n[g][k] / value_norm
                        + 2.0 * wg * (dg[0] * gk[0] + dg[1] * gk[1]) / volume);
            }
        }
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_grid() -> Grid {
        Grid::new(120, 80, 0.5, [0.0, 0.0]).unwrap()
    }

    fn circle_sd(x: [f64; 2]) -> f64 {
        10.0 - math::hypot(x[0] - 30.0, x[1] - 20.0)
    }

    #[test]
    fn alpha_values() {
        let cfg = RegConfig::with_bounds(-1.25, 1.25);
        assert_eq!(cfg.alpha(0.0), 1.0);
        let a = cfg.alpha(cfg.phi_bnd);
        assert!((a - (-36.8f64).exp()).abs() < 1e-30);
        assert!((a - 1.04e-16).abs() < 0.01e-16);
    }

    #[test]
    fn heat_method_recovers_circle_distance() {
        let g = circle_grid();
        let heat = HeatMethod::new(&g, g.h() * g.h()).unwrap();
        let phi = NodalField::from_fn(&g, circle_sd);
        let wide = RegConfig::with_bounds(-50.0, 50.0);
        let target = heat.target_field(&phi, &wide).unwrap();
        let mut sum = 0.0;
        let mut count = 0;
        for n in 0..g.node_count() {
            let exact = circle_sd(g.node_coords(n));
            if exact.abs() < 5.0 {
                let e = target.values()[n] - exact;
                sum += e * e;
                count += 1;
            }
        }
        let rms = (sum / count as f64).sqrt();
        assert!(rms <= 0.25 * g.h(), "rms {rms}");

        // Unit gradient near the interface.
        let mut total = 0.0;
        let mut elems = 0;
        for e in 0..g.element_count() {
            if circle_sd(g.element_center(e)).abs() < 5.0 {
                let v = target.element_values(&g, e);
                let gr = crate::grid::shape_gradients(0.5, 0.5, g.h());
                let mut d = [0.0; 2];
                for k in 0..4 {
                    d[0] += gr[k][0] * v[k];
                    d[1] += gr[k][1] * v[k];
                }
                total += math::hypot(d[0], d[1]);
                elems += 1;
            }
        }
        let mean = total / elems as f64;
        assert!((0.9..=1.1).contains(&mean), "mean gradient {mean}");
    }

    #[test]
    fn truncation_and_fallback() {
        let g = Grid::new(40, 30, 0.5, [0.0, 0.0]).unwrap();
        let heat = HeatMethod::new(&g, 0.25).unwrap();
        let cfg = RegConfig::with_bounds(-1.25, 1.25);
        let phi = NodalField::from_fn(&g, |x| 4.0 - math::hypot(x[0] - 10.0, x[1] - 7.5));
        let t = heat.target_field(&phi, &cfg).unwrap();
        for (n, v) in t.values().iter().enumerate() {
            assert!(*v >= -1.25 && *v <= 1.25);
            let exact = 4.0 - math::hypot(g.node_coords(n)[0] - 10.0, g.node_coords(n)[1] - 7.5);
            if exact > 2.0 {
                assert_eq!(*v, 1.25);
            }
            if exact < -2.0 {
                assert_eq!(*v, -1.25);
            }
        }
        let full = heat.target_field(&NodalField::constant(&g, 1.0), &cfg).unwrap();
        assert!(full.values().iter().all(|&v| v == 1.25));
        let empty = heat.target_field(&NodalField::constant(&g, -0.3), &cfg).unwrap();
        assert!(empty.values().iter().all(|&v| v == -1.25));
    }

    #[test]
    fn penalty_examples() {
        let g = Grid::new(12, 8, 0.5, [0.0, 0.0]).unwrap();
        let cfg = RegConfig::with_bounds(-1.25, 1.25);
        let target = NodalField::from_fn(&g, |x| (0.3 * x[0] - 1.0).clamp(-1.25, 1.25));
        assert_eq!(reg_penalty(&g, &target, &target, &cfg).unwrap().0, 0.0);
        let c = 0.3;
        let shifted = NodalField::new(&g, target.values().iter().map(|v| v + c).collect()).unwrap();
        let only_value = RegConfig {
            w_grad: [0.0, 0.0],
            ..cfg
        };
        let (v, _) = reg_penalty(&g, &shifted, &target, &only_value).unwrap();
        let expected = c * c / (cfg.phi_bnd * cfg.phi_bnd);
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        let g = Grid::new(8, 6, 0.5, [0.0, 0.0]).unwrap();
        let cfg = RegConfig {
            w_phi: [1.0, 0.4],
            w_grad: [0.2, 1.0],
            ..RegConfig::with_bounds(-1.25, 1.25)
        };
        let target = NodalField::from_fn(&g, |x| (0.5 * x[0] - 1.0).clamp(-1.25, 1.25));
        let phi = NodalField::from_fn(&g, |x| 0.4 * (x[0] * 1.3).sin() + 0.1 * x[1]);
        let (v0, grad) = reg_penalty(&g, &phi, &target, &cfg).unwrap();
        assert!(v0 > 0.0);
        for i in 0..g.node_count() {
            let step = 1e-6;
            let mut p = phi.clone();
            p.values_mut()[i] += step;
            let up = reg_penalty(&g, &p, &target, &cfg).unwrap().0;
            p.values_mut()[i] -= 2.0 * step;
            let down = reg_penalty(&g, &p, &target, &cfg).unwrap().0;
            let fd = (up - down) / (2.0 * step);
            assert!((fd - grad[i]).abs() <= 1e-5 * fd.abs().max(1e-8), "{fd} vs {}", grad[i]);
        }
    }
}
