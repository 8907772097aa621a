use alloc::vec::Vec;

use crate::field::{element_cuts, smoothed_delta, NodalField};
use crate::grid::Grid;
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub struct Perimeter {
    /// Marching-squares interface length over the boundary length.
    pub value: f64,
    pub interface_length: f64,
    /// Gradient of `value` with respect to nodal `phi`.
    pub gradient: Vec<f64>,
}

/// Normalized length of the piecewise-linear zero contour and its gradient.
///
/// Each crossing point moves along its edge with `t = v_k / (v_k - v_l)`, so
/// the length is smooth in `phi` as long as no node changes sign.
pub fn perimeter_penalty(grid: &Grid, phi: &NodalField) -> Perimeter {
    let boundary = grid.boundary_length();
    let mut length = 0.0;
    let mut gradient = alloc::vec![0.0; grid.node_count()];
    for e in 0..grid.element_count() {
        let v = phi.element_values(grid, e);
        let Some(cuts) = element_cuts(&v) else {
            continue;
        };
        let nodes = grid.element_nodes(e);
        let x: [[f64; 2]; 4] = core::array::from_fn(|k| grid.node_coords(nodes[k]));
        let point = |k: usize| {
            let l = (k + 1) % 4;
            let t = cuts.t[k].expect("cut edge");
            [
                x[k][0] + t * (x[l][0] - x[k][0]),
                x[k][1] + t * (x[l][1] - x[k][1]),
            ]
        };
        for (p, q) in cuts.pairs.into_iter().flatten() {
            let (a, b) = (point(p), point(q));
            let d = [b[0] - a[0], b[1] - a[1]];
            let len = math::hypot(d[0], d[1]);
            length += len;
            if len == 0.0 {
                continue;
            }
            // dL/dt along each edge, then dt/dv for both edge corners.
            for (edge, sign) in [(p, -1.0), (q, 1.0)] {
                let l = (edge + 1) % 4;
                let dir = [x[l][0] - x[edge][0], x[l][1] - x[edge][1]];
                let dl_dt = sign * (d[0] * dir[0] + d[1] * dir[1]) / len;
                let (vk, vl) = (v[edge], v[l]);
                let den = (vk - vl) * (vk - vl);
                gradient[nodes[edge]] += dl_dt * (-vl / den) / boundary;
                gradient[nodes[l]] += dl_dt * (vk / den) / boundary;
            }
        }
    }
    Perimeter {
        value: length / boundary,
        interface_length: length,
        gradient,
    }
}

/// Diffuse interface measure `int delta_eps(phi) |grad phi| dV` with `eps = h`,
/// normalized like [`perimeter_penalty`].
pub fn smeared_perimeter(grid: &Grid, phi: &NodalField) -> f64 {
    let gauss = grid.gauss();
    let eps = grid.h();
    let mut total = 0.0;
    for e in 0..grid.element_count() {
        let v = phi.element_values(grid, e);
        if v.iter().all(|&p| p >= eps) || v.iter().all(|&p| p <= -eps) {
            continue;
        }
        for g in 0..4 {
            let d = smoothed_delta(gauss.interp(g, &v), eps);
            let gr = gauss.interp_grad(g, &v);
            total += gauss.weight * d * math::hypot(gr[0], gr[1]);
        }
    }
    total / grid.boundary_length()
}
