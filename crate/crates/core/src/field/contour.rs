//! Zero-isocontour extraction by marching squares.

use alloc::vec::Vec;

use crate::field::NodalField;
use crate::grid::Grid;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub element: usize,
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl Segment {
    pub fn length(&self) -> f64 {
        math::hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InterfacePolyline {
    pub segments: Vec<Segment>,
    pub total_length: f64,
}

impl InterfacePolyline {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

#[inline]
fn inside(v: f64) -> bool {
    v > 0.0
}

/// Piecewise-linear zero contour of a nodal field, one or two segments per cut element.
///
/// A node counts as material when its value is strictly positive. Saddle
/// elements are split according to the sign of the element-center value.
pub fn extract_interface(grid: &Grid, phi: &NodalField) -> InterfacePolyline {
    let mut segments = Vec::new();
    for e in 0..grid.element_count() {
        element_segments(grid, phi, e, &mut segments);
    }
    let total_length = segments.iter().map(Segment::length).sum();
    InterfacePolyline {
        segments,
        total_length,
    }
}

/// Edge crossings of one element: `t[k]` is the crossing parameter along edge
/// `k` (corner `k` to corner `k+1`) and `pairs` lists the edges joined by a segment.
pub(crate) struct ElementCuts {
    pub t: [Option<f64>; 4],
    pub pairs: [Option<(usize, usize)>; 2],
}

pub(crate) fn element_cuts(v: &[f64; 4]) -> Option<ElementCuts> {
    let status = [inside(v[0]), inside(v[1]), inside(v[2]), inside(v[3])];
    if status.iter().all(|&s| s == status[0]) {
        return None;
    }
    let mut t = [None; 4];
    for k in 0..4 {
        let l = (k + 1) % 4;
        if status[k] != status[l] {
            t[k] = Some(v[k] / (v[k] - v[l]));
        }
    }
    let cut: Vec<usize> = (0..4).filter(|&k| t[k].is_some()).collect();
    let pairs = if cut.len() == 2 {
        [Some((cut[0], cut[1])), None]
    } else {
        // Saddle: corners alternate. If the center agrees with corner 0, corners
        // 1 and 3 are cut off; otherwise corners 0 and 2 are.
        let center = 0.25 * (v[0] + v[1] + v[2] + v[3]);
        if inside(center) == status[0] {
            [Some((0, 1)), Some((2, 3))]
        } else {
            [Some((3, 0)), Some((1, 2))]
        }
    };
    Some(ElementCuts { t, pairs })
}

pub(crate) fn element_segments(grid: &Grid, phi: &NodalField, e: usize, out: &mut Vec<Segment>) {
    let v = phi.element_values(grid, e);
    let Some(cuts) = element_cuts(&v) else {
        return;
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
        out.push(Segment {
            element: e,
            a: point(p),
            b: point(q),
        });
    }
}
