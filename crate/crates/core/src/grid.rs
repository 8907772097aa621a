//! Structured quadrilateral grid.
//!
//! Nodes are numbered row by row, `x` running fastest:
//! node `(i, j)` has index `j * (nx + 1) + i` and sits at `origin + h * (i, j)`.
//! Element `(i, j)` has index `j * nx + i`; its corners are listed
//! counter-clockwise starting at the lower-left node.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Abscissa of the 2-point Gauss rule mapped to `[0, 1]`.
const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // 0.5 / sqrt(3)

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    h: f64,
    origin: [f64; 2],
}

/// Side of the rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, h: f64, origin: [f64; 2]) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidGrid(format!(
                "element counts must be positive, got {nx}x{ny}"
            )));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "element size must be positive, got {h}"
            )));
        }
        if !origin[0].is_finite() || !origin[1].is_finite() {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Grid { nx, ny, h, origin })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn element_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn width(&self) -> f64 {
        self.nx as f64 * self.h
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.h
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Length of the outer boundary of the domain.
    pub fn boundary_length(&self) -> f64 {
        2.0 * (self.width() + self.height())
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn node_lattice(&self, node: usize) -> (usize, usize) {
        (node % (self.nx + 1), node / (self.nx + 1))
    }

    #[inline]
    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        let (i, j) = self.node_lattice(node);
        [
            self.origin[0] + self.h * i as f64,
            self.origin[1] + self.h * j as f64,
        ]
    }

    pub fn check_node(&self, node: usize) -> Result<()> {
        if node < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                index: node,
                count: self.node_count(),
            })
        }
    }

    #[inline]
    pub fn element_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn element_lattice(&self, element: usize) -> (usize, usize) {
        (element % self.nx, element / self.nx)
    }

    #[inline]
    pub fn element_nodes(&self, element: usize) -> [usize; 4] {
        let (i, j) = self.element_lattice(element);
        let n0 = self.node_index(i, j);
        let n3 = self.node_index(i, j + 1);
        [n0, n0 + 1, n3 + 1, n3]
    }

    pub fn element_center(&self, element: usize) -> [f64; 2] {
        let (i, j) = self.element_lattice(element);
        [
            self.origin[0] + self.h * (i as f64 + 0.5),
            self.origin[1] + self.h * (j as f64 + 0.5),
        ]
    }

    /// Whether the element has an edge on the outer boundary.
    pub fn element_on_boundary(&self, element: usize) -> bool {
        let (i, j) = self.element_lattice(element);
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// Edge-adjacent elements.
    pub fn element_neighbors(&self, element: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.element_lattice(element);
        let candidates = [
            (i > 0).then(|| self.element_index(i - 1, j)),
            (i + 1 < self.nx).then(|| self.element_index(i + 1, j)),
            (j > 0).then(|| self.element_index(i, j - 1)),
            (j + 1 < self.ny).then(|| self.element_index(i, j + 1)),
        ];
        candidates.into_iter().flatten()
    }

    /// Elements sharing the node (one to four of them).
    pub fn node_elements(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.node_lattice(node);
        let mut out = [None; 4];
        let mut k = 0;
        for (di, dj) in [(0usize, 0usize), (1, 0), (1, 1), (0, 1)] {
            if i >= di && j >= dj && i - di < self.nx && j - dj < self.ny {
                out[k] = Some(self.element_index(i - di, j - dj));
                k += 1;
            }
        }
        out.into_iter().flatten()
    }

    /// Nodes lying on one side of the domain, ordered along it.
    pub fn side_nodes(&self, side: Side) -> Vec<usize> {
        match side {
            Side::Bottom => (0..=self.nx).map(|i| self.node_index(i, 0)).collect(),
            Side::Top => (0..=self.nx).map(|i| self.node_index(i, self.ny)).collect(),
            Side::Left => (0..=self.ny).map(|j| self.node_index(0, j)).collect(),
            Side::Right => (0..=self.ny).map(|j| self.node_index(self.nx, j)).collect(),
        }
    }

    /// Nodes listed along the shorter axis first, which keeps the envelope of
    /// nodal matrices narrow.
    pub fn band_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.node_count());
        if self.nx <= self.ny {
            out.extend(0..self.node_count());
        } else {
            for i in 0..=self.nx {
                for j in 0..=self.ny {
                    out.push(self.node_index(i, j));
                }
            }
        }
        out
    }

    /// All nodes `j` with `|X_i - X_j| < radius`, the node itself included.
    pub fn neighbors_within(&self, node: usize, radius: f64) -> Result<Vec<(usize, f64)>> {
        self.check_node(node)?;
        if !(radius > 0.0) {
            return Err(Error::param("radius", format!("must be positive, got {radius}")));
        }
        let (i, j) = self.node_lattice(node);
        let reach = math::floor(radius / self.h) as usize;
        let i0 = i.saturating_sub(reach);
        let j0 = j.saturating_sub(reach);
        let i1 = (i + reach).min(self.nx);
        let j1 = (j + reach).min(self.ny);
        let xi = self.node_coords(node);
        let mut out = Vec::with_capacity((i1 - i0 + 1) * (j1 - j0 + 1));
        for jj in j0..=j1 {
            for ii in i0..=i1 {
                let other = self.node_index(ii, jj);
                let xj = self.node_coords(other);
                let d = math::hypot(xi[0] - xj[0], xi[1] - xj[1]);
                if d < radius {
                    out.push((other, d));
                }
            }
        }
        Ok(out)
    }

    /// Element containing `x` and the local coordinates `(xi, eta)` in `[0, 1]^2`.
    ///
    /// Points on shared edges are assigned to the element with the larger index.
    pub fn locate(&self, x: [f64; 2]) -> Result<(usize, [f64; 2])> {
        let tol = 1e-12 * self.h;
        let u = (x[0] - self.origin[0]) / self.h;
        let v = (x[1] - self.origin[1]) / self.h;
        let (w, hgt) = (self.nx as f64, self.ny as f64);
        if !(u >= -tol && v >= -tol && u <= w + tol && v <= hgt + tol) {
            return Err(Error::OutsideDomain { x: x[0], y: x[1] });
        }
        let i = (math::floor(u).max(0.0) as usize).min(self.nx - 1);
        let j = (math::floor(v).max(0.0) as usize).min(self.ny - 1);
        let xi = (u - i as f64).clamp(0.0, 1.0);
        let eta = (v - j as f64).clamp(0.0, 1.0);
        Ok((self.element_index(i, j), [xi, eta]))
    }

    /// Element-level 2x2 Gauss table for this grid's element size.
    pub fn gauss(&self) -> GaussTable {
        GaussTable::new(self.h)
    }
}

/// Bilinear shape functions at local coordinates in `[0, 1]^2`.
#[inline]
pub fn shape_functions(xi: f64, eta: f64) -> [f64; 4] {
    [
        (1.0 - xi) * (1.0 - eta),
        xi * (1.0 - eta),
        xi * eta,
        (1.0 - xi) * eta,
    ]
}

/// Physical gradients of the bilinear shape functions on a square element of size `h`.
#[inline]
pub fn shape_gradients(xi: f64, eta: f64, h: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - eta) / h, -(1.0 - xi) / h],
        [(1.0 - eta) / h, -xi / h],
        [eta / h, xi / h],
        [-eta / h, (1.0 - xi) / h],
    ]
}

/// Shape function values and gradients at the four Gauss points of a square element.
#[derive(Debug, Clone, Copy)]
pub struct GaussTable {
    pub local: [[f64; 2]; 4],
    pub n: [[f64; 4]; 4],
    pub grad: [[[f64; 2]; 4]; 4],
    /// Quadrature weight including the Jacobian (`h^2 / 4`).
    pub weight: f64,
}

impl GaussTable {
    pub fn new(h: f64) -> Self {
        let a = 0.5 - GAUSS_OFFSET;
        let b = 0.5 + GAUSS_OFFSET;
        let local = [[a, a], [b, a], [b, b], [a, b]];
        let mut n = [[0.0; 4]; 4];
        let mut grad = [[[0.0; 2]; 4]; 4];
        for (g, p) in local.iter().enumerate() {
            n[g] = shape_functions(p[0], p[1]);
            grad[g] = shape_gradients(p[0], p[1], h);
        }
        GaussTable {
            local,
            n,
            grad,
            weight: 0.25 * h * h,
        }
    }

    /// Interpolates nodal element values at Gauss point `g`.
    #[inline]
    pub fn interp(&self, g: usize, v: &[f64; 4]) -> f64 {
        self.n[g][0] * v[0] + self.n[g][1] * v[1] + self.n[g][2] * v[2] + self.n[g][3] * v[3]
    }

    /// Gradient of the interpolant at Gauss point `g`.
    #[inline]
    pub fn interp_grad(&self, g: usize, v: &[f64; 4]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for k in 0..4 {
            out[0] += self.grad[g][k][0] * v[k];
            out[1] += self.grad[g][k][1] * v[k];
        }
        out
    }
}
