//! Nodal fields: design vectors, the linear cone filter, bilinear
//! interpolation, the smoothed Heaviside indicator and zero-contour extraction.

mod contour;
mod filter;

pub use contour::{extract_interface, InterfacePolyline, Segment};
pub(crate) use contour::element_cuts;
pub use filter::FilterOperator;

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{shape_functions, Grid};

/// Nodal optimization variables with box bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignVector {
    values: Vec<f64>,
    lower: f64,
    upper: f64,
}

impl DesignVector {
    pub fn new(values: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::param(
                "bounds",
                format!("lower bound {lower} must be below upper bound {upper}"),
            ));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= lower && **v <= upper))
        {
            return Err(Error::param(
                "values",
                format!("entry {i} = {v} violates bounds [{lower}, {upper}]"),
            ));
        }
        Ok(DesignVector {
            values,
            lower,
            upper,
        })
    }

    pub fn uniform(len: usize, value: f64, lower: f64, upper: f64) -> Result<Self> {
        Self::new(alloc::vec![value; len], lower, upper)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Replaces the values, clamping them into the bounds.
    pub fn set_clamped(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                got: values.len(),
            });
        }
        for (dst, &v) in self.values.iter_mut().zip(values) {
            *dst = v.clamp(self.lower, self.upper);
        }
        Ok(())
    }
}

/// Scalar field stored at the grid nodes and interpolated bilinearly.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        Ok(NodalField { values })
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        NodalField {
            values: alloc::vec![value; grid.node_count()],
        }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut([f64; 2]) -> f64) -> Self {
        NodalField {
            values: (0..grid.node_count()).map(|n| f(grid.node_coords(n))).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Corner values of one element in counter-clockwise order.
    #[inline]
    pub fn element_values(&self, grid: &Grid, element: usize) -> [f64; 4] {
        let n = grid.element_nodes(element);
        [
            self.values[n[0]],
            self.values[n[1]],
            self.values[n[2]],
            self.values[n[3]],
        ]
    }

    /// Bilinear interpolation at a point of the domain.
    pub fn eval(&self, grid: &Grid, x: [f64; 2]) -> Result<f64> {
        if self.values.len() != grid.node_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.node_count(),
                got: self.values.len(),
            });
        }
        let (e, local) = grid.locate(x)?;
        let n = shape_functions(local[0], local[1]);
        let v = self.element_values(grid, e);
        Ok(n[0] * v[0] + n[1] * v[1] + n[2] * v[2] + n[3] * v[3])
    }
}

/// C2 polynomial blend from 0 (at `phi <= -eps`) to 1 (at `phi >= eps`).
#[inline]
pub fn smoothed_heaviside(phi: f64, eps: f64) -> f64 {
    let x = phi / eps;
    if x <= -1.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let x2 = x * x;
        0.5 + x * (15.0 / 16.0 - x2 * (10.0 / 16.0 - x2 * (3.0 / 16.0)))
    }
}

/// Derivative of [`smoothed_heaviside`] with respect to `phi`.
#[inline]
pub fn smoothed_delta(phi: f64, eps: f64) -> f64 {
    let x = phi / eps;
    if x <= -1.0 || x >= 1.0 {
        0.0
    } else {
        let s = 1.0 - x * x;
        15.0 / (16.0 * eps) * s * s
    }
}

/// Derivative of [`smoothed_delta`] with respect to `phi`.
#[inline]
pub fn smoothed_delta_prime(phi: f64, eps: f64) -> f64 {
    let x = phi / eps;
    if x <= -1.0 || x >= 1.0 {
        0.0
    } else {
        -15.0 / (4.0 * eps * eps) * x * (1.0 - x * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn design_vector_enforces_bounds() {
        assert!(DesignVector::new(alloc::vec![0.0, 0.5, 1.0], 0.0, 1.0).is_ok());
        assert!(DesignVector::new(alloc::vec![0.0, 1.5], 0.0, 1.0).is_err());
        assert!(DesignVector::new(alloc::vec![0.5], 1.0, 1.0).is_err());
        let mut d = DesignVector::uniform(3, 0.2, -1.0, 1.0).unwrap();
        d.set_clamped(&[-3.0, 0.1, 4.0]).unwrap();
        assert_eq!(d.values(), &[-1.0, 0.1, 1.0]);
        assert!(d.set_clamped(&[0.0]).is_err());
    }

    #[test]
    fn interpolation_examples() {
        let g = Grid::new(1, 1, 1.0, [0.0, 0.0]).unwrap();
        let c = NodalField::constant(&g, 0.7);
        assert!((c.eval(&g, [0.3, 0.9]).unwrap() - 0.7).abs() < 1e-15);

        // Node order is row-major: (0,0), (1,0), (0,1), (1,1).
        let f = NodalField::new(&g, alloc::vec![1.0, 2.0, 4.0, 8.0]).unwrap();
        assert!((f.eval(&g, [0.5, 0.5]).unwrap() - 3.75).abs() < 1e-15);

        // Counter-clockwise corner values (0, 1, 0, 1) at local (0.25, 0.5):
        // xi(1-eta) + (1-xi)eta = 0.125 + 0.375.
        let f = NodalField::new(&g, alloc::vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!((f.eval(&g, [0.25, 0.5]).unwrap() - 0.5).abs() < 1e-15);

        assert!(f.eval(&g, [1.5, 0.5]).is_err());
        assert!(NodalField::new(&g, alloc::vec![0.0; 3]).is_err());
    }

    #[test]
    fn heaviside_values() {
        assert_eq!(smoothed_heaviside(0.0, 0.5), 0.5);
        assert_eq!(smoothed_heaviside(1.0, 0.5), 1.0);
        assert_eq!(smoothed_heaviside(-1.0, 0.5), 0.0);
        assert_eq!(smoothed_heaviside(-0.5, 0.5), 0.0);
        // 1/2 + 15/32 - 10/128 + 3/512
        assert!((smoothed_heaviside(0.25, 0.5) - 0.896_484_375).abs() < 1e-15);
        assert!((smoothed_heaviside(-0.25, 0.5) - (1.0 - 0.896_484_375)).abs() < 1e-15);
    }

    #[test]
    fn heaviside_derivatives_match_finite_differences() {
        let mut rng = rand::rngs::SmallRng::seed_from_u64(7);
        let eps = 0.8;
        for _ in 0..100 {
            let x: f64 = rng.random_range(-1.0..1.0) * eps;
            let step = 1e-6;
            let fd = (smoothed_heaviside(x + step, eps) - smoothed_heaviside(x - step, eps))
                / (2.0 * step);
            assert!((fd - smoothed_delta(x, eps)).abs() < 1e-6);
            let fd2 =
                (smoothed_delta(x + step, eps) - smoothed_delta(x - step, eps)) / (2.0 * step);
            assert!((fd2 - smoothed_delta_prime(x, eps)).abs() < 1e-6);
        }
    }

    #[test]
    fn heaviside_is_monotone() {
        let mut prev = 0.0;
        for k in 0..=400 {
            let x = -2.0 + 4.0 * k as f64 / 400.0;
            let v = smoothed_heaviside(x, 1.0);
            assert!(v >= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }
}
