use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::NodalField;
use crate::grid::Grid;

/// Row-normalized cone filter `w_ij = max(0, r - |X_i - X_j|)` in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOperator {
    radius: f64,
    offsets: Vec<usize>,
    columns: Vec<usize>,
    weights: Vec<f64>,
}

impl FilterOperator {
    pub fn new(grid: &Grid, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::param(
                "filter radius",
                format!("must be positive, got {radius}"),
            ));
        }
        let n = grid.node_count();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut columns = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for i in 0..n {
            let row_start = weights.len();
            for (j, d) in grid.neighbors_within(i, radius)? {
                columns.push(j);
                weights.push(radius - d);
            }
            let sum: f64 = weights[row_start..].iter().sum();
            for w in &mut weights[row_start..] {
                *w /= sum;
            }
            offsets.push(weights.len());
        }
        Ok(FilterOperator {
            radius,
            offsets,
            columns,
            weights,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn size(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Nonzero entries `(column, weight)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.columns[r.clone()]
            .iter()
            .copied()
            .zip(self.weights[r].iter().copied())
    }

    /// `W s`.
    pub fn apply(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.check(s.len())?;
        Ok((0..self.size())
            .map(|i| self.row(i).map(|(j, w)| w * s[j]).sum())
            .collect())
    }

    /// `W s` wrapped as a nodal field.
    pub fn apply_field(&self, grid: &Grid, s: &[f64]) -> Result<NodalField> {
        NodalField::new(grid, self.apply(s)?)
    }

    /// `W^T g`, the chain rule through the filter.
    pub fn apply_transpose(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.check(g.len())?;
        let mut out = alloc::vec![0.0; self.size()];
        for (i, &gi) in g.iter().enumerate() {
            if gi != 0.0 {
                for (j, w) in self.row(i) {
                    out[j] += w * gi;
                }
            }
        }
        Ok(out)
    }

    fn check(&self, len: usize) -> Result<()> {
        if len == self.size() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.size(),
                got: len,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense(grid: &Grid, r: f64) -> Vec<Vec<f64>> {
        let n = grid.node_count();
        let mut w = alloc::vec![alloc::vec![0.0; n]; n];
        for i in 0..n {
            let xi = grid.node_coords(i);
            for j in 0..n {
                let xj = grid.node_coords(j);
                let d = ((xi[0] - xj[0]).powi(2) + (xi[1] - xj[1]).powi(2)).sqrt();
                w[i][j] = (r - d).max(0.0);
            }
            let s: f64 = w[i].iter().sum();
            w[i].iter_mut().for_each(|v| *v /= s);
        }
        w
    }

    #[test]
    fn small_radius_is_identity() {
        let g = Grid::new(5, 4, 0.5, [0.0, 0.0]).unwrap();
        let f = FilterOperator::new(&g, 0.25).unwrap();
        let s: Vec<f64> = (0..g.node_count()).map(|i| i as f64).collect();
        assert_eq!(f.apply(&s).unwrap(), s);
    }

    #[test]
    fn rows_sum_to_one_and_support_matches_radius() {
        let g = Grid::new(8, 6, 0.5, [0.0, 0.0]).unwrap();
        let r = 1.6 * 0.5;
        let f = FilterOperator::new(&g, r).unwrap();
        for i in 0..g.node_count() {
            let s: f64 = f.row(i).map(|(_, w)| w).sum();
            assert!((s - 1.0).abs() < 1e-12);
            for (j, w) in f.row(i) {
                assert!(w > 0.0);
                let (a, b) = (g.node_coords(i), g.node_coords(j));
                assert!(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() < r);
            }
        }
    }

    #[test]
    fn two_node_hand_example() {
        // Nodes 0.5 apart with r = 0.8 get raw weights 0.8 (self) and 0.3. On a
        // 1x1 grid the corner also sees a second edge neighbour (0.3) and the
        // diagonal one (0.8 - 0.5 sqrt 2).
        let g = Grid::new(1, 1, 0.5, [0.0, 0.0]).unwrap();
        let f = FilterOperator::new(&g, 0.8).unwrap();
        let w_diag = 0.8 - 0.5 * core::f64::consts::SQRT_2;
        let total = 0.8 + 0.3 + 0.3 + w_diag;
        let s = [2.0, -1.0, 0.0, 0.0];
        let out = f.apply(&s).unwrap();
        assert!((out[0] - (0.8 * 2.0 + 0.3 * -1.0) / total).abs() < 1e-14);
        let row: Vec<(usize, f64)> = f.row(0).collect();
        let w = |k: usize| row.iter().find(|p| p.0 == k).unwrap().1;
        assert!((w(1) / w(0) - 0.3 / 0.8).abs() < 1e-14);
        assert!((w(3) - w_diag / total).abs() < 1e-14);
    }

    #[test]
    fn spike_matches_dense_oracle() {
        let g = Grid::new(6, 6, 0.5, [0.0, 0.0]).unwrap();
        let r = 1.6 * 0.5;
        let f = FilterOperator::new(&g, r).unwrap();
        let w = dense(&g, r);
        let c = g.node_index(3, 3);
        let mut s = alloc::vec![0.0; g.node_count()];
        s[c] = 1.0;
        let out = f.apply(&s).unwrap();
        let nonzero = out.iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 9);
        for i in 0..g.node_count() {
            assert!((out[i] - w[i][c]).abs() < 1e-15);
        }
    }

    #[test]
    fn transpose_matches_dense_oracle() {
        let g = Grid::new(5, 3, 1.0, [0.0, 0.0]).unwrap();
        let f = FilterOperator::new(&g, 2.2).unwrap();
        let w = dense(&g, 2.2);
        let v: Vec<f64> = (0..g.node_count()).map(|i| (i as f64).sin()).collect();
        let out = f.apply_transpose(&v).unwrap();
        for j in 0..g.node_count() {
            let expected: f64 = (0..g.node_count()).map(|i| w[i][j] * v[i]).sum();
            assert!((out[j] - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let g = Grid::new(2, 2, 1.0, [0.0, 0.0]).unwrap();
        assert!(FilterOperator::new(&g, 0.0).is_err());
        let f = FilterOperator::new(&g, 1.5).unwrap();
        assert!(f.apply(&[1.0, 2.0]).is_err());
        assert!(f.apply_transpose(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn filter_is_linear_and_bounded(
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            seed in prop::collection::vec(-2.5f64..2.5, 42),
            other in prop::collection::vec(0.0f64..1.0, 42),
        ) {
            let g = Grid::new(6, 5, 0.5, [0.0, 0.0]).unwrap();
            let f = FilterOperator::new(&g, 0.8).unwrap();
            let ws = f.apply(&seed).unwrap();
            let wt = f.apply(&other).unwrap();
            let mix: Vec<f64> = seed.iter().zip(&other).map(|(s, t)| a * s + b * t).collect();
            let wm = f.apply(&mix).unwrap();
            for i in 0..wm.len() {
                prop_assert!((wm[i] - (a * ws[i] + b * wt[i])).abs() < 1e-12);
            }
            let lo = seed.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = seed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in ws {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
            let c = f.apply(&alloc::vec![0.4; 42]).unwrap();
            prop_assert!(c.iter().all(|v| (v - 0.4).abs() < 1e-12));
        }
    }
}
