//! Sparse symmetric linear algebra: triplet assembly into compressed rows, an
//! envelope (skyline) Cholesky factorization and Jacobi-preconditioned CG.
//!
//! The envelope solver needs a band-friendly unknown ordering; callers number
//! unknowns along the shorter grid axis.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Coordinate-format accumulator. Duplicate entries are summed.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        TripletBuilder {
            n,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        TripletBuilder {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries
            .sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut offsets = alloc::vec![0usize; self.n + 1];
        let mut columns: Vec<usize> = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                columns.push(c);
                values.push(v);
                offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.n {
            offsets[i + 1] += offsets[i];
        }
        CsrMatrix {
            n: self.n,
            offsets,
            columns,
            values,
        }
    }
}

/// Square sparse matrix in compressed-row storage with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    offsets: Vec<usize>,
    columns: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.columns[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.offsets[i]..self.offsets[i + 1];
        match self.columns[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        Ok((0..self.n)
            .map(|i| self.row(i).map(|(j, a)| a * x[j]).sum())
            .collect())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            self.row(i)
                .all(|(j, a)| (a - self.get(j, i)).abs() <= tol * (1.0 + a.abs()))
        })
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Lower-triangular envelope Cholesky factor `A = L L^T`.
///
/// Row `i` of `L` is stored densely from its first structural nonzero column
/// up to the diagonal.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    /// Factors the lower triangle of a symmetric positive definite matrix.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.size();
        let mut first = Vec::with_capacity(n);
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            let f = a.row(i).map(|(j, _)| j).next().unwrap_or(i).min(i);
            first.push(f);
            start.push(start[i] + (i - f + 1));
        }
        let mut data = alloc::vec![0.0; start[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[start[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let row_i = start[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let (head, tail) = data.split_at_mut(row_i);
                let lj = &head[start[j] + k0 - fj..start[j] + j - fj];
                let li = &tail[k0 - fi..j - fi];
                let dot: f64 = li.iter().zip(lj).map(|(a, b)| a * b).sum();
                let diag_j = head[start[j + 1] - 1];
                tail[j - fi] = (tail[j - fi] - dot) / diag_j;
            }
            let row = &mut data[row_i..start[i + 1]];
            let (off, diag) = row.split_at_mut(i - fi);
            let pivot = diag[0] - off.iter().map(|v| v * v).sum::<f64>();
            if !(pivot > 0.0) {
                return Err(Error::NotPositiveDefinite { row: i, pivot });
            }
            diag[0] = math::sqrt(pivot);
        }
        Ok(SkylineCholesky { first, start, data })
    }

    pub fn size(&self) -> usize {
        self.first.len()
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.size();
        check_len(n, b.len())?;
        let mut x = b.to_vec();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let dot: f64 = row[..i - fi].iter().zip(&x[fi..i]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - dot) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            x[i] /= row[i - fi];
            let xi = x[i];
            for (k, l) in row[..i - fi].iter().enumerate() {
                x[fi + k] -= l * xi;
            }
        }
        Ok(x)
    }
}

/// Result of an iterative solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients with a diagonal preconditioner, starting from zero.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<CgOutcome> {
    let n = a.size();
    check_len(n, b.len())?;
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::NotPositiveDefinite { row: i, pivot: d })
            }
        })
        .collect::<Result<_>>()?;
    let b_norm = norm(b);
    let mut x = alloc::vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut residual = 1.0;
    for it in 1..=max_iter {
        let ap = a.mul_vec(&p)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite { row: it, pivot: pap });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        residual = norm(&r) / b_norm;
        if residual <= tol {
            return Ok(CgOutcome {
                x,
                iterations: it,
                relative_residual: residual,
            });
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// 1D Laplacian plus a shift, with a few long-range couplings.
    fn test_matrix(n: usize) -> CsrMatrix {
        let mut t = TripletBuilder::new(n);
        for i in 0..n {
            t.push(i, i, 2.5);
            if i + 1 < n {
                t.push(i, i + 1, -1.0);
                t.push(i + 1, i, -1.0);
            }
            if i + 7 < n && i % 3 == 0 {
                t.push(i, i + 7, 0.2);
                t.push(i + 7, i, 0.2);
                // duplicate to exercise summation
                t.push(i, i, 0.1);
            }
        }
        t.build()
    }

    fn dense(a: &CsrMatrix) -> Vec<Vec<f64>> {
        let n = a.size();
        let mut m = alloc::vec![alloc::vec![0.0; n]; n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                m[i][j] = v;
            }
        }
        m
    }

    #[test]
    fn triplets_are_summed_and_sorted() {
        let mut t = TripletBuilder::new(3);
        t.push(2, 0, 1.0);
        t.push(0, 1, 2.0);
        t.push(2, 0, 3.0);
        t.push(1, 1, 5.0);
        let a = t.build();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(2, 0), 4.0);
        assert_eq!(a.get(0, 1), 2.0);
        assert_eq!(a.get(0, 0), 0.0);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0]).unwrap(), [2.0, 5.0, 4.0]);
    }

    #[test]
    fn cholesky_solves_against_dense_residual() {
        let a = test_matrix(40);
        assert!(a.is_symmetric(0.0));
        let chol = SkylineCholesky::factor(&a).unwrap();
        let mut rng = rand::rngs::SmallRng::seed_from_u64(3);
        let b: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = chol.solve(&b).unwrap();
        let m = dense(&a);
        for i in 0..40 {
            let ax: f64 = (0..40).map(|j| m[i][j] * x[j]).sum();
            assert!((ax - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut t = TripletBuilder::new(2);
        t.push(0, 0, 1.0);
        t.push(0, 1, 2.0);
        t.push(1, 0, 2.0);
        t.push(1, 1, 1.0);
        let err = SkylineCholesky::factor(&t.build()).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { row: 1, .. }));
    }

    #[test]
    fn pcg_agrees_with_direct() {
        let a = test_matrix(60);
        let b: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin()).collect();
        let direct = SkylineCholesky::factor(&a).unwrap().solve(&b).unwrap();
        let cg = pcg(&a, &b, 1e-12, 500).unwrap();
        assert!(cg.relative_residual <= 1e-12);
        for (x, y) in cg.x.iter().zip(&direct) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!(matches!(
            pcg(&a, &b, 1e-14, 2),
            Err(Error::NoConvergence { iterations: 2, .. })
        ));
        assert_eq!(pcg(&a, &[0.0; 60], 1e-9, 10).unwrap().iterations, 0);
    }

    #[test]
    fn size_mismatch_is_reported() {
        let a = test_matrix(5);
        assert!(a.mul_vec(&[1.0]).is_err());
        assert!(SkylineCholesky::factor(&a).unwrap().solve(&[1.0]).is_err());
    }
}
