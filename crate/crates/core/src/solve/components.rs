use alloc::vec::Vec;

use crate::field::NodalField;
use crate::grid::Grid;

/// Edge-connected material regions of a level-set design.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    /// Component id per element; `None` for void elements.
    pub labels: Vec<Option<usize>>,
    /// Per component: true when none of its nodes carries a support.
    pub floating: Vec<bool>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.floating.len()
    }

    pub fn floating_count(&self) -> usize {
        self.floating.iter().filter(|f| **f).count()
    }
}

fn center_value(grid: &Grid, phi: &NodalField, e: usize) -> f64 {
    let v = phi.element_values(grid, e);
    0.25 * (v[0] + v[1] + v[2] + v[3])
}

/// Flood fill over elements selected by `pick`; returns labels and the component count.
fn flood(grid: &Grid, pick: impl Fn(usize) -> bool) -> (Vec<Option<usize>>, usize) {
    let mut labels = alloc::vec![None; grid.element_count()];
    let mut count = 0;
    let mut stack = Vec::new();
    for seed in 0..grid.element_count() {
        if labels[seed].is_some() || !pick(seed) {
            continue;
        }
        labels[seed] = Some(count);
        stack.push(seed);
        while let Some(e) = stack.pop() {
            for nb in grid.element_neighbors(e) {
                if labels[nb].is_none() && pick(nb) {
                    labels[nb] = Some(count);
                    stack.push(nb);
                }
            }
        }
        count += 1;
    }
    (labels, count)
}

/// Material components (element-center `phi > 0`) and their support status.
pub fn connected_components(grid: &Grid, phi: &NodalField, fixed_nodes: &[bool]) -> Components {
    let (labels, count) = flood(grid, |e| center_value(grid, phi, e) > 0.0);
    let mut floating = alloc::vec![true; count];
    for (e, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            if grid.element_nodes(e).iter().any(|&n| fixed_nodes[n]) {
                floating[*c] = false;
            }
        }
    }
    Components { labels, floating }
}

/// Nodes of all free-floating components, ascending.
pub fn spring_nodes(grid: &Grid, comps: &Components) -> Vec<usize> {
    let mut mark = alloc::vec![false; grid.node_count()];
    for (e, l) in comps.labels.iter().enumerate() {
        if let Some(c) = l {
            if comps.floating[*c] {
                for n in grid.element_nodes(e) {
                    mark[n] = true;
                }
            }
        }
    }
    (0..grid.node_count()).filter(|&n| mark[n]).collect()
}

/// Number of void regions (element-center `phi <= 0`) that do not touch the outer boundary.
pub fn void_components(grid: &Grid, phi: &NodalField) -> usize {
    let (labels, count) = flood(grid, |e| center_value(grid, phi, e) <= 0.0);
    let mut open = alloc::vec![false; count];
    for (e, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            if grid.element_on_boundary(e) {
                open[*c] = true;
            }
        }
    }
    open.iter().filter(|o| !**o).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    struct UnionFind {
        parent: Vec<usize>,
    }

    impl UnionFind {
        fn new(n: usize) -> Self {
            UnionFind {
                parent: (0..n).collect(),
            }
        }
        fn find(&mut self, x: usize) -> usize {
            let mut r = x;
            while self.parent[r] != r {
                r = self.parent[r];
            }
            let mut y = x;
            while self.parent[y] != r {
                let next = self.parent[y];
                self.parent[y] = r;
                y = next;
            }
            r
        }
        fn union(&mut self, a: usize, b: usize) {
            let (ra, rb) = (self.find(a), self.find(b));
            if ra != rb {
                self.parent[ra] = rb;
            }
        }
    }

    fn oracle_count(nx: usize, ny: usize, solid: &[bool]) -> usize {
        let mut uf = UnionFind::new(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let e = j * nx + i;
                if !solid[e] {
                    continue;
                }
                if i + 1 < nx && solid[e + 1] {
                    uf.union(e, e + 1);
                }
                if j + 1 < ny && solid[e + nx] {
                    uf.union(e, e + nx);
                }
            }
        }
        let mut roots: Vec<usize> = (0..nx * ny).filter(|&e| solid[e]).map(|e| uf.find(e)).collect();
        roots.sort();
        roots.dedup();
        roots.len()
    }

    #[test]
    fn single_supported_blob() {
        let g = Grid::new(10, 10, 1.0, [0.0, 0.0]).unwrap();
        let phi = NodalField::constant(&g, 1.0);
        let mut fixed = alloc::vec![false; g.node_count()];
        fixed[0] = true;
        let c = connected_components(&g, &phi, &fixed);
        assert_eq!(c.count(), 1);
        assert_eq!(c.floating_count(), 0);
        assert!(spring_nodes(&g, &c).is_empty());
    }

    #[test]
    fn two_blobs_one_supported() {
        let g = Grid::new(10, 4, 1.0, [0.0, 0.0]).unwrap();
        let phi = NodalField::from_fn(&g, |x| if (x[0] - 5.0).abs() < 1.5 { -1.0 } else { 1.0 });
        let mut fixed = alloc::vec![false; g.node_count()];
        fixed[0] = true;
        let c = connected_components(&g, &phi, &fixed);
        assert_eq!(c.count(), 2);
        assert_eq!(c.floating_count(), 1);
        let springs = spring_nodes(&g, &c);
        assert!(springs.iter().all(|&n| g.node_coords(n)[0] >= 5.0));
        assert!(!springs.is_empty());
    }

    #[test]
    fn labels_match_union_find_on_random_fields() {
        let g = Grid::new(30, 30, 1.0, [0.0, 0.0]).unwrap();
        let mut rng = rand::rngs::SmallRng::seed_from_u64(2024);
        let fixed = alloc::vec![false; g.node_count()];
        for _ in 0..50 {
            let phi = NodalField::from_fn(&g, |_| rng.random_range(-1.0..1.0));
            let c = connected_components(&g, &phi, &fixed);
            let solid: Vec<bool> = (0..g.element_count()).map(|e| center_value(&g, &phi, e) > 0.0).collect();
            assert_eq!(c.count(), oracle_count(30, 30, &solid));
            for e in 0..g.element_count() {
                assert_eq!(c.labels[e].is_some(), solid[e]);
                if let Some(l) = c.labels[e] {
                    for nb in g.element_neighbors(e) {
                        if let Some(m) = c.labels[nb] {
                            assert_eq!(l, m);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn checkerboard_nodes() {
        let g = Grid::new(6, 6, 1.0, [0.0, 0.0]).unwrap();
        let phi = NodalField::from_fn(&g, |x| if (x[0] + x[1]) as i64 % 2 == 0 { 1.0 } else { -0.9 });
        let fixed = alloc::vec![false; g.node_count()];
        let c = connected_components(&g, &phi, &fixed);
        let solid: Vec<bool> = (0..g.element_count()).map(|e| center_value(&g, &phi, e) > 0.0).collect();
        assert_eq!(c.count(), oracle_count(6, 6, &solid));
    }

    #[test]
    fn interior_holes_are_counted() {
        let g = Grid::new(20, 10, 1.0, [0.0, 0.0]).unwrap();
        assert_eq!(void_components(&g, &NodalField::constant(&g, 1.0)), 0);
        let holes = NodalField::from_fn(&g, |x| {
            let d1 = ((x[0] - 5.0).powi(2) + (x[1] - 5.0).powi(2)).sqrt();
            let d2 = ((x[0] - 14.0).powi(2) + (x[1] - 5.0).powi(2)).sqrt();
            d1.min(d2) - 2.0
        });
        assert_eq!(void_components(&g, &holes), 2);
        // A notch cut from the boundary is not a hole.
        let notch = NodalField::from_fn(&g, |x| if x[1] < 3.0 && (x[0] - 10.0).abs() < 2.0 { -1.0 } else { 1.0 });
        assert_eq!(void_components(&g, &notch), 0);
    }
}
