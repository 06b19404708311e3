//! Regular discretization of the probability simplex with barycentric
//! interpolation over the containing cell of the simplicial subdivision.
//!
//! Grid points are all vectors of the form `k / resolution` with integer
//! compositions `k` summing to `resolution`, so every point lies on the
//! simplex exactly in integer arithmetic. Interpolation weights are always
//! non-negative and sum to one, which keeps any operator that reads values
//! through the grid a non-expansion in the sup norm.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Discretized belief simplex.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeliefGrid {
    /// Subdivisions per axis.
    pub resolution: usize,
    /// Dimension of the simplex points (number of groups).
    pub dim: usize,
    /// Integer compositions summing to `resolution`, lexicographic order.
    compositions: Vec<Vec<u32>>,
    /// Float coordinates `compositions / resolution`.
    points: Vec<Vec<f64>>,
    #[serde(skip)]
    index: std::sync::OnceLock<HashMap<Vec<u32>, usize>>,
}

impl PartialEq for BeliefGrid {
    fn eq(&self, other: &Self) -> bool {
        self.resolution == other.resolution && self.compositions == other.compositions
    }
}

impl BeliefGrid {
    /// Builds the grid for `dim`-dimensional beliefs at the given resolution.
    pub fn new(dim: usize, resolution: usize) -> Self {
        assert!(dim >= 1, "belief dimension must be at least 1");
        assert!(resolution >= 1, "grid resolution must be at least 1");
        let mut compositions = Vec::new();
        let mut current = vec![0u32; dim];
        enumerate_compositions(resolution as u32, 0, &mut current, &mut compositions);
        let points = compositions
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&k| k as f64 / resolution as f64)
                    .collect::<Vec<f64>>()
            })
            .collect();
        BeliefGrid {
            resolution,
            dim,
            compositions,
            points,
            index: std::sync::OnceLock::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, idx: usize) -> &[f64] {
        &self.points[idx]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().map(|p| p.as_slice())
    }

    pub fn composition(&self, idx: usize) -> &[u32] {
        &self.compositions[idx]
    }

    fn index_map(&self) -> &HashMap<Vec<u32>, usize> {
        self.index.get_or_init(|| {
            self.compositions
                .iter()
                .enumerate()
                .map(|(i, c)| (c.clone(), i))
                .collect()
        })
    }

    /// Index of the grid point with all mass on `coord`.
    pub fn vertex_index(&self, coord: usize) -> usize {
        let mut c = vec![0u32; self.dim];
        c[coord] = self.resolution as u32;
        *self
            .index_map()
            .get(&c)
            .expect("vertex is always a grid point")
    }

    /// Index of an exact grid composition, if the point lies on the grid.
    pub fn exact_index(&self, weights: &[f64]) -> Option<usize> {
        let k = self.resolution as f64;
        let mut comp = Vec::with_capacity(self.dim);
        for &w in weights {
            let scaled = w * k;
            let rounded = scaled.round();
            if (scaled - rounded).abs() > 1e-9 {
                return None;
            }
            comp.push(rounded as u32);
        }
        if comp.iter().map(|&c| c as u64).sum::<u64>() != self.resolution as u64 {
            return None;
        }
        self.index_map().get(&comp).copied()
    }

    /// Barycentric weights of `weights` over the containing cell, as
    /// `(grid_index, weight)` pairs with non-negative weights summing to 1.
    pub fn interpolate(&self, weights: &[f64]) -> Vec<(usize, f64)> {
        assert_eq!(weights.len(), self.dim);
        if self.dim == 1 {
            return vec![(0, 1.0)];
        }
        let k = self.resolution as f64;

        // Cumulative coordinates v_i = K * sum_{j >= i} w_j, non-increasing,
        // with v_0 pinned to K exactly.
        let mut v = vec![0.0f64; self.dim];
        v[0] = k;
        let mut tail = 0.0;
        for i in (1..self.dim).rev() {
            tail += weights[i].max(0.0);
            v[i] = (tail * k).min(k).max(0.0);
        }
        for i in 1..self.dim {
            if v[i] > v[i - 1] {
                v[i] = v[i - 1];
            }
        }

        let mut base = vec![0i64; self.dim];
        let mut frac = vec![0.0f64; self.dim];
        base[0] = self.resolution as i64;
        for i in 1..self.dim {
            let f = v[i].floor();
            base[i] = f as i64;
            frac[i] = v[i] - f;
            if base[i] > base[i - 1] {
                base[i] = base[i - 1];
                frac[i] = 0.0;
            }
        }

        // Fractional coordinates sorted descending (ties by index) drive the
        // walk through the containing simplex of the Kuhn subdivision.
        let mut order: Vec<usize> = (1..self.dim).collect();
        order.sort_by(|&a, &b| frac[b].partial_cmp(&frac[a]).unwrap().then(a.cmp(&b)));

        let mut vertices = Vec::with_capacity(self.dim);
        let mut cumulative = base.clone();
        vertices.push(cumulative.clone());
        for &i in &order {
            cumulative[i] += 1;
            vertices.push(cumulative.clone());
        }

        let mut lambdas = Vec::with_capacity(self.dim);
        lambdas.push(1.0 - frac[order[0]]);
        for w in order.windows(2) {
            lambdas.push(frac[w[0]] - frac[w[1]]);
        }
        lambdas.push(frac[*order.last().unwrap()]);

        let index_map = self.index_map();
        let mut out = Vec::with_capacity(self.dim);
        for (vertex, lambda) in vertices.iter().zip(&lambdas) {
            if *lambda <= 1e-15 {
                continue;
            }
            // Convert cumulative coordinates back to a composition.
            let mut comp = Vec::with_capacity(self.dim);
            for i in 0..self.dim {
                let next = if i + 1 < self.dim { vertex[i + 1] } else { 0 };
                let c = vertex[i] - next;
                debug_assert!(c >= 0, "invalid cell vertex {vertex:?}");
                comp.push(c.max(0) as u32);
            }
            let idx = *index_map
                .get(&comp)
                .unwrap_or_else(|| panic!("cell vertex {comp:?} missing from grid"));
            out.push((idx, *lambda));
        }
        // Merge duplicates produced by zero fractional parts.
        out.sort_by_key(|&(i, _)| i);
        out.dedup_by(|a, b| {
            if a.0 == b.0 {
                b.1 += a.1;
                true
            } else {
                false
            }
        });
        out
    }

    /// Interpolated read of a per-grid-point table.
    pub fn gather(&self, table: &[f64], weights: &[f64]) -> f64 {
        self.interpolate(weights)
            .into_iter()
            .map(|(idx, w)| w * table[idx])
            .sum()
    }
}

fn enumerate_compositions(
    remaining: u32,
    coord: usize,
    current: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
) {
    if coord == current.len() - 1 {
        current[coord] = remaining;
        out.push(current.clone());
        return;
    }
    for k in 0..=remaining {
        current[coord] = k;
        enumerate_compositions(remaining - k, coord + 1, current, out);
    }
}
