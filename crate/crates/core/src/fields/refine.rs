//! Exact lazy refinement of a two-parameter Brownian sheet inside grid cells.
//!
//! Inside cell `(i, j)` with local coordinates `(u, v) ∈ [0,1]²` the sheet is
//!
//! ```text
//! W = bilinear(corners) + Σ_{l<j} Col_{i,l}(u) + v·Col_{i,j}(u)
//!                       + Σ_{k<i} Row_{k,j}(v) + u·Row_{i,j}(v) + P_{i,j}(u, v)
//! ```
//!
//! where `Col`/`Row` are pinned Brownian bridges with variance
//! `area · x(1 − x)` carrying the part of each cell's noise mass that is not
//! explained by its total increment, and `P` is the pinned sheet of the cell.
//! Bridges are built by Lévy midpoint refinement and the pinned sheet by
//! recursive quadrisection: centre value, four arms, Coons blending of each
//! child's boundary. Every Gaussian is a hash of its position, so any point
//! can be evaluated in any order and the field is consistent across calls.

use rustc_hash::FxHashMap as HashMap;

use super::grid::Grid;
use crate::rng::{hash_words, keyed_normal};

/// Bits of resolution of local coordinates inside a cell.
pub const MAX_LEVEL: u32 = 40;
/// The local coordinate 1 in fixed point.
pub const ONE: u64 = 1 << MAX_LEVEL;

const COL: u64 = 1;
const ROW: u64 = 2;
const ARM: u64 = 3;
const CENTER: u64 = 4;

/// Sheet values on a 2-parameter grid plus the machinery to evaluate the same
/// sample at arbitrary dyadic points inside cells.
pub struct SheetRefiner<'a> {
    grid: &'a Grid,
    dim: usize,
    values: &'a [f64],
    key: u64,
    bridges: HashMap<(u64, u64), f64>,
    edge_sums: HashMap<(u64, u64), f64>,
}

impl<'a> SheetRefiner<'a> {
    /// `values` are the sheet's node values (`dim` per node); `key`
    /// identifies the sample and seeds all refinement noise.
    pub fn new(grid: &'a Grid, dim: usize, values: &'a [f64], key: u64) -> Self {
        assert_eq!(grid.n_params(), 2, "refinement is implemented for two-parameter grids");
        assert_eq!(values.len(), grid.n_nodes() * dim);
        SheetRefiner { grid, dim, values, key, bridges: HashMap::default(), edge_sums: HashMap::default() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn node(&self, i: usize, j: usize, k: usize) -> f64 {
        let n1 = self.grid.axis(1).len();
        self.values[(i * n1 + j) * self.dim + k]
    }

    fn area(&self, i: usize, j: usize) -> f64 {
        let (a0, a1) = (self.grid.axis(0), self.grid.axis(1));
        (a0[i + 1] - a0[i]) * (a1[j + 1] - a1[j])
    }

    /// Value of the pinned bridge `id` (variance `rate · x(1−x)`) at `pos / ONE`.
    fn bridge(&mut self, id: u64, rate: f64, pos: u64) -> f64 {
        if pos == 0 || pos >= ONE {
            return 0.0;
        }
        if let Some(&v) = self.bridges.get(&(id, pos)) {
            return v;
        }
        let tz = pos.trailing_zeros();
        let half = 1u64 << tz;
        let level = MAX_LEVEL - tz;
        let left = self.bridge(id, rate, pos - half);
        let right = self.bridge(id, rate, pos + half);
        let sd = (rate * 0.5f64.powi(level as i32) * 0.5).sqrt();
        let v = 0.5 * (left + right) + sd * keyed_normal(self.key, &[id, pos]);
        self.bridges.insert((id, pos), v);
        v
    }

    fn col(&mut self, i: usize, l: usize, k: usize, u: u64) -> f64 {
        let id = hash_words(self.key, &[COL, k as u64, i as u64, l as u64]);
        let rate = self.area(i, l);
        self.bridge(id, rate, u)
    }

    fn row(&mut self, kk: usize, j: usize, k: usize, v: u64) -> f64 {
        let id = hash_words(self.key, &[ROW, k as u64, kk as u64, j as u64]);
        let rate = self.area(kk, j);
        self.bridge(id, rate, v)
    }

    // Σ_{l<j} Col_{i,l}(u)
    fn bottom_sum(&mut self, i: usize, j: usize, k: usize, u: u64) -> f64 {
        if j == 0 || u == 0 || u >= ONE {
            return 0.0;
        }
        let key = (hash_words(0, &[COL, k as u64, i as u64, j as u64]), u);
        if let Some(&v) = self.edge_sums.get(&key) {
            return v;
        }
        let mut s = 0.0;
        for l in 0..j {
            s += self.col(i, l, k, u);
        }
        self.edge_sums.insert(key, s);
        s
    }

    // Σ_{k<i} Row_{k,j}(v)
    fn left_sum(&mut self, i: usize, j: usize, k: usize, v: u64) -> f64 {
        if i == 0 || v == 0 || v >= ONE {
            return 0.0;
        }
        let key = (hash_words(0, &[ROW, k as u64, i as u64, j as u64]), v);
        if let Some(&s) = self.edge_sums.get(&key) {
            return s;
        }
        let mut s = 0.0;
        for kk in 0..i {
            s += self.row(kk, j, k, v);
        }
        self.edge_sums.insert(key, s);
        s
    }

    // Pinned sheet of cell (i, j), coordinate k, at (u, v).
    fn pillow(&mut self, i: usize, j: usize, k: usize, u: u64, v: u64) -> f64 {
        if u == 0 || v == 0 || u >= ONE || v >= ONE {
            return 0.0;
        }
        let rate = self.area(i, j);
        let (mut u0, mut v0, mut side) = (0u64, 0u64, ONE);
        let mut level = 0u64;
        let mut acc = 0.0;
        loop {
            let half = side / 2;
            let (uc, vc) = (u0 + half, v0 + half);
            let delta = side as f64 / ONE as f64;
            let base = [k as u64, i as u64, j as u64, level, u0, v0];
            let c = (rate / 16.0).sqrt() * delta * keyed_normal(self.key, &[CENTER, base[0], base[1], base[2], base[3], base[4], base[5]]);
            let arm_rate = rate * delta * delta / 8.0;
            let scale = ONE / half;
            // arm 0/1: left/right horizontal; 2/3: down/up vertical; τ measured from the outer end
            let arm = |this: &mut Self, which: u64, tau_num: u64| -> f64 {
                let id = hash_words(this.key, &[ARM, base[0], base[1], base[2], base[3], base[4], base[5], which]);
                let tau = tau_num * scale;
                (tau as f64 / ONE as f64) * c + this.bridge(id, arm_rate, tau)
            };
            let (left, horiz_tau) = if u < uc { (true, u - u0) } else { (false, u0 + side - u) };
            let (bottom, vert_tau) = if v < vc { (true, v - v0) } else { (false, v0 + side - v) };
            if u == uc && v == vc {
                return acc + c;
            }
            if v == vc {
                return acc + arm(self, if left { 0 } else { 1 }, horiz_tau);
            }
            if u == uc {
                return acc + arm(self, if bottom { 2 } else { 3 }, vert_tau);
            }
            let a_h = arm(self, if left { 0 } else { 1 }, horiz_tau);
            let a_v = arm(self, if bottom { 2 } else { 3 }, vert_tau);
            let wx = horiz_tau as f64 / half as f64;
            let wy = vert_tau as f64 / half as f64;
            acc += wx * a_v + wy * a_h - wx * wy * c;
            if !left {
                u0 = uc;
            }
            if !bottom {
                v0 = vc;
            }
            side = half;
            level += 1;
        }
    }

    /// Sheet value at local point `(u, v) / ONE` of cell `(i, j)`, written to `out`.
    pub fn eval(&mut self, i: usize, j: usize, u: u64, v: u64, out: &mut [f64]) {
        let uf = u as f64 / ONE as f64;
        let vf = v as f64 / ONE as f64;
        for k in 0..self.dim {
            let bil = self.node(i, j, k) * (1.0 - uf) * (1.0 - vf)
                + self.node(i + 1, j, k) * uf * (1.0 - vf)
                + self.node(i, j + 1, k) * (1.0 - uf) * vf
                + self.node(i + 1, j + 1, k) * uf * vf;
            let mut w = bil;
            if u > 0 && u < ONE {
                w += self.bottom_sum(i, j, k, u) + vf * self.col(i, j, k, u);
            }
            if v > 0 && v < ONE {
                w += self.left_sum(i, j, k, v) + uf * self.row(i, j, k, v);
            }
            w += self.pillow(i, j, k, u, v);
            out[k] = w;
        }
    }

    /// Number of memoized values, for diagnostics.
    pub fn cache_len(&self) -> usize {
        self.bridges.len() + self.edge_sums.len()
    }
}

/// Fixed-point local coordinate of `x ∈ [0,1]` at `level` bits.
pub fn dyadic(num: u64, level: u32) -> u64 {
    num << (MAX_LEVEL - level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::simulate::{sheet_from_increments, sheet_increments};
    use crate::rng;

    #[test]
    fn nodes_are_reproduced() {
        let g = Grid::new(vec![vec![0.0, 0.5, 1.25, 2.0], vec![0.0, 1.0, 1.5]]).unwrap();
        let inc = sheet_increments(&g, 2, &mut rng::seeded(4));
        let w = sheet_from_increments(&g, 2, &inc);
        let mut r = SheetRefiner::new(&g, 2, &w, 99);
        let mut out = [0.0; 2];
        for i in 0..3 {
            for j in 0..2 {
                r.eval(i, j, 0, 0, &mut out);
                assert_eq!(out[0], w[(i * 3 + j) * 2]);
                r.eval(i, j, ONE, ONE, &mut out);
                assert!((out[1] - w[((i + 1) * 3 + j + 1) * 2 + 1]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn shared_edges_agree() {
        let g = Grid::uniform(2, 2.0, 3).unwrap();
        let inc = sheet_increments(&g, 1, &mut rng::seeded(5));
        let w = sheet_from_increments(&g, 1, &inc);
        let mut r = SheetRefiner::new(&g, 1, &w, 7);
        let (mut a, mut b) = ([0.0], [0.0]);
        for num in [1u64, 3, 5, 11] {
            let x = dyadic(num, 4);
            // top edge of (1,0) = bottom edge of (1,1)
            r.eval(1, 0, x, ONE, &mut a);
            r.eval(1, 1, x, 0, &mut b);
            assert!((a[0] - b[0]).abs() < 1e-12);
            // right edge of (0,2) = left edge of (1,2)
            r.eval(0, 2, ONE, x, &mut a);
            r.eval(1, 2, 0, x, &mut b);
            assert!((a[0] - b[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn refined_field_has_sheet_covariance() {
        // cell (1,1) of a 2x2 grid on [0,2]²: compare Var W and Cov at interior points
        let g = Grid::uniform(2, 2.0, 2).unwrap();
        let pts = [(dyadic(1, 1), dyadic(1, 1)), (dyadic(1, 2), dyadic(3, 3)), (dyadic(5, 3), dyadic(1, 2))];
        let n = 20_000;
        let mut samples = vec![[0.0; 3]; n];
        for (p, s) in samples.iter_mut().enumerate() {
            let inc = sheet_increments(&g, 1, &mut rng::path_rng(11, p as u64));
            let w = sheet_from_increments(&g, 1, &inc);
            let mut r = SheetRefiner::new(&g, 1, &w, rng::mix64(p as u64));
            let mut out = [0.0];
            for (q, &(u, v)) in pts.iter().enumerate() {
                r.eval(1, 1, u, v, &mut out);
                s[q] = out[0];
            }
        }
        let coord = |(u, v): (u64, u64)| [1.0 + u as f64 / ONE as f64, 1.0 + v as f64 / ONE as f64];
        for a in 0..3 {
            for b in a..3 {
                let (ta, tb) = (coord(pts[a]), coord(pts[b]));
                let exact = ta[0].min(tb[0]) * ta[1].min(tb[1]);
                let prods: Vec<f64> = samples.iter().map(|s| s[a] * s[b]).collect();
                let m = prods.iter().sum::<f64>() / n as f64;
                let sd = (prods.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64).sqrt() / (n as f64).sqrt();
                assert!((m - exact).abs() < 4.5 * sd, "pair ({a},{b}): {m} vs {exact} (se {sd})");
            }
        }
    }
}
