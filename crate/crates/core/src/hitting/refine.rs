//! Branch and bound on the distance from a path to a target over a window,
//! evaluating the path between grid nodes with the exact sheet refinement.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::source::AffineForm;
use crate::capacity::CompactSet;
use crate::fields::refine::{SheetRefiner, ONE};
use crate::fields::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Deviations beyond `z` standard deviations per coordinate are ignored
    /// when bounding a square from below.
    pub z: f64,
    /// A square is dropped once it cannot improve the best distance by more
    /// than this fraction.
    pub rel_tol: f64,
    /// Distances at or below this count as zero (hitting a set).
    pub abs_tol: f64,
    /// Maximum number of quadrisections of a grid cell.
    pub max_depth: u32,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { z: 4.0, rel_tol: 1e-2, abs_tol: 1e-4, max_depth: 30 }
    }
}

struct Square {
    lb: f64,
    i: usize,
    j: usize,
    u0: u64,
    v0: u64,
    side: u64,
    depth: u32,
    corners: Vec<f64>,
}

impl PartialEq for Square {
    fn eq(&self, other: &Self) -> bool {
        self.lb == other.lb
    }
}
impl Eq for Square {}
impl PartialOrd for Square {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Square {
    // smallest lower bound first
    fn cmp(&self, other: &Self) -> Ordering {
        other.lb.total_cmp(&self.lb)
    }
}

/// Work statistics of one search.
#[derive(Clone, Copy, Debug, Default)]
pub struct SearchStats {
    pub squares: usize,
    pub evaluations: usize,
    pub max_depth: u32,
}

/// Minimum over the window `[a,b]²` of the distance from `X_t = form(W_t)` to
/// `target`.
///
/// `refiner` must wrap the same `grid` and `sheet`; it may be shared between
/// calls on the same path. Returns early with any value `≤ stop_below`; values above `ignore_above`
/// are not refined, so a result above it only says the minimum is there too.
#[allow(clippy::too_many_arguments)]
pub fn min_distance(
    refiner: &mut SheetRefiner<'_>,
    grid: &Grid,
    sheet: &[f64],
    form: &AffineForm,
    window: (f64, f64),
    target: &CompactSet,
    stop_below: f64,
    ignore_above: f64,
    cfg: &RefineConfig,
) -> (f64, SearchStats) {
    let d = form.x0.len();
    let (a0, a1) = (grid.axis(0), grid.axis(1));
    let r0 = grid.nodes_in(0, window.0, window.1);
    let r1 = grid.nodes_in(1, window.0, window.1);
    let n1 = a1.len();
    let mut stats = SearchStats::default();
    let mut x = vec![0.0; d];
    let f = |x: &[f64]| target.distance(x);
    let node_x = |i: usize, j: usize, out: &mut [f64]| {
        form.apply(&sheet[(i * n1 + j) * d..(i * n1 + j + 1) * d], a0[i], a1[j], out);
    };
    let mut best = f64::INFINITY;
    for i in r0.clone() {
        for j in r1.clone() {
            node_x(i, j, &mut x);
            best = best.min(f(&x));
        }
    }
    if best <= stop_below || r0.len() < 2 || r1.len() < 2 {
        return (best, stats);
    }
    let z_slack = cfg.z * (d as f64).sqrt() * form.sigma_norm;
    let mut proj = vec![0.0; d];
    let mut normal = vec![0.0; d];
    let mut lower = |corners: &[f64], i: usize, j: usize, u0: u64, v0: u64, side: u64| -> f64 {
        let dt = a0[i + 1] - a0[i];
        let ds = a1[j + 1] - a1[j];
        let delta = side as f64 / ONE as f64;
        let t_hi = a0[i] + (u0 + side) as f64 / ONE as f64 * dt;
        let s_hi = a1[j] + (v0 + side) as f64 / ONE as f64 * ds;
        let (ea, ec) = (delta * dt, delta * ds);
        let sd = 0.5 * (t_hi * ec).sqrt() + 0.5 * (s_hi * ea).sqrt() + 0.25 * (ea * ec).sqrt();

        // 1-Lipschitz bound from the nearest corner
        let mut fmin = f64::INFINITY;
        let mut arg = 0;
        for c in 0..4 {
            let v = f(&corners[c * d..(c + 1) * d]);
            if v < fmin {
                fmin = v;
                arg = c;
            }
        }
        let mut spread: f64 = 0.0;
        for c in 0..4 {
            let dist: f64 =
                (0..d).map(|k| (corners[c * d + k] - corners[arg * d + k]).powi(2)).sum::<f64>().sqrt();
            spread = spread.max(dist);
        }
        let lipschitz = fmin - spread - z_slack * sd;

        // supporting half-spaces of each convex component; the bilinear part
        // is linear along each, so its minimum sits at a corner
        let mut planar = f64::INFINITY;
        for prim in target.components() {
            let mut near = 0;
            let mut near_d = f64::INFINITY;
            for c in 0..4 {
                let v = prim.distance(&corners[c * d..(c + 1) * d]);
                if v < near_d {
                    near_d = v;
                    near = c;
                }
            }
            if near_d <= 0.0 {
                return lipschitz.min(0.0);
            }
            let xr = &corners[near * d..(near + 1) * d];
            prim.project(xr, &mut proj);
            for k in 0..d {
                normal[k] = (xr[k] - proj[k]) / near_d;
            }
            let mut lin = f64::INFINITY;
            for c in 0..4 {
                let v: f64 = (0..d).map(|k| (corners[c * d + k] - proj[k]) * normal[k]).sum();
                lin = lin.min(v);
            }
            // ‖σᵀn‖
            let mut sn = 0.0;
            for l in 0..d {
                let col: f64 = (0..d).map(|k| form.sigma[k * d + l] * normal[k]).sum();
                sn += col * col;
            }
            planar = planar.min(lin - cfg.z * sn.sqrt() * sd);
            if planar <= lipschitz {
                break;
            }
        }
        lipschitz.max(planar)
    };

    let mut heap = BinaryHeap::new();
    for i in r0.start..r0.end - 1 {
        for j in r1.start..r1.end - 1 {
            let mut corners = vec![0.0; 4 * d];
            // corner order: (0,0), (1,0), (0,1), (1,1)
            node_x(i, j, &mut corners[0..d]);
            node_x(i + 1, j, &mut corners[d..2 * d]);
            node_x(i, j + 1, &mut corners[2 * d..3 * d]);
            node_x(i + 1, j + 1, &mut corners[3 * d..4 * d]);
            let lb = lower(&corners, i, j, 0, 0, ONE);
            if lb < ignore_above && lb < best * (1.0 - cfg.rel_tol) {
                heap.push(Square { lb, i, j, u0: 0, v0: 0, side: ONE, depth: 0, corners });
            }
        }
    }

    let mut w = vec![0.0; d];
    while let Some(sq) = heap.pop() {
        if sq.lb >= ignore_above || sq.lb >= best * (1.0 - cfg.rel_tol) {
            break;
        }
        stats.squares += 1;
        if sq.depth >= cfg.max_depth {
            continue;
        }
        let h = sq.side / 2;
        let dt = a0[sq.i + 1] - a0[sq.i];
        let ds = a1[sq.j + 1] - a1[sq.j];
        // 3x3 lattice of the square; the four corners are known
        let mut pts = vec![0.0; 9 * d];
        let known = [(0, 0), (2, 0), (0, 2), (2, 2)];
        for (c, &(p, q)) in known.iter().enumerate() {
            pts[(q * 3 + p) * d..(q * 3 + p + 1) * d].copy_from_slice(&sq.corners[c * d..(c + 1) * d]);
        }
        for &(p, q) in &[(1usize, 0usize), (0, 1), (1, 1), (2, 1), (1, 2)] {
            let u = sq.u0 + p as u64 * h;
            let v = sq.v0 + q as u64 * h;
            refiner.eval(sq.i, sq.j, u, v, &mut w);
            let t = a0[sq.i] + u as f64 / ONE as f64 * dt;
            let s = a1[sq.j] + v as f64 / ONE as f64 * ds;
            form.apply(&w, t, s, &mut x);
            stats.evaluations += 1;
            let val = f(&x);
            if val < best {
                best = val;
            }
            pts[(q * 3 + p) * d..(q * 3 + p + 1) * d].copy_from_slice(&x);
        }
        if best <= stop_below {
            break;
        }
        for &(p, q) in &[(0usize, 0usize), (1, 0), (0, 1), (1, 1)] {
            let mut corners = vec![0.0; 4 * d];
            for (c, &(dp, dq)) in [(0, 0), (1, 0), (0, 1), (1, 1)].iter().enumerate() {
                let idx = (q + dq) * 3 + (p + dp);
                corners[c * d..(c + 1) * d].copy_from_slice(&pts[idx * d..(idx + 1) * d]);
            }
            let u0 = sq.u0 + p as u64 * h;
            let v0 = sq.v0 + q as u64 * h;
            let lb = lower(&corners, sq.i, sq.j, u0, v0, h);
            if lb < ignore_above && lb < best * (1.0 - cfg.rel_tol) {
                stats.max_depth = stats.max_depth.max(sq.depth + 1);
                heap.push(Square { lb, i: sq.i, j: sq.j, u0, v0, side: h, depth: sq.depth + 1, corners });
            }
        }
    }
    (best, stats)
}
