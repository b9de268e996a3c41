//! Occupation-functional estimates of first and second moment densities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fields::FieldPath;
use crate::hitting::{PathSampler, Window};
use crate::kernels::RieszKernel;
use crate::stats::MeanEstimate;

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let pi = std::f64::consts::PI;
    let (mut v, start) = if d % 2 == 0 { (1.0, 0) } else { (2.0, 1) };
    let mut k = start;
    while k < d {
        k += 2;
        v *= 2.0 * pi / k as f64;
    }
    v
}

/// Trapezoid weights of the window nodes, with their multi-indices.
fn window_weights(path: &FieldPath, window: &Window) -> Result<Vec<(Vec<usize>, f64)>> {
    let ranges = window.node_ranges(&path.grid)?;
    let mut axis_w: Vec<Vec<f64>> = Vec::new();
    for (k, r) in ranges.iter().enumerate() {
        let ax = path.grid.axis(k);
        let nodes: Vec<usize> = r.clone().collect();
        let mut w = vec![0.0; nodes.len()];
        for m in 0..nodes.len().saturating_sub(1) {
            let h = ax[nodes[m + 1]] - ax[nodes[m]];
            w[m] += h / 2.0;
            w[m + 1] += h / 2.0;
        }
        axis_w.push(w);
    }
    let shape: Vec<usize> = ranges.iter().map(|r| r.len()).collect();
    let total: usize = shape.iter().product();
    Ok((0..total)
        .map(|flat| {
            let local = crate::fields::Grid::unflatten(&shape, flat);
            let idx: Vec<usize> = local.iter().zip(&ranges).map(|(l, r)| r.start + l).collect();
            let w: f64 = local.iter().enumerate().map(|(k, &l)| axis_w[k][l]).product();
            (idx, w)
        })
        .collect())
}

fn occupation(path: &FieldPath, weights: &[(Vec<usize>, f64)], x: &[f64], h: f64) -> f64 {
    let h2 = h * h;
    weights
        .iter()
        .filter(|(idx, _)| path.value_at(idx).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= h2)
        .map(|(_, w)| w)
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationEstimate {
    pub x: Vec<f64>,
    pub h: f64,
    pub value: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_paths: u64,
}

/// `E[∫_window 1{‖X_t − x‖ ≤ h} dt] / vol(B(x, h))`.
pub fn occupation_density(
    sampler: &PathSampler,
    x: &[f64],
    h: f64,
    window: &Window,
    n_paths: u64,
    seed: u64,
) -> Result<OccupationEstimate> {
    if !(h > 0.0) {
        return invalid("h must be positive");
    }
    if x.len() != sampler.dim() {
        return invalid("point has the wrong dimension");
    }
    if n_paths < 2 {
        return invalid("need at least two paths");
    }
    let vol = unit_ball_volume(x.len()) * h.powi(x.len() as i32);
    let values: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let path = sampler.sample(seed, i)?;
            let w = window_weights(&path, window)?;
            Ok(occupation(&path, &w, x, h) / vol)
        })
        .collect::<Result<_>>()?;
    let m = MeanEstimate::from_samples(&values);
    let (ci_low, ci_high) = m.ci95();
    Ok(OccupationEstimate { x: x.to_vec(), h, value: m.mean, std_err: m.std_err, ci_low, ci_high, n_paths })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub separation: f64,
    pub joint: f64,
    pub std_err: f64,
    pub kernel: f64,
    pub ratio: f64,
    /// Paths that occupied both balls.
    pub joint_paths: u64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub rows: Vec<PairRow>,
    pub h: f64,
    /// Largest ratio over unflagged pairs.
    pub c2_hat: f64,
    /// Largest over smallest ratio among unflagged pairs.
    pub spread: f64,
    pub n_paths: u64,
}

/// Pairs with fewer jointly occupying paths are flagged.
pub const MIN_JOINT_PATHS: u64 = 10;

/// Second-moment densities `∬ p_{X_t,X_s}(x, y) dt ds`, divided by `k(x − y)`.
pub fn pair_occupation_ratio(
    sampler: &PathSampler,
    pairs: &[(Vec<f64>, Vec<f64>)],
    h: f64,
    window: &Window,
    n_paths: u64,
    kernel: &RieszKernel,
    seed: u64,
) -> Result<PairReport> {
    if !(h > 0.0) || n_paths < 2 {
        return invalid("need h > 0 and at least two paths");
    }
    let d = sampler.dim();
    for (x, y) in pairs {
        if x.len() != d || y.len() != d {
            return invalid("pair point has the wrong dimension");
        }
        if x == y {
            return invalid("pair points must be distinct");
        }
    }
    let vol = unit_ball_volume(d) * h.powi(d as i32);
    let per_path: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let path = sampler.sample(seed, i)?;
            let w = window_weights(&path, window)?;
            Ok(pairs.iter().map(|(x, y)| occupation(&path, &w, x, h) * occupation(&path, &w, y, h) / (vol * vol)).collect())
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (p, (x, y)) in pairs.iter().enumerate() {
        let vals: Vec<f64> = per_path.iter().map(|v| v[p]).collect();
        let joint_paths = vals.iter().filter(|v| **v > 0.0).count() as u64;
        let m = MeanEstimate::from_samples(&vals);
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let k = kernel.eval(&diff);
        rows.push(PairRow {
            x: x.clone(),
            y: y.clone(),
            separation: diff.iter().map(|v| v * v).sum::<f64>().sqrt(),
            joint: m.mean,
            std_err: m.std_err,
            kernel: k,
            ratio: m.mean / k,
            joint_paths,
            flagged: joint_paths < MIN_JOINT_PATHS,
        });
    }
    let kept: Vec<f64> = rows.iter().filter(|r| !r.flagged).map(|r| r.ratio).collect();
    let c2_hat = kept.iter().cloned().fold(f64::NAN, f64::max);
    let spread = c2_hat / kept.iter().cloned().fold(f64::NAN, f64::min);
    Ok(PairReport { rows, h, c2_hat, spread, n_paths })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes() {
        let pi = std::f64::consts::PI;
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - pi).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 * pi / 3.0).abs() < 1e-12);
        assert!((unit_ball_volume(5) - 8.0 * pi * pi / 15.0).abs() < 1e-12);
    }
}
