//! Box-counting dimension of point clouds and of sheet ranges.

use rand::Rng;
use rand_distr::StandardNormal;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng;
use crate::stats::linear_fit;

/// Fewest points accepted by the estimator.
pub const MIN_POINTS: usize = 1000;

/// Which scales enter the slope fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandPolicy {
    pub drop_coarse: usize,
    pub drop_fine: usize,
}

impl Default for BandPolicy {
    fn default() -> Self {
        BandPolicy { drop_coarse: 2, drop_fine: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    /// Box sizes, decreasing.
    pub scales: Vec<f64>,
    pub counts: Vec<u64>,
    /// Scales used by the fit.
    pub fitted: Vec<bool>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub expected: Option<f64>,
    pub band: BandPolicy,
    /// `r_squared < 0.9`.
    pub unreliable: bool,
    pub n_points: u64,
}

/// Occupied boxes of several lattices, fed one point at a time.
pub struct BoxCounter {
    dim: usize,
    scales: Vec<f64>,
    boxes: Vec<FxHashSet<u128>>,
    n_points: u64,
}

fn box_key(x: &[f64], eps: f64) -> u128 {
    let mut lo = 0x243f_6a88_85a3_08d3u64;
    let mut hi = 0x1319_8a2e_0370_7344u64;
    for v in x {
        let c = (v / eps).floor() as i64 as u64;
        lo = rng::mix64(lo ^ c);
        hi = rng::mix64(hi.wrapping_add(c).rotate_left(17));
    }
    (u128::from(hi) << 64) | u128::from(lo)
}

impl BoxCounter {
    /// `scales` must be positive and strictly decreasing.
    pub fn new(dim: usize, scales: &[f64]) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be positive");
        }
        if scales.is_empty() || scales.iter().any(|s| !(*s > 0.0)) || scales.windows(2).any(|w| w[0] <= w[1]) {
            return invalid("scales must be positive and strictly decreasing");
        }
        Ok(BoxCounter { dim, scales: scales.to_vec(), boxes: vec![FxHashSet::default(); scales.len()], n_points: 0 })
    }

    pub fn add(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (set, &eps) in self.boxes.iter_mut().zip(&self.scales) {
            set.insert(box_key(x, eps));
        }
        self.n_points += 1;
    }

    pub fn n_points(&self) -> u64 {
        self.n_points
    }

    pub fn counts(&self) -> Vec<u64> {
        self.boxes.iter().map(|s| s.len() as u64).collect()
    }
}

/// Occupied-box counts of `points` (`dim` coordinates each) at each scale.
pub fn box_counts(points: &[f64], dim: usize, scales: &[f64]) -> Result<Vec<u64>> {
    let mut bc = BoxCounter::new(dim, scales)?;
    if points.len() % dim != 0 {
        return invalid("point array does not match the dimension");
    }
    if points.len() / dim < MIN_POINTS {
        return invalid(format!("box counting needs at least {MIN_POINTS} points"));
    }
    for p in points.chunks_exact(dim) {
        bc.add(p);
    }
    Ok(bc.counts())
}

/// Slope of `ln count` against `−ln ε` over the central band of scales.
pub fn fit_counts(
    scales: &[f64],
    counts: &[u64],
    band: BandPolicy,
    expected: Option<f64>,
    n_points: u64,
) -> Result<DimensionEstimate> {
    if scales.len() != counts.len() {
        return invalid("scales and counts differ in length");
    }
    let m = scales.len();
    if m < band.drop_coarse + band.drop_fine + 2 {
        return invalid(format!("{m} scales leave fewer than two after dropping the band edges"));
    }
    let fitted: Vec<bool> = (0..m).map(|k| k >= band.drop_coarse && k < m - band.drop_fine).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        (0..m).filter(|&k| fitted[k]).map(|k| (-scales[k].ln(), (counts[k] as f64).ln())).unzip();
    let fit = linear_fit(&xs, &ys).ok_or_else(|| crate::Error::InvalidArgument("degenerate box-count fit".into()))?;
    Ok(DimensionEstimate {
        scales: scales.to_vec(),
        counts: counts.to_vec(),
        fitted,
        slope: fit.slope,
        slope_stderr: fit.slope_std_err,
        r_squared: fit.r_squared,
        expected,
        band,
        unreliable: fit.r_squared < 0.9,
        n_points,
    })
}

pub fn estimate_dimension(
    points: &[f64],
    dim: usize,
    scales: &[f64],
    band: BandPolicy,
    expected: Option<f64>,
) -> Result<DimensionEstimate> {
    let counts = box_counts(points, dim, scales)?;
    fit_counts(scales, &counts, band, expected, (points.len() / dim) as u64)
}

/// Box counts of the range of a `d`-dimensional Brownian sheet over
/// `[a, b]²`, sampled on a `cells × cells` grid and streamed row by row.
pub fn sheet_range_counts(d: usize, a: f64, b: f64, cells: usize, scales: &[f64], seed: u64) -> Result<BoxCounter> {
    if !(0.0 < a && a < b) || cells == 0 || d == 0 {
        return invalid("need 0 < a < b, cells > 0 and d > 0");
    }
    let mut bc = BoxCounter::new(d, scales)?;
    let mut g = rng::seeded(seed);
    let h = (b - a) / cells as f64;
    let n = cells + 1;
    // the sheet on the left edge {a} × [a, b] and bottom edge, then rows
    let mut row = vec![0.0; n * d];
    let corner_sd = a;
    let mut corner = vec![0.0; d];
    for c in corner.iter_mut() {
        *c = corner_sd * g.sample::<f64, _>(StandardNormal);
    }
    // first row: W(a, s) for s on the grid, variance a·s
    row[..d].copy_from_slice(&corner);
    for j in 1..n {
        for k in 0..d {
            row[j * d + k] = row[(j - 1) * d + k] + (a * h).sqrt() * g.sample::<f64, _>(StandardNormal);
        }
    }
    for p in row.chunks_exact(d) {
        bc.add(p);
    }
    // W(t + h, s) = W(t, s) + (increment of the strip [t, t+h] × [0, s])
    let mut strip = vec![0.0; d];
    for _ in 1..n {
        for k in 0..d {
            strip[k] = (h * a).sqrt() * g.sample::<f64, _>(StandardNormal);
        }
        for j in 0..n {
            if j > 0 {
                for k in 0..d {
                    strip[k] += (h * h).sqrt() * g.sample::<f64, _>(StandardNormal);
                }
            }
            for k in 0..d {
                row[j * d + k] += strip[k];
            }
            bc.add(&row[j * d..(j + 1) * d]);
        }
    }
    Ok(bc)
}

/// Dimension of the Brownian-sheet range over `[a, b]²`.
#[allow(clippy::too_many_arguments)]
pub fn sheet_range_dimension(
    d: usize,
    a: f64,
    b: f64,
    cells: usize,
    scales: &[f64],
    band: BandPolicy,
    seed: u64,
) -> Result<DimensionEstimate> {
    let bc = sheet_range_counts(d, a, b, cells, scales, seed)?;
    fit_counts(scales, &bc.counts(), band, Some((d as f64).min(4.0)), bc.n_points())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_cells() {
        let pts: Vec<f64> = (0..10_000).map(|i| (i as f64 + 0.5) / 10_000.0).collect();
        let c = box_counts(&pts, 1, &[1.0 / 32.0]).unwrap();
        assert!((c[0] as i64 - 32).abs() <= 2);
    }

    #[test]
    fn square_lattice() {
        let mut pts = Vec::new();
        for i in 0..100 {
            for j in 0..100 {
                pts.push((i as f64 + 0.5) / 100.0);
                pts.push((j as f64 + 0.5) / 100.0);
            }
        }
        assert_eq!(box_counts(&pts, 2, &[0.1]).unwrap(), vec![100]);
    }

    #[test]
    fn rejects_small_clouds() {
        assert!(box_counts(&[0.0; 10], 1, &[0.1]).is_err());
    }
}
