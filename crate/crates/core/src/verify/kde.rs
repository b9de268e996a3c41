//! Gaussian product-kernel density estimates.

use rustc_hash::FxHashMap;

use crate::error::{invalid, Result};

/// Fewest samples accepted by the rule-of-thumb bandwidth.
pub const MIN_SAMPLES: usize = 100;

/// Kernels are truncated at this many bandwidths.
const CUTOFF: f64 = 6.0;

/// Gaussian KDE with a diagonal bandwidth.
pub struct Kde<'a> {
    dim: usize,
    samples: &'a [f64],
    bandwidth: Vec<f64>,
    cell: f64,
    buckets: FxHashMap<Vec<i64>, Vec<u32>>,
    norm: f64,
}

/// Scott's rule `σ̂_k n^{−1/(d+4)}`, times `factor`.
pub fn scott_bandwidth(samples: &[f64], dim: usize, factor: f64) -> Result<Vec<f64>> {
    let n = samples.len() / dim;
    if n < MIN_SAMPLES {
        return invalid(format!("{n} samples are too few for a density estimate (need {MIN_SAMPLES})"));
    }
    if !(factor > 0.0) {
        return invalid("bandwidth factor must be positive");
    }
    let scale = (n as f64).powf(-1.0 / (dim as f64 + 4.0)) * factor;
    let mut out = Vec::with_capacity(dim);
    for k in 0..dim {
        let mean = (0..n).map(|i| samples[i * dim + k]).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (samples[i * dim + k] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        if !(var > 0.0) {
            return invalid(format!("coordinate {k} of the sample is degenerate"));
        }
        out.push(var.sqrt() * scale);
    }
    Ok(out)
}

impl<'a> Kde<'a> {
    /// `samples` holds `dim` coordinates per sample.
    pub fn new(samples: &'a [f64], dim: usize, bandwidth: Vec<f64>) -> Result<Self> {
        if dim == 0 || samples.len() % dim != 0 || samples.is_empty() {
            return invalid("sample array does not match the dimension");
        }
        if bandwidth.len() != dim || bandwidth.iter().any(|h| !(*h > 0.0)) {
            return invalid("bandwidth must be positive in every coordinate");
        }
        let n = samples.len() / dim;
        let cell = CUTOFF * bandwidth.iter().cloned().fold(0.0, f64::max);
        let mut buckets: FxHashMap<Vec<i64>, Vec<u32>> = FxHashMap::default();
        for i in 0..n {
            let key: Vec<i64> = samples[i * dim..(i + 1) * dim].iter().map(|x| (x / cell).floor() as i64).collect();
            buckets.entry(key).or_default().push(i as u32);
        }
        let norm = 1.0
            / (n as f64 * bandwidth.iter().map(|h| h * (2.0 * std::f64::consts::PI).sqrt()).product::<f64>());
        Ok(Kde { dim, samples, bandwidth, cell, buckets, norm })
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        let base: Vec<i64> = x.iter().map(|v| (v / self.cell).floor() as i64).collect();
        let mut offset = vec![-1i64; d];
        let mut key = vec![0i64; d];
        let mut sum = 0.0;
        loop {
            for k in 0..d {
                key[k] = base[k] + offset[k];
            }
            if let Some(ids) = self.buckets.get(&key) {
                for &i in ids {
                    let y = &self.samples[i as usize * d..(i as usize + 1) * d];
                    let mut q = 0.0;
                    for k in 0..d {
                        let z = (x[k] - y[k]) / self.bandwidth[k];
                        q += z * z;
                    }
                    if q < CUTOFF * CUTOFF {
                        sum += (-0.5 * q).exp();
                    }
                }
            }
            let mut k = 0;
            loop {
                if k == d {
                    return sum * self.norm;
                }
                offset[k] += 1;
                if offset[k] <= 1 {
                    break;
                }
                offset[k] = -1;
                k += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn standard_normal_peak() {
        let mut g = crate::rng::seeded(3);
        let xs: Vec<f64> = (0..200_000).map(|_| g.sample(StandardNormal)).collect();
        let h = scott_bandwidth(&xs, 1, 1.0).unwrap();
        let kde = Kde::new(&xs, 1, h).unwrap();
        let peak = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((kde.eval(&[0.0]) / peak - 1.0).abs() < 0.02);
    }

    #[test]
    fn too_few_samples() {
        assert!(scott_bandwidth(&[0.0; 10], 1, 1.0).is_err());
    }
}
