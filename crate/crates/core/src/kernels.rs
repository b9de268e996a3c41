//! Newtonian β kernels, potentials and energies of atomic measures.

use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::error::{Error, Result};

/// The kernel `k_β` on `R^d`.
///
/// `‖x‖^{-β}` for `0 < β < d`, `ln(3M/‖x‖)` for `β = 0` and the constant 1
/// for `β < 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RieszKernel {
    beta: f64,
    dim: usize,
    log_scale: f64,
}

impl RieszKernel {
    pub fn new(beta: f64, dim: usize, log_scale: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::InvalidKernel(format!("beta must be finite, got {beta}")));
        }
        if dim == 0 {
            return Err(Error::InvalidKernel("dimension must be positive".into()));
        }
        if beta >= dim as f64 {
            return Err(Error::InvalidKernel(format!(
                "beta = {beta} must be below the dimension {dim}"
            )));
        }
        if !(log_scale > 0.0 && log_scale.is_finite()) {
            return Err(Error::InvalidKernel(format!("log scale must be positive, got {log_scale}")));
        }
        Ok(RieszKernel { beta, dim, log_scale })
    }

    /// Power or constant kernel; the log scale is irrelevant unless `beta == 0`.
    pub fn power(beta: f64, dim: usize) -> Result<Self> {
        Self::new(beta, dim, 1.0)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// Kernel as a function of the distance `r = ‖x‖`.
    #[inline]
    pub fn eval_norm(&self, r: f64) -> f64 {
        if self.beta < 0.0 {
            1.0
        } else if self.beta == 0.0 {
            if r == 0.0 {
                f64::INFINITY
            } else {
                (3.0 * self.log_scale / r).ln()
            }
        } else if r == 0.0 {
            f64::INFINITY
        } else {
            r.powf(-self.beta)
        }
    }

    /// Kernel as a function of the squared distance; avoids a square root
    /// for the common exponents.
    #[inline]
    pub fn eval_sq(&self, r2: f64) -> f64 {
        if self.beta == 1.0 {
            if r2 == 0.0 {
                f64::INFINITY
            } else {
                1.0 / r2.sqrt()
            }
        } else if self.beta == 2.0 {
            1.0 / r2
        } else if self.beta > 0.0 {
            if r2 == 0.0 {
                f64::INFINITY
            } else {
                r2.powf(-0.5 * self.beta)
            }
        } else {
            self.eval_norm(r2.sqrt())
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.eval_sq(x.iter().map(|v| v * v).sum())
    }

    /// Mean of the kernel over a centered cube of side `h`.
    pub fn self_energy(&self, h: f64) -> f64 {
        if self.beta < 0.0 {
            return 1.0;
        }
        if h <= 0.0 {
            return f64::INFINITY;
        }
        if self.beta == 0.0 {
            (3.0 * self.log_scale).ln() - h.ln() - mean_log_norm_unit_cube(self.dim)
        } else {
            h.powf(-self.beta) * mean_power_unit_cube(self.beta, self.dim)
        }
    }
}

/// How the diagonal of an atomic energy is treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalMode {
    Include,
    Exclude,
    CellRegularized,
}

impl FromStr for DiagonalMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "include" => Ok(DiagonalMode::Include),
            "exclude" => Ok(DiagonalMode::Exclude),
            "cell_regularized" | "cell-regularized" => Ok(DiagonalMode::CellRegularized),
            other => Err(Error::InvalidArgument(format!("unknown diagonal mode `{other}`"))),
        }
    }
}

/// Probability weights on distinct points of `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    cell_size: f64,
}

impl DiscreteMeasure {
    /// `points` is row-major, `dim` coordinates per atom.
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>, cell_size: f64) -> Result<Self> {
        if dim == 0 || points.len() != dim * weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} coordinates do not describe {} atoms in dimension {dim}",
                points.len(),
                weights.len()
            )));
        }
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite coordinate".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidMeasure("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::InvalidMeasure(format!("cell size must be positive, got {cell_size}")));
        }
        let mut order: Vec<usize> = (0..weights.len()).collect();
        let row = |i: usize| &points[i * dim..(i + 1) * dim];
        order.sort_by(|&a, &b| {
            row(a)
                .iter()
                .zip(row(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if order.windows(2).any(|w| row(w[0]) == row(w[1])) {
            return Err(Error::InvalidMeasure("support points are not distinct".into()));
        }
        Ok(DiscreteMeasure { dim, points, weights, cell_size })
    }

    /// Equal weights on the given points.
    pub fn uniform(dim: usize, points: Vec<f64>, cell_size: f64) -> Result<Self> {
        let n = points.len() / dim.max(1);
        let mut w = vec![1.0 / n as f64; n];
        // make the sum exactly representable within the tolerance
        if n > 0 {
            let s: f64 = w[..n - 1].iter().sum();
            w[n - 1] = 1.0 - s;
        }
        Self::new(dim, points, w, cell_size)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }
}

fn check_dims(k: &RieszKernel, dim: usize) -> Result<()> {
    if k.dim != dim {
        return Err(Error::InvalidArgument(format!(
            "kernel dimension {} does not match measure dimension {dim}",
            k.dim
        )));
    }
    Ok(())
}

#[inline]
fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `Σ_i w_i k(x - p_i)`.
pub fn potential(k: &RieszKernel, mu: &DiscreteMeasure, x: &[f64]) -> Result<f64> {
    check_dims(k, mu.dim)?;
    if x.len() != mu.dim {
        return Err(Error::InvalidArgument("point has the wrong dimension".into()));
    }
    let mut total = 0.0;
    for (i, &w) in mu.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        total += w * k.eval_sq(dist_sq(x, mu.point(i)));
    }
    if total.is_nan() {
        return Err(Error::NaN("potential".into()));
    }
    Ok(total)
}

/// The k-energy of `mu` with the chosen diagonal treatment.
pub fn energy(k: &RieszKernel, mu: &DiscreteMeasure, diagonal: DiagonalMode) -> Result<f64> {
    check_dims(k, mu.dim)?;
    let n = mu.len();
    let w = &mu.weights;
    let mut off = 0.0;
    for i in 0..n {
        if w[i] == 0.0 {
            continue;
        }
        let p = mu.point(i);
        let mut row = 0.0;
        for j in (i + 1)..n {
            if w[j] != 0.0 {
                row += w[j] * k.eval_sq(dist_sq(p, mu.point(j)));
            }
        }
        off += 2.0 * w[i] * row;
    }
    let w2: f64 = w.iter().map(|v| v * v).sum();
    let total = match diagonal {
        DiagonalMode::Exclude => off,
        DiagonalMode::Include => off + w2 * k.eval_norm(0.0),
        DiagonalMode::CellRegularized => off + w2 * k.self_energy(mu.cell_size),
    };
    if total.is_nan() {
        return Err(Error::NaN("energy".into()));
    }
    Ok(total)
}

// Gauss-Legendre nodes on [0, 1].
pub(crate) fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}


// Tensor-product quadrature of f over [0,1]^m.
fn cube_quadrature(m: usize, order: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    if m == 0 {
        return f(&[]);
    }
    let (x, w) = gauss_legendre_01(order);
    let mut idx = vec![0usize; m];
    let mut v = vec![0.0; m];
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        for a in 0..m {
            v[a] = x[idx[a]];
            weight *= w[idx[a]];
        }
        total += weight * f(&v);
        let mut a = 0;
        loop {
            if a == m {
                return total;
            }
            idx[a] += 1;
            if idx[a] < order {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

fn quad_order(m: usize) -> usize {
    match m {
        0..=2 => 24,
        3 => 16,
        4 => 12,
        _ => 8,
    }
}

// Mean of ‖y‖^{-β} over [-1/2, 1/2]^d. The cube splits into d pyramids by the
// largest coordinate; in each, y = u (1, v) and the radial factor integrates in
// closed form, leaving a smooth integral over v ∈ [0,1]^{d-1}.
fn mean_power_unit_cube(beta: f64, d: usize) -> f64 {
    let m = d - 1;
    let angular = cube_quadrature(m, quad_order(m), |v| {
        let s: f64 = v.iter().map(|a| a * a).sum();
        (1.0 + s).powf(-0.5 * beta)
    });
    let df = d as f64;
    let radial = 0.5f64.powf(df - beta) / (df - beta);
    2f64.powi(d as i32) * df * radial * angular
}

// Mean of ln‖y‖ over [-1/2, 1/2]^d, same decomposition.
fn mean_log_norm_unit_cube(d: usize) -> f64 {
    let m = d - 1;
    let angular = cube_quadrature(m, quad_order(m), |v| {
        let s: f64 = v.iter().map(|a| a * a).sum();
        0.5 * (1.0 + s).ln()
    });
    let df = d as f64;
    let a: f64 = 0.5;
    // ∫_0^a u^{d-1} du and ∫_0^a u^{d-1} ln u du
    let m0 = a.powf(df) / df;
    let m1 = a.powf(df) / df * (a.ln() - 1.0 / df);
    2f64.powi(d as i32) * df * (m1 + m0 * angular)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        let k = RieszKernel::power(2.0, 5).unwrap();
        assert_eq!(k.eval(&[1.0, 0.0, 0.0, 0.0, 0.0]), 1.0);
        let k = RieszKernel::power(1.0, 3).unwrap();
        assert_eq!(k.eval(&[0.5, 0.0, 0.0]), 2.0);
        assert_eq!(k.eval(&[0.0, 0.0, 0.0]), f64::INFINITY);
        let k = RieszKernel::new(0.0, 3, 1.0).unwrap();
        assert_eq!(k.eval(&[3.0, 0.0, 0.0]), 0.0);
        let k = RieszKernel::power(-1.0, 3).unwrap();
        assert_eq!(k.eval(&[0.0, 0.0, 0.0]), 1.0);
    }

    #[test]
    fn construction_errors() {
        assert!(RieszKernel::power(3.0, 3).is_err());
        assert!(RieszKernel::new(0.0, 3, 0.0).is_err());
        assert!(RieszKernel::power(f64::NAN, 3).is_err());
        assert!("bogus".parse::<DiagonalMode>().is_err());
    }

    #[test]
    fn self_energy_matches_brute_force() {
        // midpoint rule on a fine grid, singular cell skipped (its share is tiny for β=1, d=2)
        for &(beta, d) in &[(1.0, 2usize), (0.5, 1)] {
            let k = RieszKernel::power(beta, d).unwrap();
            let n = if d == 1 { 200_000 } else { 2000 };
            let h = 1.0 / n as f64;
            let mut total = 0.0;
            let mut count = 0usize;
            if d == 1 {
                for i in 0..n {
                    let x = -0.5 + (i as f64 + 0.5) * h;
                    total += k.eval(&[x]);
                    count += 1;
                }
            } else {
                for i in 0..n {
                    for j in 0..n {
                        let x = -0.5 + (i as f64 + 0.5) * h;
                        let y = -0.5 + (j as f64 + 0.5) * h;
                        total += k.eval(&[x, y]);
                        count += 1;
                    }
                }
            }
            let brute = total / count as f64;
            let exact = k.self_energy(1.0);
            assert!((brute - exact).abs() / exact < 2e-3, "beta {beta} d {d}: {brute} vs {exact}");
        }
        // 1-D closed form: 2 ∫_0^{1/2} x^{-1/2} dx = 2 sqrt(2)
        let k = RieszKernel::power(0.5, 1).unwrap();
        assert!((k.self_energy(1.0) - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn log_self_energy() {
        // 1-D: mean of ln|x| over [-1/2,1/2] is -ln 2 - 1
        let k = RieszKernel::new(0.0, 1, 1.0).unwrap();
        let expected = 3f64.ln() + 2f64.ln() + 1.0;
        assert!((k.self_energy(1.0) - expected).abs() < 1e-12);
        // 2-D against a midpoint sum
        let k = RieszKernel::new(0.0, 2, 1.0).unwrap();
        let n = 1000;
        let h = 1.0 / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = -0.5 + (i as f64 + 0.5) * h;
                let y = -0.5 + (j as f64 + 0.5) * h;
                s += k.eval(&[x, y]);
            }
        }
        let brute = s / (n * n) as f64;
        assert!((brute - k.self_energy(1.0)).abs() < 1e-4);
    }

    #[test]
    fn energy_examples() {
        let k = RieszKernel::power(1.0, 3).unwrap();
        let mu = DiscreteMeasure::new(3, vec![0.0; 3], vec![1.0], 0.1).unwrap();
        assert_eq!(energy(&k, &mu, DiagonalMode::Include).unwrap(), f64::INFINITY);
        let mu = DiscreteMeasure::new(3, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0], vec![0.5, 0.5], 0.1).unwrap();
        assert_eq!(energy(&k, &mu, DiagonalMode::Exclude).unwrap(), 0.5);
        assert!(energy(&k, &mu, DiagonalMode::CellRegularized).unwrap() > 0.5);
    }

    #[test]
    fn potential_examples() {
        let k = RieszKernel::power(1.0, 3).unwrap();
        let mu = DiscreteMeasure::new(3, vec![0.0; 3], vec![1.0], 0.1).unwrap();
        assert_eq!(potential(&k, &mu, &[2.0, 0.0, 0.0]).unwrap(), 0.5);
        assert_eq!(potential(&k, &mu, &[0.0, 0.0, 0.0]).unwrap(), f64::INFINITY);
        let mu = DiscreteMeasure::new(3, vec![1.0, 0.0, 0.0, -1.0, 0.0, 0.0], vec![0.5, 0.5], 0.1).unwrap();
        assert_eq!(potential(&k, &mu, &[0.0, 0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new(1, vec![0.0, 0.0], vec![0.5, 0.5], 0.1).is_err());
        assert!(DiscreteMeasure::new(1, vec![0.0, 1.0], vec![0.5, 0.6], 0.1).is_err());
        assert!(DiscreteMeasure::new(1, vec![0.0, 1.0], vec![1.5, -0.5], 0.1).is_err());
        assert!(DiscreteMeasure::new(1, vec![0.0], vec![1.0], 0.0).is_err());
    }
}
