//! Gaussian-shape sandwiches for marginal and conditional densities.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kde::{scott_bandwidth, Kde};
use crate::error::{invalid, Error, Result};
use crate::fields::Grid;
use crate::hitting::{PathSampler, Source};
use crate::rng;
use crate::spde::{continue_from, driving_noise, node_of, Coefficients, Diffusion, Drift};
use crate::stats::linear_fit;

/// Multivariate normal law used as an exact reference.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    pub mean: Vec<f64>,
    /// `d × d`, row-major.
    pub cov: Vec<f64>,
}

impl Gaussian {
    pub fn isotropic(mean: Vec<f64>, var: f64) -> Self {
        let d = mean.len();
        let mut cov = vec![0.0; d * d];
        for k in 0..d {
            cov[k * d + k] = var;
        }
        Gaussian { mean, cov }
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        let d = self.mean.len();
        let chol = DMatrix::from_row_slice(d, d, &self.cov).cholesky().ok_or_else(|| Error::NotPositiveDefinite("reference covariance".into()))?;
        let diff = DVector::from_iterator(d, x.iter().zip(&self.mean).map(|(a, m)| a - m));
        let z = chol.l().solve_lower_triangular(&diff).ok_or_else(|| Error::NotPositiveDefinite("reference covariance".into()))?;
        let logdet: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum();
        Ok((-0.5 * z.norm_squared() - logdet - 0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln()).exp())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityFitReport {
    pub label: String,
    pub center: Vec<f64>,
    /// Evaluation points, `dim` coordinates each.
    pub points: Vec<Vec<f64>>,
    pub kde: Vec<f64>,
    /// Split-sample error budget at each point.
    pub budget: Vec<f64>,
    /// Exact density at each point, when the law is known in closed form.
    pub reference: Option<Vec<f64>>,
    pub max_rel_error: Option<f64>,
    pub bandwidth: Vec<f64>,
    /// Time scale `τ` of the envelope `c τ^{−d/2} exp(−‖x‖²/(c τ))`.
    pub scale: f64,
    pub c_low: f64,
    pub c_up: f64,
    pub pass_lower: bool,
    pub pass_upper: bool,
    pub n_samples: usize,
}

impl DensityFitReport {
    pub fn pass(&self) -> bool {
        self.pass_lower && self.pass_upper
    }
}

/// Points on rings of radius `0, R/6, …, R` around `center`.
pub fn radial_points(center: &[f64], radius: f64) -> Vec<Vec<f64>> {
    let d = center.len();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    if d == 2 {
        for k in 0..8 {
            let a = k as f64 * std::f64::consts::FRAC_PI_4;
            dirs.push(vec![a.cos(), a.sin()]);
        }
    } else {
        for k in 0..d {
            for s in [-1.0, 1.0] {
                let mut v = vec![0.0; d];
                v[k] = s;
                dirs.push(v);
            }
        }
        if (2..=4).contains(&d) {
            for m in 0..1usize << d {
                dirs.push((0..d).map(|k| if m >> k & 1 == 1 { -1.0 } else { 1.0 } / (d as f64).sqrt()).collect());
            }
        }
    }
    let mut pts = vec![center.to_vec()];
    for ring in 1..=6 {
        let r = radius * ring as f64 / 6.0;
        for dir in &dirs {
            pts.push(center.iter().zip(dir).map(|(c, u)| c + r * u).collect());
        }
    }
    pts
}

fn envelope(c: f64, tau: f64, d: usize, r2: f64) -> f64 {
    c * tau.powf(-(d as f64) / 2.0) * (-r2 / (c * tau)).exp()
}

// Smallest c with envelope(c) ≥ target; the envelope increases with c.
fn solve_c(target: f64, tau: f64, d: usize, r2: f64) -> f64 {
    let (mut lo, mut hi) = (-60.0f64, 60.0f64);
    if envelope(hi.exp(), tau, d, r2) < target {
        return f64::INFINITY;
    }
    if envelope(lo.exp(), tau, d, r2) >= target {
        return lo.exp();
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if envelope(mid.exp(), tau, d, r2) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi.exp()
}

/// KDE of `samples`, split-sample budget, and the fitted sandwich.
pub fn fit_density(
    label: String,
    samples: &[f64],
    dim: usize,
    center: &[f64],
    tau: f64,
    bandwidth_factor: f64,
    reference: Option<&Gaussian>,
) -> Result<DensityFitReport> {
    let n = samples.len() / dim;
    let bandwidth = scott_bandwidth(samples, dim, bandwidth_factor)?;
    if !(tau > 0.0) {
        return invalid("time scale must be positive");
    }
    let mut sd = 0.0;
    for k in 0..dim {
        let mean = (0..n).map(|i| samples[i * dim + k]).sum::<f64>() / n as f64;
        sd += (0..n).map(|i| (samples[i * dim + k] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    }
    let sd = (sd / dim as f64).sqrt();
    let points = radial_points(center, 3.0 * sd);

    let half = (n / 2) * dim;
    let full = Kde::new(samples, dim, bandwidth.clone())?;
    let first = Kde::new(&samples[..half], dim, bandwidth.clone())?;
    let second = Kde::new(&samples[half..], dim, bandwidth.clone())?;
    let kde: Vec<f64> = points.iter().map(|p| full.eval(p)).collect();
    let budget: Vec<f64> = points.iter().map(|p| (first.eval(p) - second.eval(p)).abs()).collect();

    let (mut c_low, mut c_up) = (f64::INFINITY, 0.0f64);
    let mut lower_ok = true;
    for (p, (&k, &b)) in points.iter().zip(kde.iter().zip(&budget)) {
        let r2: f64 = p.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
        if k - b <= 0.0 {
            lower_ok = false;
        } else {
            // largest c with envelope ≤ k − b
            c_low = c_low.min(solve_c(k - b, tau, dim, r2));
        }
        c_up = c_up.max(solve_c(k + b, tau, dim, r2));
    }
    if !lower_ok {
        c_low = 0.0;
    }
    let (reference_vals, max_rel_error) = match reference {
        Some(g) => {
            let vals = points.iter().map(|p| g.density(p)).collect::<Result<Vec<f64>>>()?;
            let err = kde.iter().zip(&vals).map(|(k, v)| (k / v - 1.0).abs()).fold(0.0, f64::max);
            (Some(vals), Some(err))
        }
        None => (None, None),
    };
    Ok(DensityFitReport {
        label,
        center: center.to_vec(),
        points,
        kde,
        budget,
        reference: reference_vals,
        max_rel_error,
        bandwidth,
        scale: tau,
        pass_lower: lower_ok && c_low > 0.0 && c_low.is_finite(),
        pass_upper: c_up > 0.0 && c_up.is_finite(),
        c_low,
        c_up,
        n_samples: n,
    })
}

/// Closed-form law of `X_s`, when there is one.
pub fn exact_marginal(source: &Source, s: &[f64]) -> Option<Gaussian> {
    let area: f64 = s.iter().product();
    match source {
        Source::Field { model, dim } => {
            let var = model.variance(s);
            Some(Gaussian::isotropic(vec![0.0; *dim], var))
        }
        Source::Spde { coeffs } => {
            let d = coeffs.dim;
            let sigma = match &coeffs.diffusion {
                Diffusion::ConstantDiagonal { rho } => {
                    let mut m = vec![0.0; d * d];
                    for k in 0..d {
                        m[k * d + k] = *rho;
                    }
                    m
                }
                Diffusion::Constant { matrix } => matrix.clone(),
                Diffusion::SigmoidPerturbed { .. } => return None,
            };
            let mut cov = vec![0.0; d * d];
            for a in 0..d {
                for b in 0..d {
                    cov[a * d + b] = (0..d).map(|l| sigma[a * d + l] * sigma[b * d + l]).sum::<f64>() * area;
                }
            }
            let mean = match &coeffs.drift {
                Drift::Zero => coeffs.x0.clone(),
                Drift::Constant { c } => coeffs.x0.iter().zip(c).map(|(x, c)| x + c * area).collect(),
            };
            Some(Gaussian { mean, cov })
        }
    }
}

fn node_index(grid: &Grid, s: &[f64]) -> Result<Vec<usize>> {
    if s.len() != grid.n_params() {
        return invalid("node has the wrong number of parameters");
    }
    s.iter()
        .enumerate()
        .map(|(k, &v)| grid.locate(k, v).ok_or_else(|| Error::InvalidGrid(format!("{v} is not a node of axis {k}"))))
        .collect()
}

/// KDE of `X_s` over `n_paths` paths, fitted against `c (Π s)^{−d/2} exp(−‖x − x₀‖²/(c Π s))`.
pub fn marginal_density_check(
    sampler: &PathSampler,
    s: &[f64],
    n_paths: usize,
    bandwidth_factor: f64,
    seed: u64,
) -> Result<DensityFitReport> {
    if s.iter().any(|v| !(*v > 0.0)) {
        return invalid("the node must be away from the axes");
    }
    let idx = node_index(sampler.grid(), s)?;
    let d = sampler.dim();
    let samples: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| sampler.sample(seed, i).map(|p| p.value_at(&idx).to_vec()))
        .collect::<Result<Vec<_>>>()?
        .concat();
    let center = match sampler.source() {
        Source::Spde { coeffs } => coeffs.x0.clone(),
        Source::Field { .. } => vec![0.0; d],
    };
    let tau: f64 = s.iter().product();
    let reference = exact_marginal(sampler.source(), s);
    fit_density(
        format!("marginal at {s:?}"),
        &samples,
        d,
        &center,
        tau,
        bandwidth_factor,
        reference.as_ref(),
    )
}

/// Closed-form law of `X_t − X_s` given the past, when there is one.
pub fn exact_increment(coeffs: &Coefficients, s: [f64; 2], t: [f64; 2]) -> Option<Gaussian> {
    let area = t[0] * t[1] - s[0] * s[1];
    let d = coeffs.dim;
    match &coeffs.diffusion {
        Diffusion::ConstantDiagonal { rho } => {
            let mean = match &coeffs.drift {
                Drift::Zero => vec![0.0; d],
                Drift::Constant { c } => c.iter().map(|c| c * area).collect(),
            };
            Some(Gaussian::isotropic(mean, rho * rho * area))
        }
        _ => None,
    }
}

fn increment_samples(
    coeffs: &Coefficients,
    grid: &Grid,
    si: [usize; 2],
    ti: [usize; 2],
    base_seed: u64,
    n_cont: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let d = coeffs.dim;
    let base = driving_noise(grid, d, base_seed);
    let n1 = grid.axis(1).len();
    Ok((0..n_cont as u64)
        .into_par_iter()
        .map(|c| {
            let path = continue_from(coeffs, si, &base, rng::hash_words(seed, &[base_seed, c]))?;
            let xs = path.value(si[0] * n1 + si[1]);
            let xt = path.value(ti[0] * n1 + ti[1]);
            Ok(xt.iter().zip(xs).map(|(a, b)| a - b).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?
        .concat())
}

fn check_pair(grid: &Grid, s: [f64; 2], t: [f64; 2]) -> Result<([usize; 2], [usize; 2])> {
    if !(s[0] > 0.0 && s[1] > 0.0) {
        return invalid("s must be away from the axes");
    }
    if !(s[0] <= t[0] && s[1] <= t[1] && s != t) {
        return invalid("need s < t in the partial order");
    }
    Ok((node_of(grid, s)?, node_of(grid, t)?))
}

/// For each of `n_past` frozen pasts up to `s`, the law of `X_t − X_s` over
/// `n_cont` continuations, fitted against `c ‖t−s‖^{−d/2} exp(−‖x‖²/(c ‖t−s‖))`.
#[allow(clippy::too_many_arguments)]
pub fn conditional_density_check(
    coeffs: &Coefficients,
    grid: &Grid,
    s: [f64; 2],
    t: [f64; 2],
    n_past: usize,
    n_cont: usize,
    bandwidth_factor: f64,
    seed: u64,
) -> Result<Vec<DensityFitReport>> {
    let (si, ti) = check_pair(grid, s, t)?;
    if n_past == 0 {
        return invalid("need at least one past");
    }
    let tau = ((t[0] - s[0]).powi(2) + (t[1] - s[1]).powi(2)).sqrt();
    let reference = exact_increment(coeffs, s, t);
    let center = reference.as_ref().map_or(vec![0.0; coeffs.dim], |g| g.mean.clone());
    (0..n_past as u64)
        .map(|p| {
            let base_seed = rng::derive_seed(seed, p);
            let samples = increment_samples(coeffs, grid, si, ti, base_seed, n_cont, seed)?;
            fit_density(
                format!("increment {s:?} -> {t:?}, past {p}"),
                &samples,
                coeffs.dim,
                &center,
                tau,
                bandwidth_factor,
                reference.as_ref(),
            )
        })
        .collect()
}

/// Worst constants over a set of reports.
pub fn worst_constants(reports: &[DensityFitReport]) -> (f64, f64) {
    let c_low = reports.iter().map(|r| r.c_low).fold(f64::INFINITY, f64::min);
    let c_up = reports.iter().map(|r| r.c_up).fold(0.0, f64::max);
    (c_low, c_up)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRate {
    pub taus: Vec<f64>,
    /// `c_up τ^{−d/2}` for each `t`.
    pub envelopes: Vec<f64>,
    pub slope: f64,
    pub expected: f64,
    pub rel_error: f64,
    pub pass: bool,
}

/// Log-log slope of the fitted upper envelope's peak as `t` approaches `s`,
/// with one frozen past; `tolerance` is relative to `−d/2`.
#[allow(clippy::too_many_arguments)]
pub fn envelope_rate(
    coeffs: &Coefficients,
    grid: &Grid,
    s: [f64; 2],
    ts: &[[f64; 2]],
    n_cont: usize,
    bandwidth_factor: f64,
    tolerance: f64,
    seed: u64,
) -> Result<EnvelopeRate> {
    if ts.len() < 2 {
        return invalid("need at least two values of t");
    }
    let d = coeffs.dim;
    let base_seed = rng::derive_seed(seed, 0);
    let mut taus = Vec::new();
    let mut envelopes = Vec::new();
    for &t in ts {
        let (si, ti) = check_pair(grid, s, t)?;
        let tau = ((t[0] - s[0]).powi(2) + (t[1] - s[1]).powi(2)).sqrt();
        let samples = increment_samples(coeffs, grid, si, ti, base_seed, n_cont, seed)?;
        let rep = fit_density(String::new(), &samples, d, &vec![0.0; d], tau, bandwidth_factor, None)?;
        taus.push(tau);
        envelopes.push(rep.c_up * tau.powf(-(d as f64) / 2.0));
    }
    let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = envelopes.iter().map(|e| e.ln()).collect();
    let fit = linear_fit(&xs, &ys).ok_or_else(|| Error::InvalidArgument("degenerate envelope fit".into()))?;
    let expected = -(d as f64) / 2.0;
    let rel_error = (fit.slope / expected - 1.0).abs();
    Ok(EnvelopeRate { taus, envelopes, slope: fit.slope, expected, rel_error, pass: rel_error <= tolerance })
}
