use serde::{Deserialize, Serialize};

use super::coeffs::{Coefficients, Diffusion};
use crate::error::{invalid, Error, Result};
use crate::fields::{rect_step, sheet_from_increments, sheet_increments, FieldPath, Grid};
use crate::rng;

fn check_noise(coeffs: &Coefficients, noise: &FieldPath) -> Result<()> {
    if noise.grid.n_params() != 2 {
        return Err(Error::InvalidGrid("the solver needs a two-parameter grid".into()));
    }
    if noise.dim != coeffs.dim {
        return invalid(format!("noise has dimension {} but the system {}", noise.dim, coeffs.dim));
    }
    match &noise.increments {
        Some(inc) if inc.len() == noise.grid.n_cells() * noise.dim => Ok(()),
        Some(_) => invalid("noise increments do not match the grid"),
        None => invalid("noise path carries no increments"),
    }
}

/// Explicit rectangle recursion with lower-left evaluation of σ and b.
///
/// The stochastic and drift parts are accumulated separately and added to
/// `x0` at each node, so that for `σ = I, b = 0, x0 = 0` the output equals the
/// driving sheet bit for bit.
pub fn solve(coeffs: &Coefficients, noise: &FieldPath) -> Result<FieldPath> {
    check_noise(coeffs, noise)?;
    let grid = &noise.grid;
    let inc = noise.increments.as_ref().unwrap();
    let d = coeffs.dim;
    let (a0, a1) = (grid.axis(0), grid.axis(1));
    let (n0, n1) = (a0.len(), a1.len());
    let nn = n0 * n1;
    let mut stoch = vec![0.0; nn * d];
    let mut drift = vec![0.0; nn * d];
    let mut x = vec![0.0; nn * d];
    for node in 0..nn {
        x[node * d..(node + 1) * d].copy_from_slice(&coeffs.x0);
    }
    let has_drift = coeffs.has_drift();
    let mut sig = vec![0.0; d * d];
    let mut bvec = vec![0.0; d];
    let mut sdw = vec![0.0; d];
    let diag_rho = match coeffs.diffusion {
        Diffusion::ConstantDiagonal { rho } => Some(rho),
        _ => None,
    };
    let constant_sigma = coeffs.constant_diffusion();
    if constant_sigma {
        coeffs.sigma_into(&coeffs.x0, &mut sig);
    }
    for i in 0..n0 - 1 {
        let dt = a0[i + 1] - a0[i];
        for j in 0..n1 - 1 {
            let area = dt * (a1[j + 1] - a1[j]);
            let c = (i * n1 + j) * d;
            let r = ((i + 1) * n1 + j) * d;
            let u = (i * n1 + j + 1) * d;
            let o = ((i + 1) * n1 + j + 1) * d;
            let dw = &inc[(i * (n1 - 1) + j) * d..(i * (n1 - 1) + j + 1) * d];
            let xc = &x[c..c + d];
            if let Some(rho) = diag_rho {
                for k in 0..d {
                    sdw[k] = rho * dw[k];
                }
            } else {
                if !constant_sigma {
                    coeffs.sigma_into(xc, &mut sig);
                }
                for k in 0..d {
                    let mut acc = 0.0;
                    for l in 0..d {
                        acc += sig[k * d + l] * dw[l];
                    }
                    sdw[k] = acc;
                }
            }
            if has_drift {
                coeffs.drift_into(xc, &mut bvec);
            }
            for k in 0..d {
                stoch[o + k] = rect_step(stoch[r + k], stoch[u + k], stoch[c + k], sdw[k]);
                if has_drift {
                    drift[o + k] = rect_step(drift[r + k], drift[u + k], drift[c + k], bvec[k] * area);
                }
                let v = coeffs.x0[k] + stoch[o + k] + drift[o + k];
                if !v.is_finite() {
                    return Err(Error::NumericalFailure { i, j, what: format!("coordinate {k} became {v}") });
                }
                x[o + k] = v;
            }
        }
    }
    Ok(FieldPath { grid: grid.clone(), dim: d, values: x, increments: Some(inc.clone()) })
}

/// Driving sheet sampled from `seed`; identical to the Brownian-sheet simulator's.
pub fn driving_noise(grid: &Grid, d: usize, seed: u64) -> FieldPath {
    let inc = sheet_increments(grid, d, &mut rng::seeded(seed));
    let values = sheet_from_increments(grid, d, &inc);
    FieldPath { grid: grid.clone(), dim: d, values, increments: Some(inc) }
}

pub fn solve_seeded(coeffs: &Coefficients, grid: &Grid, seed: u64) -> Result<FieldPath> {
    if grid.n_params() != 2 {
        return Err(Error::InvalidGrid("the solver needs a two-parameter grid".into()));
    }
    solve(coeffs, &driving_noise(grid, coeffs.dim, seed))
}

/// Solve with the noise on `[0, s]` frozen from `base_noise` and fresh noise
/// from `seed` on every other cell. `s` is a node multi-index.
pub fn continue_from(coeffs: &Coefficients, s: [usize; 2], base_noise: &FieldPath, seed: u64) -> Result<FieldPath> {
    check_noise(coeffs, base_noise)?;
    let grid = &base_noise.grid;
    let shape = grid.shape();
    if s[0] >= shape[0] || s[1] >= shape[1] {
        return Err(Error::InvalidGrid(format!("node {s:?} is not on the grid {shape:?}")));
    }
    let d = coeffs.dim;
    let mut inc = sheet_increments(grid, d, &mut rng::seeded(seed));
    let base = base_noise.increments.as_ref().unwrap();
    let n1c = shape[1] - 1;
    for i in 0..s[0] {
        for j in 0..s[1] {
            let c = (i * n1c + j) * d;
            inc[c..c + d].copy_from_slice(&base[c..c + d]);
        }
    }
    let values = sheet_from_increments(grid, d, &inc);
    solve(coeffs, &FieldPath { grid: grid.clone(), dim: d, values, increments: Some(inc) })
}

/// Node multi-index of the point `t`, if it is a grid node.
pub fn node_of(grid: &Grid, t: [f64; 2]) -> Result<[usize; 2]> {
    match (grid.locate(0, t[0]), grid.locate(1, t[1])) {
        (Some(i), Some(j)) => Ok([i, j]),
        _ => Err(Error::InvalidGrid(format!("({}, {}) is not a grid node", t[0], t[1]))),
    }
}

/// Which exponential weight to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightDirection {
    /// `exp(−Σ θ·ΔW − ½ Σ ‖θ‖² Δarea)`, the density of the drift-removing measure.
    L,
    /// `exp(−Σ θ·ΔW + ½ Σ ‖θ‖² Δarea)`, whose inverse reweights drift-free paths.
    J,
}

/// Discrete Girsanov weight over the cells of `[0, t]`, with `θ = σ^{-1} b`
/// evaluated at each cell's lower-left node of `path`.
pub fn girsanov_weight(coeffs: &Coefficients, path: &FieldPath, t: [usize; 2], direction: WeightDirection) -> Result<f64> {
    let (stoch, quad) = girsanov_terms(coeffs, path, t)?;
    Ok(match direction {
        WeightDirection::L => (-stoch - 0.5 * quad).exp(),
        WeightDirection::J => (-stoch + 0.5 * quad).exp(),
    })
}

/// `(Σ θ·ΔW, Σ ‖θ‖² Δarea)` over the cells of `[0, t]`.
pub fn girsanov_terms(coeffs: &Coefficients, path: &FieldPath, t: [usize; 2]) -> Result<(f64, f64)> {
    check_noise(coeffs, path)?;
    let grid = &path.grid;
    let shape = grid.shape();
    if t[0] >= shape[0] || t[1] >= shape[1] {
        return Err(Error::InvalidGrid(format!("node {t:?} is not on the grid {shape:?}")));
    }
    if !coeffs.has_drift() {
        return Ok((0.0, 0.0));
    }
    let d = coeffs.dim;
    let inc = path.increments.as_ref().unwrap();
    let (a0, a1) = (grid.axis(0), grid.axis(1));
    let n1 = shape[1];
    let mut theta = vec![0.0; d];
    let (mut stoch, mut quad) = (0.0, 0.0);
    for i in 0..t[0] {
        for j in 0..t[1] {
            let area = (a0[i + 1] - a0[i]) * (a1[j + 1] - a1[j]);
            let xc = path.value(i * n1 + j);
            coeffs.theta_into(xc, &mut theta).ok_or(Error::SingularDiffusion { i, j })?;
            let dw = &inc[(i * (n1 - 1) + j) * d..(i * (n1 - 1) + j + 1) * d];
            for k in 0..d {
                stoch += theta[k] * dw[k];
                quad += theta[k] * theta[k] * area;
            }
        }
    }
    Ok((stoch, quad))
}
