use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fields::{sheet_from_increments, sheet_increments, CovarianceModel, Family, FieldPath, FieldSimulator, Grid};
use crate::rng;
use crate::spde::{solve, Coefficients, Diffusion, Drift};

/// What generates the paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    Field { model: CovarianceModel, dim: usize },
    Spde { coeffs: Coefficients },
}

impl Source {
    pub fn dim(&self) -> usize {
        match self {
            Source::Field { dim, .. } => *dim,
            Source::Spde { coeffs } => coeffs.dim,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Source::Field { model, dim } => format!("{} d={dim}", model.name()),
            Source::Spde { coeffs } => format!("spde {}", coeffs.describe()),
        }
    }
}

/// Paths of the form `x0 + σ W_t + c t_1 t_2` with `W` a Brownian sheet.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineForm {
    pub x0: Vec<f64>,
    /// `d × d`, row-major.
    pub sigma: Vec<f64>,
    pub sigma_norm: f64,
    pub drift: Vec<f64>,
}

impl AffineForm {
    pub fn apply(&self, w: &[f64], t: f64, s: f64, out: &mut [f64]) {
        let d = self.x0.len();
        let ts = t * s;
        for k in 0..d {
            let mut acc = 0.0;
            for l in 0..d {
                acc += self.sigma[k * d + l] * w[l];
            }
            out[k] = self.x0[k] + acc + self.drift[k] * ts;
        }
    }
}

/// Source plus grid, with per-grid setup done once.
pub struct PathSampler {
    source: Source,
    grid: Grid,
    field: Option<FieldSimulator>,
}

impl PathSampler {
    pub fn new(source: Source, grid: Grid) -> Result<Self> {
        if source.dim() == 0 {
            return invalid("source dimension must be positive");
        }
        let field = match &source {
            Source::Field { model, dim } => Some(FieldSimulator::new(*model, grid.clone(), *dim)?),
            Source::Spde { .. } => {
                if grid.n_params() != 2 {
                    return invalid("the SPDE lives on two-parameter grids");
                }
                None
            }
        };
        Ok(PathSampler { source, grid, field })
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    /// Path `index` under master seed `seed`.
    pub fn sample(&self, seed: u64, index: u64) -> Result<FieldPath> {
        let mut g = rng::path_rng(seed, index);
        match (&self.source, &self.field) {
            (Source::Field { .. }, Some(sim)) => Ok(sim.sample(&mut g)),
            (Source::Spde { coeffs }, _) => {
                let inc = sheet_increments(&self.grid, coeffs.dim, &mut g);
                let values = sheet_from_increments(&self.grid, coeffs.dim, &inc);
                solve(coeffs, &FieldPath { grid: self.grid.clone(), dim: coeffs.dim, values, increments: Some(inc) })
            }
            _ => unreachable!("field sources always carry a simulator"),
        }
    }

    /// Driving sheet values of path `index`, for sources affine in the sheet.
    pub fn sample_sheet(&self, seed: u64, index: u64) -> Vec<f64> {
        let mut g = rng::path_rng(seed, index);
        let d = self.dim();
        let inc = sheet_increments(&self.grid, d, &mut g);
        sheet_from_increments(&self.grid, d, &inc)
    }

    /// The affine representation, when the source has one on a 2-parameter grid.
    pub fn affine_form(&self) -> Option<AffineForm> {
        if self.grid.n_params() != 2 {
            return None;
        }
        let d = self.dim();
        let mut eye = vec![0.0; d * d];
        for k in 0..d {
            eye[k * d + k] = 1.0;
        }
        match &self.source {
            Source::Field { model, .. } if model.family == Family::BrownianSheet => Some(AffineForm {
                x0: vec![0.0; d],
                sigma: eye,
                sigma_norm: 1.0,
                drift: vec![0.0; d],
            }),
            Source::Spde { coeffs } => {
                let (sigma, sigma_norm) = match &coeffs.diffusion {
                    Diffusion::ConstantDiagonal { rho } => (eye.iter().map(|v| v * rho).collect(), rho.abs()),
                    Diffusion::Constant { matrix } => {
                        let m = nalgebra::DMatrix::from_row_slice(d, d, matrix);
                        (matrix.clone(), m.singular_values().max())
                    }
                    Diffusion::SigmoidPerturbed { .. } => return None,
                };
                let drift = match &coeffs.drift {
                    Drift::Zero => vec![0.0; d],
                    Drift::Constant { c } => c.clone(),
                };
                Some(AffineForm { x0: coeffs.x0.clone(), sigma, sigma_norm, drift })
            }
            _ => None,
        }
    }
}
