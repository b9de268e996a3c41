use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;

/// Diffusion matrix `σ(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diffusion {
    /// `ρ I`.
    ConstantDiagonal { rho: f64 },
    /// A fixed matrix, row-major.
    Constant { matrix: Vec<f64> },
    /// `ρ I + ε S(x)` with `S_ij(x) = tanh(x_{(i+j) mod d} + 0.3 (i − j))`.
    SigmoidPerturbed { rho: f64, eps: f64 },
}

/// Drift `b(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drift {
    Zero,
    Constant { c: Vec<f64> },
}

/// Data of the system `X_t = x0 + ∫ σ(X) dW + ∫ b(X) ds` with declared bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub dim: usize,
    pub diffusion: Diffusion,
    pub drift: Drift,
    pub x0: Vec<f64>,
    /// Declared ρ with `‖σ(x)ξ‖ ≥ ρ‖ξ‖`.
    pub ellipticity_rho: f64,
    /// Declared bound on `|σ_ij|`.
    pub uniform_bound_t: f64,
    /// Declared bound on `|b_i|`.
    pub drift_bound_n: f64,
}

impl Coefficients {
    pub fn identity(dim: usize) -> Self {
        Self::constant_diagonal(dim, 1.0).expect("rho = 1 is valid")
    }

    pub fn constant_diagonal(dim: usize, rho: f64) -> Result<Self> {
        if dim == 0 || !(rho > 0.0 && rho.is_finite()) {
            return invalid(format!("need dim > 0 and rho > 0, got dim={dim}, rho={rho}"));
        }
        Ok(Coefficients {
            dim,
            diffusion: Diffusion::ConstantDiagonal { rho },
            drift: Drift::Zero,
            x0: vec![0.0; dim],
            ellipticity_rho: rho,
            uniform_bound_t: rho,
            drift_bound_n: 0.0,
        })
    }

    /// Constant matrix; the declared ellipticity is its smallest singular value.
    pub fn constant_matrix(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        if dim == 0 || matrix.len() != dim * dim || matrix.iter().any(|v| !v.is_finite()) {
            return invalid("constant diffusion needs dim² finite entries");
        }
        let m = DMatrix::from_row_slice(dim, dim, &matrix);
        let smin = m.singular_values().min();
        if !(smin > 0.0) {
            return Err(Error::SingularDiffusion { i: 0, j: 0 });
        }
        let tmax = matrix.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Ok(Coefficients {
            dim,
            diffusion: Diffusion::Constant { matrix },
            drift: Drift::Zero,
            x0: vec![0.0; dim],
            ellipticity_rho: smin,
            uniform_bound_t: tmax,
            drift_bound_n: 0.0,
        })
    }

    /// `ρ I + ε S(x)`; requires `ε ≤ ρ/(2d)` so that `ρ/2` ellipticity holds.
    pub fn sigmoid_perturbed(dim: usize, rho: f64, eps: f64) -> Result<Self> {
        if dim == 0 || !(rho > 0.0) || !(eps >= 0.0) {
            return invalid("need dim > 0, rho > 0, eps >= 0");
        }
        if eps > rho / (2.0 * dim as f64) {
            return invalid(format!("eps = {eps} exceeds rho/(2d) = {}", rho / (2.0 * dim as f64)));
        }
        Ok(Coefficients {
            dim,
            diffusion: Diffusion::SigmoidPerturbed { rho, eps },
            drift: Drift::Zero,
            x0: vec![0.0; dim],
            ellipticity_rho: 0.5 * rho,
            uniform_bound_t: rho + eps,
            drift_bound_n: 0.0,
        })
    }

    pub fn with_drift(mut self, c: Vec<f64>) -> Result<Self> {
        if c.len() != self.dim || c.iter().any(|v| !v.is_finite()) {
            return invalid("drift vector has the wrong length or non-finite entries");
        }
        self.drift_bound_n = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        self.drift = if c.iter().all(|v| *v == 0.0) { Drift::Zero } else { Drift::Constant { c } };
        Ok(self)
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.dim || x0.iter().any(|v| !v.is_finite()) {
            return invalid("x0 has the wrong length or non-finite entries");
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn has_drift(&self) -> bool {
        !matches!(self.drift, Drift::Zero)
    }

    /// True when σ does not depend on the state.
    pub fn constant_diffusion(&self) -> bool {
        !matches!(self.diffusion, Diffusion::SigmoidPerturbed { .. })
    }

    /// `σ(x)`, row-major into `out` (`d²` entries).
    pub fn sigma_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        match &self.diffusion {
            Diffusion::ConstantDiagonal { rho } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..d {
                    out[i * d + i] = *rho;
                }
            }
            Diffusion::Constant { matrix } => out.copy_from_slice(matrix),
            Diffusion::SigmoidPerturbed { rho, eps } => {
                for i in 0..d {
                    for j in 0..d {
                        let s = (x[(i + j) % d] + 0.3 * (i as f64 - j as f64)).tanh();
                        out[i * d + j] = eps * s + if i == j { *rho } else { 0.0 };
                    }
                }
            }
        }
    }

    /// `b(x)` into `out`.
    pub fn drift_into(&self, _x: &[f64], out: &mut [f64]) {
        match &self.drift {
            Drift::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Drift::Constant { c } => out.copy_from_slice(c),
        }
    }

    /// `σ(x)^{-1} b(x)` into `out`; `None` if σ(x) is singular.
    pub fn theta_into(&self, x: &[f64], out: &mut [f64]) -> Option<()> {
        let d = self.dim;
        let mut b = vec![0.0; d];
        self.drift_into(x, &mut b);
        if b.iter().all(|v| *v == 0.0) {
            out.iter_mut().for_each(|v| *v = 0.0);
            return Some(());
        }
        if let Diffusion::ConstantDiagonal { rho } = self.diffusion {
            for k in 0..d {
                out[k] = b[k] / rho;
            }
            return Some(());
        }
        let mut s = vec![0.0; d * d];
        self.sigma_into(x, &mut s);
        let m = DMatrix::from_row_slice(d, d, &s);
        let sol = m.lu().solve(&DVector::from_vec(b))?;
        out.copy_from_slice(sol.as_slice());
        Some(())
    }

    /// Short label for reports.
    pub fn describe(&self) -> String {
        let diff = match &self.diffusion {
            Diffusion::ConstantDiagonal { rho } => format!("{rho}*I"),
            Diffusion::Constant { .. } => "constant matrix".to_string(),
            Diffusion::SigmoidPerturbed { rho, eps } => format!("{rho}*I+{eps}*tanh"),
        };
        let drift = match &self.drift {
            Drift::Zero => "0".to_string(),
            Drift::Constant { c } => format!("{c:?}"),
        };
        format!("d={} sigma={diff} b={drift}", self.dim)
    }
}

/// Outcome of spot-checking the declared coefficient bounds.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CoefficientCheck {
    pub n_samples: usize,
    /// Smallest observed `‖σ(x)ξ‖²` over unit ξ.
    pub min_quadratic: f64,
    pub max_entry: f64,
    pub max_drift: f64,
    pub pass: bool,
}

/// Sample `x` uniformly in `[-5,5]^d` and unit `ξ`, and test the declared bounds.
pub fn check_coefficients(c: &Coefficients, n_samples: usize, seed: u64) -> CoefficientCheck {
    let d = c.dim;
    let mut g = rng::seeded(seed);
    let mut s = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    let mut x = vec![0.0; d];
    let mut xi = vec![0.0; d];
    let (mut min_q, mut max_e, mut max_b) = (f64::INFINITY, 0.0f64, 0.0f64);
    for _ in 0..n_samples {
        x.iter_mut().for_each(|v| *v = g.gen_range(-5.0..5.0));
        let mut norm = 0.0;
        for v in xi.iter_mut() {
            *v = g.sample(StandardNormal);
            norm += *v * *v;
        }
        let norm: f64 = f64::sqrt(norm);
        xi.iter_mut().for_each(|v| *v /= norm);
        c.sigma_into(&x, &mut s);
        c.drift_into(&x, &mut b);
        let mut q = 0.0;
        for i in 0..d {
            let r: f64 = (0..d).map(|j| s[i * d + j] * xi[j]).sum();
            q += r * r;
        }
        min_q = min_q.min(q);
        max_e = s.iter().fold(max_e, |a, v| a.max(v.abs()));
        max_b = b.iter().fold(max_b, |a, v| a.max(v.abs()));
    }
    let tol = 1e-12;
    CoefficientCheck {
        n_samples,
        min_quadratic: min_q,
        max_entry: max_e,
        max_drift: max_b,
        pass: min_q >= c.ellipticity_rho.powi(2) * (1.0 - tol)
            && max_e <= c.uniform_bound_t * (1.0 + tol)
            && max_b <= c.drift_bound_n * (1.0 + tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_families_satisfy_declared_bounds() {
        for c in [
            Coefficients::identity(3),
            Coefficients::constant_diagonal(2, 0.7).unwrap(),
            Coefficients::sigmoid_perturbed(2, 1.0, 0.25).unwrap(),
            Coefficients::sigmoid_perturbed(5, 1.0, 0.1).unwrap().with_drift(vec![0.3, -0.1, 0.0, 0.2, 0.1]).unwrap(),
        ] {
            let r = check_coefficients(&c, 1000, 3);
            assert!(r.pass, "{c:?}: {r:?}");
        }
        assert!(Coefficients::sigmoid_perturbed(2, 1.0, 0.3).is_err());
    }

    #[test]
    fn theta_solves() {
        let c = Coefficients::sigmoid_perturbed(3, 1.0, 0.15).unwrap().with_drift(vec![0.5, -0.2, 0.1]).unwrap();
        let x = [0.3, -1.0, 2.0];
        let mut th = [0.0; 3];
        c.theta_into(&x, &mut th).unwrap();
        let mut s = [0.0; 9];
        c.sigma_into(&x, &mut s);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| s[i * 3 + j] * th[j]).sum();
            assert!((r - [0.5, -0.2, 0.1][i]).abs() < 1e-12);
        }
    }
}
