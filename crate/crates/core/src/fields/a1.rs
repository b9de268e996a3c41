use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::covariance::CovarianceModel;
use crate::error::{invalid, Result};
use crate::rng;
use crate::stats::linear_fit;

/// Constants fitted to the four covariance inequalities on a sample of pairs.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct A1Report {
    pub alpha: f64,
    pub gamma: f64,
    pub alpha_fit: f64,
    pub gamma_fit: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub delta: f64,
    pub epsilon: f64,
    /// Variance bounds.
    pub pass_variance: bool,
    /// Conditional-mean bound.
    pub pass_mean: bool,
    /// Two-sided bound on `1 − ρ²`.
    pub pass_correlation: bool,
    /// Decorrelation at separations above δ.
    pub pass_separation: bool,
    /// `|alpha_fit − alpha| ≤ 0.05`.
    pub alpha_consistent: bool,
    pub n_pairs: usize,
    pub min_separation: f64,
    pub description: String,
}

impl A1Report {
    pub fn all_pass(&self) -> bool {
        self.pass_variance && self.pass_mean && self.pass_correlation && self.pass_separation
    }
}

const STRATA: usize = 16;

/// Sample pairs in `[a,b]^N`, stratified by log-separation, and fit the constants.
///
/// δ is fixed at a quarter of the window side. `alpha_fit` is half the
/// log-log slope of `1 − ρ²` against `‖t − s‖` over separations up to
/// `1e-2 (b − a)`; `gamma_fit` is the analogous slope of `|1 − σ(s,t)/σ²(s)|`.
#[allow(clippy::too_many_arguments)]
pub fn check_hypothesis_a1(
    model: &CovarianceModel,
    n_params: usize,
    a: f64,
    b: f64,
    alpha: f64,
    gamma: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<A1Report> {
    if !(0.0 < a && a < b) {
        return invalid(format!("window [{a}, {b}] must satisfy 0 < a < b"));
    }
    if !(alpha > 0.0 && alpha < 1.0) || gamma < alpha {
        return invalid("need alpha in (0,1) and gamma >= alpha");
    }
    if n_params == 0 || n_pairs < 2 * STRATA {
        return invalid(format!("need at least {} pairs", 2 * STRATA));
    }
    let side = b - a;
    let r_min = 1e-4 * side;
    let r_max = side * (n_params as f64).sqrt();
    let delta = 0.25 * side;
    let small = 1e-2 * side;
    let mut g = rng::seeded(seed);

    let mut c1 = f64::INFINITY;
    let mut c2: f64 = 0.0;
    let (mut c3, mut c4, mut c5) = (0.0f64, f64::INFINITY, 0.0f64);
    let mut max_rho_far: f64 = 0.0;
    let (mut lx, mut ly, mut gx, mut gy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut sampled = 0;
    let mut s = vec![0.0; n_params];
    let mut t = vec![0.0; n_params];
    let mut u = vec![0.0; n_params];
    for p in 0..n_pairs {
        let stratum = p % STRATA;
        let lo = (r_min.ln() + (r_max / r_min).ln() * stratum as f64 / STRATA as f64).exp();
        let hi = (r_min.ln() + (r_max / r_min).ln() * (stratum + 1) as f64 / STRATA as f64).exp();
        let mut found = false;
        for _ in 0..1000 {
            let r = (lo.ln() + (hi / lo).ln() * g.gen::<f64>()).exp();
            let mut norm: f64 = 0.0;
            for k in 0..n_params {
                s[k] = a + side * g.gen::<f64>();
                u[k] = g.sample(StandardNormal);
                norm += u[k] * u[k];
            }
            let norm = norm.sqrt();
            let mut inside = true;
            for k in 0..n_params {
                t[k] = s[k] + r * u[k] / norm;
                inside &= (a..=b).contains(&t[k]);
            }
            if inside {
                found = true;
                break;
            }
        }
        if !found {
            continue;
        }
        sampled += 1;
        let r: f64 = s.iter().zip(&t).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let vs = model.variance(&s);
        let vt = model.variance(&t);
        c1 = c1.min(vs).min(vt);
        c2 = c2.max(vs).max(vt);
        let one_m = model.one_minus_rho2(&s, &t);
        if r <= delta {
            let mean_dev = (1.0 - model.covariance(&s, &t) / vs).abs();
            c3 = c3.max(mean_dev / r.powf(gamma));
            let ratio = one_m / r.powf(2.0 * alpha);
            c4 = c4.min(ratio);
            c5 = c5.max(ratio);
            if r <= small {
                if one_m > 0.0 {
                    lx.push(r.ln());
                    ly.push(one_m.ln());
                }
                if mean_dev > 0.0 {
                    gx.push(r.ln());
                    gy.push(mean_dev.ln());
                }
            }
        } else {
            max_rho_far = max_rho_far.max(model.correlation(&s, &t).abs());
        }
    }
    let alpha_fit = linear_fit(&lx, &ly).map_or(f64::NAN, |f| 0.5 * f.slope);
    let gamma_fit = linear_fit(&gx, &gy).map_or(f64::NAN, |f| f.slope);
    let epsilon = 1.0 - max_rho_far;
    Ok(A1Report {
        alpha,
        gamma,
        alpha_fit,
        gamma_fit,
        c1,
        c2,
        c3,
        c4,
        c5,
        delta,
        epsilon,
        pass_variance: c1 > 0.0 && c2.is_finite(),
        pass_mean: c3.is_finite(),
        pass_correlation: c4 > 0.0 && c5.is_finite(),
        pass_separation: epsilon > 0.0,
        alpha_consistent: (alpha_fit - alpha).abs() <= 0.05,
        n_pairs: sampled,
        min_separation: r_min,
        description: format!(
            "{} pairs in [{a},{b}]^{n_params}, {STRATA} log strata of |t-s| in [{r_min:.3e},{r_max:.3e}], delta={delta}",
            sampled
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sheet_exponents() {
        let r = check_hypothesis_a1(&CovarianceModel::brownian_sheet(), 2, 1.0, 2.0, 0.5, 1.0, 4000, 1).unwrap();
        assert!((r.alpha_fit - 0.5).abs() < 0.05, "{r:?}");
        assert!((r.gamma_fit - 1.0).abs() < 0.1, "{r:?}");
        assert!(r.all_pass());
    }

    #[test]
    fn rejects_bad_window() {
        let m = CovarianceModel::brownian_sheet();
        assert!(check_hypothesis_a1(&m, 2, 0.0, 1.0, 0.5, 1.0, 100, 1).is_err());
        assert!(check_hypothesis_a1(&m, 2, 1.0, 2.0, 0.5, 0.4, 100, 1).is_err());
    }
}
