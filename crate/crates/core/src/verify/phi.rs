//! Quadrature of `φ_{α,β}(r) = ∫_{B(r)} ‖z‖^{−β} exp(−‖z‖^{−2α}) dz` in `R^N`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Surface area of the unit sphere in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    let pi = std::f64::consts::PI;
    let (mut a, start) = if n % 2 == 0 { (2.0 * pi, 2) } else { (2.0, 1) };
    let mut k = start;
    while k < n {
        a *= 2.0 * pi / k as f64;
        k += 2;
    }
    a
}

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const K_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const G_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = K_WEIGHTS[7] * fc;
    let mut g = G_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += K_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G_WEIGHTS[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod integral of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let mut stack = vec![(a, b)];
    let (whole, _) = gk15(f, a, b);
    let mut total: f64 = 0.0;
    let mut evaluations = 0usize;
    while let Some((lo, hi)) = stack.pop() {
        let (v, err) = gk15(f, lo, hi);
        evaluations += 1;
        if evaluations > 200_000 {
            return Err(Error::Quadrature("too many subdivisions".into()));
        }
        let scale = whole.abs().max(total.abs()).max(f64::MIN_POSITIVE);
        if err <= rel_tol * scale * (hi - lo) / (b - a) || hi - lo < 1e-12 * (b - a) {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid));
            stack.push((mid, hi));
        }
    }
    if !total.is_finite() {
        return Err(Error::Quadrature("non-finite integral".into()));
    }
    Ok(total)
}

/// `φ_{α,β}(r)` in `R^n` by radial quadrature in `ln ρ`.
pub fn phi(alpha: f64, beta: f64, n: usize, r: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) || n == 0 || !(r > 0.0) {
        return invalid("need 0 < α < 1, N ≥ 1, r > 0");
    }
    // below ρ_lo the factor exp(−ρ^{−2α}) underflows
    let ln_lo = -(745.0f64).ln() / (2.0 * alpha);
    let ln_r = r.ln();
    if ln_r <= ln_lo {
        return Ok(0.0);
    }
    let p = n as f64 - beta;
    let f = |x: f64| (p * x - (-2.0 * alpha * x).exp()).exp();
    Ok(sphere_area(n) * integrate(&f, ln_lo, ln_r, 1e-11)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiCase {
    /// `β > N`: φ stays bounded.
    Bounded,
    /// `β = N`: φ grows like `ln r`.
    Logarithmic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiReport {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub case: PhiCase,
    pub r_values: Vec<f64>,
    pub phi: Vec<f64>,
    /// Bounded case: relative change of φ over the last interval of `r`.
    pub last_variation: Option<f64>,
    /// Logarithmic case: `Δφ / Δ ln r` over consecutive intervals.
    pub log_slopes: Vec<f64>,
    /// Logarithmic case: relative disagreement of the last two slopes.
    pub slope_drift: Option<f64>,
    pub pass: bool,
}

/// Boundedness (`β > N`, variation `< bound_tol` over the last interval) or
/// logarithmic growth (`β = N`, last two slopes within `log_tol`).
pub fn phi_check(alpha: f64, beta: f64, n: usize, r_values: &[f64], bound_tol: f64, log_tol: f64) -> Result<PhiReport> {
    if r_values.len() < 2 || r_values.windows(2).any(|w| w[0] >= w[1]) || r_values[0] < 0.1 {
        return invalid("r values must be increasing and at least 0.1");
    }
    let case = if beta > n as f64 {
        PhiCase::Bounded
    } else if beta == n as f64 {
        PhiCase::Logarithmic
    } else {
        return invalid(format!("for β < N, φ grows like r^(N−β); the check covers β ≥ N (got β={beta}, N={n})"));
    };
    let values = r_values.iter().map(|&r| phi(alpha, beta, n, r)).collect::<Result<Vec<f64>>>()?;
    let m = values.len();
    let mut report = PhiReport {
        alpha,
        beta,
        n,
        case: case.clone(),
        r_values: r_values.to_vec(),
        phi: values.clone(),
        last_variation: None,
        log_slopes: Vec::new(),
        slope_drift: None,
        pass: false,
    };
    match case {
        PhiCase::Bounded => {
            let v = (values[m - 1] - values[m - 2]).abs() / values[m - 1];
            report.last_variation = Some(v);
            report.pass = v < bound_tol && values.iter().all(|v| v.is_finite() && *v > 0.0);
        }
        PhiCase::Logarithmic => {
            report.log_slopes =
                (1..m).map(|k| (values[k] - values[k - 1]) / (r_values[k] / r_values[k - 1]).ln()).collect();
            if m >= 3 {
                let s = &report.log_slopes;
                let drift = (s[s.len() - 1] / s[s.len() - 2] - 1.0).abs();
                report.slope_drift = Some(drift);
                report.pass = drift <= log_tol && s.iter().all(|v| *v > 0.0);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        let pi = std::f64::consts::PI;
        assert_eq!(sphere_area(1), 2.0);
        assert!((sphere_area(2) - 2.0 * pi).abs() < 1e-12);
        assert!((sphere_area(3) - 4.0 * pi).abs() < 1e-12);
        assert!((sphere_area(4) - 2.0 * pi * pi).abs() < 1e-12);
    }

    #[test]
    fn closed_form_half_alpha() {
        // α = 1/2, β = N + 1: φ(r) = |S^{N−1}| e^{−1/r}
        for n in 1..4 {
            for r in [0.2f64, 1.0, 10.0] {
                let want = sphere_area(n) * (-1.0 / r).exp();
                assert!((phi(0.5, n as f64 + 1.0, n, r).unwrap() / want - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn vanishes_at_origin() {
        assert!(phi(0.5, 3.0, 2, 0.01).unwrap() < 1e-40);
    }
}
