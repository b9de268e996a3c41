use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    BrownianSheet,
    OuSheet,
    FbmSheet,
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sheet" | "brownian" | "brownian_sheet" => Ok(Family::BrownianSheet),
            "ou" | "ou_sheet" => Ok(Family::OuSheet),
            "fbm" | "fbm_sheet" => Ok(Family::FbmSheet),
            other => Err(Error::InvalidArgument(format!("unknown field family `{other}`"))),
        }
    }
}

/// Covariance of one coordinate of a centered Gaussian field on `R_+^N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceModel {
    pub family: Family,
    pub hurst: f64,
    pub fbm_scale: f64,
}

impl CovarianceModel {
    pub fn brownian_sheet() -> Self {
        CovarianceModel { family: Family::BrownianSheet, hurst: 0.5, fbm_scale: 1.0 }
    }

    pub fn ou_sheet() -> Self {
        CovarianceModel { family: Family::OuSheet, hurst: 0.5, fbm_scale: 1.0 }
    }

    pub fn fbm_sheet(hurst: f64, fbm_scale: f64) -> Result<Self> {
        let m = CovarianceModel { family: Family::FbmSheet, hurst, fbm_scale };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::InvalidArgument(format!("Hurst index must lie in (0,1), got {}", self.hurst)));
        }
        if !(self.fbm_scale > 0.0 && self.fbm_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("fBm scale must be positive, got {}", self.fbm_scale)));
        }
        Ok(())
    }

    pub fn covariance(&self, s: &[f64], t: &[f64]) -> f64 {
        match self.family {
            Family::BrownianSheet => s.iter().zip(t).map(|(a, b)| a.min(*b)).product(),
            Family::OuSheet => {
                let l1: f64 = s.iter().zip(t).map(|(a, b)| (a - b).abs()).sum();
                (-0.5 * l1).exp()
            }
            Family::FbmSheet => s
                .iter()
                .zip(t)
                .map(|(a, b)| fbm_axis(*a, *b, self.hurst, self.fbm_scale))
                .product(),
        }
    }

    pub fn variance(&self, t: &[f64]) -> f64 {
        self.covariance(t, t)
    }

    pub fn correlation(&self, s: &[f64], t: &[f64]) -> f64 {
        self.covariance(s, t) / (self.variance(s) * self.variance(t)).sqrt()
    }

    /// `1 − ρ²(s,t)`, computed without forming ρ.
    pub fn one_minus_rho2(&self, s: &[f64], t: &[f64]) -> f64 {
        let vs = self.variance(s);
        let vt = self.variance(t);
        let c = self.covariance(s, t);
        (vs * vt - c * c) / (vs * vt)
    }

    pub fn name(&self) -> String {
        match self.family {
            Family::BrownianSheet => "brownian_sheet".into(),
            Family::OuSheet => "ou_sheet".into(),
            Family::FbmSheet => format!("fbm_sheet(H={},c={})", self.hurst, self.fbm_scale),
        }
    }
}

/// One-axis fBm covariance `(c/2)(t^{2H} + s^{2H} − |t−s|^{2H})`.
pub fn fbm_axis(s: f64, t: f64, hurst: f64, c: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * c * (s.powf(h2) + t.powf(h2) - (t - s).abs().powf(h2))
}
