//! Experiment configuration: TOML file, then command-line overrides.

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use sheetcap_core::capacity::CompactSet;
use sheetcap_core::fields::{CovarianceModel, Family, Grid};
use sheetcap_core::hitting::{log_spaced, MarginPolicy, PathSampler, RefineConfig, Source, Window};
use sheetcap_core::spde::Coefficients;

/// Every experiment setting. Commands read the fields they need.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `sheet`, `ou`, `fbm` or `spde`; `dimension` also takes `segment` and `square`.
    pub model: String,
    pub d: usize,
    pub n_params: usize,
    pub hurst: f64,
    pub fbm_scale: f64,
    /// `identity`, `diagonal`, `matrix` or `sigmoid`.
    pub diffusion: String,
    pub rho: f64,
    pub eps: f64,
    /// Row-major diffusion matrix for `diffusion = "matrix"`.
    pub sigma: Vec<f64>,
    /// Constant drift; empty for none.
    pub drift: Vec<f64>,
    /// Starting point; empty for the origin.
    pub x0: Vec<f64>,

    pub a: f64,
    pub b: f64,
    pub cells: usize,
    /// Grid nodes placed in `[0, a)` before the window.
    pub lead: usize,

    pub n_paths: u64,
    pub seed: u64,

    /// Set specifications such as `ball:0,0:0.5` or `box:0,0:1,1`.
    pub set: Vec<String>,
    /// Riesz exponent; defaults to `d − 4`.
    pub beta: Option<f64>,
    /// Scale `M` of the logarithmic kernel; defaults to the largest set norm.
    pub log_scale: Option<f64>,
    pub resolutions: Vec<usize>,
    pub tol: f64,

    pub center: Vec<f64>,
    /// `lo:hi:count` (log-spaced) or a comma-separated list.
    pub radii: String,
    /// `refined`, `modulus` or `fixed`.
    pub margin_policy: String,
    pub margin: f64,
    pub kappa: f64,
    pub eta: f64,
    pub z: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,

    pub x: Vec<f64>,
    pub h: f64,
    /// Pairs `x1,..,xd;y1,..,yd`.
    pub pairs: Vec<String>,

    pub s: Vec<f64>,
    pub t: Vec<f64>,
    /// Further values of `t`, `t1,t2`, for the envelope-rate fit.
    pub t_path: Vec<String>,
    pub n_past: usize,
    pub n_cont: usize,
    pub bandwidth: f64,
    pub envelope_tol: f64,

    pub alpha: f64,
    /// Defaults to the model's known exponent.
    pub gamma: Option<f64>,
    pub n_pairs: usize,
    pub alpha_tol: f64,
    pub r_values: Vec<f64>,
    pub bound_tol: f64,
    pub log_tol: f64,

    pub ceiling: f64,

    /// `lo:hi:count` box sizes (log-spaced) or a comma-separated list.
    pub scales: String,
    pub drop_coarse: usize,
    pub drop_fine: usize,
    pub n_points: usize,
    pub expected: Option<f64>,
    pub expected_tol: f64,

    pub identity_z: f64,
    pub weight_z: f64,

    /// Output directory.
    pub out: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: "sheet".into(),
            d: 2,
            n_params: 2,
            hurst: 0.5,
            fbm_scale: 1.0,
            diffusion: "identity".into(),
            rho: 1.0,
            eps: 0.1,
            sigma: Vec::new(),
            drift: Vec::new(),
            x0: Vec::new(),
            a: 1.0,
            b: 2.0,
            cells: 16,
            lead: 1,
            n_paths: 10_000,
            seed: 0,
            set: Vec::new(),
            beta: None,
            log_scale: None,
            resolutions: vec![8, 16, 32],
            tol: 1e-6,
            center: Vec::new(),
            radii: "0.05:0.8:6".into(),
            margin_policy: "refined".into(),
            margin: 0.0,
            kappa: 3.0,
            eta: 0.1,
            z: 4.0,
            rel_tol: 1e-2,
            abs_tol: 1e-4,
            max_depth: 30,
            x: Vec::new(),
            h: 0.1,
            pairs: Vec::new(),
            s: vec![1.0, 1.0],
            t: vec![2.0, 2.0],
            t_path: Vec::new(),
            n_past: 5,
            n_cont: 100_000,
            bandwidth: 1.0,
            envelope_tol: 0.2,
            alpha: 0.5,
            gamma: None,
            n_pairs: 4096,
            alpha_tol: 0.05,
            r_values: vec![1.0, 10.0, 100.0, 1000.0],
            bound_tol: 0.05,
            log_tol: 0.1,
            ceiling: 20.0,
            scales: "0.02:2:12".into(),
            drop_coarse: 2,
            drop_fine: 2,
            n_points: 10_000,
            expected: None,
            expected_tol: 0.6,
            identity_z: 3.0,
            weight_z: 4.0,
            out: ".".into(),
        }
    }
}

/// Command-line overrides of the configuration file.
#[derive(Args, Clone, Debug, Default, Serialize)]
pub struct Overrides {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_params: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fbm_scale: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lead: Option<usize>,
    #[arg(long = "n", alias = "n-paths")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Repeat for several sets.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub set: Option<Vec<String>>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_scale: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolutions: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin_policy: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<u32>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// Repeat for several pairs, each `x1,..,xd;y1,..,yd`.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    /// Repeat for several nodes `t1,t2`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_path: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_past: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_cont: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope_tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_pairs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_tol: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_values: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ceiling: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scales: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drop_coarse: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drop_fine: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identity_z: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_z: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

/// Config file contents (if any) with the overrides applied on top.
pub fn resolve(file: Option<&str>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut merged = match file {
        Some(text) => {
            let table: toml::Table = toml::from_str(text).context("malformed config file")?;
            serde_json::to_value(table)?
        }
        None => Value::Object(Map::new()),
    };
    let Value::Object(over) = serde_json::to_value(overrides)? else { unreachable!("overrides serialize to a map") };
    let Value::Object(base) = &mut merged else { unreachable!("a TOML table is a map") };
    base.extend(over);
    serde_json::from_value(merged).map_err(|e| anyhow!("invalid config: {e}"))
}

/// `lo:hi:count` log-spaced, or a comma-separated list.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().with_context(|| format!("bad range `{spec}`"))?;
        let hi: f64 = parts[1].trim().parse().with_context(|| format!("bad range `{spec}`"))?;
        let n: usize = parts[2].trim().parse().with_context(|| format!("bad range `{spec}`"))?;
        if !(lo > 0.0 && hi > lo) || n == 0 {
            bail!("range `{spec}` needs 0 < lo < hi and a positive count");
        }
        return Ok(log_spaced(lo, hi, n));
    }
    spec.split(',').map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number `{v}` in `{spec}`"))).collect()
}

pub fn parse_point(spec: &str) -> Result<Vec<f64>> {
    spec.split(',').map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number `{v}` in `{spec}`"))).collect()
}

impl ExperimentConfig {
    pub fn covariance_model(&self) -> Result<CovarianceModel> {
        let family: Family = self.model.parse()?;
        Ok(match family {
            Family::BrownianSheet => CovarianceModel::brownian_sheet(),
            Family::OuSheet => CovarianceModel::ou_sheet(),
            Family::FbmSheet => CovarianceModel::fbm_sheet(self.hurst, self.fbm_scale)?,
        })
    }

    pub fn coefficients(&self) -> Result<Coefficients> {
        let d = self.d;
        let mut c = match self.diffusion.as_str() {
            "identity" => Coefficients::identity(d),
            "diagonal" => Coefficients::constant_diagonal(d, self.rho)?,
            "matrix" => Coefficients::constant_matrix(d, self.sigma.clone())?,
            "sigmoid" => Coefficients::sigmoid_perturbed(d, self.rho, self.eps)?,
            other => bail!("unknown diffusion `{other}` (identity, diagonal, matrix, sigmoid)"),
        };
        if !self.drift.is_empty() {
            c = c.with_drift(self.drift.clone())?;
        }
        if !self.x0.is_empty() {
            c = c.with_x0(self.x0.clone())?;
        }
        Ok(c)
    }

    pub fn source(&self) -> Result<Source> {
        if self.model == "spde" {
            if self.n_params != 2 {
                bail!("the SPDE has two parameters");
            }
            Ok(Source::Spde { coeffs: self.coefficients()? })
        } else {
            Ok(Source::Field { model: self.covariance_model()?, dim: self.d })
        }
    }

    pub fn window(&self) -> Result<Window> {
        Ok(Window::new(self.a, self.b)?)
    }

    pub fn grid(&self) -> Result<Grid> {
        Ok(Grid::windowed(self.n_params, self.a, self.b, self.cells, self.lead)?)
    }

    pub fn sampler(&self) -> Result<PathSampler> {
        Ok(PathSampler::new(self.source()?, self.grid()?)?)
    }

    pub fn sets(&self) -> Result<Vec<CompactSet>> {
        if self.set.is_empty() {
            bail!("no set given (use --set or `set = [...]`)");
        }
        let sets = self.set.iter().map(|s| s.parse::<CompactSet>()).collect::<Result<Vec<_>, _>>()?;
        if let Some(bad) = sets.iter().find(|s| s.dim() != self.d) {
            bail!("set {bad} does not live in dimension d={}", self.d);
        }
        Ok(sets)
    }

    pub fn refine(&self) -> RefineConfig {
        RefineConfig { z: self.z, rel_tol: self.rel_tol, abs_tol: self.abs_tol, max_depth: self.max_depth }
    }

    pub fn margin_policy(&self) -> Result<MarginPolicy> {
        Ok(match self.margin_policy.as_str() {
            "refined" => MarginPolicy::Refined(self.refine()),
            "modulus" => MarginPolicy::Modulus { kappa: self.kappa, eta: self.eta },
            "fixed" => MarginPolicy::Fixed { margin: self.margin },
            other => bail!("unknown margin policy `{other}` (refined, modulus, fixed)"),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(self.d as f64 - 4.0)
    }

    pub fn center_point(&self) -> Vec<f64> {
        if self.center.is_empty() {
            vec![0.0; self.d]
        } else {
            self.center.clone()
        }
    }

    pub fn pair_list(&self) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        self.pairs
            .iter()
            .map(|p| {
                let (x, y) = p.split_once(';').ok_or_else(|| anyhow!("pair `{p}` must look like `x1,x2;y1,y2`"))?;
                Ok((parse_point(x)?, parse_point(y)?))
            })
            .collect()
    }

    pub fn node(v: &[f64], what: &str) -> Result<[f64; 2]> {
        match v {
            [a, b] => Ok([*a, *b]),
            _ => bail!("{what} must have two coordinates"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let ov = Overrides { d: Some(5), ..Default::default() };
        let c = resolve(Some("d = 3\nseed = 9\n"), &ov).unwrap();
        assert_eq!(c.d, 5);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(resolve(Some("bogus = 1\n"), &Overrides::default()).is_err());
    }

    #[test]
    fn ranges() {
        let r = parse_range("0.05:0.8:6").unwrap();
        assert_eq!(r.len(), 6);
        assert!((r[5] - 0.8).abs() < 1e-12);
        assert_eq!(parse_range("1,2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_range("1:0.5:3").is_err());
    }
}
