//! Pipeline configuration: a flat `key = value` file (TOML syntax) plus
//! command-line overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use stereolane_core::dp::Smoothness;
use stereolane_core::fit::RansacConfig;
use stereolane_core::stereo::StereoConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("override `{0}` is not of the form key=value")]
    Override(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

/// Every tunable of the pipeline. Unknown keys are rejected on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    // Disparity estimation.
    pub rho: usize,
    pub tau: u16,
    pub d_max: u16,
    pub tr_lrc: u16,
    pub sigma_floor: f64,
    // Road profile.
    pub lambda_y: f64,
    /// Largest disparity-path step between consecutive bins.
    pub step_y: usize,
    pub tr_y: f64,
    pub eps_y: f64,
    pub varpi: f64,
    // Pre-processing.
    pub sigma_s: f64,
    pub sigma_r: f64,
    /// Bilateral window side length (odd).
    pub bf_window: usize,
    /// Sobel magnitude threshold on the 0-255 scale.
    pub sobel_threshold: f64,
    // Vanishing points.
    pub chi: usize,
    pub rho_vote: f64,
    pub lambda_x: f64,
    /// Largest column shift of the vanishing-point path between rows.
    pub step_x: usize,
    pub tr_x: f64,
    pub eps_x: f64,
    /// Conditioning factor of the quartic normal equations.
    pub kappa: f64,
    /// Edges with `|gx|` below this cast no vanishing-point vote.
    pub eps_g: f64,
    // Lane validation.
    pub sigma_g: f64,
    pub nu: usize,
    pub varsigma: usize,
    pub lambda_g: f64,
    pub xi: f64,
    /// Lane energy threshold; derived from the data when absent.
    pub tr_lpv: Option<f64>,
    pub min_lane_sep: usize,
    // RANSAC.
    pub ransac_max_iterations: usize,
    pub ransac_min_consensus: f64,
    pub rng_seed: u64,
    /// Signed smoothness terms instead of jump penalties; see
    /// [`Smoothness::Signed`].
    pub signed_smoothness: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            rho: 3,
            tau: 1,
            d_max: 64,
            tr_lrc: 3,
            sigma_floor: 1e-4,
            lambda_y: 30.0,
            step_y: 6,
            tr_y: 4.0,
            eps_y: 0.99,
            varpi: 3.0,
            sigma_s: 300.0,
            sigma_r: 0.3,
            bf_window: 11,
            sobel_threshold: 100.0,
            chi: 25,
            rho_vote: 1.0,
            lambda_x: 10.0,
            step_x: 5,
            tr_x: 16.0,
            eps_x: 0.99,
            kappa: 1.0,
            eps_g: 1e-3,
            sigma_g: 3.5,
            nu: 1,
            varsigma: 3,
            lambda_g: 1.0,
            xi: 0.5,
            tr_lpv: None,
            min_lane_sep: 20,
            ransac_max_iterations: 200,
            ransac_min_consensus: 0.5,
            rng_seed: 0,
            signed_smoothness: false,
        }
    }
}

fn check(ok: bool, key: &'static str, reason: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            key,
            reason: reason.to_string(),
        })
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::load_with_overrides(path, &[])
    }

    /// Reads `path`, applies `key=value` overrides on top and validates.
    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_with_overrides(&text, overrides)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_with_overrides(text, &[])
    }

    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse()?;
        for o in overrides {
            let (key, value) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
            let key = key.trim();
            let raw = value.trim();
            // Bare words such as `true` or `12` parse as TOML values; anything
            // else is taken as a string and left to the schema to reject.
            let value = format!("v = {raw}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            table.insert(key.to_string(), value);
        }
        let cfg: Self = toml::Value::Table(table).try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serialises to the file format accepted by [`PipelineConfig::parse`].
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check(self.rho >= 1, "rho", "must be at least 1")?;
        check(self.d_max >= 1, "d_max", "must be at least 1")?;
        check(self.sigma_floor > 0.0, "sigma_floor", "must be positive")?;
        check(self.lambda_y >= 0.0, "lambda_y", "must be non-negative")?;
        check((1..=127).contains(&self.step_y), "step_y", "must lie in [1, 127]")?;
        check(self.tr_y > 0.0, "tr_y", "must be positive")?;
        check(self.eps_y > 0.0 && self.eps_y <= 1.0, "eps_y", "must lie in (0, 1]")?;
        check(self.varpi >= 0.0, "varpi", "must be non-negative")?;
        check(self.sigma_s > 0.0, "sigma_s", "must be positive")?;
        check(self.sigma_r > 0.0, "sigma_r", "must be positive")?;
        check(self.bf_window % 2 == 1, "bf_window", "must be odd")?;
        check(self.sobel_threshold >= 0.0, "sobel_threshold", "must be non-negative")?;
        check(self.rho_vote > 0.0, "rho_vote", "must be positive")?;
        check(self.lambda_x >= 0.0, "lambda_x", "must be non-negative")?;
        check((1..=127).contains(&self.step_x), "step_x", "must lie in [1, 127]")?;
        check(self.tr_x > 0.0, "tr_x", "must be positive")?;
        check(self.eps_x > 0.0 && self.eps_x <= 1.0, "eps_x", "must lie in (0, 1]")?;
        check(self.kappa > 0.0 && self.kappa.is_finite(), "kappa", "must be positive")?;
        check(self.eps_g >= 0.0, "eps_g", "must be non-negative")?;
        check(self.sigma_g > 0.0, "sigma_g", "must be positive")?;
        check(self.lambda_g >= 0.0, "lambda_g", "must be non-negative")?;
        check(self.xi >= 0.0 && self.xi <= 4.0, "xi", "must lie in [0, 4]")?;
        check(self.tr_lpv.is_none_or(|t| t.is_finite()), "tr_lpv", "must be finite")?;
        check(
            self.ransac_max_iterations >= 1,
            "ransac_max_iterations",
            "must be at least 1",
        )?;
        check(
            (0.0..=1.0).contains(&self.ransac_min_consensus),
            "ransac_min_consensus",
            "must lie in [0, 1]",
        )?;
        Ok(())
    }

    pub fn stereo(&self) -> StereoConfig {
        StereoConfig {
            rho: self.rho,
            d_min: 0,
            d_max: self.d_max,
            tau: self.tau,
            tr_lrc: self.tr_lrc,
            sigma_floor: self.sigma_floor,
        }
    }

    pub fn smoothness(&self) -> Smoothness {
        if self.signed_smoothness {
            Smoothness::Signed
        } else {
            Smoothness::Penalty
        }
    }

    pub fn road_ransac(&self) -> RansacConfig {
        RansacConfig {
            tolerance: self.tr_y,
            inlier_fraction: self.eps_y,
            max_iterations: self.ransac_max_iterations,
            rng_seed: self.rng_seed,
            min_consensus: self.ransac_min_consensus,
            ..RansacConfig::road()
        }
    }

    pub fn vanishing_ransac(&self) -> RansacConfig {
        RansacConfig {
            tolerance: self.tr_x,
            inlier_fraction: self.eps_x,
            max_iterations: self.ransac_max_iterations,
            rng_seed: self.rng_seed.wrapping_add(1),
            min_consensus: self.ransac_min_consensus,
            ..RansacConfig::vanishing()
        }
    }
}
