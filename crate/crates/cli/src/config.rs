//! The flat run configuration: file values, overridden by flags, completed with defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FoldsSetting {
    K(usize),
    Named(String),
}

/// Every key is optional in a file; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,

    // input
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,

    // estimator
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_scale: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,

    // bandwidth selection
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<FoldsSetting>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criterion: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dispersion: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine_radius: Option<f64>,

    // simulation
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_comp: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd_contam: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rep: Option<u64>,

    // Monte Carlo
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_pred: Option<usize>,
    /// `[delta, shift]` pairs, one Monte Carlo scenario each.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contaminations: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),* $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        if let Some(v) = cfg.schema_version {
            if v != SCHEMA_VERSION {
                return Err(format!(
                    "schema_version {v} is not supported (expected {SCHEMA_VERSION})"
                ));
            }
        }
        Ok(cfg)
    }

    /// Values set in `top` win.
    pub fn overlay(&mut self, top: &RunConfig) {
        overlay!(self, top;
            schema_version, seed, threads, out_dir, data, method, h, scale_mode, local_scale,
            fallback, c0, c1, b, max_iter, tol, grid, h_grid, folds, criterion, dispersion,
            refine_step, refine_radius, alpha, b_comp, sigma, n, delta, shift, sd_contam, rep,
            scenario, n_reps, n_pred, contaminations, methods,
        );
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    /// The config without keys that only steer execution (thread count, output location),
    /// which by design do not change any result.
    pub fn result_relevant(&self) -> RunConfig {
        RunConfig {
            threads: None,
            out_dir: None,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("schema_version = 1\nbandwith = 0.3\n").unwrap_err();
        assert!(err.contains("bandwith"), "{err}");
    }

    #[test]
    fn wrong_schema_is_rejected() {
        assert!(RunConfig::parse("schema_version = 2\n").is_err());
    }

    #[test]
    fn overlay_and_round_trip() {
        let mut base = RunConfig::parse(
            "seed = 4\nmethod = \"cl1\"\nfolds = \"loo\"\ncontaminations = [[0.0, 0.0], [0.1, 10.0]]\n",
        )
        .unwrap();
        let top = RunConfig {
            method: Some("rob1".into()),
            folds: Some(FoldsSetting::K(5)),
            ..Default::default()
        };
        base.overlay(&top);
        assert_eq!(base.seed, Some(4));
        assert_eq!(base.method.as_deref(), Some("rob1"));
        let again = RunConfig::parse(&base.to_toml()).unwrap();
        assert_eq!(again, base);
    }
}
