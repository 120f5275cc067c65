//! Run configuration: defaults, an optional JSON file, then command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Distribution family fitted for the inefficiency term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Inefficiency {
    /// Truncated normal; if that fit fails to converge, refit with μ = 0.
    #[default]
    Auto,
    TruncatedNormal,
    HalfNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Bands {
    #[default]
    Percentile,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_path: Option<PathBuf>,
    pub output_column: String,
    pub input_columns: Vec<String>,
    pub log_transform: bool,
    pub u_point: f64,
    pub e0: Option<f64>,
    pub c_max: Option<f64>,
    pub grid_size: usize,
    pub rho: f64,
    pub rho_auto: bool,
    #[serde(rename = "bootstrap_B", alias = "bootstrap_b")]
    pub bootstrap_b: usize,
    pub alpha: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub inefficiency: Inefficiency,
    pub band_method: Bands,
    pub test_points: usize,
    pub run_tests: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_path: None,
            output_column: "PROD".into(),
            input_columns: vec!["AREA".into(), "LABOR".into(), "NPK".into()],
            log_transform: true,
            u_point: 0.0,
            e0: None,
            c_max: None,
            grid_size: 200,
            rho: 10.0,
            rho_auto: false,
            bootstrap_b: 100,
            alpha: 0.05,
            seed: 0,
            out_dir: PathBuf::from("out"),
            inefficiency: Inefficiency::Auto,
            band_method: Bands::Percentile,
            test_points: 5,
            run_tests: false,
        }
    }
}

/// Flags mirroring [`RunConfig`]; anything given here overrides the file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON file with RunConfig fields
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, visible_alias = "data", global = true)]
    pub data_path: Option<PathBuf>,
    #[arg(long, global = true)]
    pub output_column: Option<String>,
    #[arg(long, value_delimiter = ',', global = true)]
    pub input_columns: Option<Vec<String>>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true", global = true)]
    pub log_transform: Option<bool>,
    #[arg(long, allow_hyphen_values = true, global = true)]
    pub u_point: Option<f64>,
    #[arg(long, global = true)]
    pub e0: Option<f64>,
    #[arg(long, global = true)]
    pub c_max: Option<f64>,
    #[arg(long, global = true)]
    pub grid_size: Option<usize>,
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    /// Use ρ = max(10, 2 ln n) instead of --rho
    #[arg(long, num_args = 0..=1, default_missing_value = "true", global = true)]
    pub rho_auto: Option<bool>,
    /// Bootstrap replications; 0 disables the bootstrap
    #[arg(long, global = true)]
    pub bootstrap_b: Option<usize>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub inefficiency: Option<Inefficiency>,
    #[arg(long, value_enum, global = true)]
    pub band_method: Option<Bands>,
    /// Number of c points tested by `test`
    #[arg(long, global = true)]
    pub test_points: Option<usize>,
    /// Also write tests.csv during `run`
    #[arg(long, num_args = 0..=1, default_missing_value = "true", global = true)]
    pub run_tests: Option<bool>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            )*};
        }
        take!(
            output_column,
            input_columns,
            log_transform,
            u_point,
            grid_size,
            rho,
            rho_auto,
            bootstrap_b,
            alpha,
            seed,
            out_dir,
            inefficiency,
            band_method,
            test_points,
            run_tests
        );
        if self.data_path.is_some() {
            cfg.data_path = self.data_path.clone();
        }
        if self.e0.is_some() {
            cfg.e0 = self.e0;
        }
        if self.c_max.is_some() {
            cfg.c_max = self.c_max;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_file(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    let mut cfg: RunConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    // A relative data path in a config file is taken relative to the file.
    if let (Some(data), Some(dir)) = (&cfg.data_path, path.parent()) {
        if data.is_relative() && !dir.as_os_str().is_empty() {
            cfg.data_path = Some(dir.join(data));
        }
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.grid_size < 2 {
            return bad(format!("grid_size = {} must be at least 2", self.grid_size));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} must lie in (0, 1)", self.alpha));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho = {} must be positive", self.rho));
        }
        if !self.u_point.is_finite() {
            return bad("u_point must be finite".into());
        }
        if let Some(e0) = self.e0 {
            if !(e0 > 0.0 && e0 < 1.0) {
                return bad(format!("e0 = {e0} must lie in (0, 1)"));
            }
        }
        if let Some(c) = self.c_max {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("c_max = {c} must be positive"));
            }
        }
        if (1..20).contains(&self.bootstrap_b) {
            return bad(format!("bootstrap_B = {} is too small; use 0 to disable or at least 20", self.bootstrap_b));
        }
        if self.test_points == 0 {
            return bad("test_points must be at least 1".into());
        }
        if self.output_column.is_empty() {
            return bad("output_column is empty".into());
        }
        Ok(())
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data_path
            .as_deref()
            .ok_or_else(|| CliError::Config("no data file given; pass --data-path or set data_path".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 7, "bootstrap_B": 0, "data_path": "d.csv"}"#).unwrap();
        let args = ConfigArgs { config: Some(path), seed: Some(9), ..ConfigArgs::default() };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.bootstrap_b, 0);
        assert_eq!(cfg.data_path.unwrap(), dir.path().join("d.csv"));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
        let cfg = RunConfig { alpha: 1.0, ..RunConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig { grid_size: 1, ..RunConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig { bootstrap_b: 5, ..RunConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
