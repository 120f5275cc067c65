//! On-disk artifacts: fit.json, frontier.csv and tests.csv.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sfbreak::{FitResult, Theta};

use crate::error::{CliError, Result};

pub const FIT_FILE: &str = "fit.json";
pub const FRONTIER_FILE: &str = "frontier.csv";
pub const FRONTIER_PLOT: &str = "frontier.svg";
pub const TESTS_FILE: &str = "tests.csv";

/// Rounds to 12 significant digits; negative zero becomes zero.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

/// Shortest text that reads back as `sig12(x)`; non-finite values become
/// `inf`, `-inf` or `nan`.
pub fn fmt12(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{}", sig12(x))
    }
}

fn round_vec(v: &[f64]) -> Vec<f64> {
    v.iter().copied().map(sig12).collect()
}

fn round_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().map(sig12).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaRecord {
    pub theta_x: Vec<f64>,
    pub mu: f64,
    pub sigma_v: f64,
    pub sigma_e: f64,
}

/// Contents of fit.json. Matrices are row-major in the order
/// (θ_x..., μ, σ_v, σ_e); NaN entries serialize as null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub data_path: PathBuf,
    pub columns: Vec<String>,
    pub n: usize,
    pub inefficiency: String,
    pub theta: ThetaRecord,
    pub standard_errors: Vec<f64>,
    pub vcov: Vec<Vec<Option<f64>>>,
    pub information: Vec<Vec<f64>>,
    pub loglik: f64,
    pub u_point: f64,
    pub e0: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub fixed_mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl FitArtifact {
    pub fn new(
        fit: &FitResult,
        data_path: &Path,
        columns: &[String],
        inefficiency: &str,
        u_point: f64,
        e0: f64,
        note: Option<String>,
    ) -> Self {
        let t = &fit.theta_hat;
        Self {
            data_path: data_path.to_path_buf(),
            columns: columns.to_vec(),
            n: fit.n,
            inefficiency: inefficiency.into(),
            theta: ThetaRecord {
                theta_x: round_vec(t.theta_x()),
                mu: sig12(t.mu()),
                sigma_v: sig12(t.sigma_v()),
                sigma_e: sig12(t.sigma_e()),
            },
            standard_errors: round_vec(&fit.standard_errors()),
            vcov: round_matrix(&fit.vcov)
                .into_iter()
                .map(|r| r.into_iter().map(|v| v.is_finite().then_some(v)).collect())
                .collect(),
            information: round_matrix(&fit.information),
            loglik: sig12(fit.loglik_value),
            u_point,
            e0: sig12(e0),
            converged: fit.converged,
            iterations: fit.iterations,
            gradient_norm: sig12(fit.gradient_norm),
            fixed_mu: fit.fixed_mu,
            note,
        }
    }

    /// Rebuilds the fit needed downstream (θ̂, covariance, n).
    pub fn to_fit(&self) -> Result<FitResult> {
        let t = &self.theta;
        let theta_hat = Theta::new(t.theta_x.clone(), t.mu, t.sigma_v, t.sigma_e)?;
        let k = theta_hat.dim();
        let matrix = |rows: Vec<Vec<f64>>, what: &str| -> Result<DMatrix<f64>> {
            if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                return Err(CliError::Config(format!("{FIT_FILE}: {what} is not {k}x{k}")));
            }
            Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
        };
        let vcov_rows = self.vcov.iter().map(|r| r.iter().map(|v| v.unwrap_or(f64::NAN)).collect()).collect();
        Ok(FitResult {
            theta_hat,
            loglik_value: self.loglik,
            vcov: matrix(vcov_rows, "vcov")?,
            information: matrix(self.information.clone(), "information")?,
            n: self.n,
            fixed_mu: self.fixed_mu,
            converged: self.converged,
            iterations: self.iterations,
            gradient_norm: self.gradient_norm,
        })
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join(FIT_FILE);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Numerics(e.to_string()))?;
        text.push('\n');
        write_file(&path, &text)?;
        Ok(path)
    }

    pub fn read(out_dir: &Path) -> Result<Self> {
        let path = out_dir.join(FIT_FILE);
        if !path.exists() {
            return Err(CliError::MissingArtifact { path, producer: "fit" });
        }
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// One row of frontier.csv; `ci` is absent when no bootstrap ran.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierRow {
    pub c: f64,
    pub b_raw: f64,
    pub bf: f64,
    pub soft_bf: f64,
    pub se_soft_bf: f64,
    pub ci: Option<(f64, f64)>,
}

pub fn write_frontier_csv(path: &Path, rows: &[FrontierRow]) -> Result<()> {
    let mut text = String::from("c,b_raw,bf,soft_bf,se_soft_bf,ci_lo,ci_hi\n");
    for r in rows {
        let (lo, hi) = match r.ci {
            Some((lo, hi)) => (fmt12(lo), fmt12(hi)),
            None => (String::new(), String::new()),
        };
        text.push_str(&format!(
            "{},{},{},{},{},{lo},{hi}\n",
            fmt12(r.c),
            fmt12(r.b_raw),
            fmt12(r.bf),
            fmt12(r.soft_bf),
            fmt12(r.se_soft_bf)
        ));
    }
    write_file(path, &text)
}

/// Parses frontier.csv back; empty ci cells give `None`.
pub fn read_frontier_csv(path: &Path) -> Result<Vec<FrontierRow>> {
    let err = |m: String| CliError::Data { path: path.to_path_buf(), message: m };
    let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| err(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            record.get(i).unwrap_or("").parse().map_err(|_| err(format!("bad number in column {i}")))
        };
        let ci = if record.get(5).unwrap_or("").is_empty() { None } else { Some((num(5)?, num(6)?)) };
        rows.push(FrontierRow { c: num(0)?, b_raw: num(1)?, bf: num(2)?, soft_bf: num(3)?, se_soft_bf: num(4)?, ci });
    }
    Ok(rows)
}

pub fn write_tests_csv(path: &Path, report: &sfbreak::TestReport) -> Result<()> {
    let mut text = String::from("c,t,critical_value,reject\n");
    for ((c, t), r) in report.c_points.iter().zip(&report.t_statistics).zip(&report.rejections) {
        text.push_str(&format!("{},{},{},{r}\n", fmt12(*c), fmt12(*t), fmt12(report.critical_value)));
    }
    write_file(path, &text)
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}
