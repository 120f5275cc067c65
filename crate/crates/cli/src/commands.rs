//! Pipeline stages behind each subcommand.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sfbreak::deltas::{delta_set_at, oracle_grid};
use sfbreak::frontier::{point_efficiency, pole_location};
use sfbreak::inference::variance_b;
use sfbreak::{
    b_of_c, bonferroni_tests, bootstrap_frontier, breakdown_frontier, delta_set, delta_set_quadrature,
    delta_set_simulated, fit_mle, rho_schedule, variance_soft_bf, BandMethod, BootstrapConfig, Dataset, FitResult,
    OptimOptions, TestReport, Theta,
};

use crate::artifacts::{
    fmt12, write_file, write_frontier_csv, write_tests_csv, FitArtifact, FrontierRow, FRONTIER_FILE, FRONTIER_PLOT,
    TESTS_FILE,
};
use crate::config::{Bands, Inefficiency, RunConfig};
use crate::error::{CliError, Result};
use crate::ingest::ingest_csv;
use crate::svg;

pub struct FitStage {
    pub data: Dataset,
    pub fit: FitResult,
    pub artifact: FitArtifact,
}

fn fit_family(data: &Dataset, fixed_mu: Option<f64>) -> sfbreak::Result<FitResult> {
    fit_mle(data, &OptimOptions { fixed_mu, ..OptimOptions::default() })
}

/// Ingests the data, fits the model and writes fit.json. A fit that does
/// not converge is still written, then reported as an error.
pub fn fit(cfg: &RunConfig) -> Result<FitStage> {
    let path = cfg.data_path()?;
    let data = ingest_csv(path, cfg)?;
    let (fit, family, note) = match cfg.inefficiency {
        Inefficiency::TruncatedNormal => (fit_family(&data, None)?, "truncated-normal", None),
        Inefficiency::HalfNormal => (fit_family(&data, Some(0.0))?, "half-normal", None),
        Inefficiency::Auto => match fit_family(&data, None) {
            Ok(f) if f.converged => (f, "truncated-normal", None),
            tn => {
                let reason = match &tn {
                    Ok(f) => format!(
                        "truncated-normal fit did not converge in {} iterations (mu reached {:.3})",
                        f.iterations,
                        f.theta_hat.mu()
                    ),
                    Err(e) => format!("truncated-normal fit failed: {e}"),
                };
                (fit_family(&data, Some(0.0))?, "half-normal", Some(format!("{reason}; refitted with mu = 0")))
            }
        },
    };
    let d = delta_set_at(&fit.theta_hat, cfg.u_point)?;
    let e0 = point_efficiency(&d);
    let artifact = FitArtifact::new(&fit, path, data.column_names(), family, cfg.u_point, e0, note);
    let written = artifact.write(&cfg.out_dir)?;
    if !fit.converged {
        return Err(CliError::Fit(format!(
            "optimizer stopped after {} iterations without converging (gradient norm {:.2e}); candidate written to {}",
            fit.iterations,
            fit.gradient_norm,
            written.display()
        )));
    }
    Ok(FitStage { data, fit, artifact })
}

pub fn load_fit(cfg: &RunConfig) -> Result<(FitArtifact, FitResult)> {
    let artifact = FitArtifact::read(&cfg.out_dir)?;
    if !artifact.converged {
        return Err(CliError::Fit(format!(
            "{} holds a fit that did not converge; refit before computing frontiers",
            cfg.out_dir.join(crate::artifacts::FIT_FILE).display()
        )));
    }
    let fit = artifact.to_fit()?;
    Ok((artifact, fit))
}

/// Re-reads the data behind a cached fit; `data_path` in the configuration
/// wins over the path recorded in fit.json.
pub fn reload_data(cfg: &RunConfig, artifact: &FitArtifact) -> Result<Dataset> {
    let path: PathBuf = cfg.data_path.clone().unwrap_or_else(|| artifact.data_path.clone());
    let data = ingest_csv(&path, cfg)?;
    if data.len() != artifact.n || data.regressors() != artifact.theta.theta_x.len() {
        return Err(CliError::Config(format!(
            "{} has {} rows and {} regressors but fit.json was estimated on {} rows and {} regressors",
            path.display(),
            data.len(),
            data.regressors(),
            artifact.n,
            artifact.theta.theta_x.len()
        )));
    }
    Ok(data)
}

/// Equally spaced c values on [0, c_max]; without `c_max` the grid stops
/// just short of the pole or at 1, whichever comes first.
pub fn c_grid(cfg: &RunConfig, pole: f64, points: usize) -> Vec<f64> {
    let c_max = cfg.c_max.unwrap_or_else(|| {
        let m = (pole - 1e-3).min(1.0);
        if m > 0.0 { m } else { 0.5 * pole.max(1e-3) }
    });
    (0..points).map(|k| c_max * k as f64 / (points - 1).max(1) as f64).collect()
}

pub struct FrontierSummary {
    pub e0: f64,
    pub rho: f64,
    pub rows: Vec<FrontierRow>,
    pub pole: f64,
    pub skipped: Vec<f64>,
    pub bootstrap: Option<BootstrapSummary>,
}

pub struct BootstrapSummary {
    pub failed: usize,
    pub unconverged: usize,
    pub outside: usize,
}

fn rho_for(cfg: &RunConfig, n: usize) -> Result<f64> {
    Ok(if cfg.rho_auto { rho_schedule(n)? } else { cfg.rho })
}

/// Writes frontier.csv and frontier.svg; with `data` and B > 0 the
/// bootstrap bands fill the ci columns.
pub fn frontier(cfg: &RunConfig, fit: &FitResult, data: Option<&Dataset>) -> Result<FrontierSummary> {
    let u = cfg.u_point;
    let d = delta_set_at(&fit.theta_hat, u)?;
    let e0 = cfg.e0.unwrap_or_else(|| point_efficiency(&d));
    let rho = rho_for(cfg, fit.n)?;
    let pole = pole_location(&d, e0);
    let grid = c_grid(cfg, pole, cfg.grid_size);
    let curve = breakdown_frontier(&d, e0, &grid)?.with_soft(rho)?;
    let soft = curve.soft_values.clone().unwrap_or_default();

    let se = curve
        .c_grid
        .iter()
        .map(|&c| variance_soft_bf(fit, &d, c, e0, u, rho).map(f64::sqrt))
        .collect::<sfbreak::Result<Vec<_>>>()?;

    let (bands, bootstrap) = match data {
        Some(data) if cfg.bootstrap_b > 0 => {
            let config = BootstrapConfig {
                replications: cfg.bootstrap_b,
                alpha: cfg.alpha,
                seed: cfg.seed,
                rho,
                method: match cfg.band_method {
                    Bands::Percentile => BandMethod::Percentile,
                    Bands::Normal => BandMethod::Normal,
                },
                ..BootstrapConfig::default()
            };
            let b = bootstrap_frontier(data, fit, u, e0, &curve.c_grid, &config)?;
            let outside = b.contains_point.iter().filter(|x| !**x).count();
            let summary =
                BootstrapSummary { failed: b.failed_replications, unconverged: b.unconverged_replications, outside };
            (Some((b.lower_band, b.upper_band)), Some(summary))
        }
        _ => (None, None),
    };

    let rows: Vec<FrontierRow> = (0..curve.c_grid.len())
        .map(|i| FrontierRow {
            c: curve.c_grid[i],
            b_raw: curve.b_values[i],
            bf: curve.bf_values[i],
            soft_bf: soft[i],
            se_soft_bf: se[i],
            ci: bands.as_ref().map(|(lo, hi)| (lo[i], hi[i])),
        })
        .collect();
    write_frontier_csv(&cfg.out_dir.join(FRONTIER_FILE), &rows)?;
    let plot = svg::render(&svg::PlotInput {
        e0,
        c: &curve.c_grid,
        bf: &curve.bf_values,
        soft: &soft,
        bands: bands.as_ref().map(|(lo, hi)| (lo.as_slice(), hi.as_slice())),
    });
    write_file(&cfg.out_dir.join(FRONTIER_PLOT), &plot)?;
    Ok(FrontierSummary { e0, rho, rows, pole, skipped: curve.pole_points, bootstrap })
}

/// Bonferroni-corrected tests of H0: b(c, e0) ≤ 0 at `test_points` c values
/// spread over the frontier grid; writes tests.csv.
pub fn test(cfg: &RunConfig, fit: &FitResult) -> Result<TestReport> {
    let u = cfg.u_point;
    let d = delta_set_at(&fit.theta_hat, u)?;
    let e0 = cfg.e0.unwrap_or_else(|| point_efficiency(&d));
    let pole = pole_location(&d, e0);
    let points = c_grid(cfg, pole, cfg.test_points);
    let mut b_hats = Vec::with_capacity(points.len());
    let mut variances = Vec::with_capacity(points.len());
    for &c in &points {
        b_hats.push(b_of_c(&d, c, e0)?);
        variances.push(fit.n as f64 * variance_b(fit, &d, c, e0, u)?);
    }
    let report = bonferroni_tests(&points, &b_hats, &variances, fit.n, cfg.alpha)?;
    write_tests_csv(&cfg.out_dir.join(TESTS_FILE), &report)?;
    Ok(report)
}

pub struct DeltaCheckRow {
    pub point: [f64; 4],
    pub quadrature_rel_error: f64,
    pub simulation_max_z: f64,
    pub quadrature_pass: bool,
    pub simulation_pass: bool,
}

/// Closed form against adaptive quadrature (relative error ≤ `tol`) and
/// against simulation (every |z| ≤ `z_max`) over the oracle grid.
///
/// Quadrature is the deciding oracle. The simulation verdict is a
/// diagnostic: when the f_v peak sits far out in the tail of the sampling
/// density, plain Monte Carlo rarely visits it and its own standard error
/// is too small, so large |z| there is expected.
pub fn check_deltas(points: usize, draws: usize, tol: f64, z_max: f64, seed: u64) -> Result<Vec<DeltaCheckRow>> {
    if points == 0 || draws < 2 {
        return Err(CliError::Config("check-deltas needs --grid ≥ 1 and --draws ≥ 2".into()));
    }
    oracle_grid(points)
        .into_par_iter()
        .enumerate()
        .map(|(i, p)| {
            let [u, sv, se, mu] = p;
            let closed = delta_set(u, sv, se, mu)?.to_array();
            let quad = delta_set_quadrature(u, sv, se, mu, 1e-15)?.to_array();
            let rel = closed.iter().zip(&quad).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
            let theta = Theta::new(vec![0.0], mu, sv, se)?;
            let sim = delta_set_simulated(u, &theta, draws, seed.wrapping_add(i as u64))?;
            let z = closed
                .iter()
                .zip(sim.estimate.to_array())
                .zip(sim.std_errors)
                .map(|((c, s), e)| ((s - c) / e).abs())
                .fold(0.0, f64::max);
            Ok(DeltaCheckRow {
                point: p,
                quadrature_rel_error: rel,
                simulation_max_z: z,
                quadrature_pass: rel <= tol,
                simulation_pass: z <= z_max,
            })
        })
        .collect()
}

pub fn format_delta_table(rows: &[DeltaCheckRow], tol: f64, z_max: f64) -> String {
    let mut out = format!(
        "{:>4} {:>9} {:>9} {:>9} {:>9} {:>12} {:>5} {:>8} {:>5}\n",
        "#", "u", "sigma_v", "sigma_e", "mu", "quad_relerr", "quad", "sim_|z|", "sim"
    );
    for (i, r) in rows.iter().enumerate() {
        let [u, sv, se, mu] = r.point;
        out.push_str(&format!(
            "{:>4} {u:>9.4} {sv:>9.4} {se:>9.4} {mu:>9.4} {:>12.3e} {:>5} {:>8.2} {:>5}\n",
            i + 1,
            r.quadrature_rel_error,
            verdict(r.quadrature_pass),
            r.simulation_max_z,
            verdict(r.simulation_pass)
        ));
    }
    let worst_rel = rows.iter().map(|r| r.quadrature_rel_error).fold(0.0, f64::max);
    let worst_z = rows.iter().map(|r| r.simulation_max_z).fold(0.0, f64::max);
    let quad_ok = rows.iter().filter(|r| r.quadrature_pass).count();
    let sim_ok = rows.iter().filter(|r| r.simulation_pass).count();
    out.push_str(&format!(
        "quadrature: max relative error {worst_rel:.3e} (tolerance {tol:.0e}), {quad_ok} of {} points pass\n",
        rows.len()
    ));
    out.push_str(&format!(
        "simulation: max |z| {worst_z:.2} (limit {z_max}), {sim_ok} of {} points pass (diagnostic only)\n",
        rows.len()
    ));
    out
}

fn verdict(ok: bool) -> &'static str {
    if ok { "pass" } else { "FAIL" }
}

pub fn describe_fit(a: &FitArtifact) -> String {
    let mut s = format!(
        "{} fit on {} observations: loglik {}, e0(u={}) = {}, converged {} after {} iterations\n",
        a.inefficiency,
        a.n,
        fmt12(a.loglik),
        a.u_point,
        fmt12(a.e0),
        a.converged,
        a.iterations
    );
    if let Some(note) = &a.note {
        s.push_str(&format!("note: {note}\n"));
    }
    s
}

pub fn describe_frontier(f: &FrontierSummary, out_dir: &Path) -> String {
    let positive = f.rows.iter().filter(|r| r.bf > 0.0).count();
    let mut s = format!(
        "frontier at e0 = {} (rho = {}): {} grid points, BF > 0 at {}, pole at c = {} -> {}\n",
        fmt12(f.e0),
        f.rho,
        f.rows.len(),
        positive,
        fmt12(f.pole),
        out_dir.join(FRONTIER_FILE).display()
    );
    if !f.skipped.is_empty() {
        s.push_str(&format!("skipped {} grid points at the pole\n", f.skipped.len()));
    }
    if let Some(b) = &f.bootstrap {
        s.push_str(&format!(
            "bootstrap: {} failed and {} unconverged refits; point estimate outside the band at {} grid points\n",
            b.failed, b.unconverged, b.outside
        ));
    }
    s
}
