//! Sampling uncertainty of the breakdown frontier: delta-method variances,
//! influence functions, the nonparametric bootstrap and Bonferroni tests.

use crate::deltas::{delta_set_at, DeltaSet, SPECIALIZATIONS};
use crate::error::{Error, Result};
use crate::frontier::{b_of_c, breakdown_frontier, soft_max, soft_max_derivative, FrontierCurve};
use crate::likelihood::{maximize, pairwise_sum, score, OptimOptions};
use crate::model::{Dataset, FitResult, Observation, Theta};
use crate::normal;
use nalgebra::{DMatrix, DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Middle matrix of the delta-method sandwich.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CovarianceConvention {
    /// Î⁻¹ / n, the sampling covariance of θ̂.
    #[default]
    InverseInformation,
    /// Î / n, the information matrix itself.
    Information,
}

/// ∂Δ/∂θ at a fixed evaluation point u, 5 × (p + 3).
///
/// Rows follow the canonical Δ order (d1_v, d2_v, d2_ves, d1_ves, d1_e).
/// The θ_x columns are zero since u is held fixed. The remaining columns are
/// Richardson-extrapolated central differences.
pub fn delta_jacobian(theta: &Theta, u: f64) -> Result<DMatrix<f64>> {
    let k = theta.dim();
    let p = k - 3;
    let base = theta.to_vec();
    let mut jac = DMatrix::zeros(5, k);
    for j in p..k {
        let mut h = 1e-3 * base[j].abs().max(1.0);
        if j > p {
            h = h.min(0.25 * base[j]);
        }
        let eval = |step: f64| -> Result<[f64; 5]> {
            let mut v = base.clone();
            v[j] += step;
            Ok(delta_set_at(&Theta::from_slice(&v)?, u)?.to_array())
        };
        let central = |step: f64| -> Result<[f64; 5]> {
            let (fp, fm) = (eval(step)?, eval(-step)?);
            Ok(std::array::from_fn(|r| (fp[r] - fm[r]) / (2.0 * step)))
        };
        let coarse = central(h)?;
        let fine = central(0.5 * h)?;
        for (r, &(_, a2, a3)) in SPECIALIZATIONS.iter().enumerate() {
            // Δs without f_v do not depend on σ_v; Δs without f_e not on (μ, σ_e).
            let depends = if j == p + 1 { a2 != 0.0 } else { a3 != 0.0 };
            if depends {
                jac[(r, j)] = (4.0 * fine[r] - coarse[r]) / 3.0;
            }
        }
    }
    if jac.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite Δ Jacobian at {base:?}")));
    }
    Ok(jac)
}

/// ∂b(c, e0)/∂Δ in the canonical Δ order.
pub fn b_gradient(d: &DeltaSet, c: f64, e0: f64) -> Result<[f64; 5]> {
    let b = b_of_c(d, c, e0)?;
    let den = c - d.d1_e - e0;
    Ok([c / den, c * e0 / den, e0 / den, -1.0 / den, b / den])
}

fn middle_matrix(fit: &FitResult, convention: CovarianceConvention) -> Result<DMatrix<f64>> {
    if fit.vcov.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("fit has no usable covariance matrix".into()));
    }
    Ok(match convention {
        CovarianceConvention::InverseInformation => fit.vcov.clone(),
        CovarianceConvention::Information => &fit.information / fit.n as f64,
    })
}

/// ∇_θ b = ∇_Δ b · ∂Δ/∂θ as a row vector.
fn b_theta_gradient(fit: &FitResult, d: &DeltaSet, c: f64, e0: f64, u: f64) -> Result<RowDVector<f64>> {
    let g = RowDVector::from_row_slice(&b_gradient(d, c, e0)?);
    Ok(g * delta_jacobian(&fit.theta_hat, u)?)
}

/// Finite-sample delta-method variance of b̂(c, e0).
pub fn variance_b(fit: &FitResult, d: &DeltaSet, c: f64, e0: f64, u: f64) -> Result<f64> {
    variance_b_with(fit, d, c, e0, u, CovarianceConvention::default())
}

pub fn variance_b_with(
    fit: &FitResult,
    d: &DeltaSet,
    c: f64,
    e0: f64,
    u: f64,
    convention: CovarianceConvention,
) -> Result<f64> {
    let grad = b_theta_gradient(fit, d, c, e0, u)?;
    let v = (&grad * middle_matrix(fit, convention)? * grad.transpose())[(0, 0)];
    let scale = grad.iter().map(|g| g * g).sum::<f64>() * middle_matrix(fit, convention)?.amax();
    if v < -1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Domain(format!("negative delta-method variance {v}; covariance is not PSD")));
    }
    Ok(v.max(0.0))
}

/// (∂f_ρ/∂b)² · variance_b.
pub fn variance_soft_bf(fit: &FitResult, d: &DeltaSet, c: f64, e0: f64, u: f64, rho: f64) -> Result<f64> {
    let b = b_of_c(d, c, e0)?;
    Ok(soft_max_derivative(b, rho).powi(2) * variance_b(fit, d, c, e0, u)?)
}

/// ψ_b(obs) = ∇_θ b · Î⁻¹ · score(θ̂, obs).
pub fn influence_b(fit: &FitResult, obs: &Observation, d: &DeltaSet, c: f64, e0: f64, u: f64) -> Result<f64> {
    let grad = b_theta_gradient(fit, d, c, e0, u)?;
    influence_with_gradient(fit, &grad, obs)
}

fn influence_with_gradient(fit: &FitResult, grad: &RowDVector<f64>, obs: &Observation) -> Result<f64> {
    let s = DVector::from_vec(score(&fit.theta_hat, obs)?);
    let inv_info = middle_matrix(fit, CovarianceConvention::InverseInformation)? * fit.n as f64;
    Ok((grad * inv_info * s)[(0, 0)])
}

/// ψ_b for every observation of `data`, sharing one Jacobian evaluation.
pub fn influence_b_all(fit: &FitResult, data: &Dataset, d: &DeltaSet, c: f64, e0: f64, u: f64) -> Result<Vec<f64>> {
    let grad = b_theta_gradient(fit, d, c, e0, u)?;
    data.observations().iter().map(|o| influence_with_gradient(fit, &grad, o)).collect()
}

/// Plug-in soft frontier plus the sample mean of f_ρ'(b̂)·ψ_b.
pub fn debiased_soft_bf(fit: &FitResult, data: &Dataset, d: &DeltaSet, c: f64, e0: f64, u: f64, rho: f64) -> Result<f64> {
    let psi = influence_b_all(fit, data, d, c, e0, u)?;
    debiased_soft_bf_with(d, c, e0, rho, &psi)
}

/// De-biased soft frontier from precomputed influence values of b̂.
pub fn debiased_soft_bf_with(d: &DeltaSet, c: f64, e0: f64, rho: f64, influence: &[f64]) -> Result<f64> {
    if influence.is_empty() {
        return Err(Error::InvalidArgument("no influence values".into()));
    }
    let b = b_of_c(d, c, e0)?;
    let slope = soft_max_derivative(b, rho);
    let correction = pairwise_sum(&influence.iter().map(|v| slope * v).collect::<Vec<_>>()) / influence.len() as f64;
    Ok(soft_max(b, rho) + correction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BandMethod {
    /// Empirical α/2 and 1 − α/2 quantiles of the replicate soft frontiers.
    #[default]
    Percentile,
    /// soft ± z_{1−α/2} · sqrt(variance_soft_bf).
    Normal,
}

#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub alpha: f64,
    pub seed: u64,
    pub rho: f64,
    pub method: BandMethod,
    /// Refit settings; the start is always the full-sample estimate.
    pub optim: OptimOptions,
    /// Share of failed refits above which the run aborts.
    pub max_failure_share: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replications: 100,
            alpha: 0.05,
            seed: 0,
            rho: crate::frontier::DEFAULT_RHO,
            method: BandMethod::Percentile,
            optim: OptimOptions { multistart_count: 1, max_iterations: 500, stall_tolerance: 1e-10, ..OptimOptions::default() },
            max_failure_share: 0.2,
        }
    }
}

impl BootstrapConfig {
    fn validate(&self) -> Result<()> {
        if self.replications < 20 {
            return Err(Error::InvalidArgument(format!("need at least 20 replications, got {}", self.replications)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho = {} must be positive", self.rho)));
        }
        Ok(())
    }
}

/// Refitted parameters of each bootstrap replicate, `None` where the refit
/// failed (an error or a start outside the domain).
///
/// Refits that stop at the iteration cap are kept: on resamples whose
/// likelihood peaks on the boundary (μ → -∞ or σ_v → 0) the iterates keep
/// climbing towards the supremum while the Δ functionals settle.
#[derive(Debug, Clone)]
pub struct Replicates {
    pub thetas: Vec<Option<Theta>>,
    /// Per replicate, whether the gradient tolerance was met.
    pub converged: Vec<bool>,
    pub seed: u64,
}

impl Replicates {
    pub fn failed(&self) -> usize {
        self.thetas.iter().filter(|t| t.is_none()).count()
    }

    pub fn unconverged(&self) -> usize {
        self.thetas.iter().zip(&self.converged).filter(|(t, c)| t.is_some() && !**c).count()
    }

    pub fn successful(&self) -> impl Iterator<Item = &Theta> {
        self.thetas.iter().flatten()
    }
}

/// Resampled row indices of replicate `index`; a pure function of
/// (seed, index, n).
pub fn resample_indices(seed: u64, index: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Resamples rows with replacement and refits each replicate from θ̂.
///
/// Replicates run in parallel; each draws from its own ChaCha stream so the
/// output does not depend on the number of worker threads.
pub fn bootstrap_replicates(
    data: &Dataset,
    fit: &FitResult,
    replications: usize,
    seed: u64,
    optim: &OptimOptions,
) -> Replicates {
    let opts = OptimOptions {
        initial_theta: Some(fit.theta_hat.clone()),
        fixed_mu: fit.fixed_mu,
        ..optim.clone()
    };
    let (thetas, converged) = (0..replications)
        .into_par_iter()
        .map(|b| {
            let sample = data.resample(&resample_indices(seed, b, data.len()));
            match maximize(&sample, &opts) {
                Ok((theta, outcome)) => (Some(theta), outcome.converged),
                Err(_) => (None, false),
            }
        })
        .unzip();
    Replicates { thetas, converged, seed }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapBands {
    /// Point-estimate frontier with soft values at the configured ρ.
    pub curve: FrontierCurve,
    pub lower_band: Vec<f64>,
    pub upper_band: Vec<f64>,
    pub replications: usize,
    pub alpha: f64,
    pub seed: u64,
    pub failed_replications: usize,
    /// Replicates kept although their refit stopped at the iteration cap.
    pub unconverged_replications: usize,
    pub method: BandMethod,
    /// Whether the band contains the point soft frontier at each grid point.
    pub contains_point: Vec<bool>,
}

impl BootstrapBands {
    pub fn all_contain_point(&self) -> bool {
        self.contains_point.iter().all(|&v| v)
    }
}

/// Linear-interpolation empirical quantile (type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pointwise bootstrap bands for the soft breakdown frontier at a fixed u.
pub fn bootstrap_frontier(
    data: &Dataset,
    fit: &FitResult,
    u: f64,
    e0: f64,
    c_grid: &[f64],
    config: &BootstrapConfig,
) -> Result<BootstrapBands> {
    config.validate()?;
    let d = delta_set_at(&fit.theta_hat, u)?;
    let curve = breakdown_frontier(&d, e0, c_grid)?.with_soft(config.rho)?;
    let soft = curve.soft_values.clone().unwrap_or_default();

    let reps = bootstrap_replicates(data, fit, config.replications, config.seed, &config.optim);
    let mut failed = reps.failed();
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(config.replications); curve.c_grid.len()];
    for theta in reps.successful() {
        let values: Option<Vec<f64>> = delta_set_at(theta, u).ok().and_then(|dr| {
            curve.c_grid.iter().map(|&c| b_of_c(&dr, c, e0).ok().map(|b| soft_max(b, config.rho))).collect()
        });
        match values {
            Some(v) if v.iter().all(|x| x.is_finite()) => {
                for (col, x) in columns.iter_mut().zip(v) {
                    col.push(x);
                }
            }
            _ => failed += 1,
        }
    }
    if failed as f64 > config.max_failure_share * config.replications as f64 {
        return Err(Error::BootstrapFailures { failed, total: config.replications });
    }

    let (lower_band, upper_band): (Vec<f64>, Vec<f64>) = match config.method {
        BandMethod::Percentile => columns
            .iter_mut()
            .map(|col| {
                col.sort_by(f64::total_cmp);
                (quantile_sorted(col, config.alpha / 2.0), quantile_sorted(col, 1.0 - config.alpha / 2.0))
            })
            .unzip(),
        BandMethod::Normal => {
            let z = normal::quantile(1.0 - config.alpha / 2.0);
            let vars = curve
                .c_grid
                .iter()
                .map(|&c| variance_soft_bf(fit, &d, c, e0, u, config.rho))
                .collect::<Result<Vec<_>>>()?;
            soft.iter().zip(vars).map(|(s, v)| (s - z * v.sqrt(), s + z * v.sqrt())).unzip()
        }
    };
    let contains_point = soft
        .iter()
        .zip(lower_band.iter().zip(&upper_band))
        .map(|(s, (lo, hi))| lo <= s && s <= hi)
        .collect();
    Ok(BootstrapBands {
        curve,
        lower_band,
        upper_band,
        replications: config.replications,
        alpha: config.alpha,
        seed: config.seed,
        failed_replications: failed,
        unconverged_replications: reps.unconverged(),
        method: config.method,
        contains_point,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub c_points: Vec<f64>,
    pub t_statistics: Vec<f64>,
    pub critical_value: f64,
    pub rejections: Vec<bool>,
    pub alpha: f64,
    #[serde(rename = "P")]
    pub p: usize,
}

/// One-sided tests of H0: b(c_k, e0) ≤ 0 with a Bonferroni-corrected level.
///
/// `variances` are asymptotic, i.e. σ̂² = n·variance_b, so that
/// t = √n·b̂/σ̂ = b̂/sqrt(variance_b).
pub fn bonferroni_tests(c_points: &[f64], b_hats: &[f64], variances: &[f64], n: usize, alpha: f64) -> Result<TestReport> {
    if b_hats.len() != variances.len() || b_hats.len() != c_points.len() {
        return Err(Error::DimensionMismatch { expected: b_hats.len(), got: variances.len().min(c_points.len()) });
    }
    if b_hats.is_empty() || n == 0 {
        return Err(Error::InvalidArgument("need at least one hypothesis and n > 0".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if let Some(v) = variances.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Domain(format!("variance {v} must be positive")));
    }
    let p = b_hats.len();
    let critical_value = normal::quantile(1.0 - alpha / p as f64);
    let root_n = (n as f64).sqrt();
    let t_statistics: Vec<f64> = b_hats.iter().zip(variances).map(|(b, v)| root_n * b / v.sqrt()).collect();
    let rejections = t_statistics.iter().map(|t| *t >= critical_value).collect();
    Ok(TestReport { c_points: c_points.to_vec(), t_statistics, critical_value, rejections, alpha, p })
}
