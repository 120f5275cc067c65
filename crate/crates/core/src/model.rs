//! Data and parameter types shared by the estimation and frontier code.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// One production unit: log output and the frontier regressors.
///
/// `x` carries the constant as its first entry when the frontier has an
/// intercept. Identifiers are carried through untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: f64,
    pub x: Vec<f64>,
    pub unit_id: Option<String>,
    pub period: Option<String>,
}

impl Observation {
    pub fn new(y: f64, x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidData("observation has no regressors".into()));
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("observation contains a non-finite value".into()));
        }
        Ok(Self { y, x, unit_id: None, period: None })
    }

    pub fn with_ids(mut self, unit_id: Option<String>, period: Option<String>) -> Self {
        self.unit_id = unit_id;
        self.period = period;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<Observation>,
    column_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking that every observation has the same
    /// regressor count. `column_names` names the regressors (constant
    /// included) and may be empty.
    pub fn new(observations: Vec<Observation>, column_names: Vec<String>) -> Result<Self> {
        let first = observations
            .first()
            .ok_or_else(|| Error::InvalidData("dataset is empty".into()))?;
        let p = first.x.len();
        for (i, obs) in observations.iter().enumerate() {
            if obs.x.len() != p {
                return Err(Error::InvalidData(format!(
                    "observation {i} has {} regressors, expected {p}",
                    obs.x.len()
                )));
            }
            if !obs.y.is_finite() || obs.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!("observation {i} contains a non-finite value")));
            }
        }
        if !column_names.is_empty() && column_names.len() != p {
            return Err(Error::InvalidData(format!(
                "{} column names for {p} regressors",
                column_names.len()
            )));
        }
        Ok(Self { observations, column_names })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Regressor count p.
    pub fn regressors(&self) -> usize {
        self.observations[0].x.len()
    }

    /// Fails unless there are at least p + 3 observations.
    pub fn check_fittable(&self) -> Result<()> {
        let needed = self.regressors() + 3;
        if self.len() < needed {
            return Err(Error::InvalidData(format!(
                "{} observations cannot identify {needed} parameters",
                self.len()
            )));
        }
        Ok(())
    }

    /// Dataset made of the observations at `indices` (repeats allowed).
    pub fn resample(&self, indices: &[usize]) -> Dataset {
        Dataset {
            observations: indices.iter().map(|&i| self.observations[i].clone()).collect(),
            column_names: self.column_names.clone(),
        }
    }

    pub(crate) fn y_vector(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.y).collect()
    }
}

/// Model parameters θ = (θ_x, μ, σ_v, σ_e).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ThetaRepr")]
pub struct Theta {
    theta_x: Vec<f64>,
    mu: f64,
    sigma_v: f64,
    sigma_e: f64,
}

#[derive(Deserialize)]
struct ThetaRepr {
    theta_x: Vec<f64>,
    mu: f64,
    sigma_v: f64,
    sigma_e: f64,
}

impl TryFrom<ThetaRepr> for Theta {
    type Error = Error;
    fn try_from(r: ThetaRepr) -> Result<Self> {
        Theta::new(r.theta_x, r.mu, r.sigma_v, r.sigma_e)
    }
}

impl Theta {
    pub fn new(theta_x: Vec<f64>, mu: f64, sigma_v: f64, sigma_e: f64) -> Result<Self> {
        if theta_x.is_empty() {
            return Err(Error::Domain("theta_x must be non-empty".into()));
        }
        if !(sigma_v > 0.0 && sigma_v.is_finite()) || !(sigma_e > 0.0 && sigma_e.is_finite()) {
            return Err(Error::Domain(format!(
                "scales must be positive and finite (sigma_v = {sigma_v}, sigma_e = {sigma_e})"
            )));
        }
        if !mu.is_finite() || theta_x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite location or frontier coefficient".into()));
        }
        Ok(Self { theta_x, mu, sigma_v, sigma_e })
    }

    pub fn theta_x(&self) -> &[f64] {
        &self.theta_x
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn sigma_v(&self) -> f64 {
        self.sigma_v
    }
    pub fn sigma_e(&self) -> f64 {
        self.sigma_e
    }

    /// p + 3.
    pub fn dim(&self) -> usize {
        self.theta_x.len() + 3
    }

    /// Flattened as (θ_x, μ, σ_v, σ_e).
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.theta_x.clone();
        v.extend([self.mu, self.sigma_v, self.sigma_e]);
        v
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() < 4 {
            return Err(Error::InvalidArgument(format!("parameter vector of length {} is too short", v.len())));
        }
        let p = v.len() - 3;
        Theta::new(v[..p].to_vec(), v[p], v[p + 1], v[p + 2])
    }

    /// Unconstrained coordinates (θ_x, μ, ln σ_v, ln σ_e).
    pub fn to_unconstrained(&self) -> Vec<f64> {
        let mut v = self.theta_x.clone();
        v.extend([self.mu, self.sigma_v.ln(), self.sigma_e.ln()]);
        v
    }

    pub fn from_unconstrained(v: &[f64]) -> Result<Self> {
        let p = v.len() - 3;
        Theta::new(v[..p].to_vec(), v[p], v[p + 1].exp(), v[p + 2].exp())
    }

    /// Same distributional parameters with different frontier coefficients.
    pub fn with_theta_x(&self, theta_x: Vec<f64>) -> Result<Self> {
        Theta::new(theta_x, self.mu, self.sigma_v, self.sigma_e)
    }
}

/// Output of maximum-likelihood fitting.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta_hat: Theta,
    pub loglik_value: f64,
    /// Finite-sample covariance of θ̂, i.e. the inverse average information divided by n.
    /// A fixed μ gets a zero row and column. All entries are NaN when the fit did
    /// not converge and the information at the returned candidate is singular.
    pub vcov: DMatrix<f64>,
    /// Average observed information Î(θ̂) = -(1/n) Σ ∂² ln f / ∂θ∂θ'.
    pub information: DMatrix<f64>,
    pub n: usize,
    /// Value μ was held at, if it was not estimated.
    pub fixed_mu: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Euclidean norm of the mean-loglik gradient in unconstrained coordinates.
    pub gradient_norm: f64,
}

impl FitResult {
    pub fn standard_errors(&self) -> Vec<f64> {
        (0..self.vcov.nrows()).map(|i| self.vcov[(i, i)].max(0.0).sqrt()).collect()
    }
}

/// θ_x · x.
pub fn predict_frontier(theta: &Theta, x: &[f64]) -> Result<f64> {
    let coef = theta.theta_x();
    if coef.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: coef.len(), got: x.len() });
    }
    Ok(coef.iter().zip(x).map(|(a, b)| a * b).sum())
}

/// u = y - f(θ_x, x), the realised composite error v - e.
pub fn composed_residual(theta: &Theta, obs: &Observation) -> Result<f64> {
    Ok(obs.y - predict_frontier(theta, &obs.x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn theta(x: Vec<f64>) -> Theta {
        Theta::new(x, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn predict_examples() {
        assert_eq!(predict_frontier(&theta(vec![0.0, 0.0, 0.0]), &[1.0, 2.3, 0.7]).unwrap(), 0.0);
        assert_eq!(predict_frontier(&theta(vec![1.0, 1.0]), &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(predict_frontier(&theta(vec![0.5, 2.0]), &[1.0, 3.0]).unwrap(), 6.5);
    }

    #[test]
    fn predict_dimension_mismatch() {
        let err = predict_frontier(&theta(vec![1.0, 2.0]), &[1.0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn residual_examples() {
        let r = |y, tx: Vec<f64>, x: Vec<f64>| {
            composed_residual(&theta(tx), &Observation::new(y, x).unwrap()).unwrap()
        };
        assert_eq!(r(1.0, vec![1.0], vec![1.0]), 0.0);
        assert_eq!(r(2.5, vec![1.0, 0.5], vec![1.0, 2.0]), 0.5);
        assert_eq!(r(0.0, vec![0.3], vec![1.0]), -0.3);
    }

    #[test]
    fn theta_rejects_nonpositive_scales() {
        assert!(Theta::new(vec![1.0], 0.0, 0.0, 1.0).is_err());
        assert!(Theta::new(vec![1.0], 0.0, 1.0, -1.0).is_err());
        assert!(Theta::new(vec![1.0], f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn dataset_rejects_ragged_rows() {
        let a = Observation::new(1.0, vec![1.0, 2.0]).unwrap();
        let b = Observation::new(1.0, vec![1.0]).unwrap();
        assert!(Dataset::new(vec![a, b], vec![]).is_err());
    }

    #[test]
    fn dataset_needs_p_plus_three_rows() {
        let rows: Vec<_> = (0..4).map(|i| Observation::new(i as f64, vec![1.0, 2.0]).unwrap()).collect();
        let d = Dataset::new(rows.clone(), vec![]).unwrap();
        assert!(d.check_fittable().is_err());
        let mut more = rows;
        more.push(Observation::new(0.0, vec![1.0, 3.0]).unwrap());
        assert!(Dataset::new(more, vec![]).unwrap().check_fittable().is_ok());
    }

    #[test]
    fn unconstrained_round_trip() {
        let t = Theta::new(vec![1.0, -0.5], 0.2, 0.3, 0.6).unwrap();
        let back = Theta::from_unconstrained(&t.to_unconstrained()).unwrap();
        for (a, b) in back.to_vec().iter().zip(t.to_vec()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn residual_is_linear_in_y(y in -10.0..10.0f64, d in -5.0..5.0f64, b in -2.0..2.0f64, x1 in -3.0..3.0f64) {
            let t = theta(vec![0.7, b]);
            let o1 = Observation::new(y, vec![1.0, x1]).unwrap();
            let o2 = Observation::new(y + d, vec![1.0, x1]).unwrap();
            let r1 = composed_residual(&t, &o1).unwrap();
            let r2 = composed_residual(&t, &o2).unwrap();
            prop_assert!((r2 - (r1 + d)).abs() <= 1e-12 * (1.0 + y.abs() + d.abs()));
        }
    }
}
