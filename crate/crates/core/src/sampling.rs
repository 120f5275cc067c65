//! Random draws for the composed-error model and synthetic datasets.

use crate::error::Result;
use crate::model::{predict_frontier, Dataset, Observation, Theta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// Draw from N(mu, sigma²) truncated to [0, ∞).
///
/// Plain rejection when the truncation point is at or below the mean,
/// otherwise exponential-proposal rejection (Robert, 1995) so that deep
/// truncation stays cheap.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, mu: f64, sigma: f64) -> f64 {
    let lower = -mu / sigma;
    if lower < 0.25 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z >= lower {
                return mu + sigma * z;
            }
        }
    }
    let rate = 0.5 * (lower + (lower * lower + 4.0).sqrt());
    loop {
        let e: f64 = rng.sample(Exp1);
        let z = lower + e / rate;
        let accept = (-0.5 * (z - rate) * (z - rate)).exp();
        if rng.random::<f64>() <= accept {
            return mu + sigma * z;
        }
    }
}

/// Generates n observations from y = θ_x·x + v - e with v ~ N(0, σ_v²),
/// e ~ TN(μ, σ_e²) and non-constant regressors drawn i.i.d. N(0, 1).
pub fn simulate_dataset(theta: &Theta, n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with(theta, n, &mut rng, |rng, _| rng.sample(StandardNormal))
}

/// Like [`simulate_dataset`] but with a caller-supplied regressor draw;
/// `regressor(rng, j)` produces column j (j ≥ 1, the constant is column 0).
pub fn simulate_with<R, F>(theta: &Theta, n: usize, rng: &mut R, mut regressor: F) -> Result<Dataset>
where
    R: Rng,
    F: FnMut(&mut R, usize) -> f64,
{
    let p = theta.theta_x().len();
    let normal = rand_distr::Normal::new(0.0, theta.sigma_v()).expect("positive sigma_v");
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x = Vec::with_capacity(p);
        x.push(1.0);
        for j in 1..p {
            x.push(regressor(rng, j));
        }
        let v = normal.sample(rng);
        let e = truncated_normal(rng, theta.mu(), theta.sigma_e());
        let y = predict_frontier(theta, &x)? + v - e;
        rows.push(Observation::new(y, x)?);
    }
    let names = (0..p).map(|j| if j == 0 { "const".to_string() } else { format!("x{j}") }).collect();
    Dataset::new(rows, names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;

    fn tn_mean(mu: f64, sigma: f64) -> f64 {
        let a = -mu / sigma;
        mu + sigma * normal::pdf(a) / normal::cdf(-a)
    }

    #[test]
    fn truncated_normal_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(mu, sigma) in &[(0.5, 0.6), (-1.0, 0.3), (0.0, 1.0), (-3.0, 0.5)] {
            let n = 200_000;
            let draws: Vec<f64> = (0..n).map(|_| truncated_normal(&mut rng, mu, sigma)).collect();
            assert!(draws.iter().all(|&e| e >= 0.0));
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
            let se = (var / n as f64).sqrt();
            assert!((mean - tn_mean(mu, sigma)).abs() < 4.0 * se, "mu={mu} sigma={sigma}");
        }
    }

    #[test]
    fn simulation_is_seeded() {
        let t = Theta::new(vec![1.0, 0.5], 0.5, 0.3, 0.6).unwrap();
        let a = simulate_dataset(&t, 50, 3).unwrap();
        let b = simulate_dataset(&t, 50, 3).unwrap();
        let c = simulate_dataset(&t, 50, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.regressors(), 2);
    }
}
