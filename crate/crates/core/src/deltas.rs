//! The five Gaussian / truncated-Gaussian integrals that every bound and
//! frontier formula is built from.
//!
//! With f_v the N(0, σ_v²) density and f_e the N(μ, σ_e²) density truncated
//! to [0, ∞), all five are special cases of
//!
//! ```text
//! M(a1, a2, a3) = ∫₀^∞ exp(-a1·e) · f_v(u + e)^a2 · f_e(e)^a3 de,   a2 + a3 ≥ 1
//! ```
//!
//! | field    | integral                          | (a1, a2, a3) |
//! |----------|-----------------------------------|--------------|
//! | `d1_v`   | ∫ exp(-e) f_v(u+e) de             | (1, 1, 0)    |
//! | `d2_v`   | ∫ f_v(u+e) de                     | (0, 1, 0)    |
//! | `d2_ves` | ∫ f_v(u+e) f_e(e) de              | (0, 1, 1)    |
//! | `d1_ves` | ∫ exp(-e) f_v(u+e) f_e(e) de      | (1, 1, 1)    |
//! | `d1_e`   | ∫ exp(-e) f_e(e) de               | (1, 0, 1)    |
//!
//! The closed form completes the square in e and is evaluated in log space.
//! For `d1_v` the normal-CDF argument is (-u - σ_v²)/σ_v; the variant with
//! (u - σ_v²) disagrees with direct quadrature and is not used.

use crate::error::{Error, Result};
use crate::model::Theta;
use crate::normal::{self, LN_SQRT_2PI};
use crate::quadrature;
use crate::sampling::truncated_normal;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use libm::erfc;
use std::f64::consts::FRAC_1_SQRT_2;

/// Exponents (a1, a2, a3) of each Δ in canonical vector order.
pub const SPECIALIZATIONS: [(f64, f64, f64); 5] = [
    (1.0, 1.0, 0.0), // d1_v
    (0.0, 1.0, 0.0), // d2_v
    (0.0, 1.0, 1.0), // d2_ves
    (1.0, 1.0, 1.0), // d1_ves
    (1.0, 0.0, 1.0), // d1_e
];

pub const NAMES: [&str; 5] = ["d1_v", "d2_v", "d2_ves", "d1_ves", "d1_e"];

/// The five Δ values at a composite-error point `u`.
///
/// The canonical vector order, used by [`DeltaSet::to_array`], by the
/// Jacobian rows and by the gradient of b(c, e₀), is
/// `(d1_v, d2_v, d2_ves, d1_ves, d1_e)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaSet {
    pub d1_v: f64,
    pub d1_ves: f64,
    pub d1_e: f64,
    pub d2_v: f64,
    pub d2_ves: f64,
    pub u: f64,
}

impl DeltaSet {
    pub fn to_array(&self) -> [f64; 5] {
        [self.d1_v, self.d2_v, self.d2_ves, self.d1_ves, self.d1_e]
    }

    pub fn from_array(u: f64, a: [f64; 5]) -> Self {
        DeltaSet { d1_v: a[0], d2_v: a[1], d2_ves: a[2], d1_ves: a[3], d1_e: a[4], u }
    }

    /// Checks positivity, finiteness and the Δ₁ ≤ Δ₂ orderings.
    pub fn validate(&self) -> Result<()> {
        let a = self.to_array();
        if a.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Domain(format!("delta values must be positive and finite: {a:?}")));
        }
        let slack = 1e-12;
        if self.d1_ves > self.d2_ves * (1.0 + slack) || self.d1_v > self.d2_v * (1.0 + slack) || self.d1_e > 1.0 + slack {
            return Err(Error::Domain(format!("delta ordering violated: {a:?}")));
        }
        Ok(())
    }
}

fn check_scales(sigma_v: f64, sigma_e: f64, mu: f64) -> Result<()> {
    if !(sigma_v > 0.0 && sigma_v.is_finite() && sigma_e > 0.0 && sigma_e.is_finite() && mu.is_finite()) {
        return Err(Error::Domain(format!("need positive finite scales (sigma_v={sigma_v}, sigma_e={sigma_e}, mu={mu})")));
    }
    Ok(())
}

/// ln M(a1, a2, a3).
pub fn ln_master_integral(a1: f64, a2: f64, a3: f64, u: f64, sigma_v: f64, sigma_e: f64, mu: f64) -> Result<f64> {
    check_scales(sigma_v, sigma_e, mu)?;
    if !(a1 >= 0.0 && a2 >= 0.0 && a3 >= 0.0) || a2 + a3 < 1.0 {
        return Err(Error::Domain(format!("exponents ({a1}, {a2}, {a3}) need a_i >= 0 and a2 + a3 >= 1")));
    }
    if !u.is_finite() {
        return Err(Error::Domain("non-finite evaluation point".into()));
    }
    let sv2 = sigma_v * sigma_v;
    let se2 = sigma_e * sigma_e;
    let k = se2 * a2 + sv2 * a3;
    // Completed square: exponent is -(e - m)² / (2 s²) + const.
    let m = (a3 * mu * sv2 - a2 * u * se2 - a1 * sv2 * se2) / k;
    let s = sigma_v * sigma_e / k.sqrt();
    let quad = -a2 * u * u / (2.0 * sv2) - a3 * mu * mu / (2.0 * se2) + 0.5 * (m / s) * (m / s);
    let ln_value = quad + s.ln() - a2 * sigma_v.ln() - a3 * sigma_e.ln() - (a2 + a3 - 1.0) * LN_SQRT_2PI
        - a3 * normal::ln_cdf(mu / sigma_e)
        + normal::ln_cdf(m / s);
    Ok(ln_value)
}

/// Closed form of ∫₀^∞ exp(-a1 e) f_v(u+e)^a2 f_e(e)^a3 de.
pub fn master_integral(a1: f64, a2: f64, a3: f64, u: f64, sigma_v: f64, sigma_e: f64, mu: f64) -> Result<f64> {
    ln_master_integral(a1, a2, a3, u, sigma_v, sigma_e, mu).map(f64::exp)
}

/// All five Δ values from the closed form.
pub fn delta_set(u: f64, sigma_v: f64, sigma_e: f64, mu: f64) -> Result<DeltaSet> {
    let mut out = [0.0; 5];
    for (slot, &(a1, a2, a3)) in out.iter_mut().zip(SPECIALIZATIONS.iter()) {
        *slot = master_integral(a1, a2, a3, u, sigma_v, sigma_e, mu)?;
    }
    Ok(DeltaSet::from_array(u, out))
}

/// Convenience wrapper taking the distributional parameters from θ.
pub fn delta_set_at(theta: &Theta, u: f64) -> Result<DeltaSet> {
    delta_set(u, theta.sigma_v(), theta.sigma_e(), theta.mu())
}

// ---------------------------------------------------------------------------
// Quadrature oracle
// ---------------------------------------------------------------------------

/// ln of the truncated-normal normaliser P(N(μ, σ_e²) > 0), via erfc
/// directly rather than the shared log-CDF.
fn ln_tn_mass(mu: f64, sigma_e: f64) -> f64 {
    (0.5 * erfc(-mu / sigma_e * FRAC_1_SQRT_2)).ln()
}

fn ln_upper_tail(z: f64) -> f64 {
    // ln P(Z > z); erfc keeps relative accuracy until underflow near z ≈ 37.
    let p = 0.5 * erfc(z * FRAC_1_SQRT_2);
    if p > 0.0 {
        p.ln()
    } else {
        -0.5 * z * z - z.ln() - LN_SQRT_2PI
    }
}

/// Adaptive quadrature of the defining integral with exponents (a1, a2, a3).
///
/// Unlike [`master_integral`] this also accepts a2 = a3 = 0 (then a1 > 0 is
/// required). When a2 = 0 the truncated-normal exponent must be at least 1.
/// The integrand is rescaled by its maximum so that tiny integrals keep
/// relative accuracy. The returned value is within `abs_tol` of the truth,
/// and never coarser than 1e-12 times the peak; requests below 1e-15 of the
/// peak, which double precision cannot honor, are relaxed to that floor.
#[allow(clippy::too_many_arguments)]
pub fn quadrature_integral(a1: f64, a2: f64, a3: f64, u: f64, sigma_v: f64, sigma_e: f64, mu: f64, abs_tol: f64) -> Result<f64> {
    ln_quadrature_integral(a1, a2, a3, u, sigma_v, sigma_e, mu, abs_tol).map(f64::exp)
}

/// Logarithm of [`quadrature_integral`], finite even where the integral
/// underflows.
#[allow(clippy::too_many_arguments)]
pub fn ln_quadrature_integral(
    a1: f64,
    a2: f64,
    a3: f64,
    u: f64,
    sigma_v: f64,
    sigma_e: f64,
    mu: f64,
    abs_tol: f64,
) -> Result<f64> {
    check_scales(sigma_v, sigma_e, mu)?;
    if !(abs_tol > 0.0) {
        return Err(Error::InvalidArgument("abs_tol must be positive".into()));
    }
    let admissible = a1 >= 0.0
        && a2 >= 0.0
        && a3 >= 0.0
        && ((a2 == 0.0 && a3 == 0.0 && a1 > 0.0) || a2 > 0.0 || a3 >= 1.0);
    if !admissible {
        return Err(Error::Domain(format!("unsupported exponents ({a1}, {a2}, {a3})")));
    }

    let ln_mass = ln_tn_mass(mu, sigma_e);
    let ln_fv = |e: f64| {
        let z = (u + e) / sigma_v;
        -0.5 * z * z - LN_SQRT_2PI - sigma_v.ln()
    };
    let ln_fe = |e: f64| {
        let z = (e - mu) / sigma_e;
        -0.5 * z * z - LN_SQRT_2PI - sigma_e.ln() - ln_mass
    };
    let ln_g = |e: f64| {
        let mut v = -a1 * e;
        if a2 > 0.0 {
            v += a2 * ln_fv(e);
        }
        if a3 > 0.0 {
            v += a3 * ln_fe(e);
        }
        v
    };

    // Upper limit with an analytic bound on the discarded tail.
    let ln_tail = |t: f64| -> f64 {
        let ln_decay = -a1 * t;
        if a2 > 0.0 {
            // f_v^a2 is a rescaled N(-u, σ_v²/a2) density.
            let ln_scale = (1.0 - a2) * (LN_SQRT_2PI + sigma_v.ln()) - 0.5 * a2.ln();
            let sup_fe = if a3 > 0.0 { a3 * ln_fe(t.max(mu)) } else { 0.0 };
            ln_decay + sup_fe + ln_scale + ln_upper_tail((u + t) * a2.sqrt() / sigma_v)
        } else if a3 > 0.0 {
            ln_decay + (a3 - 1.0) * ln_fe(t.max(mu)) + ln_upper_tail((t - mu) / sigma_e) - ln_mass
        } else {
            ln_decay - a1.ln()
        }
    };

    let mut upper = 10f64.max(mu + 10.0 * sigma_e).max(-u + 10.0 * sigma_v);

    // ln g is concave on [0, ∞); golden-section search for its maximum.
    let argmax = {
        let (mut lo, mut hi) = (0.0, upper);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let x1 = hi - r * (hi - lo);
            let x2 = lo + r * (hi - lo);
            if ln_g(x1) < ln_g(x2) {
                lo = x1;
            } else {
                hi = x2;
            }
        }
        0.5 * (lo + hi)
    };
    let ln_peak = ln_g(argmax);
    let scaled_tol = (abs_tol * (-ln_peak).exp()).clamp(1e-15, 1e-12);

    let mut guard = 0;
    while ln_tail(upper) - ln_peak > (0.5 * scaled_tol).ln() {
        upper *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::Quadrature { tol: abs_tol, estimate: f64::INFINITY });
        }
    }

    // Local width of the integrand around the peak, for the initial partition.
    let width = if a2 > 0.0 && a3 > 0.0 {
        sigma_v.min(sigma_e)
    } else if a2 > 0.0 {
        sigma_v
    } else if a3 > 0.0 {
        sigma_e
    } else {
        1.0
    };
    let mut breaks = vec![argmax];
    for k in 1..=8 {
        breaks.push(argmax + k as f64 * 2.0 * width);
        breaks.push(argmax - k as f64 * 2.0 * width);
    }

    let r = quadrature::integrate(
        |e| (ln_g(e) - ln_peak).exp(),
        0.0,
        upper,
        &breaks,
        0.5 * scaled_tol,
        20_000,
    )?;
    Ok(r.value.ln() + ln_peak)
}

/// Independent evaluation of all five Δ by adaptive quadrature.
pub fn delta_set_quadrature(u: f64, sigma_v: f64, sigma_e: f64, mu: f64, abs_tol: f64) -> Result<DeltaSet> {
    let mut out = [0.0; 5];
    for (slot, &(a1, a2, a3)) in out.iter_mut().zip(SPECIALIZATIONS.iter()) {
        *slot = quadrature_integral(a1, a2, a3, u, sigma_v, sigma_e, mu, abs_tol)?;
    }
    Ok(DeltaSet::from_array(u, out))
}

fn radical_inverse(mut k: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

/// Deterministic (u, σ_v, σ_e, μ) points from a Halton sequence over
/// u ∈ [-2, 2], σ ∈ [0.1, 3] (log-uniform) and μ ∈ [-1, 2].
pub fn oracle_grid(points: usize) -> Vec<[f64; 4]> {
    let log_sigma = |t: f64| (0.1f64.ln() + t * (3.0f64.ln() - 0.1f64.ln())).exp();
    (1..=points)
        .map(|k| {
            [
                -2.0 + 4.0 * radical_inverse(k, 2),
                log_sigma(radical_inverse(k, 3)),
                log_sigma(radical_inverse(k, 5)),
                -1.0 + 3.0 * radical_inverse(k, 7),
            ]
        })
        .collect()
}

/// Largest relative gap between closed form and quadrature over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub points: usize,
    pub max_rel_error: f64,
    /// Worst relative error per Δ, canonical order.
    pub per_delta: [f64; 5],
    /// (u, σ_v, σ_e, μ) at which `max_rel_error` occurs.
    pub worst_point: [f64; 4],
}

pub fn check_closed_form(grid: &[[f64; 4]]) -> Result<OracleCheck> {
    let mut check = OracleCheck { points: grid.len(), max_rel_error: 0.0, per_delta: [0.0; 5], worst_point: [0.0; 4] };
    for &pt in grid {
        let [u, sv, se, mu] = pt;
        let closed = delta_set(u, sv, se, mu)?.to_array();
        let quad = delta_set_quadrature(u, sv, se, mu, 1e-15)?.to_array();
        for k in 0..5 {
            let rel = (closed[k] - quad[k]).abs() / quad[k].abs();
            check.per_delta[k] = check.per_delta[k].max(rel);
            if rel > check.max_rel_error {
                check.max_rel_error = rel;
                check.worst_point = pt;
            }
        }
    }
    Ok(check)
}

// ---------------------------------------------------------------------------
// Simulation estimator
// ---------------------------------------------------------------------------

/// Monte-Carlo Δ estimates with their standard errors (canonical order).
#[derive(Debug, Clone, Copy)]
pub struct SimulatedDeltas {
    pub estimate: DeltaSet,
    pub std_errors: [f64; 5],
    pub draws: usize,
}

/// Simulation estimates of the five Δ at `u`.
///
/// Integrals weighted by f_e average over draws e_s ~ TN(μ, σ_e²). The two
/// integrals without an f_e factor average over e_s ~ Exp(1):
/// ∫ exp(-e) f_v(u+e) de = E[f_v(u+e)] and ∫ f_v(u+e) de = E[exp(e) f_v(u+e)].
pub fn delta_set_simulated(u: f64, theta: &Theta, draws: usize, seed: u64) -> Result<SimulatedDeltas> {
    if draws == 0 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    let (mu, sv, se) = (theta.mu(), theta.sigma_v(), theta.sigma_e());
    let fv = |e: f64| normal::pdf((u + e) / sv) / sv;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Welford accumulators in canonical order.
    let mut mean = [0.0f64; 5];
    let mut m2 = [0.0f64; 5];
    for s in 0..draws {
        let e_tn = truncated_normal(&mut rng, mu, se);
        let e_exp: f64 = Exp1.sample(&mut rng);
        let g_exp = fv(e_exp);
        let g_tn = fv(e_tn);
        let x = [g_exp, g_exp * e_exp.exp(), g_tn, (-e_tn).exp() * g_tn, (-e_tn).exp()];
        let k = (s + 1) as f64;
        for j in 0..5 {
            let d = x[j] - mean[j];
            mean[j] += d / k;
            m2[j] += d * (x[j] - mean[j]);
        }
    }
    let n = draws as f64;
    let std_errors = if draws > 1 {
        m2.map(|v| (v / (n - 1.0) / n).sqrt())
    } else {
        [f64::INFINITY; 5]
    };
    Ok(SimulatedDeltas { estimate: DeltaSet::from_array(u, mean), std_errors, draws })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn master_examples() {
        assert_relative_eq!(master_integral(0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        // ∫₀^∞ f_v(u+e) de = P(v > u) = 1 - Φ(u/σ_v).
        let s = 1.7;
        assert_relative_eq!(
            master_integral(0.0, 1.0, 0.0, -s, s, 1.0, 0.0).unwrap(),
            0.841_344_746_068_542_9,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            master_integral(0.0, 1.0, 0.0, s, s, 1.0, 0.0).unwrap(),
            0.158_655_253_931_457_05,
            max_relative = 1e-14
        );
        // 2 e^{1/2} (1 - Φ(1)); value frozen from a 40-digit quadrature of ∫ e^{-e} 2φ(e) de.
        assert_relative_eq!(
            master_integral(1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0).unwrap(),
            0.523_156_583_730_246_7,
            max_relative = 1e-13
        );
    }

    #[test]
    fn master_rejects_small_exponents() {
        assert!(master_integral(1.0, 0.3, 0.3, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(master_integral(-1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(master_integral(1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn quadrature_half_normal_case() {
        let v = quadrature_integral(1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1e-14).unwrap();
        assert_relative_eq!(v, 0.523_156_583_730_246_7, max_relative = 1e-12);
    }

    #[test]
    fn quadrature_pure_exponential_is_one() {
        let v = quadrature_integral(1.0, 0.0, 0.0, 0.3, 1.0, 1.0, 0.0, 1e-14).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn d2_v_at_zero_is_half() {
        for sv in [0.1, 0.7, 3.0] {
            assert_relative_eq!(delta_set(0.0, sv, 1.0, 0.2).unwrap().d2_v, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn d1_v_sign_convention_matches_quadrature() {
        // Φ((-u - σ_v²)/σ_v) is the right argument; Φ((u - σ_v²)/σ_v) is not.
        let (u, sv) = (0.8, 0.6);
        let quad = quadrature_integral(1.0, 1.0, 0.0, u, sv, 1.0, 0.0, 1e-14).unwrap();
        let lead = (-u * u / (2.0 * sv * sv) + (u + sv * sv).powi(2) / (2.0 * sv * sv)).exp();
        let right = lead * normal::cdf((-u - sv * sv) / sv);
        let wrong = lead * normal::cdf((u - sv * sv) / sv);
        assert_relative_eq!(quad, right, max_relative = 1e-12);
        assert!((quad - wrong).abs() / quad > 0.1);
    }

    #[test]
    fn delta_set_matches_quadrature_at_reference_point() {
        let d = delta_set(0.0, 1.0, 1.0, 0.5).unwrap();
        let q = delta_set_quadrature(0.0, 1.0, 1.0, 0.5, 1e-14).unwrap();
        for (a, b) in d.to_array().iter().zip(q.to_array()) {
            assert_relative_eq!(*a, b, max_relative = 1e-8);
        }
        d.validate().unwrap();
    }

    #[test]
    fn simulated_single_draw_is_finite() {
        let t = Theta::new(vec![0.0], 0.5, 1.0, 1.0).unwrap();
        let s = delta_set_simulated(0.0, &t, 1, 1).unwrap();
        assert!(s.estimate.to_array().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn simulated_zero_draws_rejected() {
        let t = Theta::new(vec![0.0], 0.5, 1.0, 1.0).unwrap();
        assert!(delta_set_simulated(0.0, &t, 0, 1).is_err());
    }

    #[test]
    fn d2_ves_integrates_to_one() {
        // Trapezoid over u ∈ [-10, 10], step 0.01.
        let (sv, se, mu) = (0.8, 0.9, 0.4);
        let h = 0.01;
        let n = 2000;
        let mut total = 0.0;
        for i in 0..=n {
            let u = -10.0 + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            total += w * delta_set(u, sv, se, mu).unwrap().d2_ves;
        }
        assert!((total * h - 1.0).abs() <= 1e-4, "{}", total * h);
    }

    #[test]
    fn efficiency_nondecreasing_in_u() {
        let (sv, se, mu) = (0.4, 0.7, 0.2);
        let mut prev = 0.0;
        for i in 0..=80 {
            let u = -4.0 + 0.1 * i as f64;
            let d = delta_set(u, sv, se, mu).unwrap();
            let eff = d.d1_ves / d.d2_ves;
            assert!(eff >= prev - 1e-14);
            prev = eff;
        }
    }

    #[test]
    fn closed_form_matches_quadrature_on_grid() {
        let grid = oracle_grid(100);
        assert_eq!(grid.len(), 100);
        assert!(grid.iter().all(|p| p[0].abs() <= 2.0 && p[1] >= 0.1 && p[2] <= 3.0 && p[3] >= -1.0 && p[3] <= 2.0));
        let check = check_closed_form(&grid).unwrap();
        assert!(check.max_rel_error <= 1e-8, "{check:?}");
    }
}
