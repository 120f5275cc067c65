//! Standard normal helpers with tail-stable logarithms.

use statrs::distribution::{ContinuousCDF, Normal};
use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// ln(sqrt(2π))
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument `ln_cdf` switches to the asymptotic tail expansion.
const ASYMPTOTIC_CUTOFF: f64 = -8.0;

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// ln Φ(x), finite for every finite x.
pub fn ln_cdf(x: f64) -> f64 {
    if x > 5.0 {
        // Φ(x) is within 3e-7 of one; ln1p keeps the small upper tail.
        (-cdf(-x)).ln_1p()
    } else if x > ASYMPTOTIC_CUTOFF {
        cdf(x).ln()
    } else {
        ln_pdf(x) - (-x).ln() + tail_series(x).ln()
    }
}

/// 1 - 1/x² + 3/x⁴ - 15/x⁶ + ..., truncated at its smallest term.
fn tail_series(x: f64) -> f64 {
    let inv_x2 = 1.0 / (x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let next = -term * (2 * k - 1) as f64 * inv_x2;
        if next.abs() >= term.abs() || next.abs() < 1e-17 {
            break;
        }
        sum += next;
        term = next;
    }
    sum
}

/// φ(x)/Φ(x).
pub fn inverse_mills(x: f64) -> f64 {
    (ln_pdf(x) - ln_cdf(x)).exp()
}

/// Standard normal quantile, polished with two Newton steps on `cdf`.
pub fn quantile(p: f64) -> f64 {
    let mut x = Normal::standard().inverse_cdf(p);
    if x.is_finite() {
        for _ in 0..2 {
            x -= (cdf(x) - p) / pdf(x);
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cdf_reference_values() {
        assert_relative_eq!(cdf(0.0), 0.5, epsilon = 1e-16);
        assert_relative_eq!(cdf(1.0), 0.841_344_746_068_542_9, max_relative = 1e-15);
        assert_relative_eq!(cdf(-3.0), 0.001_349_898_031_630_094_6, max_relative = 1e-13);
    }

    #[test]
    fn ln_cdf_reference_values_on_both_branches() {
        // High-precision reference values of ln Φ(x).
        let cases = [
            (-7.5, -31.075_890_902_890_001),
            (-8.0, -35.013_437_159_914_55),
            (-8.5, -39.197_396_428_217_67),
            (-12.0, -75.410_673_001_568_8),
            (-40.0, -804.608_442_013_753_8),
            (6.0, -9.865_876_455_243_757e-10),
        ];
        for (x, want) in cases {
            assert_relative_eq!(ln_cdf(x), want, max_relative = 1e-13);
        }
    }

    #[test]
    fn ln_cdf_deep_tail_is_finite() {
        assert!(ln_cdf(-1e4).is_finite());
        assert!(ln_cdf(-1e150).is_finite());
    }

    #[test]
    fn ln_cdf_upper_tail() {
        assert_relative_eq!(ln_cdf(8.0), -6.220_960_574_271_78e-16, max_relative = 1e-12);
    }

    #[test]
    fn inverse_mills_limits() {
        assert_relative_eq!(inverse_mills(0.0), 2.0 * pdf(0.0), max_relative = 1e-15);
        // λ(x) ~ -x for x → -∞
        let x = -30.0;
        assert!((inverse_mills(x) / -x - 1.0).abs() < 2e-3);
    }

    #[test]
    fn quantiles() {
        assert_relative_eq!(quantile(0.95), 1.644_853_626_951_472_2, max_relative = 1e-12);
        assert_relative_eq!(quantile(0.99), 2.326_347_874_040_841, max_relative = 1e-12);
    }
}
