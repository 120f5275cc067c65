//! Identified-set bounds on E[exp(-e) | u], the robust region and the
//! breakdown frontier, with its soft-max smoothed version.
//!
//! For a relaxation (c, b) the conditional efficiency is bounded by
//!
//! ```text
//! lower = (d1_ves - c d1_v - b d1_e + bc) / (d2_ves + c d2_v + b)
//! upper = (d1_ves + c d1_v + b d1_e + bc) / (d2_ves - c d2_v - b)
//! ```
//!
//! and the frontier solves lower(c, b) = e0 for b:
//!
//! ```text
//! b(c, e0) = (c (d1_v + e0 d2_v) + e0 d2_ves - d1_ves) / (c - d1_e - e0)
//! ```

use crate::deltas::DeltaSet;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Default distance below which `b_of_c` treats c as sitting on the pole.
pub const EPS_SINGULAR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationPoint {
    c: f64,
    b: f64,
}

impl RelaxationPoint {
    pub fn new(c: f64, b: f64) -> Result<Self> {
        if !(c >= 0.0 && b >= 0.0) {
            return Err(Error::InvalidArgument(format!("relaxation (c, b) = ({c}, {b}) must be nonnegative")));
        }
        Ok(Self { c, b })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    /// `+inf` when the upper denominator is not positive.
    pub upper: f64,
    pub lower_clamped: f64,
    pub upper_clamped: f64,
}

impl Bounds {
    pub fn upper_is_vacuous(&self) -> bool {
        self.upper.is_infinite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierCurve {
    pub e0: f64,
    pub c_grid: Vec<f64>,
    pub b_values: Vec<f64>,
    pub bf_values: Vec<f64>,
    pub soft_values: Option<Vec<f64>>,
    pub rho: f64,
    /// Requested grid points dropped because they sat on the pole.
    pub pole_points: Vec<f64>,
    pub pole: f64,
}

impl FrontierCurve {
    /// Adds soft-max smoothed values at the given ρ.
    pub fn with_soft(mut self, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        self.soft_values = Some(self.b_values.iter().map(|&b| soft_max(b, rho)).collect());
        self.rho = rho;
        Ok(self)
    }
}

/// Lower bound formula without the sign checks of [`RelaxationPoint`].
pub fn lower_bound_raw(d: &DeltaSet, c: f64, b: f64) -> f64 {
    (d.d1_ves - c * d.d1_v - b * d.d1_e + b * c) / (d.d2_ves + c * d.d2_v + b)
}

pub fn efficiency_bounds(d: &DeltaSet, pt: RelaxationPoint) -> Bounds {
    let (c, b) = (pt.c, pt.b);
    let lower = lower_bound_raw(d, c, b);
    let upper_den = d.d2_ves - c * d.d2_v - b;
    let upper = if upper_den > 0.0 {
        (d.d1_ves + c * d.d1_v + b * d.d1_e + b * c) / upper_den
    } else {
        f64::INFINITY
    };
    Bounds { lower, upper, lower_clamped: lower.clamp(0.0, 1.0), upper_clamped: upper.clamp(0.0, 1.0) }
}

/// e0 = d1_ves / d2_ves, the point-identified E[exp(-e) | u].
pub fn point_efficiency(d: &DeltaSet) -> f64 {
    d.d1_ves / d.d2_ves
}

/// Location of the pole of b(·, e0).
pub fn pole_location(d: &DeltaSet, e0: f64) -> f64 {
    d.d1_e + e0
}

pub fn b_of_c(d: &DeltaSet, c: f64, e0: f64) -> Result<f64> {
    b_of_c_eps(d, c, e0, EPS_SINGULAR)
}

pub fn b_of_c_eps(d: &DeltaSet, c: f64, e0: f64, eps: f64) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(Error::InvalidArgument(format!("c = {c} must be nonnegative")));
    }
    let den = c - d.d1_e - e0;
    if den.abs() <= eps {
        return Err(Error::Pole { c, pole: pole_location(d, e0), eps });
    }
    Ok((c * (d.d1_v + e0 * d.d2_v) + e0 * d.d2_ves - d.d1_ves) / den)
}

/// 200 equally spaced points on [0, min(pole - 1e-3, 1)].
pub fn default_c_grid(d: &DeltaSet, e0: f64) -> Vec<f64> {
    let c_max = (pole_location(d, e0) - 1e-3).clamp(0.0, 1.0);
    let n = 200;
    (0..n).map(|k| c_max * k as f64 / (n - 1) as f64).collect()
}

/// Traces b(c, e0) and BF = max(b, 0) over `c_grid`.
///
/// Grid points within [`EPS_SINGULAR`] of the pole are skipped and listed in
/// `pole_points`; the curve continues on the other side.
pub fn breakdown_frontier(d: &DeltaSet, e0: f64, c_grid: &[f64]) -> Result<FrontierCurve> {
    if !(e0 > 0.0 && e0 < 1.0) {
        return Err(Error::InvalidArgument(format!("e0 = {e0} must lie in (0, 1)")));
    }
    if c_grid.is_empty() || c_grid.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
        return Err(Error::InvalidArgument("c grid must be nonempty, finite and nonnegative".into()));
    }
    if c_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("c grid must be strictly increasing".into()));
    }
    let mut curve = FrontierCurve {
        e0,
        c_grid: Vec::with_capacity(c_grid.len()),
        b_values: Vec::with_capacity(c_grid.len()),
        bf_values: Vec::with_capacity(c_grid.len()),
        soft_values: None,
        rho: DEFAULT_RHO,
        pole_points: Vec::new(),
        pole: pole_location(d, e0),
    };
    for &c in c_grid {
        match b_of_c(d, c, e0) {
            Ok(b) => {
                curve.c_grid.push(c);
                curve.b_values.push(b);
                curve.bf_values.push(b.max(0.0));
            }
            Err(Error::Pole { .. }) => curve.pole_points.push(c),
            Err(e) => return Err(e),
        }
    }
    Ok(curve)
}

/// True iff the lower efficiency bound at `pt` is at least `e0`.
pub fn in_robust_region(d: &DeltaSet, pt: RelaxationPoint, e0: f64) -> bool {
    efficiency_bounds(d, pt).lower >= e0
}

/// Fixed smoothing level used for replication runs.
pub const DEFAULT_RHO: f64 = 10.0;

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("rho = {rho} must be positive and finite")))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// f_ρ(b) = b e^{ρb} / (1 + e^{ρb}).
///
/// Evaluated as max(0, b) minus |b| e^{-ρ|b|} / (1 + e^{-ρ|b|}), rounded
/// toward max(0, b) so the computed gap never exceeds |b| e^{-ρ|b|}.
pub fn soft_max(b: f64, rho: f64) -> f64 {
    if b > 0.0 {
        let e = (-(rho * b)).exp();
        let gap = b * e / (1.0 + e);
        let r = b - gap;
        if b - r > gap {
            r.next_up()
        } else {
            r
        }
    } else if b < 0.0 {
        let e = (rho * b).exp();
        b * e / (1.0 + e)
    } else {
        b * 0.5
    }
}

/// d f_ρ / db = e^{ρb}(1 + ρb + e^{ρb}) / (1 + e^{ρb})².
pub fn soft_max_derivative(b: f64, rho: f64) -> f64 {
    let x = rho * b;
    let s = sigmoid(x);
    s * (1.0 + x * sigmoid(-x))
}

/// ρ_n = max(10, 2 ln n).
pub fn rho_schedule(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("rho schedule needs n >= 2, got {n}")));
    }
    Ok(DEFAULT_RHO.max(2.0 * (n as f64).ln()))
}
