//! BFGS minimisation with a backtracking Armijo line search.

/// Objective plus gradient. `None` marks a point outside the domain, which
/// the line search treats as +∞.
pub trait Objective {
    fn value_and_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)>;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    fn value_and_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        self(x)
    }
}

#[derive(Debug, Clone)]
pub struct BfgsSettings {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Largest Euclidean step the line search starts from.
    pub max_step: f64,
    /// Stop as stalled once the value falls by less than this relative amount
    /// over `stall_window` iterations. Zero disables the check.
    pub stall_tolerance: f64,
    pub stall_window: usize,
}

impl Default for BfgsSettings {
    fn default() -> Self {
        Self { max_iterations: 500, gradient_tolerance: 1e-8, max_step: 2.0, stall_tolerance: 0.0, stall_window: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    /// Gradient norm reached the tolerance.
    pub converged: bool,
    /// Stopped on the value-stall rule without meeting the gradient tolerance.
    pub stalled: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimises `f` from `x0`. Returns `None` only if `x0` itself is outside
/// the domain.
pub fn minimize<O: Objective>(f: &O, x0: &[f64], settings: &BfgsSettings) -> Option<BfgsOutcome> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f.value_and_gradient(&x)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return None;
    }
    // Dense inverse-Hessian approximation, row-major.
    let mut h = identity(n);
    let mut fresh = true;
    let mut iterations = 0;
    let mut history = vec![fx];
    let mut stalled = false;

    while iterations < settings.max_iterations {
        if norm(&g) <= settings.gradient_tolerance {
            return Some(BfgsOutcome { x, value: fx, gradient: g, iterations, converged: true, stalled: false });
        }
        iterations += 1;

        let mut d = mat_vec(&h, &g).into_iter().map(|v| -v).collect::<Vec<_>>();
        if dot(&d, &g) >= 0.0 {
            h = identity(n);
            fresh = true;
            d = g.iter().map(|v| -v).collect();
        }
        let dn = norm(&d);
        if dn > settings.max_step {
            d.iter_mut().for_each(|v| *v *= settings.max_step / dn);
        }

        let slope = dot(&g, &d);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            if let Some((ft, gt)) = f.value_and_gradient(&trial) {
                if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= fx + 1e-4 * alpha * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            alpha *= 0.5;
        }

        let Some((x_new, f_new, g_new)) = accepted else {
            if fresh {
                // Steepest descent could not make progress either.
                break;
            }
            h = identity(n);
            fresh = true;
            continue;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if fresh {
                let scale = sy / dot(&y, &y);
                h.iter_mut().flatten().for_each(|v| *v *= scale);
            }
            bfgs_update(&mut h, &s, &y, sy);
            fresh = false;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        history.push(fx);
        if settings.stall_tolerance > 0.0 && history.len() > settings.stall_window {
            let earlier = history[history.len() - 1 - settings.stall_window];
            if earlier - fx <= settings.stall_tolerance * fx.abs().max(1.0) && norm(&g) > settings.gradient_tolerance {
                stalled = true;
                break;
            }
        }
    }
    let converged = norm(&g) <= settings.gradient_tolerance;
    Some(BfgsOutcome { x, value: fx, gradient: g, iterations, converged, stalled: stalled && !converged })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

// H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    let n = s.len();
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Some((v, g))
        };
        let out = minimize(&f, &[-1.2, 1.0], &BfgsSettings::default()).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn respects_domain() {
        // log barrier: minimum of x - ln x at x = 1, undefined for x <= 0
        let f = |x: &[f64]| if x[0] > 0.0 { Some((x[0] - x[0].ln(), vec![1.0 - 1.0 / x[0]])) } else { None };
        let out = minimize(&f, &[5.0], &BfgsSettings::default()).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-7);
        assert!(minimize(&f, &[-1.0], &BfgsSettings::default()).is_none());
    }
}
