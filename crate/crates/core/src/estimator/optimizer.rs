//! Quasi-Newton (BFGS) minimizer with a backtracking Armijo line search.
//!
//! The objective may return `+∞` (or NaN) for infeasible points; the line
//! search then shrinks the step. The best value seen never increases.

use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions<T> {
    pub max_iterations: usize,
    /// Relative change of the objective below which an iteration counts as stalled.
    pub rel_tolerance: T,
    /// Largest allowed change of any coordinate in one step.
    pub max_step: T,
}

impl<T: Real> Default for OptimOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_tolerance: T::lit(1e-8),
            max_step: T::lit(2.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub gradient: Vec<T>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn inf_norm<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

fn identity<T: Real>(n: usize, scale: T) -> Vec<T> {
    let mut h = vec![T::zero(); n * n];
    for i in 0..n {
        h[i * n + i] = scale;
    }
    h
}

/// Minimizes `objective`, which returns the value and gradient at a point.
pub fn minimize<T, F>(mut objective: F, x0: Vec<T>, opts: &OptimOptions<T>) -> OptimResult<T>
where
    T: Real,
    F: FnMut(&[T]) -> (T, Vec<T>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = objective(&x);
    let mut evaluations = 1;
    if n == 0 || !f.is_finite() {
        return OptimResult {
            x,
            value: f,
            gradient: g,
            iterations: 0,
            evaluations,
            converged: n == 0,
        };
    }
    let mut h = identity(n, T::one());
    let mut first_update = true;
    let mut stalled = 0;
    let mut converged = false;
    let mut iterations = 0;
    let mut resets = 0;
    let c1 = T::lit(1e-4);

    while iterations < opts.max_iterations {
        iterations += 1;
        let mut p: Vec<T> = (0..n)
            .map(|i| -(0..n).map(|j| h[i * n + j] * g[j]).sum::<T>())
            .collect();
        let mut slope = dot(&p, &g);
        if !(slope < T::zero()) {
            // not a descent direction: fall back to steepest descent
            h = identity(n, T::one());
            first_update = true;
            p = g.iter().map(|&v| -v).collect();
            slope = dot(&p, &g);
            if !(slope < T::zero()) {
                converged = true;
                break;
            }
        }
        let pmax = inf_norm(&p);
        let mut step = if pmax > opts.max_step {
            opts.max_step / pmax
        } else {
            T::one()
        };

        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<T> = x.iter().zip(&p).map(|(&xi, &pi)| xi + step * pi).collect();
            let (fn_, gn) = objective(&xn);
            evaluations += 1;
            if fn_.is_finite() && fn_ <= f + c1 * step * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step = step * T::lit(0.5);
        }

        let Some((xn, fn_, gn)) = accepted else {
            if resets < 2 {
                resets += 1;
                h = identity(n, T::one());
                first_update = true;
                continue;
            }
            // no progress possible along any tried direction
            converged = inf_norm(&g) <= T::lit(1e-6) * f.abs().max(T::one());
            break;
        };

        let s: Vec<T> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = gn.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let rel = (f - fn_).abs() / fn_.abs().max(T::one());
        x = xn;
        f = fn_;
        g = gn;

        let sy = dot(&s, &y);
        if sy > T::lit(1e-12) * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if first_update {
                h = identity(n, sy / dot(&y, &y));
                first_update = false;
            }
            let rho = sy.recip();
            let hy: Vec<T> = (0..n)
                .map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum())
                .collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] = h[i * n + j] - rho * (hy[i] * s[j] + s[i] * hy[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }

        if rel <= opts.rel_tolerance {
            stalled += 1;
            if stalled >= 2 {
                converged = true;
                break;
            }
        } else {
            stalled = 0;
        }
    }

    OptimResult {
        x,
        value: f,
        gradient: g,
        iterations,
        evaluations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (1.0, 100.0);
            let v = (a - x[0]).powi(2) + b * (x[1] - x[0] * x[0]).powi(2);
            let g = vec![
                -2.0 * (a - x[0]) - 4.0 * b * (x[1] - x[0] * x[0]) * x[0],
                2.0 * b * (x[1] - x[0] * x[0]),
            ];
            (v, g)
        };
        let opts = OptimOptions {
            rel_tolerance: 1e-14,
            ..OptimOptions::default()
        };
        let r = minimize(f, vec![-1.2, 1.0], &opts);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-4, "{:?}", r.x);
        assert!((r.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn infeasible_region_is_avoided() {
        // minimum of (x-3)^2 with x < 4 feasible only
        let f = |x: &[f64]| {
            if x[0] >= 4.0 {
                (f64::INFINITY, vec![0.0])
            } else {
                ((x[0] - 3.0).powi(2), vec![2.0 * (x[0] - 3.0)])
            }
        };
        let r = minimize(f, vec![-5.0], &OptimOptions::default());
        assert!((r.x[0] - 3.0).abs() < 1e-5);
    }
}
