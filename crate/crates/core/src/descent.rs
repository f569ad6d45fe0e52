//! Gradient descent with Barzilai–Borwein step proposals and Armijo backtracking.
//!
//! The objectives minimized here are convex and C¹ but their Hessians may
//! degenerate (zero gradients for p > 2, coordinate axes of ℓ_t norms), so
//! only first-order information is used. Backtracking keeps the objective
//! nonincreasing up to a roundoff allowance of a few ulps of the objective's
//! magnitude; without it Armijo tests stall once decreases fall below the
//! resolution of the stored value.

use crate::error::{Error, Result};

/// Value of an objective together with the scale of its summands.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub value: f64,
    /// Sum of absolute values of the terms making up `value`; roundoff in
    /// `value` is a small multiple of `ε · magnitude`.
    pub magnitude: f64,
}

pub trait Objective {
    fn dim(&self) -> usize;

    /// Evaluates the objective at `x` and writes its gradient into `grad`.
    fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> Evaluation;

    /// Diagonal inverse metric `P`: descent runs along `-P g` and the
    /// stopping test uses `sqrt(gᵀ P g)`. `None` means the identity.
    fn inverse_metric(&self) -> Option<&[f64]> {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DescentOptions {
    /// Stop once the gradient norm `sqrt(gᵀ P g)` is at most this.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub armijo: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Record the objective value after every accepted step.
    pub record_history: bool,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iters: 50_000,
            armijo: 1e-4,
            shrink: 0.5,
            max_backtracks: 60,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub magnitude: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Objective values, starting with the initial point (empty unless requested).
    pub history: Vec<f64>,
}

// Σ a_i b_i P_i
fn pdot(a: &[f64], b: &[f64], metric: Option<&[f64]>) -> f64 {
    match metric {
        Some(m) => a.iter().zip(b).zip(m).map(|((x, y), w)| x * y * w).sum(),
        None => a.iter().zip(b).map(|(x, y)| x * y).sum(),
    }
}

/// Minimizes `objective` from `x0`.
///
/// Fails with [`Error::Convergence`] (carrying the last iterate) when the
/// iteration budget runs out or no step passes the backtracking test.
pub fn minimize(objective: &impl Objective, x0: Vec<f64>, opts: &DescentOptions) -> Result<DescentOutcome> {
    let n = objective.dim();
    assert_eq!(x0.len(), n, "initial point has the wrong dimension");
    let metric = objective.inverse_metric();
    let scale = |i: usize| metric.map_or(1.0, |m| m[i]);
    let mut x = x0;
    let mut grad = vec![0.0; n];
    let mut eval = objective.evaluate(&x, &mut grad);
    let mut grad_norm = pdot(&grad, &grad, metric).sqrt();
    let mut history = Vec::new();
    if opts.record_history {
        history.push(eval.value);
    }

    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];
    // first step: move roughly unit distance, refined by backtracking
    let mut step = if grad_norm > 0.0 { 1.0 / grad_norm } else { 1.0 };
    let mut iterations = 0;

    while grad_norm > opts.grad_tol {
        if iterations >= opts.max_iters {
            return Err(Error::Convergence {
                message: format!("descent iteration budget of {} exhausted", opts.max_iters),
                iterations,
                residual: grad_norm,
                last_iterate: x,
            });
        }
        let slack = 16.0 * f64::EPSILON * eval.magnitude.max(eval.value.abs());
        let decrease = opts.armijo * grad_norm * grad_norm;
        let mut alpha = step;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            for i in 0..n {
                trial[i] = x[i] - alpha * scale(i) * grad[i];
            }
            let e = objective.evaluate(&trial, &mut trial_grad);
            if e.value.is_finite() && e.value <= eval.value - alpha * decrease + slack {
                accepted = Some(e);
                break;
            }
            alpha *= opts.shrink;
        }
        let Some(new_eval) = accepted else {
            return Err(Error::Convergence {
                message: "line search found no admissible step".into(),
                iterations,
                residual: grad_norm,
                last_iterate: x,
            });
        };

        // s = x_new - x = -alpha P g,  y = g_new - g; BB in the metric P^{-1}
        let mut sy = 0.0;
        let mut yy = 0.0;
        for i in 0..n {
            let y = trial_grad[i] - grad[i];
            sy += -alpha * scale(i) * grad[i] * y;
            yy += y * y * scale(i);
        }
        let ss = alpha * alpha * grad_norm * grad_norm;
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        eval = new_eval;
        grad_norm = pdot(&grad, &grad, metric).sqrt();
        iterations += 1;
        if opts.record_history {
            history.push(eval.value);
        }

        step = if sy > 0.0 {
            // alternate the long and short BB steps
            if iterations % 2 == 1 {
                ss / sy
            } else {
                sy / yy
            }
        } else {
            alpha * 2.0
        };
        if !step.is_finite() || step <= 0.0 {
            step = alpha;
        }
    }

    Ok(DescentOutcome {
        x,
        value: eval.value,
        magnitude: eval.magnitude,
        grad_norm,
        iterations,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ½ Σ d_i x_i² - Σ b_i x_i with a spread spectrum.
    struct Quadratic {
        d: Vec<f64>,
        b: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.d.len()
        }

        fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> Evaluation {
            let mut value = 0.0;
            let mut magnitude = 0.0;
            for i in 0..x.len() {
                let q = 0.5 * self.d[i] * x[i] * x[i];
                let l = self.b[i] * x[i];
                value += q - l;
                magnitude += q.abs() + l.abs();
                grad[i] = self.d[i] * x[i] - self.b[i];
            }
            Evaluation { value, magnitude }
        }
    }

    #[test]
    fn quadratic_minimum() {
        let n = 200;
        let q = Quadratic {
            d: (0..n).map(|i| 1e-2 + i as f64).collect(),
            b: (0..n).map(|i| (i as f64 * 0.37).sin()).collect(),
        };
        let opts = DescentOptions {
            grad_tol: 1e-12,
            record_history: true,
            ..Default::default()
        };
        let out = minimize(&q, vec![0.0; n], &opts).unwrap();
        for i in 0..n {
            assert!((out.x[i] - q.b[i] / q.d[i]).abs() < 1e-9);
        }
        assert!(out.grad_norm <= 1e-12);
        for w in out.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-13 * out.magnitude.max(1.0));
        }
    }

    /// Σ |x_i - c_i|^3 / 3: Hessian vanishes at the minimizer.
    struct Cubic {
        c: Vec<f64>,
    }

    impl Objective for Cubic {
        fn dim(&self) -> usize {
            self.c.len()
        }

        fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> Evaluation {
            let mut v = 0.0;
            for i in 0..x.len() {
                let r = x[i] - self.c[i];
                v += r.abs().powi(3) / 3.0;
                grad[i] = r.abs() * r;
            }
            Evaluation { value: v, magnitude: v }
        }
    }

    #[test]
    fn degenerate_minimum() {
        let obj = Cubic {
            c: vec![1.0, -2.0, 0.5],
        };
        let out = minimize(&obj, vec![0.0; 3], &DescentOptions::default()).unwrap();
        for (x, c) in out.x.iter().zip(&obj.c) {
            assert!((x - c).abs() < 1e-3);
        }
    }

    #[test]
    fn budget_exhaustion_carries_last_iterate() {
        let q = Quadratic {
            d: (0..50).map(|i| 1e-4 + i as f64).collect(),
            b: vec![1.0; 50],
        };
        let opts = DescentOptions {
            grad_tol: 1e-14,
            max_iters: 3,
            ..Default::default()
        };
        match minimize(&q, vec![0.0; 50], &opts) {
            Err(Error::Convergence {
                iterations,
                last_iterate,
                ..
            }) => {
                assert_eq!(iterations, 3);
                assert_eq!(last_iterate.len(), 50);
            }
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }
}
