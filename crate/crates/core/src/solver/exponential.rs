use std::sync::Arc;

use super::report::{Failure, SolveReport};
use super::{InnerSolve, Problem};
use crate::descent::{minimize, Evaluation, Objective};
use crate::discrete::Discretization;
use crate::error::{Error, Result};
use crate::mesh::Field;

/// Frozen problems are solved this much tighter than the Picard tolerance so
/// their error does not pollute the fixed-point residual.
const FROZEN_TOL_FACTOR: f64 = 1e-2;

/// Floor on the damping factor chosen by the line search.
const MIN_THETA: f64 = 1e-6;

const LINE_SEARCH_STEPS: usize = 12;

/// `(1/p)‖v‖^p - Σ |T| c_T v̄_T` for a fixed nonnegative load `c`.
struct FrozenObjective<'a> {
    disc: &'a Discretization,
    load: &'a [f64],
}

impl Objective for FrozenObjective<'_> {
    fn dim(&self) -> usize {
        self.disc.num_dofs()
    }

    fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> Evaluation {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let energy = self.disc.energy_with_gradient(x, grad) / self.disc.p();
        let (load, mag) = self.disc.load_with_gradient(x, self.load, |t| t, |_| 1.0, grad);
        Evaluation {
            value: energy - load,
            magnitude: energy + mag,
        }
    }

    fn inverse_metric(&self) -> Option<&[f64]> {
        Some(self.disc.inverse_lumped_mass())
    }
}

impl Problem {
    /// Minimizes `(1/p)‖v‖^p - Σ |T| c_T v̄_T` from `x0`.
    fn solve_frozen(&self, load: &[f64], x0: Vec<f64>, grad_tol: f64) -> Result<crate::descent::DescentOutcome> {
        let obj = FrozenObjective {
            disc: &self.disc,
            load,
        };
        minimize(&obj, x0, &self.descent_options(grad_tol))
    }

    /// `h_n e^{1/(v̄⁺ + 1/n)}` on triangles touching an unknown, 0 elsewhere
    /// (those triangles do not enter any equation).
    fn exponential_load(&self, h: &[f64], x: &[f64], n: u64) -> Result<Vec<f64>> {
        let shift = 1.0 / n as f64;
        let cap = n as f64;
        let mut load = vec![0.0; h.len()];
        for (t, c) in load.iter_mut().enumerate() {
            if h[t] == 0.0 || !self.disc.has_dofs(t) {
                continue;
            }
            let v = self.disc.barycenter_value(x, t).max(0.0);
            *c = h[t].min(cap) * (1.0 / (v + shift)).exp();
            if !c.is_finite() {
                return Err(Error::Convergence {
                    message: format!("exponential load overflows at n = {n} (barycenter value {v:e})"),
                    iterations: 0,
                    residual: f64::INFINITY,
                    last_iterate: x.to_vec(),
                });
            }
        }
        Ok(load)
    }

    /// Derivative of `θ ↦ I_n(x + θ d)`, where `I_n` is the convex energy
    /// whose Euler-Lagrange equation is the level-`n` problem:
    /// `⟨∇(‖y‖^p/p) - c(y), d⟩` at `y = x + θ d` with `c` the assembled load.
    fn slope(&self, h: &[f64], n: u64, x: &[f64], d: &[f64], theta: f64, grad: &mut [f64]) -> Result<f64> {
        let y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + theta * b).collect();
        let load = self.exponential_load(h, &y, n)?;
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.disc.energy_with_gradient(&y, grad);
        self.disc.load_with_gradient(&y, &load, |t| t, |_| 1.0, grad);
        Ok(grad.iter().zip(d).map(|(g, di)| g * di).sum())
    }

    /// Damping factor for the step `x → x + θ d`: the largest admissible
    /// factor if the energy still decreases there, otherwise a root of the
    /// slope on `(0, θ_max)` by Illinois false position.
    fn damping(&self, h: &[f64], n: u64, x: &[f64], d: &[f64], theta_max: f64) -> Result<f64> {
        let mut grad = vec![0.0; x.len()];
        let s0 = self.slope(h, n, x, d, 0.0, &mut grad)?;
        let s1 = self.slope(h, n, x, d, theta_max, &mut grad)?;
        if s0 >= 0.0 || s1 <= 0.0 {
            return Ok(theta_max);
        }
        // (lo, hi) brackets the root; wlo, whi are Illinois-weighted slopes
        let (mut lo, mut hi, mut wlo, mut whi) = (0.0, theta_max, s0, s1);
        let mut side = 0;
        for _ in 0..LINE_SEARCH_STEPS {
            let t = (lo * whi - hi * wlo) / (whi - wlo);
            let st = self.slope(h, n, x, d, t, &mut grad)?;
            if st <= 0.0 {
                (lo, wlo) = (t, st);
                if side == -1 {
                    whi *= 0.5;
                }
                side = -1;
                if st.abs() <= 0.05 * s0.abs() {
                    break;
                }
            } else {
                (hi, whi) = (t, st);
                if side == 1 {
                    wlo *= 0.5;
                }
                side = 1;
            }
            if hi - lo <= 1e-3 * hi {
                break;
            }
        }
        // the slope is still negative at `lo`, so the energy decreased
        Ok(lo.max(MIN_THETA))
    }

    /// Damped Picard iteration for level `n`. Returns the fixed point, the
    /// total number of descent steps, the Picard count and the mean damping
    /// factor.
    fn picard(&self, h: &[f64], n: u64, x0: Vec<f64>) -> Result<(InnerSolve, usize, f64)> {
        let spec = &self.spec;
        let final_tol = FROZEN_TOL_FACTOR * spec.inner_tol;
        let mut x = x0;
        let mut previous = f64::INFINITY;
        let mut descent_steps = 0;
        let mut theta_sum = 0.0;
        for picard in 1..=spec.max_inner_iters {
            let load = self.exponential_load(h, &x, n)?;
            // early sweeps only need frozen solves as accurate as the residual
            let tol = (FROZEN_TOL_FACTOR * previous).clamp(final_tol, 1.0);
            let mut out = self.solve_frozen(&load, x.clone(), tol)?;
            descent_steps += out.iterations;
            let mut residual = sup_distance(&x, &out.x);
            if residual < spec.inner_tol && tol > final_tol {
                out = self.solve_frozen(&load, out.x, final_tol)?;
                descent_steps += out.iterations;
                residual = sup_distance(&x, &out.x);
            }
            if residual < spec.inner_tol {
                let solve = InnerSolve {
                    n,
                    field: self.disc.field(&out.x),
                    x: out.x,
                    iterations: descent_steps,
                    grad_norm: residual,
                    energy: out.value,
                    history: out.history,
                    certificate: None,
                };
                let mean_theta = if picard > 1 { theta_sum / (picard - 1) as f64 } else { spec.picard_theta };
                return Ok((solve, picard, mean_theta));
            }
            previous = residual;
            let d: Vec<f64> = out.x.iter().zip(&x).map(|(s, v)| s - v).collect();
            let theta = self.damping(h, n, &x, &d, spec.picard_theta)?;
            theta_sum += theta;
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += theta * di;
            }
        }
        Err(Error::Convergence {
            message: format!("Picard iteration budget exhausted at n = {n}"),
            iterations: spec.max_inner_iters,
            residual: previous,
            last_iterate: x,
        })
    }
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs the n-loop of the exponential problem with damped Picard iteration
/// at each level, warm-started from the previous level.
pub fn solve_exponential(problem: &Problem) -> Result<SolveReport> {
    let h = problem
        .exponential_data()
        .ok_or_else(|| Error::Input("solve_exponential needs an exponential problem".into()))?;
    let spec = problem.spec();
    let mut report = SolveReport::new(spec, problem.mesh());
    let mut x = vec![0.0; problem.disc.num_dofs()];
    for &n in &spec.n_schedule {
        match problem.picard(h, n, x.clone()) {
            Ok((solve, picard_iters, level_theta)) => {
                let mut record = problem.record(&solve);
                record.picard_iters = Some(picard_iters);
                record.picard_theta = Some(level_theta);
                report.push(record);
                x = solve.x;
                if report.last().and_then(|r| r.sup_change).is_some_and(|c| c < spec.outer_tol) {
                    report.converged = true;
                    break;
                }
            }
            Err(err) => {
                report.failure = Some(Failure::from_error(&err, n));
                break;
            }
        }
    }
    Ok(report)
}

/// Solution of `-div(w a(∇u)) = h` with the untruncated data of an
/// exponential problem, the comparison function below every `v_n`.
pub fn linear_comparison(problem: &Problem) -> Result<Field> {
    let h = problem
        .exponential_data()
        .ok_or_else(|| Error::Input("linear comparison needs an exponential problem".into()))?;
    let load: Vec<f64> = (0..h.len())
        .map(|t| if problem.disc.has_dofs(t) { h[t] } else { 0.0 })
        .collect();
    let tol = FROZEN_TOL_FACTOR * problem.spec().inner_tol;
    let out = problem.solve_frozen(&load, vec![0.0; problem.disc.num_dofs()], tol)?;
    Ok(Field::from_interior(Arc::clone(problem.mesh()), &out.x))
}
