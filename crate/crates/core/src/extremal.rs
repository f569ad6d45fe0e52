//! Best constant of the weighted anisotropic Sobolev inequality
//! `C (∫|v|^{1-δ} f)^{p/(1-δ)} ≤ ∫ w F(∇v)^p`.
//!
//! The constant `μ` is computed twice: from the solution `u_δ` of the purely
//! singular problem as `‖u_δ‖^{p(1-δ-p)/(1-δ)}`, and directly as the minimum
//! of the scale-invariant quotient `R(v) = ‖v‖^p / (∫|v|^{1-δ} f)^{p/(1-δ)}`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::descent::{minimize, DescentOptions, Evaluation, Objective};
use crate::discrete::Discretization;
use crate::error::{Error, Result};
use crate::mesh::Field;
use crate::sampling::{rng_for, FieldSampler};
use crate::solver::{solve_mixed, Problem, ProblemSpec, SolveReport};

/// Stream offsets keeping the random fields of different tasks independent.
const RESTART_STREAM: u64 = 0x5100_0000;
const TRIAL_STREAM: u64 = 0x7700_0000;

/// Relative tolerance of the `‖u_δ‖^p = ∫ u_δ^{1-δ} f` identity.
pub const USEFUL_IDENTITY_TOL: f64 = 1e-2;

/// The pieces of a mixed problem with `g = 0` that the quotient needs.
fn quotient_parts(problem: &Problem) -> Result<(&Discretization, &[f64], f64)> {
    let delta = problem
        .spec()
        .delta()
        .ok_or_else(|| Error::Input("the Sobolev quotient needs a mixed singular problem".into()))?;
    if !problem.g_vanishes() {
        return Err(Error::Input("the extremal problem needs g = 0".into()));
    }
    let f = problem.f_samples().expect("mixed problems carry f");
    Ok((problem.discretization(), f, delta))
}

/// `∫ |v̄|^{1-δ} f` at barycenters.
fn constraint(disc: &Discretization, f: &[f64], delta: f64, x: &[f64]) -> f64 {
    disc.load(x, f, |t| t.abs().powf(1.0 - delta))
}

/// `log R(v)` on the interior unknowns.
struct LogQuotient<'a> {
    disc: &'a Discretization,
    f: &'a [f64],
    delta: f64,
}

impl Objective for LogQuotient<'_> {
    fn dim(&self) -> usize {
        self.disc.num_dofs()
    }

    fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> Evaluation {
        let p = self.disc.p();
        let exponent = p / (1.0 - self.delta);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let energy = self.disc.energy_with_gradient(x, grad);
        let mut dgrad = vec![0.0; x.len()];
        let one_minus = 1.0 - self.delta;
        let delta = self.delta;
        let (d, _) = self.disc.load_with_gradient(
            x,
            self.f,
            |t| t.abs().powf(one_minus),
            |t| {
                if t == 0.0 {
                    0.0
                } else {
                    one_minus * t.abs().powf(-delta) * t.signum()
                }
            },
            &mut dgrad,
        );
        if !(energy > 0.0 && d > 0.0) {
            return Evaluation {
                value: f64::INFINITY,
                magnitude: f64::INFINITY,
            };
        }
        // grad holds ∇E/p and dgrad holds -∇D
        for (g, dg) in grad.iter_mut().zip(&dgrad) {
            *g = p * *g / energy + exponent * dg / d;
        }
        let (a, b) = (energy.ln(), exponent * d.ln());
        Evaluation {
            value: a - b,
            magnitude: a.abs() + b.abs(),
        }
    }

    fn inverse_metric(&self) -> Option<&[f64]> {
        Some(self.disc.inverse_lumped_mass())
    }
}

fn quotient_of(disc: &Discretization, f: &[f64], delta: f64, x: &[f64]) -> Result<f64> {
    let d = constraint(disc, f, delta, x);
    if d <= 0.0 {
        return Err(Error::Domain("field vanishes on the support of f".into()));
    }
    Ok(disc.energy(x) / d.powf(disc.p() / (1.0 - delta)))
}

/// `R(v) = ‖v‖^p / (∫|v|^{1-δ} f)^{p/(1-δ)}`.
pub fn rayleigh_quotient(problem: &Problem, field: &Field) -> Result<f64> {
    let (disc, f, delta) = quotient_parts(problem)?;
    quotient_of(disc, f, delta, &field.interior_values())
}

/// Rescales `x` onto `∫|v|^{1-δ} f = 1`.
fn normalize(disc: &Discretization, f: &[f64], delta: f64, x: &[f64]) -> Result<Vec<f64>> {
    let d = constraint(disc, f, delta, x);
    if d <= 0.0 {
        return Err(Error::Domain("field vanishes on the support of f".into()));
    }
    let zeta = d.powf(-1.0 / (1.0 - delta));
    Ok(x.iter().map(|v| v * zeta).collect())
}

fn check_solved(report: &SolveReport) -> Result<&[f64]> {
    if !report.converged {
        let detail = match (&report.failure, report.last()) {
            (Some(f), _) => format!("solve failed at n = {}: {}", f.n, f.message),
            (None, Some(r)) => format!(
                "successive solutions still differ by {:e} at n = {} (outer tolerance {:e})",
                r.sup_change.unwrap_or(f64::NAN),
                r.n,
                report.spec.outer_tol
            ),
            (None, None) => "no level was computed".into(),
        };
        return Err(Error::Convergence {
            message: format!("refusing to use an unconverged solve: {detail}"),
            iterations: report.records.len(),
            residual: report.last().and_then(|r| r.sup_change).unwrap_or(f64::NAN),
            last_iterate: report.final_values().map(<[f64]>::to_vec).unwrap_or_default(),
        });
    }
    Ok(report.final_values().expect("a converged report has levels"))
}

fn interior_of(problem: &Problem, values: &[f64]) -> Vec<f64> {
    problem.mesh().interior.iter().map(|&v| values[v]).collect()
}

/// `μ` from the closed form, with the identity `‖u_δ‖^p = ∫ u_δ^{1-δ} f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuFormula {
    pub mu: f64,
    /// `‖u_δ‖^p`.
    pub energy: f64,
    /// `∫ u_δ^{1-δ} f`.
    pub load: f64,
    /// `|‖u_δ‖^p - ∫ u_δ^{1-δ} f| / ‖u_δ‖^p`.
    pub identity_gap: f64,
}

impl MuFormula {
    pub fn identity_holds(&self) -> bool {
        self.identity_gap <= USEFUL_IDENTITY_TOL
    }
}

/// `‖u_δ‖^{p(1-δ-p)/(1-δ)}` from a converged solve with `g = 0`.
pub fn mu_from_formula(problem: &Problem, report: &SolveReport) -> Result<MuFormula> {
    let (disc, f, delta) = quotient_parts(problem)?;
    let x = interior_of(problem, check_solved(report)?);
    let p = disc.p();
    let energy = disc.energy(&x);
    let load = constraint(disc, f, delta, &x);
    if energy <= 0.0 {
        return Err(Error::Domain("the solution has zero energy".into()));
    }
    Ok(MuFormula {
        mu: energy.powf((1.0 - delta - p) / (1.0 - delta)),
        energy,
        load,
        identity_gap: (energy - load).abs() / energy,
    })
}

/// The normalized extremal `V_δ = ζ_δ u_δ`.
#[derive(Debug, Clone)]
pub struct Extremal {
    pub field: Field,
    pub zeta: f64,
    /// `|∫ V_δ^{1-δ} f - 1|`.
    pub normalization_residual: f64,
    /// Dual norm of `∇(‖V‖^p/p) - μ Σ|T| f V̄^{-δ}/3`, relative to the dual norm of
    /// the load term.
    pub pde_residual: f64,
}

pub fn build_extremal(problem: &Problem, report: &SolveReport, mu: f64) -> Result<Extremal> {
    let (disc, f, delta) = quotient_parts(problem)?;
    let x = interior_of(problem, check_solved(report)?);
    let d = constraint(disc, f, delta, &x);
    if d <= 0.0 {
        return Err(Error::Domain("the solution vanishes on the support of f".into()));
    }
    let zeta = d.powf(-1.0 / (1.0 - delta));
    let v: Vec<f64> = x.iter().map(|u| u * zeta).collect();
    let normalization_residual = (constraint(disc, f, delta, &v) - 1.0).abs();

    let mut operator = vec![0.0; v.len()];
    disc.energy_with_gradient(&v, &mut operator);
    let mut load = vec![0.0; v.len()];
    disc.load_with_gradient(&v, f, |_| 0.0, |t| -mu * t.max(0.0).powf(-delta), &mut load);
    let minv = disc.inverse_lumped_mass();
    let dual = |r: &dyn Fn(usize) -> f64| (0..v.len()).map(|k| r(k) * r(k) * minv[k]).sum::<f64>().sqrt();
    let residual = dual(&|k| operator[k] - load[k]);
    let scale = dual(&|k| load[k]);
    Ok(Extremal {
        field: disc.field(&v),
        zeta,
        normalization_residual,
        pde_residual: if scale > 0.0 { residual / scale } else { residual },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotientOptions {
    pub restarts: usize,
    /// Gradient tolerance for `log R` at unit `L²` scale.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for QuotientOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            grad_tol: 1e-7,
            max_iters: 50_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    /// `None` for the warm start.
    pub restart: Option<usize>,
    pub initial_value: f64,
    pub value: Option<f64>,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MuDirect {
    pub mu: f64,
    /// Best field, rescaled onto `∫|v|^{1-δ} f = 1`.
    pub field: Field,
    pub constraint_residual: f64,
    pub outcomes: Vec<RestartOutcome>,
}

/// Minimizes `R` by descent on `log R` from `restarts` smoothed random
/// fields plus the optional warm start.
pub fn mu_direct(problem: &Problem, warm: Option<&Field>, opts: &QuotientOptions) -> Result<MuDirect> {
    if opts.restarts == 0 {
        return Err(Error::Input("mu_direct needs at least one restart".into()));
    }
    let (disc, f, delta) = quotient_parts(problem)?;
    let objective = LogQuotient { disc, f, delta };
    let descent = DescentOptions {
        grad_tol: opts.grad_tol,
        max_iters: opts.max_iters,
        ..Default::default()
    };
    let sampler = FieldSampler::new(Arc::clone(problem.mesh()));
    let mut starts: Vec<(Option<usize>, Vec<f64>)> = Vec::new();
    if let Some(w) = warm {
        starts.push((None, w.interior_values()));
    }
    for r in 0..opts.restarts {
        let mut rng = rng_for(opts.seed, RESTART_STREAM + r as u64);
        starts.push((Some(r), sampler.sample(&mut rng, 0.0, 1.0, 2)));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut outcomes = Vec::new();
    for (restart, x0) in starts {
        // unit L² scale so the gradient tolerance is comparable across starts
        let m = disc.lumped_mass();
        let l2 = x0.iter().zip(m).map(|(v, w)| v * v * w).sum::<f64>().sqrt();
        let x0: Vec<f64> = if l2 > 0.0 { x0.iter().map(|v| v / l2).collect() } else { x0 };
        let initial_value = quotient_of(disc, f, delta, &x0).unwrap_or(f64::INFINITY);
        let (x, iterations, error) = match minimize(&objective, x0, &descent) {
            Ok(out) => (Some(out.x), out.iterations, None),
            Err(err @ Error::Convergence { .. }) => {
                let Error::Convergence {
                    iterations,
                    ref last_iterate,
                    ..
                } = err
                else {
                    unreachable!()
                };
                // a stalled run still holds a valid upper bound on μ
                (Some(last_iterate.clone()), iterations, Some(err.to_string()))
            }
            Err(err) => return Err(err),
        };
        let value = x.as_ref().and_then(|x| quotient_of(disc, f, delta, x).ok());
        outcomes.push(RestartOutcome {
            restart,
            initial_value,
            value,
            iterations,
            error: error.clone(),
        });
        if let (Some(v), Some(x)) = (value, x) {
            if error.is_none() && best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, x));
            }
        }
    }
    let Some((mu, x)) = best else {
        return Err(Error::Convergence {
            message: "every quotient minimization failed".into(),
            iterations: outcomes.iter().map(|o| o.iterations).sum(),
            residual: f64::NAN,
            last_iterate: Vec::new(),
        });
    };
    let v = normalize(disc, f, delta, &x)?;
    let constraint_residual = (constraint(disc, f, delta, &v) - 1.0).abs();
    Ok(MuDirect {
        mu,
        field: disc.field(&v),
        constraint_residual,
        outcomes,
    })
}

/// One evaluated instance of the inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    /// Seed of the random field; `None` for the extremal.
    pub seed: Option<u64>,
    /// `C (∫|v|^{1-δ} f)^{p/(1-δ)}`.
    pub lhs: f64,
    /// `∫ w F(∇v)^p`.
    pub rhs: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityVerdict {
    pub constant: f64,
    pub trials: usize,
    pub violations: usize,
    /// First violating row by trial index.
    pub witness: Option<TrialRow>,
    pub rows: Vec<TrialRow>,
}

impl InequalityVerdict {
    /// `trial,seed,lhs,rhs,violated`.
    pub fn write_csv(&self, out: &mut impl std::io::Write) -> Result<()> {
        writeln!(out, "trial,seed,lhs,rhs,violated")?;
        for r in &self.rows {
            let seed = r.seed.map(|s| s.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{:e},{:e},{}", r.trial, seed, r.lhs, r.rhs, r.violated)?;
        }
        Ok(())
    }
}

/// Evaluates the inequality with constant `c` on `trials` smoothed random
/// fields (trial `i` uses seed `seed + i`) and finally on `extremal`, if given.
pub fn verify_inequality(
    problem: &Problem,
    constant: f64,
    trials: usize,
    seed: u64,
    extremal: Option<&Field>,
) -> Result<InequalityVerdict> {
    if trials == 0 {
        return Err(Error::Input("verify_inequality needs at least one trial".into()));
    }
    let (disc, f, delta) = quotient_parts(problem)?;
    let sampler = FieldSampler::new(Arc::clone(problem.mesh()));
    let exponent = disc.p() / (1.0 - delta);
    let evaluate = |trial: usize, seed: Option<u64>, x: &[f64]| {
        let lhs = constant * constraint(disc, f, delta, x).powf(exponent);
        let rhs = disc.energy(x);
        TrialRow {
            trial,
            seed,
            lhs,
            rhs,
            violated: lhs > rhs,
        }
    };
    let mut rows: Vec<TrialRow> = (0..trials)
        .map(|i| {
            let s = seed.wrapping_add(i as u64);
            let x = sampler.sample(&mut rng_for(s, TRIAL_STREAM), 0.0, 1.0, 2);
            evaluate(i, Some(s), &x)
        })
        .collect();
    if let Some(v) = extremal {
        rows.push(evaluate(trials, None, &v.interior_values()));
    }
    let violations = rows.iter().filter(|r| r.violated).count();
    let witness = rows.iter().find(|r| r.violated).cloned();
    Ok(InequalityVerdict {
        constant,
        trials,
        violations,
        witness,
        rows,
    })
}

/// Everything computed by the extremal pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalReport {
    pub mu_formula: f64,
    pub mu_direct: f64,
    /// `|mu_formula - mu_direct| / mu_direct`.
    pub rel_gap: f64,
    /// `S = μ^{1/p}`, the Sobolev constant for the exponent `1-δ`.
    pub sobolev_constant: f64,
    pub zeta_delta: f64,
    pub quotient_of_extremal: f64,
    pub normalization_residual: f64,
    pub constraint_residual: f64,
    pub identity_gap: f64,
    pub residual_pde: f64,
    pub restarts: Vec<RestartOutcome>,
    pub inequality_checks: Vec<InequalitySummary>,
    /// Nodal values of `V_δ` on all vertices.
    pub extremal: Vec<f64>,
    pub solve: SolveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalitySummary {
    pub constant: f64,
    pub trials: usize,
    pub violations: usize,
    pub witness: Option<TrialRow>,
}

impl From<&InequalityVerdict> for InequalitySummary {
    fn from(v: &InequalityVerdict) -> Self {
        Self {
            constant: v.constant,
            trials: v.trials,
            violations: v.violations,
            witness: v.witness.clone(),
        }
    }
}

/// Intermediate products of [`run_extremal`], kept for callers that need the fields.
#[derive(Debug, Clone)]
pub struct ExtremalRun {
    pub problem: Problem,
    pub report: ExtremalReport,
    pub extremal: Extremal,
    pub direct: MuDirect,
    pub verdicts: Vec<InequalityVerdict>,
}

/// Solves the purely singular problem, computes `μ` both ways, builds `V_δ`
/// and checks the inequality at `0.99 μ` and `1.05 μ` (with `μ` the direct
/// value) using `trials` random fields.
pub fn run_extremal(spec: ProblemSpec, opts: &QuotientOptions, trials: usize) -> Result<ExtremalRun> {
    let problem = Problem::new(spec)?;
    quotient_parts(&problem)?;
    let solve = solve_mixed(&problem)?;
    let formula = mu_from_formula(&problem, &solve)?;
    let extremal = build_extremal(&problem, &solve, formula.mu)?;
    let direct = mu_direct(&problem, Some(&extremal.field), opts)?;
    let quotient_of_extremal = rayleigh_quotient(&problem, &extremal.field)?;
    let mut verdicts = Vec::new();
    for factor in [0.99, 1.05] {
        verdicts.push(verify_inequality(
            &problem,
            factor * direct.mu,
            trials,
            opts.seed,
            Some(&extremal.field),
        )?);
    }
    let p = problem.spec().p;
    let report = ExtremalReport {
        mu_formula: formula.mu,
        mu_direct: direct.mu,
        rel_gap: (formula.mu - direct.mu).abs() / direct.mu,
        sobolev_constant: direct.mu.powf(1.0 / p),
        zeta_delta: extremal.zeta,
        quotient_of_extremal,
        normalization_residual: extremal.normalization_residual,
        constraint_residual: direct.constraint_residual,
        identity_gap: formula.identity_gap,
        residual_pde: extremal.pde_residual,
        restarts: direct.outcomes.clone(),
        inequality_checks: verdicts.iter().map(InequalitySummary::from).collect(),
        extremal: extremal.field.values().to_vec(),
        solve,
    };
    Ok(ExtremalRun {
        problem,
        report,
        extremal,
        direct,
        verdicts,
    })
}
