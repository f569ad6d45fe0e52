use serde::{Deserialize, Serialize};

use super::report::{Failure, NRecord, SolveReport};
use super::{MixedObjective, Problem};
use crate::descent::{minimize, DescentOptions};
use crate::error::{Error, Result};
use crate::mesh::Field;
use crate::sampling::{rng_for, FieldSampler};

/// Relative tolerance of the minimizer inequality.
pub const CERTIFICATE_TOL: f64 = 1e-8;

/// Post-hoc checks on a computed minimizer of `I_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub min_nodal: f64,
    pub trials: usize,
    /// Largest `(lhs - rhs) / scale` over the trials, where `lhs = ‖u‖^p`,
    /// `rhs = ‖φ‖^p + p Σ|T|(ū - φ̄)(f_n (ū⁺+1/n)^{-δ} + g_n (ū⁺+1/n)^{-γ})`
    /// and `scale` bounds the magnitude of the terms.
    pub worst_gap: f64,
}

impl Certificate {
    pub fn positive(&self) -> bool {
        self.min_nodal >= -1e-8
    }

    pub fn holds(&self) -> bool {
        self.worst_gap <= CERTIFICATE_TOL
    }
}

/// Result of one inner minimization.
#[derive(Debug, Clone)]
pub struct InnerSolve {
    pub n: u64,
    /// Interior unknowns.
    pub x: Vec<f64>,
    pub field: Field,
    pub iterations: usize,
    pub grad_norm: f64,
    pub energy: f64,
    /// Energy after every accepted step, starting at the initial field.
    pub history: Vec<f64>,
    pub certificate: Option<Certificate>,
}

impl Problem {
    pub(crate) fn descent_options(&self, grad_tol: f64) -> DescentOptions {
        DescentOptions {
            grad_tol,
            max_iters: self.spec.max_inner_iters,
            record_history: true,
            ..Default::default()
        }
    }

    /// Minimizes `I_n` from `initial` (a zero-boundary field) and certifies
    /// the result against random test fields.
    pub fn minimize_in(&self, n: u64, initial: &Field) -> Result<InnerSolve> {
        if !initial.zero_boundary() {
            return Err(Error::Input("initial field must have zero boundary values".into()));
        }
        let obj = self.mixed_objective(n)?;
        let out = minimize(&obj, initial.interior_values(), &self.descent_options(self.spec.inner_tol))?;
        let certificate = self.certify(&obj, &out.x, n);
        Ok(InnerSolve {
            n,
            field: self.disc.field(&out.x),
            x: out.x,
            iterations: out.iterations,
            grad_norm: out.grad_norm,
            energy: out.value,
            history: out.history,
            certificate: Some(certificate),
        })
    }

    fn certify(&self, obj: &MixedObjective<'_>, u: &[f64], n: u64) -> Certificate {
        let min_nodal = u.iter().copied().fold(0.0, f64::min);
        let trials = self.spec.certificate_trials;
        let scale_u = u.iter().copied().fold(0.0, f64::max).max(1e-3);
        let sampler = FieldSampler::new(std::sync::Arc::clone(self.mesh()));
        let mut rng = rng_for(self.spec.seed, 0x3300_0000 + n);
        let lhs = self.disc.energy(u);
        let mut worst_gap = f64::NEG_INFINITY;
        for trial in 0..trials {
            // alternate global fields with small perturbations of u, where the
            // inequality is nearly tight
            let phi = if trial % 2 == 0 {
                sampler.sample(&mut rng, -0.5 * scale_u, 2.0 * scale_u, 2)
            } else {
                let d = sampler.sample(&mut rng, -1e-2 * scale_u, 1e-2 * scale_u, 2);
                u.iter().zip(&d).map(|(a, b)| a + b).collect()
            };
            let phi_energy = self.disc.energy(&phi);
            let (load, load_mag) = obj.certificate_load(u, &phi);
            let rhs = phi_energy + load;
            let scale = lhs.max(phi_energy).max(load_mag).max(f64::MIN_POSITIVE);
            worst_gap = worst_gap.max((lhs - rhs) / scale);
        }
        Certificate {
            min_nodal,
            trials,
            worst_gap: if trials == 0 { 0.0 } else { worst_gap },
        }
    }

    pub(crate) fn record(&self, solve: &InnerSolve) -> NRecord {
        let values = solve.field.values().to_vec();
        let mesh = self.mesh();
        let min_interior = mesh
            .vertices
            .iter()
            .zip(&values)
            .filter(|(v, _)| mesh.in_test_region(**v))
            .map(|(_, &u)| u)
            .fold(f64::INFINITY, f64::min);
        NRecord {
            n: solve.n,
            norm: self.disc.energy(&solve.x).powf(1.0 / self.disc.p()),
            sup: solve.field.max(),
            min_interior,
            min_nodal: solve.field.min(),
            inner_iters: solve.iterations,
            energy: solve.energy,
            grad_norm: solve.grad_norm,
            certificate_gap: solve.certificate.as_ref().map(|c| c.worst_gap),
            monotonicity_violation: None,
            sup_change: None,
            picard_iters: None,
            picard_theta: None,
            values,
        }
    }
}

/// Runs the monotone n-loop of the mixed problem, warm-starting each level
/// from the previous solution and stopping once successive solutions differ
/// by less than `outer_tol` in sup-norm. Inner convergence failures end the
/// loop and are recorded in the report.
pub fn solve_mixed(problem: &Problem) -> Result<SolveReport> {
    solve_mixed_from(problem, &Field::zeros(std::sync::Arc::clone(problem.mesh())))
}

pub fn solve_mixed_from(problem: &Problem, initial: &Field) -> Result<SolveReport> {
    if !problem.is_mixed() {
        return Err(Error::Input("solve_mixed needs a mixed singular problem".into()));
    }
    let spec = problem.spec();
    let mut report = SolveReport::new(spec, problem.mesh());
    let mut current = initial.clone();
    for &n in &spec.n_schedule {
        match problem.minimize_in(n, &current) {
            Ok(solve) => {
                report.push(problem.record(&solve));
                current = solve.field;
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
