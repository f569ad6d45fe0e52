//! Regularized singular problems and their monotone n-loops.
//!
//! For each truncation level `n` the mixed problem
//! `-div(w a(∇u)) = f_n (u⁺ + 1/n)^{-δ} + g_n (u⁺ + 1/n)^{-γ}` is solved by
//! minimizing the convex energy `I_n`, and the exponential problem
//! `-div(w a(∇v)) = h_n e^{1/(v⁺ + 1/n)}` by damped Picard iteration over
//! convex frozen-coefficient problems. Data are truncated at `n` after
//! evaluation at barycenters.

mod exponential;
mod levels;
mod mixed;
mod report;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::DataFn;
use crate::descent::{Evaluation, Objective};
use crate::discrete::Discretization;
use crate::error::{Error, Result};
use crate::finsler::{FinslerNorm, FluxParams};
use crate::mesh::{Field, Mesh, MeshConfig};
use crate::weights::WeightSpec;

pub use exponential::{linear_comparison, solve_exponential};
pub use levels::{stampacchia_diagnostic, LevelSet};
pub use mixed::{solve_mixed, solve_mixed_from, Certificate, InnerSolve, CERTIFICATE_TOL};
pub use report::{Failure, MeshStats, NRecord, SolveReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemKind {
    MixedSingular {
        delta: f64,
        gamma: f64,
        f: DataFn,
        g: DataFn,
    },
    Exponential {
        h: DataFn,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub mesh: MeshConfig,
    pub norm: FinslerNorm,
    pub p: f64,
    pub weight: WeightSpec,
    pub problem: ProblemKind,
    pub n_schedule: Vec<u64>,
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub max_inner_iters: usize,
    /// Initial under-relaxation factor of the Picard iteration.
    pub picard_theta: f64,
    /// Number of random test fields for the minimizer certificate.
    pub certificate_trials: usize,
    pub seed: u64,
}

/// `2^0, 2^1, ..., 2^max_exp`.
pub fn power_schedule(max_exp: u32) -> Vec<u64> {
    (0..=max_exp).map(|k| 1u64 << k).collect()
}

impl ProblemSpec {
    fn with_kind(mesh: MeshConfig, norm: FinslerNorm, p: f64, weight: WeightSpec, problem: ProblemKind) -> Self {
        Self {
            mesh,
            norm,
            p,
            weight,
            problem,
            n_schedule: power_schedule(10),
            inner_tol: 1e-8,
            outer_tol: 1e-6,
            max_inner_iters: 50_000,
            picard_theta: 0.5,
            certificate_trials: 16,
            seed: 0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn mixed(
        mesh: MeshConfig,
        norm: FinslerNorm,
        p: f64,
        weight: WeightSpec,
        delta: f64,
        gamma: f64,
        f: DataFn,
        g: DataFn,
    ) -> Self {
        Self::with_kind(mesh, norm, p, weight, ProblemKind::MixedSingular { delta, gamma, f, g })
    }

    pub fn exponential(mesh: MeshConfig, norm: FinslerNorm, p: f64, weight: WeightSpec, h: DataFn) -> Self {
        Self::with_kind(mesh, norm, p, weight, ProblemKind::Exponential { h })
    }

    pub fn delta(&self) -> Option<f64> {
        match self.problem {
            ProblemKind::MixedSingular { delta, .. } => Some(delta),
            ProblemKind::Exponential { .. } => None,
        }
    }

    /// Checks every gate and tolerance that does not need the mesh.
    pub fn validate(&self) -> Result<FluxParams> {
        let flux = FluxParams::new(self.norm, self.p)?;
        if self.weight.dim != self.norm.dim() {
            return Err(Error::Input(format!(
                "weight dimension {} differs from norm dimension {}",
                self.weight.dim,
                self.norm.dim()
            )));
        }
        self.weight.validate(self.p)?;
        if let ProblemKind::MixedSingular { delta, gamma, .. } = self.problem {
            for (name, v) in [("delta", delta), ("gamma", gamma)] {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::Gate(format!("{name} = {v} must lie in (0, 1)")));
                }
            }
        }
        if self.n_schedule.is_empty() {
            return Err(Error::Input("n schedule is empty".into()));
        }
        if self.n_schedule[0] == 0 || self.n_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("n schedule must be strictly increasing and start at n >= 1".into()));
        }
        for (name, v) in [("inner_tol", self.inner_tol), ("outer_tol", self.outer_tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.picard_theta > 0.0 && self.picard_theta <= 1.0) {
            return Err(Error::config("picard_theta", format!("must lie in (0, 1], got {}", self.picard_theta)));
        }
        if self.max_inner_iters == 0 {
            return Err(Error::config("max_inner_iters", "must be positive"));
        }
        Ok(flux)
    }
}

/// Barycentric samples of a data function after validating them.
fn sample_data(disc: &Discretization, name: &str, f: &DataFn) -> Result<Vec<f64>> {
    let values = disc.sample(|x, y| f.eval(x, y));
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Input(format!("data `{name}` = {f} is not finite at a quadrature node ({v})")));
    }
    if values.iter().any(|&v| v < 0.0) {
        return Err(Error::Input(format!("data `{name}` = {f} is negative at a quadrature node")));
    }
    Ok(values)
}

fn truncate(data: &[f64], n: u64) -> Vec<f64> {
    let n = n as f64;
    data.iter().map(|&d| d.min(n)).collect()
}

/// A validated problem on its mesh, with data sampled at barycenters.
#[derive(Debug, Clone)]
pub struct Problem {
    spec: ProblemSpec,
    disc: Discretization,
    data: ProblemData,
}

#[derive(Debug, Clone)]
enum ProblemData {
    Mixed { delta: f64, gamma: f64, f: Vec<f64>, g: Vec<f64> },
    Exponential { h: Vec<f64> },
}

impl Problem {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        let mesh = Arc::new(Mesh::from_config(&spec.mesh)?);
        Self::on_mesh(spec, mesh)
    }

    /// Builds the problem on an existing mesh, which must match `spec.mesh`.
    pub fn on_mesh(spec: ProblemSpec, mesh: Arc<Mesh>) -> Result<Self> {
        let flux = spec.validate()?;
        if mesh.config != spec.mesh {
            return Err(Error::Input(format!("mesh {} does not match spec {}", mesh.config, spec.mesh)));
        }
        let disc = Discretization::new(mesh, flux, spec.weight);
        let data = match &spec.problem {
            ProblemKind::MixedSingular { delta, gamma, f, g } => {
                let fs = sample_data(&disc, "f", f)?;
                let gs = sample_data(&disc, "g", g)?;
                if fs.iter().chain(&gs).all(|&v| v == 0.0) {
                    return Err(Error::Input("data (f, g) vanish identically; the problem needs (f, g) != (0, 0)".into()));
                }
                ProblemData::Mixed {
                    delta: *delta,
                    gamma: *gamma,
                    f: fs,
                    g: gs,
                }
            }
            ProblemKind::Exponential { h } => {
                let hs = sample_data(&disc, "h", h)?;
                if hs.iter().all(|&v| v == 0.0) {
                    return Err(Error::Input("data h vanishes identically; the problem needs h != 0".into()));
                }
                ProblemData::Exponential { h: hs }
            }
        };
        if disc.num_dofs() == 0 {
            return Err(Error::Input(format!("mesh {} has no interior vertices", spec.mesh)));
        }
        Ok(Self { spec, disc, data })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.disc.mesh()
    }

    pub fn is_mixed(&self) -> bool {
        matches!(self.data, ProblemData::Mixed { .. })
    }

    /// The energy `I_n` of the mixed problem at truncation level `n`.
    pub fn mixed_objective(&self, n: u64) -> Result<MixedObjective<'_>> {
        let ProblemData::Mixed { delta, gamma, f, g } = &self.data else {
            return Err(Error::Input("not a mixed singular problem".into()));
        };
        if n == 0 {
            return Err(Error::Input("truncation level n must be at least 1".into()));
        }
        Ok(MixedObjective {
            disc: &self.disc,
            delta: *delta,
            gamma: *gamma,
            f: truncate(f, n),
            g: truncate(g, n),
            shift: 1.0 / n as f64,
        })
    }

    /// `I_n(v)` for a zero-boundary field.
    pub fn energy_in(&self, field: &Field, n: u64) -> Result<f64> {
        if !field.zero_boundary() {
            return Err(Error::Input("energy I_n needs a field with zero boundary values".into()));
        }
        let obj = self.mixed_objective(n)?;
        Ok(obj.value(&field.interior_values()))
    }

    /// The limit functional `(1/p)‖v‖^p - (1/(1-δ))∫(v⁺)^{1-δ} f - (1/(1-γ))∫(v⁺)^{1-γ} g`.
    pub fn limit_energy(&self, field: &Field) -> Result<f64> {
        let ProblemData::Mixed { delta, gamma, f, g } = &self.data else {
            return Err(Error::Input("not a mixed singular problem".into()));
        };
        let x = field.interior_values();
        let e = self.disc.energy(&x) / self.disc.p();
        let lf = self.disc.load(&x, f, |t| t.max(0.0).powf(1.0 - delta) / (1.0 - delta));
        let lg = self.disc.load(&x, g, |t| t.max(0.0).powf(1.0 - gamma) / (1.0 - gamma));
        Ok(e - lf - lg)
    }

    pub(crate) fn exponential_data(&self) -> Option<&[f64]> {
        match &self.data {
            ProblemData::Exponential { h } => Some(h),
            ProblemData::Mixed { .. } => None,
        }
    }

    /// Raw (untruncated) `f` samples for mixed problems.
    pub fn f_samples(&self) -> Option<&[f64]> {
        match &self.data {
            ProblemData::Mixed { f, .. } => Some(f),
            ProblemData::Exponential { .. } => None,
        }
    }

    /// Whether `g` vanishes at every quadrature node.
    pub fn g_vanishes(&self) -> bool {
        match &self.data {
            ProblemData::Mixed { g, .. } => g.iter().all(|&v| v == 0.0),
            ProblemData::Exponential { .. } => false,
        }
    }
}

/// `G(t) = (t⁺ + s)^{1-δ}/(1-δ) - s^{-δ} t⁻` for shift `s = 1/n`.
#[inline]
fn regularized_primitive(t: f64, delta: f64, shift: f64) -> f64 {
    if t >= 0.0 {
        (t + shift).powf(1.0 - delta) / (1.0 - delta)
    } else {
        shift.powf(1.0 - delta) / (1.0 - delta) + shift.powf(-delta) * t
    }
}

/// `G'(t) = (t⁺ + s)^{-δ}`.
#[inline]
fn regularized_derivative(t: f64, delta: f64, shift: f64) -> f64 {
    (t.max(0.0) + shift).powf(-delta)
}

/// `I_n` on the interior unknowns.
pub struct MixedObjective<'a> {
    disc: &'a Discretization,
    delta: f64,
    gamma: f64,
    f: Vec<f64>,
    g: Vec<f64>,
    shift: f64,
}

impl MixedObjective<'_> {
    pub fn value(&self, x: &[f64]) -> f64 {
        let (d, gm, s) = (self.delta, self.gamma, self.shift);
        self.disc.energy(x) / self.disc.p()
            - self.disc.load(x, &self.f, |t| regularized_primitive(t, d, s))
            - self.disc.load(x, &self.g, |t| regularized_primitive(t, gm, s))
    }

    /// Right-hand side of the minimizer inequality, without `‖φ‖^p`:
    /// `p Σ |T| (ū - φ̄) (f_n G'_δ(ū) + g_n G'_γ(ū))`.
    fn certificate_load(&self, u: &[f64], phi: &[f64]) -> (f64, f64) {
        let (d, gm, s) = (self.delta, self.gamma, self.shift);
        let mesh = self.disc.mesh();
        let mut sum = 0.0;
        let mut mag = 0.0;
        for t in 0..self.disc.num_triangles() {
            if self.f[t] == 0.0 && self.g[t] == 0.0 {
                continue;
            }
            let ub = self.disc.barycenter_value(u, t);
            let pb = self.disc.barycenter_value(phi, t);
            let rate = self.f[t] * regularized_derivative(ub, d, s) + self.g[t] * regularized_derivative(ub, gm, s);
            let term = mesh.areas[t] * (ub - pb) * rate;
            sum += term;
            mag += term.abs();
        }
        (self.disc.p() * sum, self.disc.p() * mag)
    }
}

impl Objective for MixedObjective<'_> {
    fn dim(&self) -> usize {
        self.disc.num_dofs()
    }

    fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> Evaluation {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (d, gm, s) = (self.delta, self.gamma, self.shift);
        let energy = self.disc.energy_with_gradient(x, grad) / self.disc.p();
        let (lf, mf) = self.disc.load_with_gradient(
            x,
            &self.f,
            |t| regularized_primitive(t, d, s),
            |t| regularized_derivative(t, d, s),
            grad,
        );
        let (lg, mg) = self.disc.load_with_gradient(
            x,
            &self.g,
            |t| regularized_primitive(t, gm, s),
            |t| regularized_derivative(t, gm, s),
            grad,
        );
        Evaluation {
            value: energy - lf - lg,
            magnitude: energy + mf + mg,
        }
    }

    fn inverse_metric(&self) -> Option<&[f64]> {
        Some(self.disc.inverse_lumped_mass())
    }
}
