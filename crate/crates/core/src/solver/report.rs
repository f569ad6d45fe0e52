use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ProblemSpec;
use crate::error::{Error, Result};
use crate::mesh::{Field, Mesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshStats {
    pub tag: String,
    pub vertices: usize,
    pub triangles: usize,
    pub interior: usize,
    pub area: f64,
    pub min_edge: f64,
}

impl MeshStats {
    pub fn of(mesh: &Mesh) -> Self {
        Self {
            tag: mesh.config.to_string(),
            vertices: mesh.num_vertices(),
            triangles: mesh.num_triangles(),
            interior: mesh.interior.len(),
            area: mesh.total_area(),
            min_edge: mesh.min_edge(),
        }
    }
}

/// Diagnostics of the solution at one truncation level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NRecord {
    pub n: u64,
    /// `‖u_n‖ = (Σ |T| w F(∇u_n)^p)^{1/p}`.
    pub norm: f64,
    pub sup: f64,
    /// Minimum over vertices in the centred test region.
    pub min_interior: f64,
    pub min_nodal: f64,
    pub inner_iters: usize,
    /// `I_n(u_n)` for mixed problems; the frozen energy for exponential ones.
    pub energy: f64,
    pub grad_norm: f64,
    /// Worst relative excess in the minimizer inequality over the random test fields.
    pub certificate_gap: Option<f64>,
    /// `max (u_prev - u_n)⁺` against the previous level.
    pub monotonicity_violation: Option<f64>,
    /// `‖u_n - u_prev‖_∞`.
    pub sup_change: Option<f64>,
    pub picard_iters: Option<usize>,
    pub picard_theta: Option<f64>,
    /// Nodal values on all vertices.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: String,
    pub message: String,
    pub n: u64,
    pub iterations: usize,
    pub residual: f64,
}

impl Failure {
    pub(crate) fn from_error(err: &Error, n: u64) -> Self {
        let (iterations, residual) = match err {
            Error::Convergence {
                iterations, residual, ..
            } => (*iterations, *residual),
            _ => (0, f64::NAN),
        };
        Self {
            kind: err.kind().to_string(),
            message: err.to_string(),
            n,
            iterations,
            residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub spec: ProblemSpec,
    pub mesh: MeshStats,
    pub records: Vec<NRecord>,
    /// Successive solutions differ by less than `outer_tol` in sup-norm.
    pub converged: bool,
    /// `max (u_n - u_{n+1})⁺` for each consecutive pair.
    pub monotonicity_violations: Vec<f64>,
    /// `(‖u_n‖ - ‖u_{n+1}‖)⁺` for each consecutive pair.
    pub norm_decreases: Vec<f64>,
    pub failure: Option<Failure>,
}

impl SolveReport {
    pub(crate) fn new(spec: &ProblemSpec, mesh: &Mesh) -> Self {
        Self {
            spec: spec.clone(),
            mesh: MeshStats::of(mesh),
            records: Vec::new(),
            converged: false,
            monotonicity_violations: Vec::new(),
            norm_decreases: Vec::new(),
            failure: None,
        }
    }

    pub(crate) fn push(&mut self, mut record: NRecord) {
        if let Some(prev) = self.records.last() {
            let mut violation = 0.0f64;
            let mut change = 0.0f64;
            for (a, b) in prev.values.iter().zip(&record.values) {
                violation = violation.max(a - b);
                change = change.max((a - b).abs());
            }
            record.monotonicity_violation = Some(violation);
            record.sup_change = Some(change);
            self.monotonicity_violations.push(violation);
            self.norm_decreases.push((prev.norm - record.norm).max(0.0));
        }
        self.records.push(record);
    }

    pub fn last(&self) -> Option<&NRecord> {
        self.records.last()
    }

    /// Nodal values of the last computed level.
    pub fn final_values(&self) -> Option<&[f64]> {
        self.records.last().map(|r| r.values.as_slice())
    }

    pub fn final_field(&self, mesh: &Arc<Mesh>) -> Result<Field> {
        let values = self
            .final_values()
            .ok_or_else(|| Error::Input("report has no computed levels".into()))?;
        Field::from_values(Arc::clone(mesh), values.to_vec(), true)
    }

    pub fn max_monotonicity_violation(&self) -> f64 {
        self.monotonicity_violations.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_norm_decrease(&self) -> f64 {
        self.norm_decreases.iter().copied().fold(0.0, f64::max)
    }

    /// `n,norm,sup,min_interior,inner_iters,energy`.
    pub fn write_history_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "n,norm,sup,min_interior,inner_iters,energy")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{},{:e}",
                r.n, r.norm, r.sup, r.min_interior, r.inner_iters, r.energy
            )?;
        }
        Ok(())
    }
}
