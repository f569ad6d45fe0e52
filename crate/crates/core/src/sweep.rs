//! Best constants over a grid of `(p, δ, ν, norm)`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extremal::{build_extremal, mu_direct, mu_from_formula, QuotientOptions};
use crate::finsler::parse_norm_tag;
use crate::solver::{solve_mixed, Problem, ProblemKind, ProblemSpec};
use crate::weights::WeightSpec;

/// `s` used for power weights when the base configuration gives none.
pub const DEFAULT_POWER_S: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub p: f64,
    pub delta: f64,
    /// `0` selects the constant weight 1, anything else `|x|^ν`.
    pub nu: f64,
    pub norm: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(flatten)]
    pub point: GridPoint,
    pub mu_formula: Option<f64>,
    pub mu_direct: Option<f64>,
    pub rel_gap: Option<f64>,
    pub converged: bool,
    /// Set when the point could not be evaluated.
    pub error: Option<String>,
}

/// Row-major expansion with `norm` varying fastest.
pub fn expand_grid(p: &[f64], delta: &[f64], nu: &[f64], norm: &[String]) -> Vec<GridPoint> {
    let mut points = Vec::with_capacity(p.len() * delta.len() * nu.len() * norm.len());
    for &p in p {
        for &delta in delta {
            for &nu in nu {
                for tag in norm {
                    points.push(GridPoint {
                        p,
                        delta,
                        nu,
                        norm: tag.clone(),
                    });
                }
            }
        }
    }
    points
}

/// `base` with the grid point substituted in.
pub fn spec_for(base: &ProblemSpec, point: &GridPoint) -> Result<ProblemSpec> {
    let dim = base.norm.dim();
    let mut spec = base.clone();
    spec.p = point.p;
    spec.norm = parse_norm_tag(&point.norm, dim)?;
    spec.weight = if point.nu == 0.0 {
        WeightSpec::constant(1.0, dim)
    } else {
        WeightSpec::power(point.nu, dim, base.weight.s.unwrap_or(DEFAULT_POWER_S))
    };
    match &mut spec.problem {
        ProblemKind::MixedSingular { delta, g, .. } => {
            *delta = point.delta;
            *g = crate::data::DataFn::constant(0.0);
        }
        ProblemKind::Exponential { .. } => {
            return Err(Error::Input("a sweep needs a mixed singular base problem".into()));
        }
    }
    Ok(spec)
}

fn evaluate(spec: ProblemSpec, opts: &QuotientOptions) -> Result<(f64, f64, bool)> {
    let problem = Problem::new(spec)?;
    let solve = solve_mixed(&problem)?;
    let converged = solve.converged;
    let formula = mu_from_formula(&problem, &solve)?;
    let extremal = build_extremal(&problem, &solve, formula.mu)?;
    let direct = mu_direct(&problem, Some(&extremal.field), opts)?;
    Ok((formula.mu, direct.mu, converged))
}

/// Evaluates one grid point; failures are captured in the row.
pub fn sweep_point(base: &ProblemSpec, point: &GridPoint, opts: &QuotientOptions) -> SweepRow {
    let outcome = spec_for(base, point).and_then(|spec| {
        spec.validate()?;
        evaluate(spec, opts)
    });
    match outcome {
        Ok((mu_formula, mu_direct, converged)) => SweepRow {
            point: point.clone(),
            mu_formula: Some(mu_formula),
            mu_direct: Some(mu_direct),
            rel_gap: Some((mu_formula - mu_direct).abs() / mu_direct),
            converged,
            error: None,
        },
        Err(err) => SweepRow {
            point: point.clone(),
            mu_formula: None,
            mu_direct: None,
            rel_gap: None,
            converged: false,
            error: Some(format!("{}: {err}", err.kind())),
        },
    }
}

/// Evaluates every point on up to `jobs` threads; rows come back in grid order.
pub fn run_sweep(base: &ProblemSpec, points: &[GridPoint], opts: &QuotientOptions, jobs: usize) -> Vec<SweepRow> {
    let jobs = jobs.clamp(1, points.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; points.len()]);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(point) = points.get(i) else { break };
                let row = sweep_point(base, point, opts);
                slots.lock().expect("no thread panics while holding the lock")[i] = Some(row);
            });
        }
    });
    slots
        .into_inner()
        .expect("all workers joined")
        .into_iter()
        .map(|row| row.expect("every point is evaluated"))
        .collect()
}

/// CSV with columns `p,delta,nu,norm,mu_formula,mu_direct,rel_gap,converged`;
/// failed points have empty value columns.
pub fn write_sweep_csv(rows: &[SweepRow], out: &mut impl std::io::Write) -> Result<()> {
    writeln!(out, "p,delta,nu,norm,mu_formula,mu_direct,rel_gap,converged")?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.point.p,
            r.point.delta,
            r.point.nu,
            r.point.norm,
            opt(r.mu_formula),
            opt(r.mu_direct),
            opt(r.rel_gap),
            r.converged
        )?;
    }
    Ok(())
}
