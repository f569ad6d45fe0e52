use std::fs;

use aniso_core::config::{ConfigMap, Settings};
use aniso_core::extremal::{
    build_extremal, mu_from_formula, run_extremal, verify_inequality, InequalityVerdict, QuotientOptions,
};
use aniso_core::finsler::parse_norm_tag;
use aniso_core::norm_suite::{run_suite, DEFAULT_NORMS};
use aniso_core::solver::{linear_comparison, solve_exponential, solve_mixed, stampacchia_diagnostic};
use aniso_core::sweep::{expand_grid, run_sweep, write_sweep_csv};
use aniso_core::{Error, Field, Problem, Result};
use serde_json::{json, Value};

use crate::{Command, Options};

/// Finest truncation level `2^k` used when `n_max_exp` is not configured.
/// The pipelines that need a converged solve get a longer schedule; the loop
/// stops as soon as successive levels agree.
fn default_n_max_exp(command: Command) -> u32 {
    match command {
        Command::Solve | Command::CheckNorms => 10,
        Command::Extremal | Command::Verify | Command::Sweep => 26,
    }
}

/// What a command produced.
pub struct Outcome {
    pub payload: Value,
    pub csv: String,
    pub field: Option<Field>,
    /// Failure discovered after a partial payload was built.
    pub error: Option<Error>,
    /// Nonzero when a check ran to completion but did not pass.
    pub check_failed: bool,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn new(payload: Value, csv: String) -> Self {
        Self {
            payload,
            csv,
            field: None,
            error: None,
            check_failed: false,
            warnings: Vec::new(),
        }
    }
}

pub fn load_settings(opts: &Options) -> Result<(ConfigMap, Settings)> {
    let mut map = match &opts.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
            ConfigMap::parse(&text)?
        }
        None => ConfigMap::default(),
    };
    for assignment in &opts.overrides {
        map.apply_override(assignment)?;
    }
    if let Some(seed) = opts.seed {
        map.set("seed", &seed.to_string())?;
    }
    let settings = Settings::from_map(&map, default_n_max_exp(opts.command))?;
    Ok((map, settings))
}

fn csv_string(write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf).expect("reports are ASCII"))
}

fn quotient_options(settings: &Settings) -> QuotientOptions {
    QuotientOptions {
        restarts: settings.restarts,
        grad_tol: settings.quotient_tol,
        seed: settings.spec.seed,
        ..Default::default()
    }
}

pub fn dispatch(opts: &Options, map: &ConfigMap, settings: &Settings) -> Result<Outcome> {
    match opts.command {
        Command::Solve => solve(settings),
        Command::Extremal => extremal(settings),
        Command::Verify => verify(settings),
        Command::Sweep => sweep(settings, opts.jobs),
        Command::CheckNorms => check_norms(map, settings),
    }
}

fn solve(settings: &Settings) -> Result<Outcome> {
    let problem = Problem::new(settings.spec.clone())?;
    let report = if problem.is_mixed() {
        solve_mixed(&problem)?
    } else {
        solve_exponential(&problem)?
    };
    let field = report.final_field(problem.mesh()).ok();
    let levels = field
        .as_ref()
        .map(|f| stampacchia_diagnostic(f, None, 64))
        .unwrap_or_default();
    let comparison_gap = match (&field, problem.is_mixed()) {
        (Some(v), false) => {
            let linear = linear_comparison(&problem)?;
            Some(
                v.values()
                    .iter()
                    .zip(linear.values())
                    .map(|(a, b)| a - b)
                    .fold(f64::INFINITY, f64::min),
            )
        }
        _ => None,
    };
    let mut payload = json!({ "report": report, "stampacchia": levels });
    if let Some(gap) = comparison_gap {
        payload["min_above_linear_comparison"] = json!(gap);
    }
    let mut outcome = Outcome::new(payload, csv_string(|b| report.write_history_csv(b))?);
    outcome.field = field;
    if let Some(f) = &report.failure {
        outcome.error = Some(Error::Convergence {
            message: format!("level n = {} failed: {}", f.n, f.message),
            iterations: f.iterations,
            residual: f.residual,
            last_iterate: Vec::new(),
        });
    } else if !report.converged {
        outcome.warnings.push(format!(
            "schedule exhausted before successive levels agreed to {:e} (last change {:e})",
            report.spec.outer_tol,
            report.last().and_then(|r| r.sup_change).unwrap_or(f64::NAN)
        ));
    }
    Ok(outcome)
}

fn verdicts_csv(verdicts: &[InequalityVerdict]) -> Result<String> {
    csv_string(|b| {
        for (i, v) in verdicts.iter().enumerate() {
            if verdicts.len() > 1 {
                use std::io::Write;
                if i > 0 {
                    writeln!(b)?;
                }
                writeln!(b, "# constant = {:e}", v.constant)?;
            }
            v.write_csv(b)?;
        }
        Ok(())
    })
}

fn extremal(settings: &Settings) -> Result<Outcome> {
    let run = run_extremal(settings.spec.clone(), &quotient_options(settings), settings.trials)?;
    let csv = verdicts_csv(&run.verdicts)?;
    let mut outcome = Outcome::new(serde_json::to_value(&run.report)?, csv);
    outcome.field = Some(run.extremal.field);
    Ok(outcome)
}

fn verify(settings: &Settings) -> Result<Outcome> {
    let seed = settings.spec.seed;
    let (verdicts, mu_direct, extremal) = match settings.constant {
        Some(c) => {
            let problem = Problem::new(settings.spec.clone())?;
            let report = solve_mixed(&problem)?;
            let formula = mu_from_formula(&problem, &report)?;
            let extremal = build_extremal(&problem, &report, formula.mu)?;
            let verdict = verify_inequality(&problem, c, settings.trials, seed, Some(&extremal.field))?;
            (vec![verdict], None, extremal.field)
        }
        None => {
            let run = run_extremal(settings.spec.clone(), &quotient_options(settings), settings.trials)?;
            (run.verdicts, Some(run.direct.mu), run.extremal.field)
        }
    };
    let csv = verdicts_csv(&verdicts)?;
    let payload = json!({ "mu_direct": mu_direct, "verdicts": verdicts });
    let mut outcome = Outcome::new(payload, csv);
    outcome.field = Some(extremal);
    Ok(outcome)
}

fn sweep(settings: &Settings, jobs: usize) -> Result<Outcome> {
    let grid = &settings.sweep;
    let points = expand_grid(&grid.p, &grid.delta, &grid.nu, &grid.norm);
    let rows = run_sweep(&settings.spec, &points, &quotient_options(settings), jobs);
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let csv = csv_string(|b| write_sweep_csv(&rows, b))?;
    let mut outcome = Outcome::new(json!({ "points": rows.len(), "failed": failed, "rows": rows }), csv);
    if failed > 0 {
        outcome.warnings.push(format!("{failed} of {} grid points failed", rows.len()));
    }
    Ok(outcome)
}

fn check_norms(map: &ConfigMap, settings: &Settings) -> Result<Outcome> {
    let dim = settings.spec.norm.dim();
    let tags: Vec<String> = match map.get("norm") {
        Some(_) => vec![settings.spec.norm.to_string()],
        None => DEFAULT_NORMS.iter().map(|s| s.to_string()).collect(),
    };
    let norms = tags
        .iter()
        .map(|t| parse_norm_tag(t, dim))
        .collect::<Result<Vec<_>>>()?;
    let report = run_suite(&norms, settings.samples, settings.spec.seed)?;
    let csv = csv_string(|b| {
        use std::io::Write;
        writeln!(b, "norm,p,check,worst,tolerance,kind,passed")?;
        for n in &report.norms {
            for c in &n.checks {
                writeln!(b, "{},{},{},{:e},{:e},{},{}", n.norm, n.p, c.name, c.worst, c.tolerance, c.kind, c.passed)?;
            }
        }
        Ok(())
    })?;
    let passed = report.all_passed;
    let mut outcome = Outcome::new(serde_json::to_value(&report)?, csv);
    outcome.check_failed = !passed;
    Ok(outcome)
}
