//! Sampled checks of the Finsler norm axioms and of the flux field.
//!
//! Every check reports the worst value seen over the sample together with
//! its tolerance, so the suite doubles as a diagnostic table.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::finsler::{FinslerNorm, FluxParams};
use crate::sampling::rng_for;

pub const HOMOGENEITY_TOL: f64 = 1e-12;
pub const EULER_TOL: f64 = 1e-8;
pub const CONVEXITY_TOL: f64 = 1e-12;
pub const FLUX_HOMOGENEITY_TOL: f64 = 1e-10;

/// The norm tags checked by default.
pub const DEFAULT_NORMS: [&str; 5] = ["euclidean", "lt:4", "lt:1.5", "lambda-mu:1:1", "lambda-mu:2:0.5"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Worst sampled value of the checked quantity (see `kind`).
    pub worst: f64,
    pub tolerance: f64,
    /// `"max"`: pass when `worst <= tolerance`; `"min"`: pass when `worst > tolerance`.
    pub kind: String,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, worst: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            worst,
            tolerance,
            kind: "max".into(),
            passed: worst <= tolerance,
        }
    }

    fn above(name: &str, worst: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            worst,
            tolerance: bound,
            kind: "min".into(),
            passed: worst > bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub norm: String,
    pub p: f64,
    pub c1: f64,
    pub c2: f64,
    pub checks: Vec<Check>,
}

impl NormReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub samples: usize,
    pub seed: u64,
    pub norms: Vec<NormReport>,
    pub all_passed: bool,
}

/// Exponents used for the flux checks of a norm: `p = 2, 3`, plus
/// `p = 1.5` when the p-gate admits it.
fn exponents_for(norm: &FinslerNorm) -> Vec<f64> {
    let mut ps = vec![2.0, 3.0];
    if norm.is_special_for(1.5) {
        ps.insert(0, 1.5);
    }
    ps
}

fn random_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    (0..dim).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
}

fn random_scalar(rng: &mut impl Rng) -> f64 {
    let t = 10f64.powf(rng.gen_range(-3.0..3.0));
    if rng.gen_bool(0.5) {
        t
    } else {
        -t
    }
}

fn euclid(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Runs every check for one norm and exponent over `samples` points.
pub fn check_norm(norm: &FinslerNorm, p: f64, samples: usize, seed: u64, stream: u64) -> Result<NormReport> {
    let flux = FluxParams::new(*norm, p)?;
    let dim = norm.dim();
    let (c1, c2) = norm.equivalence_constants();
    let mut rng = rng_for(seed, stream);

    let mut homogeneity = 0.0f64;
    let mut euler = 0.0f64;
    let mut equivalence = 0.0f64;
    let mut convexity = f64::NEG_INFINITY;
    let mut strict_convexity = f64::INFINITY;
    let mut monotonicity = f64::INFINITY;
    let mut finsler_ratio = f64::INFINITY;
    let mut flux_homogeneity = 0.0f64;

    let mut grad = vec![0.0; dim];
    let mut ax = vec![0.0; dim];
    let mut atx = vec![0.0; dim];
    for _ in 0..samples {
        let x = random_vector(&mut rng, dim);
        let y = random_vector(&mut rng, dim);
        let t = random_scalar(&mut rng);
        let fx = norm.value(&x);
        let fy = norm.value(&y);
        if fx == 0.0 {
            continue;
        }

        let tx: Vec<f64> = x.iter().map(|v| t * v).collect();
        let err = (norm.value(&tx) - t.abs() * fx).abs() / (fx * t.abs().max(1.0));
        homogeneity = homogeneity.max(err);

        norm.gradient_into(&x, &mut grad);
        let dot: f64 = x.iter().zip(&grad).map(|(a, b)| a * b).sum();
        euler = euler.max((dot - fx).abs() / fx);

        // relative amount by which c1|x| <= F(x) <= c2|x| fails
        let e = euclid(&x);
        equivalence = equivalence.max((c1 * e - fx) / fx).max((fx - c2 * e) / fx);

        // convexity on pairs of comparable size so the absolute slack is meaningful
        let ux: Vec<f64> = x.iter().map(|v| v / fx).collect();
        let uy: Vec<f64> = y.iter().map(|v| v / fy).collect();
        let mid: Vec<f64> = ux.iter().zip(&uy).map(|(a, b)| 0.5 * (a + b)).collect();
        let excess = norm.value(&mid) - 1.0;
        convexity = convexity.max(excess);
        let cross = (ux[0] * uy[1] - ux[1] * uy[0]).abs();
        if cross > 1e-3 * euclid(&ux) * euclid(&uy) {
            strict_convexity = strict_convexity.min(-excess);
        }

        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        if euclid(&diff) > 1e-6 {
            let gap = flux.monotonicity_gap(&x, &y)?;
            monotonicity = monotonicity.min(gap / euclid(&diff).powf(p));
            if p >= 2.0 {
                finsler_ratio = finsler_ratio.min(gap / norm.value(&diff).powf(p));
            }
        }

        flux.flux_into(&x, &mut ax);
        flux.flux_into(&tx, &mut atx);
        let factor = t.abs().powf(p - 2.0) * t;
        let size = euclid(&ax) * t.abs().powf(p - 1.0);
        let err = ax
            .iter()
            .zip(&atx)
            .map(|(a, b)| (b - factor * a).abs())
            .fold(0.0, f64::max)
            / size;
        flux_homogeneity = flux_homogeneity.max(err);
    }

    let mut checks = vec![
        Check::at_most("homogeneity", homogeneity, HOMOGENEITY_TOL),
        Check::at_most("euler_identity", euler, EULER_TOL),
        Check::at_most("norm_equivalence", equivalence, 1e-12),
        Check::at_most("midpoint_convexity", convexity, CONVEXITY_TOL),
        Check::above("strict_convexity", strict_convexity, 0.0),
        Check::above("strict_monotonicity", monotonicity, 0.0),
        Check::at_most("flux_homogeneity", flux_homogeneity, FLUX_HOMOGENEITY_TOL),
    ];
    if p >= 2.0 {
        checks.push(Check::above("finsler_inequality_constant", finsler_ratio, 0.0));
    }
    checks.push(dual_nesting(norm, seed, stream)?);
    Ok(NormReport {
        norm: norm.to_string(),
        p,
        c1,
        c2,
        checks,
    })
}

/// Worst decrease of the sampled dual norm when the direction set grows
/// from `d` to `4d`; nesting makes it exactly zero.
fn dual_nesting(norm: &FinslerNorm, seed: u64, stream: u64) -> Result<Check> {
    let mut rng = rng_for(seed, stream ^ 0xD0A1);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let xi = random_vector(&mut rng, norm.dim());
        let mut d = 8;
        let mut previous = norm.dual_evaluate(&xi, d)?;
        while d < 4096 {
            d *= 4;
            let next = norm.dual_evaluate(&xi, d)?;
            worst = worst.max(previous - next);
            previous = next;
        }
    }
    Ok(Check::at_most("dual_nesting", worst, 0.0))
}

/// Runs [`check_norm`] for every norm and each admissible exponent.
pub fn run_suite(norms: &[FinslerNorm], samples: usize, seed: u64) -> Result<SuiteReport> {
    let mut reports = Vec::new();
    for (i, norm) in norms.iter().enumerate() {
        for (j, p) in exponents_for(norm).into_iter().enumerate() {
            reports.push(check_norm(norm, p, samples, seed, (i * 16 + j) as u64)?);
        }
    }
    let all_passed = reports.iter().all(NormReport::passed);
    Ok(SuiteReport {
        samples,
        seed,
        norms: reports,
        all_passed,
    })
}
