#![allow(dead_code)]

use std::sync::Arc;

use aniso_core::sampling::{rng_for, FieldSampler};
use aniso_core::solver::power_schedule;
use aniso_core::{DataFn, Field, FinslerNorm, MeshConfig, ProblemSpec, WeightSpec};

pub fn data(expr: &str) -> DataFn {
    expr.parse().unwrap()
}

/// Mixed problem with constant weight 1 and the given schedule length.
#[allow(clippy::too_many_arguments)]
pub fn mixed(domain: &str, norm: &str, p: f64, delta: f64, gamma: f64, f: &str, g: &str, n_max_exp: u32) -> ProblemSpec {
    let mut spec = ProblemSpec::mixed(
        domain.parse::<MeshConfig>().unwrap(),
        norm.parse::<FinslerNorm>().unwrap(),
        p,
        WeightSpec::constant(1.0, 2),
        delta,
        gamma,
        data(f),
        data(g),
    );
    spec.n_schedule = power_schedule(n_max_exp);
    spec
}

pub fn exponential(domain: &str, h: &str, n_max_exp: u32) -> ProblemSpec {
    let mut spec = ProblemSpec::exponential(
        domain.parse::<MeshConfig>().unwrap(),
        FinslerNorm::euclidean(2),
        2.0,
        WeightSpec::constant(1.0, 2),
        data(h),
    );
    spec.n_schedule = power_schedule(n_max_exp);
    spec
}

/// Smoothed random zero-boundary field with values in `[lo, hi)`.
pub fn random_field(mesh: &Arc<aniso_core::Mesh>, seed: u64, lo: f64, hi: f64) -> Field {
    let sampler = FieldSampler::new(Arc::clone(mesh));
    let x = sampler.sample(&mut rng_for(seed, 99), lo, hi, 2);
    Field::from_interior(Arc::clone(mesh), &x)
}

/// `sqrt(∫ (a - b)^2) / sqrt(∫ b^2)` at barycenters.
pub fn relative_l2(a: &Field, b: &Field) -> f64 {
    let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    let d = Field::from_values(Arc::clone(a.mesh()), diff, false).unwrap();
    d.l2_norm() / b.l2_norm()
}

/// Radial solution of `-(1/r)(r u')' = f(r) (u⁺ + s)^{-δ}` on `[0, 1]` with
/// `u'(0) = 0`, `u(1) = 0`, by a conservative finite-volume scheme on `m`
/// cells and Newton's method. Returns nodal values at `r_i = i/m`.
pub fn radial_oracle(f: impl Fn(f64) -> f64, delta: f64, s: f64, m: usize) -> Vec<f64> {
    let h = 1.0 / m as f64;
    let r = |i: usize| i as f64 * h;
    // control-volume measures ∫ r dr
    let vol: Vec<f64> = (0..m)
        .map(|i| if i == 0 { h * h / 8.0 } else { r(i) * h })
        .collect();
    let mut u = vec![0.0; m + 1];
    for _ in 0..100 {
        // residual F(u) = A u - vol · f (u⁺+s)^{-δ}, Jacobian tridiagonal
        let (mut lower, mut diag, mut upper, mut rhs) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        for i in 0..m {
            let right = (r(i) + 0.5 * h) / h;
            let left = if i == 0 { 0.0 } else { (r(i) - 0.5 * h) / h };
            let um = if i == 0 { 0.0 } else { u[i - 1] };
            let flux = right * (u[i] - u[i + 1]) + left * (u[i] - um);
            let base = u[i].max(0.0) + s;
            let src = vol[i] * f(r(i)) * base.powf(-delta);
            let dsrc = if u[i] > 0.0 { -delta * src / base } else { 0.0 };
            rhs[i] = -(flux - src);
            diag[i] = right + left - dsrc;
            if i > 0 {
                lower[i] = -left;
            }
            if i + 1 < m {
                upper[i] = -right;
            }
        }
        let du = thomas(&lower, &diag, &upper, &rhs);
        let step = du.iter().map(|d| d.abs()).fold(0.0, f64::max);
        for i in 0..m {
            u[i] += du[i];
        }
        if step < 1e-14 {
            break;
        }
    }
    u
}

fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let (mut cp, mut dp) = (vec![0.0; n], vec![0.0; n]);
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Linear interpolation of nodal values on a uniform grid of `[0, 1]`.
pub fn interp(values: &[f64], r: f64) -> f64 {
    let m = values.len() - 1;
    let t = (r * m as f64).clamp(0.0, m as f64);
    let i = (t.floor() as usize).min(m - 1);
    let w = t - i as f64;
    (1.0 - w) * values[i] + w * values[i + 1]
}
