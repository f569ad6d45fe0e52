//! Finsler–Minkowski norms on R^N and the flux field `F(x)^{p-1} ∇F(x)`.
//!
//! Three families are provided:
//!
//! * `Euclidean`: `|x|`,
//! * `Lt { t }`: the ℓ_t norm `(Σ |x_i|^t)^{1/t}`, `t > 1`,
//! * `LambdaMu { λ, μ }`: `sqrt(λ sqrt(Σ x_i^4) + μ Σ x_i^2)`.
//!
//! Every family is positively 1-homogeneous, even, smooth away from the
//! origin and strictly convex. Gradients are analytic. The flux
//! `a(x) = F(x)^{p-1} ∇F(x)` is extended by `a(0) = 0`, which is the
//! continuous extension for `p > 1` since `|a(x)| ≤ c2 |x|^{p-1}`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seed of the direction stream used by [`FinslerNorm::dual_evaluate`] for N > 2.
const DUAL_DIRECTION_SEED: u64 = 0x0D0A_15EE_D5EE_D001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum NormFamily {
    Euclidean,
    Lt { t: f64 },
    LambdaMu { lambda: f64, mu: f64 },
}

/// A Finsler norm of a given family acting on R^dim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinslerNorm {
    family: NormFamily,
    dim: usize,
}

impl FinslerNorm {
    pub fn new(family: NormFamily, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Input(format!("dimension must be at least 2, got {dim}")));
        }
        match family {
            NormFamily::Euclidean => {}
            NormFamily::Lt { t } => {
                if !(t.is_finite() && t > 1.0) {
                    return Err(Error::Input(format!("lt norm needs t > 1, got {t}")));
                }
            }
            NormFamily::LambdaMu { lambda, mu } => {
                if !(lambda.is_finite() && mu.is_finite() && lambda > 0.0 && mu > 0.0) {
                    return Err(Error::Input(format!(
                        "lambda-mu norm needs lambda, mu > 0, got ({lambda}, {mu})"
                    )));
                }
            }
        }
        Ok(Self { family, dim })
    }

    pub fn euclidean(dim: usize) -> Self {
        Self {
            family: NormFamily::Euclidean,
            dim: dim.max(2),
        }
    }

    pub fn family(&self) -> NormFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True for the norms that reduce the operator to the weighted p-Laplacian
    /// (`|x|`, i.e. ℓ_2) or to the weighted pseudo p-Laplacian (ℓ_p).
    pub fn is_special_for(&self, p: f64) -> bool {
        match self.family {
            NormFamily::Euclidean => true,
            NormFamily::Lt { t } => t == 2.0 || t == p,
            NormFamily::LambdaMu { .. } => false,
        }
    }

    /// Closed-form equivalence constants `(c1, c2)` with `c1 |x| ≤ F(x) ≤ c2 |x|`.
    pub fn equivalence_constants(&self) -> (f64, f64) {
        let n = self.dim as f64;
        match self.family {
            NormFamily::Euclidean => (1.0, 1.0),
            NormFamily::Lt { t } => {
                let k = n.powf(1.0 / t - 0.5);
                if t >= 2.0 {
                    (k, 1.0)
                } else {
                    (1.0, k)
                }
            }
            NormFamily::LambdaMu { lambda, mu } => {
                ((lambda / n.sqrt() + mu).sqrt(), (lambda + mu).sqrt())
            }
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Input(format!(
                "vector has dimension {}, norm expects {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `F(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.value(x))
    }

    /// `F(x)` without the dimension check. Used on hot paths by the solvers.
    pub fn value(&self, x: &[f64]) -> f64 {
        let scale = max_abs(x);
        if scale == 0.0 {
            return 0.0;
        }
        scale * self.value_scaled(x, scale)
    }

    // F(x / scale), with scale = max |x_i| > 0
    fn value_scaled(&self, x: &[f64], scale: f64) -> f64 {
        match self.family {
            NormFamily::Euclidean => x.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt(),
            NormFamily::Lt { t } => {
                if t == 2.0 {
                    return x.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt();
                }
                x.iter().map(|v| (v / scale).abs().powf(t)).sum::<f64>().powf(1.0 / t)
            }
            NormFamily::LambdaMu { lambda, mu } => {
                let (q, s) = x.iter().fold((0.0, 0.0), |(q, s), v| {
                    let y2 = (v / scale).powi(2);
                    (q + y2 * y2, s + y2)
                });
                (lambda * q.sqrt() + mu * s).sqrt()
            }
        }
    }

    /// `∇F(x)`; undefined at the origin.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.dim];
        if !self.gradient_into(x, &mut out) {
            return Err(Error::Domain("F is not differentiable at the origin".into()));
        }
        Ok(out)
    }

    /// Writes `∇F(x)` into `out`. Returns `false`, with `out` zeroed, at the origin.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> bool {
        let scale = max_abs(x);
        if scale == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return false;
        }
        let fy = self.value_scaled(x, scale);
        match self.family {
            NormFamily::Euclidean => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = (v / scale) / fy;
                }
            }
            NormFamily::Lt { t } => {
                for (o, v) in out.iter_mut().zip(x) {
                    let y = v / scale;
                    *o = y.signum() * (y.abs() / fy).powf(t - 1.0);
                    if y == 0.0 {
                        *o = 0.0;
                    }
                }
            }
            NormFamily::LambdaMu { lambda, mu } => {
                let q: f64 = x.iter().map(|v| (v / scale).powi(4)).sum();
                let sq = q.sqrt();
                for (o, v) in out.iter_mut().zip(x) {
                    let y = v / scale;
                    *o = (lambda * y.powi(3) / sq + mu * y) / fy;
                }
            }
        }
        true
    }

    /// Brute-force support function `F_0(ξ) = sup_x ⟨x, ξ⟩ / F(x)` over
    /// `directions` unit vectors plus `ξ/|ξ|`. The direction sets are
    /// prefixes of one fixed sequence, so the result is nondecreasing in
    /// `directions`.
    pub fn dual_evaluate(&self, xi: &[f64], directions: usize) -> Result<f64> {
        self.check_dim(xi)?;
        if directions < 8 {
            return Err(Error::Input(format!(
                "dual evaluation needs at least 8 directions, got {directions}"
            )));
        }
        let xi_norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if xi_norm == 0.0 {
            return Ok(0.0);
        }
        let ratio = |x: &[f64]| -> f64 {
            let dot: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
            dot / self.value(x)
        };
        let own: Vec<f64> = xi.iter().map(|v| v / xi_norm).collect();
        let mut best = ratio(&own);
        let mut dir = vec![0.0; self.dim];
        if self.dim == 2 {
            for k in 0..directions {
                let theta = std::f64::consts::TAU * van_der_corput(k as u64);
                dir[0] = theta.cos();
                dir[1] = theta.sin();
                best = best.max(ratio(&dir));
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(DUAL_DIRECTION_SEED);
            let mut taken = 0;
            while taken < directions {
                for d in dir.iter_mut() {
                    *d = rng.gen_range(-1.0..1.0);
                }
                let r2: f64 = dir.iter().map(|v| v * v).sum();
                if !(1e-12..=1.0).contains(&r2) {
                    continue;
                }
                let r = r2.sqrt();
                dir.iter_mut().for_each(|d| *d /= r);
                best = best.max(ratio(&dir));
                taken += 1;
            }
        }
        Ok(best.max(0.0))
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Base-2 radical inverse; the first 2^m terms are the equispaced grid k/2^m.
fn van_der_corput(mut k: u64) -> f64 {
    let mut value = 0.0;
    let mut denom = 1.0;
    while k > 0 {
        denom *= 2.0;
        value += (k & 1) as f64 / denom;
        k >>= 1;
    }
    value
}

impl fmt::Display for FinslerNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            NormFamily::Euclidean => write!(f, "euclidean"),
            NormFamily::Lt { t } => write!(f, "lt:{t}"),
            NormFamily::LambdaMu { lambda, mu } => write!(f, "lambda-mu:{lambda}:{mu}"),
        }
    }
}

impl FromStr for FinslerNorm {
    type Err = Error;

    /// Parses `euclidean`, `lt:<t>` or `lambda-mu:<λ>:<μ>` as a norm on R^2.
    fn from_str(tag: &str) -> Result<Self> {
        parse_norm_tag(tag, 2)
    }
}

/// Parses a canonical norm tag for dimension `dim`.
pub fn parse_norm_tag(tag: &str, dim: usize) -> Result<FinslerNorm> {
    let parts: Vec<&str> = tag.trim().split(':').collect();
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Input(format!("norm tag `{tag}`: `{s}` is not a number")))
    };
    let family = match parts.as_slice() {
        ["euclidean"] => NormFamily::Euclidean,
        ["lt", t] => NormFamily::Lt { t: num(t)? },
        ["lambda-mu", l, m] => NormFamily::LambdaMu {
            lambda: num(l)?,
            mu: num(m)?,
        },
        _ => {
            return Err(Error::Input(format!(
                "unknown norm tag `{tag}` (expected euclidean, lt:<t> or lambda-mu:<l>:<m>)"
            )))
        }
    };
    FinslerNorm::new(family, dim)
}

/// A norm together with the exponent p of the operator `div(w F(∇u)^{p-1} ∇F(∇u))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxParams {
    pub norm: FinslerNorm,
    pub p: f64,
}

impl FluxParams {
    /// Validates `p > 1` and the p-gate: general norms need `p ≥ 2`, while
    /// `|x|` and ℓ_p admit every `p ∈ (1, ∞)`.
    pub fn new(norm: FinslerNorm, p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::Input(format!("p must lie in (1, inf), got {p}")));
        }
        if p < 2.0 && !norm.is_special_for(p) {
            return Err(Error::Gate(format!(
                "p = {p} < 2 is only admitted for the euclidean norm or lt:{p}, got {norm}"
            )));
        }
        Ok(Self { norm, p })
    }

    /// `a(x) = F(x)^{p-1} ∇F(x)`, with `a(0) = 0`.
    pub fn flux(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.norm.check_dim(x)?;
        let mut out = vec![0.0; x.len()];
        self.flux_into(x, &mut out);
        Ok(out)
    }

    /// Writes `a(x)` into `out` and returns `F(x)`.
    pub fn flux_into(&self, x: &[f64], out: &mut [f64]) -> f64 {
        if !self.norm.gradient_into(x, out) {
            return 0.0;
        }
        let f = self.norm.value(x);
        let scale = f.powf(self.p - 1.0);
        out.iter_mut().for_each(|o| *o *= scale);
        f
    }

    /// `⟨a(x) - a(y), x - y⟩`.
    pub fn monotonicity_gap(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let ax = self.flux(x)?;
        let ay = self.flux(y)?;
        Ok(ax
            .iter()
            .zip(&ay)
            .zip(x.iter().zip(y))
            .map(|((a, b), (xi, yi))| (a - b) * (xi - yi))
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lt(t: f64) -> FinslerNorm {
        FinslerNorm::new(NormFamily::Lt { t }, 2).unwrap()
    }

    fn lm(l: f64, m: f64) -> FinslerNorm {
        FinslerNorm::new(NormFamily::LambdaMu { lambda: l, mu: m }, 2).unwrap()
    }

    fn fd_gradient(norm: &FinslerNorm, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (norm.value(&xp) - norm.value(&xm)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn evaluate_examples() {
        let e = FinslerNorm::euclidean(2);
        assert_relative_eq!(e.evaluate(&[3.0, 4.0]).unwrap(), 5.0, epsilon = 1e-15);
        assert_relative_eq!(
            lt(4.0).evaluate(&[1.0, 1.0]).unwrap(),
            2f64.powf(0.25),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            lm(1.0, 1.0).evaluate(&[1.0, 0.0]).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-15
        );
        for n in [e, lt(4.0), lt(1.5), lm(2.0, 0.5)] {
            assert_eq!(n.evaluate(&[0.0, 0.0]).unwrap(), 0.0);
        }
    }

    #[test]
    fn dimension_mismatch_is_input_error() {
        let e = FinslerNorm::euclidean(2);
        assert!(matches!(e.evaluate(&[1.0, 2.0, 3.0]), Err(Error::Input(_))));
        assert!(matches!(e.gradient(&[1.0]), Err(Error::Input(_))));
    }

    #[test]
    fn gradient_examples() {
        let g = FinslerNorm::euclidean(2).gradient(&[3.0, 4.0]).unwrap();
        assert_relative_eq!(g[0], 0.6, epsilon = 1e-15);
        assert_relative_eq!(g[1], 0.8, epsilon = 1e-15);

        let g = lt(4.0).gradient(&[1.0, 0.0]).unwrap();
        let fd = fd_gradient(&lt(4.0), &[1.0, 0.0], 1e-6);
        assert!((g[0] - 1.0).abs() < 1e-14 && g[1].abs() < 1e-14);
        assert!((g[0] - fd[0]).abs() < 1e-8 && (g[1] - fd[1]).abs() < 1e-8);

        let norm = lm(1.0, 1.0);
        let g = norm.gradient(&[1.0, 1.0]).unwrap();
        let fd = fd_gradient(&norm, &[1.0, 1.0], 1e-6);
        assert!((g[0] - fd[0]).abs() < 1e-8 && (g[1] - fd[1]).abs() < 1e-8);
    }

    #[test]
    fn gradient_at_origin_is_domain_error() {
        assert!(matches!(
            lt(3.0).gradient(&[0.0, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn flux_examples() {
        let p2 = FluxParams::new(FinslerNorm::euclidean(2), 2.0).unwrap();
        let a = p2.flux(&[3.0, 4.0]).unwrap();
        assert_relative_eq!(a[0], 3.0, epsilon = 1e-14);
        assert_relative_eq!(a[1], 4.0, epsilon = 1e-14);
        assert_eq!(p2.flux(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);

        let p3 = FluxParams::new(FinslerNorm::euclidean(2), 3.0).unwrap();
        assert_eq!(p3.flux(&[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn p_gate() {
        assert!(FluxParams::new(FinslerNorm::euclidean(2), 1.5).is_ok());
        assert!(FluxParams::new(lt(1.5), 1.5).is_ok());
        assert!(FluxParams::new(lt(2.0), 1.2).is_ok());
        assert!(matches!(FluxParams::new(lt(4.0), 1.5), Err(Error::Gate(_))));
        assert!(matches!(
            FluxParams::new(lm(1.0, 1.0), 1.9),
            Err(Error::Gate(_))
        ));
        assert!(FluxParams::new(lm(1.0, 1.0), 2.0).is_ok());
        assert!(matches!(
            FluxParams::new(FinslerNorm::euclidean(2), 1.0),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn monotonicity_gap_examples() {
        let p2 = FluxParams::new(FinslerNorm::euclidean(2), 2.0).unwrap();
        assert_relative_eq!(
            p2.monotonicity_gap(&[1.0, 0.0], &[0.0, 0.0]).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_eq!(p2.monotonicity_gap(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 0.0);
        let p3 = FluxParams::new(lt(4.0), 3.0).unwrap();
        assert!(p3.monotonicity_gap(&[1.0, 1.0], &[-1.0, 0.0]).unwrap() > 0.0);
    }

    #[test]
    fn dual_examples() {
        let e = FinslerNorm::euclidean(2);
        assert!((e.dual_evaluate(&[3.0, 4.0], 1024).unwrap() - 5.0).abs() < 1e-3);
        assert!((lt(4.0).dual_evaluate(&[1.0, 0.0], 4096).unwrap() - 1.0).abs() < 1e-2);
        assert_eq!(lm(1.0, 2.0).dual_evaluate(&[0.0, 0.0], 64).unwrap(), 0.0);
        assert!(e.dual_evaluate(&[1.0, 0.0], 4).is_err());
    }

    #[test]
    fn dual_in_three_dimensions() {
        let e = FinslerNorm::euclidean(3);
        let xi = [0.3, -1.2, 0.5];
        let exact = xi.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
        let d1 = e.dual_evaluate(&xi, 256).unwrap();
        let d2 = e.dual_evaluate(&xi, 1024).unwrap();
        assert!(d2 >= d1);
        assert!((d2 - exact).abs() < 1e-12);
    }

    #[test]
    fn van_der_corput_prefix_is_grid() {
        let mut pts: Vec<f64> = (0..8).map(van_der_corput).collect();
        pts.sort_by(f64::total_cmp);
        for (k, v) in pts.iter().enumerate() {
            assert_eq!(*v, k as f64 / 8.0);
        }
    }

    #[test]
    fn tags_round_trip() {
        for tag in ["euclidean", "lt:4", "lt:1.5", "lambda-mu:2:0.5"] {
            let n: FinslerNorm = tag.parse().unwrap();
            assert_eq!(n.to_string(), tag);
        }
        assert!("lt:0.5".parse::<FinslerNorm>().is_err());
        assert!("taxicab".parse::<FinslerNorm>().is_err());
        assert!("lambda-mu:1".parse::<FinslerNorm>().is_err());
    }

    #[test]
    fn equivalence_constants_are_attained() {
        // ℓ_4 on R^2: c1 = 2^{-1/4} attained on the diagonal, c2 = 1 on the axes
        let (c1, c2) = lt(4.0).equivalence_constants();
        assert_relative_eq!(lt(4.0).value(&[1.0, 1.0]) / 2f64.sqrt(), c1, epsilon = 1e-14);
        assert_relative_eq!(lt(4.0).value(&[1.0, 0.0]), c2, epsilon = 1e-14);
        let (c1, c2) = lm(1.0, 1.0).equivalence_constants();
        assert_relative_eq!(lm(1.0, 1.0).value(&[1.0, 1.0]) / 2f64.sqrt(), c1, epsilon = 1e-14);
        assert_relative_eq!(lm(1.0, 1.0).value(&[0.0, 1.0]), c2, epsilon = 1e-14);
    }
}
