//! Weight families and the exponent calculus that gates solver configurations.
//!
//! For `w ∈ W_p^s` with `s ∈ I = [1/(p-1), ∞) ∩ (N/p, ∞)` the weighted space
//! embeds into `W^{1,p_s}` with `p_s = ps/(s+1)`. Bounded weights use `p`
//! itself in place of `p_s`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum WeightFamily {
    Constant { c: f64 },
    /// `|x|^ν`
    Power { nu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub family: WeightFamily,
    pub dim: usize,
    pub s: Option<f64>,
}

/// Half-open bounds of an open interval `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpenInterval {
    pub lo: f64,
    pub hi: f64,
}

impl OpenInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

/// `(-N, N/s)`: the powers ν with `|x|^ν ∈ W_p^s`.
pub fn admissible_power_range(dim: usize, s: f64) -> Result<OpenInterval> {
    if !(s > 0.0) {
        return Err(Error::Input(format!("s must be positive, got {s}")));
    }
    let n = dim as f64;
    Ok(OpenInterval { lo: -n, hi: n / s })
}

/// The exponent set `I` as `[lower_closed, ∞) ∩ (lower_open, ∞)`.
pub fn exponent_set(p: f64, dim: usize) -> (f64, f64) {
    (1.0 / (p - 1.0), dim as f64 / p)
}

impl WeightSpec {
    pub fn constant(c: f64, dim: usize) -> Self {
        Self {
            family: WeightFamily::Constant { c },
            dim,
            s: None,
        }
    }

    pub fn power(nu: f64, dim: usize, s: f64) -> Self {
        Self {
            family: WeightFamily::Power { nu },
            dim,
            s: Some(s),
        }
    }

    /// Checks the family's own invariants (and, for power weights, the
    /// closed-form membership criterion `ν ∈ (-N, N/s)`) plus `s ∈ I` for `p`.
    pub fn validate(&self, p: f64) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Input(format!("dimension must be at least 2, got {}", self.dim)));
        }
        match self.family {
            WeightFamily::Constant { c } => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(Error::Input(format!("constant weight must be positive, got {c}")));
                }
            }
            WeightFamily::Power { nu } => {
                let s = self.s.ok_or_else(|| {
                    Error::Gate("power weight needs an integrability exponent s".into())
                })?;
                let range = admissible_power_range(self.dim, s)?;
                if !range.contains(nu) {
                    return Err(Error::Gate(format!(
                        "power {nu} outside the admissible range ({}, {}) for s = {s}",
                        range.lo, range.hi
                    )));
                }
            }
        }
        if let Some(s) = self.s {
            let (closed, open) = exponent_set(p, self.dim);
            if s < closed {
                return Err(Error::Gate(format!(
                    "s = {s} violates s >= 1/(p-1) = {closed}"
                )));
            }
            if s <= open {
                return Err(Error::Gate(format!("s = {s} violates s > N/p = {open}")));
            }
        }
        Ok(())
    }

    /// `w(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self.family {
            WeightFamily::Constant { c } => c,
            WeightFamily::Power { nu } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                r.powf(nu)
            }
        }
    }

    pub fn is_power(&self) -> bool {
        matches!(self.family, WeightFamily::Power { .. })
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            WeightFamily::Constant { c } => write!(f, "const:{c}"),
            WeightFamily::Power { nu } => write!(f, "power:{nu}"),
        }
    }
}

/// Parses `const:<c>` or `power:<ν>`; `s` is supplied separately.
pub fn parse_weight_tag(tag: &str, dim: usize, s: Option<f64>) -> Result<WeightSpec> {
    let parts: Vec<&str> = tag.trim().split(':').collect();
    let num = |v: &str| -> Result<f64> {
        v.trim()
            .parse::<f64>()
            .map_err(|_| Error::Input(format!("weight tag `{tag}`: `{v}` is not a number")))
    };
    let family = match parts.as_slice() {
        ["const", c] => WeightFamily::Constant { c: num(c)? },
        ["power", nu] => WeightFamily::Power { nu: num(nu)? },
        _ => {
            return Err(Error::Input(format!(
                "unknown weight tag `{tag}` (expected const:<c> or power:<nu>)"
            )))
        }
    };
    Ok(WeightSpec { family, dim, s })
}

/// An exponent that may be infinite (critical and supercritical embeddings).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Exponent::Finite(v) => Some(*v),
            Exponent::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

/// Derived exponents of a `(p, w)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentTable {
    pub p: f64,
    pub s: Option<f64>,
    pub dim: usize,
    /// `p_s`, or `p` for bounded weights.
    pub p_s: f64,
    pub p_s_star: Exponent,
    pub regime: Regime,
    /// Auxiliary `r > p` of the critical-regime L∞ threshold `r/(r-p)`.
    pub critical_r: f64,
}

/// Data requirement of one nonlinearity: either a (closed) lower bound `q ≥ m`
/// or the open requirement `q > m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    pub strict: bool,
}

impl Threshold {
    pub fn admits(&self, q: f64) -> bool {
        if self.strict {
            q > self.value
        } else {
            q >= self.value
        }
    }
}

fn conjugate(x: f64) -> f64 {
    x / (x - 1.0)
}

impl ExponentTable {
    /// Existence requirement `m_δ` on `f` (same formula gives `r_γ` for `g`).
    pub fn m_delta(&self, delta: f64) -> Threshold {
        match (self.regime, self.p_s_star) {
            (Regime::Subcritical, Exponent::Finite(star)) => Threshold {
                value: conjugate(star / (1.0 - delta)),
                strict: false,
            },
            // "m > 1": any declared exponent strictly above 1
            (Regime::Critical, _) | (Regime::Subcritical, Exponent::Infinite) => Threshold {
                value: 1.0,
                strict: true,
            },
            (Regime::Supercritical, _) => Threshold {
                value: 1.0,
                strict: false,
            },
        }
    }

    pub fn r_gamma(&self, gamma: f64) -> Threshold {
        self.m_delta(gamma)
    }

    /// Requirement on the data for the L∞ bound.
    pub fn q_threshold(&self) -> Threshold {
        match (self.regime, self.p_s_star) {
            (Regime::Subcritical, Exponent::Finite(star)) => Threshold {
                value: star / (star - self.p),
                strict: true,
            },
            (Regime::Supercritical, _) => Threshold {
                value: 1.0,
                strict: false,
            },
            _ => Threshold {
                value: self.critical_r / (self.critical_r - self.p),
                strict: true,
            },
        }
    }
}

/// Builds the exponent table with the default critical auxiliary `r = 2p`.
pub fn exponent_table(p: f64, weight: &WeightSpec) -> Result<ExponentTable> {
    exponent_table_with_r(p, weight, 2.0 * p)
}

pub fn exponent_table_with_r(p: f64, weight: &WeightSpec, critical_r: f64) -> Result<ExponentTable> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::Input(format!("p must lie in (1, inf), got {p}")));
    }
    if !(critical_r > p) {
        return Err(Error::Input(format!("critical r must exceed p = {p}, got {critical_r}")));
    }
    weight.validate(p)?;
    let n = weight.dim as f64;
    let p_s = match (weight.family, weight.s) {
        (WeightFamily::Power { .. }, Some(s)) => p * s / (s + 1.0),
        _ => p,
    };
    let regime = if p_s < n {
        Regime::Subcritical
    } else if p_s == n {
        Regime::Critical
    } else {
        Regime::Supercritical
    };
    let p_s_star = match regime {
        Regime::Subcritical => Exponent::Finite(n * p_s / (n - p_s)),
        _ => Exponent::Infinite,
    };
    Ok(ExponentTable {
        p,
        s: weight.s,
        dim: weight.dim,
        p_s,
        p_s_star,
        regime,
        critical_r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityVerdict {
    /// `data_exponent ≥ max(m_δ, r_γ)` (solution exists).
    pub existence: bool,
    /// The data meets the L∞-regularity requirement.
    pub l_infinity: bool,
    pub existence_threshold: Threshold,
    pub l_infinity_threshold: Threshold,
}

/// Checks a data exponent (`f64::INFINITY` for bounded data) against the
/// existence and L∞ thresholds.
pub fn validate_data_integrability(
    table: &ExponentTable,
    delta: f64,
    gamma: f64,
    data_exponent: f64,
) -> Result<IntegrabilityVerdict> {
    for (name, v) in [("delta", delta), ("gamma", gamma)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Input(format!("{name} must lie in (0, 1), got {v}")));
        }
    }
    if !(data_exponent >= 1.0) {
        return Err(Error::Input(format!(
            "data exponent must be at least 1, got {data_exponent}"
        )));
    }
    let m = table.m_delta(delta);
    let r = table.r_gamma(gamma);
    // the larger requirement dominates; on ties the strict one is stronger
    let existence_threshold = if m.value > r.value || (m.value == r.value && m.strict) {
        m
    } else {
        r
    };
    let l_infinity_threshold = table.q_threshold();
    Ok(IntegrabilityVerdict {
        existence: existence_threshold.admits(data_exponent),
        l_infinity: l_infinity_threshold.admits(data_exponent),
        existence_threshold,
        l_infinity_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table_2_2_2() -> ExponentTable {
        exponent_table(2.0, &WeightSpec::power(0.5, 2, 2.0)).unwrap()
    }

    #[test]
    fn table_examples() {
        let t = table_2_2_2();
        assert_relative_eq!(t.p_s, 4.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(t.p_s_star.finite().unwrap(), 4.0, epsilon = 1e-14);
        assert_eq!(t.regime, Regime::Subcritical);
        let m = t.m_delta(0.5);
        assert_relative_eq!(m.value, 8.0 / 7.0, epsilon = 1e-14);
        let q = t.q_threshold();
        assert_relative_eq!(q.value, 2.0, epsilon = 1e-14);
        assert!(q.strict);
    }

    #[test]
    fn power_ranges() {
        assert_eq!(admissible_power_range(2, 2.0).unwrap(), OpenInterval { lo: -2.0, hi: 1.0 });
        assert_eq!(admissible_power_range(3, 3.0).unwrap(), OpenInterval { lo: -3.0, hi: 1.0 });
        assert_eq!(admissible_power_range(2, 1.0).unwrap(), OpenInterval { lo: -2.0, hi: 2.0 });
        assert!(admissible_power_range(2, 0.0).is_err());
    }

    #[test]
    fn s_outside_exponent_set_names_bound() {
        // p = 2, N = 2: I = [1, ∞) ∩ (1, ∞)
        let err = exponent_table(2.0, &WeightSpec::power(0.5, 2, 1.0)).unwrap_err();
        assert!(matches!(&err, Error::Gate(m) if m.contains("N/p")), "{err}");
        // p = 3, N = 2: I = [0.5, ∞) ∩ (2/3, ∞); s = 0.4 fails the closed bound first
        let err = exponent_table(3.0, &WeightSpec::power(0.5, 2, 0.4)).unwrap_err();
        assert!(matches!(&err, Error::Gate(m) if m.contains("1/(p-1)")), "{err}");
    }

    #[test]
    fn power_weight_outside_range_is_gate() {
        assert!(matches!(
            exponent_table(2.0, &WeightSpec::power(1.0, 2, 2.0)),
            Err(Error::Gate(_))
        ));
        assert!(matches!(
            exponent_table(2.0, &WeightSpec::power(-2.0, 2, 2.0)),
            Err(Error::Gate(_))
        ));
        let no_s = WeightSpec {
            family: WeightFamily::Power { nu: 0.5 },
            dim: 2,
            s: None,
        };
        assert!(matches!(exponent_table(2.0, &no_s), Err(Error::Gate(_))));
    }

    #[test]
    fn constant_weight_uses_p() {
        let t = exponent_table(2.0, &WeightSpec::constant(1.0, 2)).unwrap();
        assert_eq!(t.p_s, 2.0);
        assert_eq!(t.regime, Regime::Critical);
        assert_eq!(t.p_s_star, Exponent::Infinite);
        // critical: "m > 1", L∞ needs q > r/(r-p) with r = 2p
        let m = t.m_delta(0.5);
        assert!(m.strict && m.value == 1.0);
        assert_relative_eq!(t.q_threshold().value, 2.0, epsilon = 1e-15);

        let t = exponent_table(1.5, &WeightSpec::constant(1.0, 2)).unwrap();
        assert_eq!(t.regime, Regime::Subcritical);
        assert_relative_eq!(t.p_s_star.finite().unwrap(), 6.0, epsilon = 1e-14);

        let t = exponent_table(3.0, &WeightSpec::constant(2.0, 2)).unwrap();
        assert_eq!(t.regime, Regime::Supercritical);
        assert_eq!(t.m_delta(0.3), Threshold { value: 1.0, strict: false });
    }

    #[test]
    fn integrability_verdicts() {
        let t = table_2_2_2();
        let v = validate_data_integrability(&t, 0.5, 0.5, f64::INFINITY).unwrap();
        assert!(v.existence && v.l_infinity);
        let v = validate_data_integrability(&t, 0.5, 0.5, 8.0 / 7.0).unwrap();
        assert!(v.existence);
        assert!(!v.l_infinity);
        assert!(matches!(
            validate_data_integrability(&t, 1.2, 0.5, 2.0),
            Err(Error::Input(_))
        ));
        assert!(validate_data_integrability(&t, 0.5, 0.0, 2.0).is_err());
    }

    #[test]
    fn weight_values() {
        let w = WeightSpec::power(0.5, 2, 2.0);
        assert_relative_eq!(w.value(&[3.0, 4.0]), 5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(WeightSpec::constant(2.5, 2).value(&[1.0, 1.0]), 2.5);
        let parsed = parse_weight_tag("power:0.5", 2, Some(2.0)).unwrap();
        assert_eq!(parsed, w);
        assert_eq!(parsed.to_string(), "power:0.5");
        assert!(parse_weight_tag("gauss:1", 2, None).is_err());
    }
}
