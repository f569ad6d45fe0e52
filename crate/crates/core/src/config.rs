//! Flat `key = value` run configurations.
//!
//! Lines are `key = value`; `#` starts a comment. Later assignments of the
//! same key (for instance command-line overrides) replace earlier ones.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::DataFn;
use crate::error::{Error, Result};
use crate::finsler::{parse_norm_tag, FinslerNorm};
use crate::mesh::MeshConfig;
use crate::solver::{power_schedule, ProblemKind, ProblemSpec};
use crate::weights::parse_weight_tag;

/// Every recognised key.
pub const KEYS: &[&str] = &[
    "domain",
    "p",
    "delta",
    "gamma",
    "norm",
    "weight",
    "s",
    "f",
    "g",
    "h",
    "kind",
    "n_max_exp",
    "inner_tol",
    "outer_tol",
    "seed",
    "max_inner_iters",
    "picard_theta",
    "certificate_trials",
    "restarts",
    "quotient_tol",
    "trials",
    "constant",
    "samples",
    "sweep_p",
    "sweep_delta",
    "sweep_nu",
    "sweep_norm",
];

/// Raw key/value pairs in key order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigMap(BTreeMap<String, String>);

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = ConfigMap::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    line.split_whitespace().next().unwrap_or(line),
                    format!("line {}: expected `key = value`", lineno + 1),
                )
            })?;
            map.set(key.trim(), value.trim())?;
        }
        Ok(map)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment, "override must have the form key=value"))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::config(key, "unknown key"));
        }
        if value.is_empty() {
            return Err(Error::config(key, "empty value"));
        }
        self.0.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn parsed<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<T>()
                .map_err(|e| Error::config(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|item| {
                item.trim()
                    .parse::<T>()
                    .map_err(|e| Error::config(key, format!("cannot parse `{}`: {e}", item.trim())))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}

/// Maps errors raised while interpreting a value onto the key that held it,
/// keeping gate violations as they are.
fn keyed(key: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Gate(_) => e,
        Error::Input(message) | Error::Domain(message) => Error::config(key, message),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub p: Vec<f64>,
    pub delta: Vec<f64>,
    /// Power-weight exponents; `0` means the constant weight 1.
    pub nu: Vec<f64>,
    pub norm: Vec<String>,
}

/// A fully interpreted configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub spec: ProblemSpec,
    pub s: Option<f64>,
    pub restarts: usize,
    pub quotient_tol: f64,
    pub trials: usize,
    pub constant: Option<f64>,
    pub samples: usize,
    pub sweep: SweepGrid,
}

impl Settings {
    /// Interprets `map`, using `default_n_max_exp` when `n_max_exp` is absent.
    pub fn from_map(map: &ConfigMap, default_n_max_exp: u32) -> Result<Self> {
        let dim = 2;
        let mesh: MeshConfig = map.parsed("domain", "square:32".parse()?)?;
        let p: f64 = map.parsed("p", 2.0)?;
        let norm: FinslerNorm = match map.get("norm") {
            Some(tag) => parse_norm_tag(tag, dim).map_err(keyed("norm"))?,
            None => FinslerNorm::euclidean(dim),
        };
        let s: Option<f64> = map.get("s").map(|_| map.parsed("s", 0.0)).transpose()?;
        let weight = parse_weight_tag(map.get("weight").unwrap_or("const:1"), dim, s).map_err(keyed("weight"))?;
        let kind = map.get("kind").unwrap_or("mixed");
        let problem = match kind {
            "mixed" => ProblemKind::MixedSingular {
                delta: map.parsed("delta", 0.5)?,
                gamma: map.parsed("gamma", 0.5)?,
                f: map.parsed("f", DataFn::constant(1.0))?,
                g: map.parsed("g", DataFn::constant(0.0))?,
            },
            "exponential" => ProblemKind::Exponential {
                h: map.parsed("h", DataFn::constant(0.01))?,
            },
            other => return Err(Error::config("kind", format!("expected mixed or exponential, got `{other}`"))),
        };
        let n_max_exp: u32 = map.parsed("n_max_exp", default_n_max_exp)?;
        if n_max_exp > 62 {
            return Err(Error::config("n_max_exp", "must be at most 62"));
        }
        let mut spec = match problem {
            ProblemKind::MixedSingular { delta, gamma, f, g } => {
                ProblemSpec::mixed(mesh, norm, p, weight, delta, gamma, f, g)
            }
            ProblemKind::Exponential { h } => ProblemSpec::exponential(mesh, norm, p, weight, h),
        };
        spec.n_schedule = power_schedule(n_max_exp);
        spec.inner_tol = map.parsed("inner_tol", spec.inner_tol)?;
        spec.outer_tol = map.parsed("outer_tol", spec.outer_tol)?;
        spec.max_inner_iters = map.parsed("max_inner_iters", spec.max_inner_iters)?;
        spec.picard_theta = map.parsed("picard_theta", spec.picard_theta)?;
        spec.certificate_trials = map.parsed("certificate_trials", spec.certificate_trials)?;
        spec.seed = map.parsed("seed", 0u64)?;

        let sweep = SweepGrid {
            p: map.list("sweep_p")?.unwrap_or_else(|| vec![p]),
            delta: map.list("sweep_delta")?.unwrap_or_else(|| vec![spec.delta().unwrap_or(0.5)]),
            nu: map.list("sweep_nu")?.unwrap_or_else(|| vec![0.0]),
            norm: map.list("sweep_norm")?.unwrap_or_else(|| vec![norm.to_string()]),
        };
        let settings = Settings {
            spec,
            s,
            restarts: map.parsed("restarts", 8)?,
            quotient_tol: map.parsed("quotient_tol", 1e-7)?,
            trials: map.parsed("trials", 1000)?,
            constant: map.get("constant").map(|_| map.parsed("constant", 0.0)).transpose()?,
            samples: map.parsed("samples", 10_000)?,
            sweep,
        };
        settings.spec.validate().map_err(|e| match e {
            Error::Input(message) => Error::config(guess_key(&message), message),
            other => other,
        })?;
        Ok(settings)
    }
}

fn guess_key(message: &str) -> &'static str {
    if message.contains("schedule") {
        "n_max_exp"
    } else if message.contains("dimension") {
        "weight"
    } else {
        "p"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_comments_and_overrides() {
        let text = "# standard\ndomain = square:16\np = 3 # exponent\nnorm = lt:4\n\nf = 1 + x*y\n";
        let mut map = ConfigMap::parse(text).unwrap();
        map.apply_override("p=2.5").unwrap();
        let s = Settings::from_map(&map, 10).unwrap();
        assert_eq!(s.spec.p, 2.5);
        assert_eq!(s.spec.mesh.resolution, 16);
        assert_eq!(s.spec.norm.to_string(), "lt:4");
        assert_eq!(s.spec.n_schedule.len(), 11);
        match &s.spec.problem {
            ProblemKind::MixedSingular { f, g, .. } => {
                assert_eq!(f.eval(1.0, 2.0), 3.0);
                assert!(g.is_identically_zero());
            }
            _ => panic!("expected a mixed problem"),
        }
    }

    #[test]
    fn errors_name_the_key() {
        for (text, key) in [
            ("p = abc", "p"),
            ("bogus = 1", "bogus"),
            ("domain = hexagon:3", "domain"),
            ("norm = lt:0.5", "norm"),
            ("kind = parabolic", "kind"),
            ("just words", "just"),
        ] {
            let err = ConfigMap::parse(text).and_then(|m| Settings::from_map(&m, 10)).unwrap_err();
            match err {
                Error::Config { key: k, .. } => assert_eq!(k, key, "{text}"),
                other => panic!("{text}: expected config error, got {other:?}"),
            }
            assert_eq!(err_code(text), 2);
        }
    }

    fn err_code(text: &str) -> i32 {
        ConfigMap::parse(text)
            .and_then(|m| Settings::from_map(&m, 10))
            .unwrap_err()
            .exit_code()
    }

    #[test]
    fn gate_violations_keep_their_class() {
        for text in ["delta = 1.2", "p = 1.5\nnorm = lt:4", "weight = power:1.5\ns = 2"] {
            let err = ConfigMap::parse(text).and_then(|m| Settings::from_map(&m, 10)).unwrap_err();
            assert!(matches!(err, Error::Gate(_)), "{text}: {err:?}");
            assert_eq!(err.exit_code(), 4);
        }
    }

    #[test]
    fn sweep_lists() {
        let map = ConfigMap::parse("sweep_p = 2, 3\nsweep_norm = euclidean,lt:4\nsweep_nu = 0,0.5").unwrap();
        let s = Settings::from_map(&map, 10).unwrap();
        assert_eq!(s.sweep.p, vec![2.0, 3.0]);
        assert_eq!(s.sweep.norm, vec!["euclidean", "lt:4"]);
        assert_eq!(s.sweep.nu, vec![0.0, 0.5]);
        assert_eq!(s.sweep.delta, vec![0.5]);
    }
}
