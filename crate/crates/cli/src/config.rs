//! Flat `key = value` run configuration.
//!
//! Keys are dotted (`params.sigma_a = 30`). Lines starting with `#` are
//! comments. Every key has a default; unknown keys are rejected so typos do
//! not silently fall back to one.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clustercache::analytic::EngineConfig;
use clustercache::montecarlo::SimConfig;
use clustercache::quad::Tolerance;
use clustercache::{SystemParams, ZipfLibrary};
use thiserror::Error;

use crate::sweep::{Axis, CaseKind, Hold, MethodSel, Metric, SweepSpec};

/// Prefix of environment variables that override configuration keys.
/// `CLUSTERCACHE_PARAMS__SIGMA_A=20` sets `params.sigma_a`.
pub const ENV_PREFIX: &str = "CLUSTERCACHE_";

/// `(key, default, description)` for every recognized key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("params.lambda_c", "50", "cluster-center density, per km²"),
    ("params.sigma_a", "30", "scattering deviation of the (dense) subcluster, m"),
    ("params.sigma_b", "", "scattering deviation of the sparse subcluster, m (empty: sigma_a)"),
    ("params.n_t", "40", "potential transmitters per cluster"),
    ("params.n_r", "40", "potential receivers per cluster"),
    ("params.m_a", "1", "mean active transmitters, dense subcluster"),
    ("params.m_b", "0", "mean active transmitters, sparse subcluster"),
    ("params.alpha", "4", "path-loss exponent"),
    ("params.beta_db", "0", "SIR threshold, dB"),
    ("case", "baseline", "baseline | ktx | lrx | double"),
    ("case.k", "1", "serving rank(s) for ktx, comma separated"),
    ("case.l", "1", "receiver rank(s) for lrx, comma separated"),
    ("case.rx_in_dense", "true", "double: receiver in the dense subcluster"),
    ("case.tx_in_dense", "true", "double: serving device in the dense subcluster"),
    ("metric", "coverage", "coverage | ase | hit_uniform | hit_cluster_centric"),
    ("sweep.axis", "m_a", "m_a | beta_db | k | l | gamma | m_split"),
    ("sweep.values", "1:10", "list `a,b,c`, range `a:b` or stepped range `a:step:b`"),
    ("sweep.methods", "analytic_approx", "analytic_exact, analytic_approx, analytic_fast, monte_carlo"),
    ("split.hold", "m_b", "m_split axis: mean held fixed (m_a | m_b); the other gets the remainder"),
    ("split.value", "0", "m_split axis: value of the held mean"),
    ("library.j_total", "40", "library size"),
    ("library.gamma", "0.8", "Zipf exponent"),
    ("sim.trials", "100000", "Monte Carlo trials per row"),
    ("sim.seed", "1", "Monte Carlo seed"),
    ("sim.antithetic", "false", "pair trials with reflected fading draws"),
    ("sim.disk_radius", "", "parent disk radius, m (empty: automatic)"),
    ("quad.rel_tol", "1e-7", "relative tolerance of each 1-D integral"),
    ("quad.abs_tol", "1e-13", "absolute tolerance of each 1-D integral"),
    ("label", "", "curve label (empty: derived from the case)"),
    ("output.path", "", "CSV destination (empty: standard output)"),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: cannot parse `{value}`: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("sweep values must be nonempty and strictly increasing")]
    Values,
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

/// Key-value configuration with defaults underneath.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        Self { values: KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect() }
    }
}

impl Config {
    /// Parses file contents over the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(ConfigError::UnknownKey(key.to_string())),
        }
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    /// Applies `CLUSTERCACHE_*` variables from `vars`. Double underscores
    /// become dots and names are lowercased.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<(), ConfigError> {
        for (name, value) in vars {
            if let Some(rest) = name.strip_prefix(ENV_PREFIX) {
                let key = rest.to_ascii_lowercase().replace("__", ".");
                self.set(&key, &value)?;
            }
        }
        Ok(())
    }

    /// All keys with their current values, sorted.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.get(key);
        v.parse().map_err(|e: T::Err| ConfigError::Value { key: key.into(), value: v.into(), reason: e.to_string() })
    }

    fn optional<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        if self.get(key).is_empty() {
            Ok(None)
        } else {
            self.parse_as(key).map(Some)
        }
    }

    fn ranks(&self, key: &str) -> Result<Vec<u32>, ConfigError> {
        self.get(key)
            .split(',')
            .map(|s| {
                s.trim().parse().map_err(|e: std::num::ParseIntError| ConfigError::Value {
                    key: key.into(),
                    value: s.into(),
                    reason: e.to_string(),
                })
            })
            .collect()
    }

    /// Builds the sweep described by this configuration.
    pub fn to_spec(&self) -> Result<SweepSpec, ConfigError> {
        let mut base = SystemParams::new(
            self.parse_as("params.lambda_c")?,
            self.parse_as("params.sigma_a")?,
            self.parse_as("params.n_t")?,
            self.parse_as("params.n_r")?,
            self.parse_as("params.m_a")?,
        )
        .with_alpha(self.parse_as("params.alpha")?)
        .with_beta_db(self.parse_as("params.beta_db")?);
        let sigma_b = self.optional("params.sigma_b")?.unwrap_or(base.sigma_a);
        base = base.with_sparse(sigma_b, self.parse_as("params.m_b")?);

        let case = match self.get("case") {
            "baseline" => CaseKind::Baseline,
            "ktx" => CaseKind::KTx(self.ranks("case.k")?),
            "lrx" => CaseKind::LRx(self.ranks("case.l")?),
            "double" => CaseKind::Double {
                rx_in_dense: self.parse_as("case.rx_in_dense")?,
                tx_in_dense: self.parse_as("case.tx_in_dense")?,
            },
            other => return Err(value_error("case", other, "expected baseline, ktx, lrx or double")),
        };
        let metric: Metric = self.get("metric").parse().map_err(|e: String| value_error("metric", self.get("metric"), &e))?;
        let axis: Axis = self.get("sweep.axis").parse().map_err(|e: String| value_error("sweep.axis", self.get("sweep.axis"), &e))?;
        let values = parse_values(self.get("sweep.values"))
            .map_err(|e| value_error("sweep.values", self.get("sweep.values"), &e))?;
        let methods = parse_methods(self.get("sweep.methods"))
            .map_err(|e| value_error("sweep.methods", self.get("sweep.methods"), &e))?;
        let hold = match self.get("split.hold") {
            "m_a" => Hold::DenseMean(self.parse_as("split.value")?),
            "m_b" => Hold::SparseMean(self.parse_as("split.value")?),
            other => return Err(value_error("split.hold", other, "expected m_a or m_b")),
        };
        let library = ZipfLibrary { j_total: self.parse_as("library.j_total")?, gamma: self.parse_as("library.gamma")? };
        let mut sim = SimConfig::new(self.parse_as("sim.trials")?, self.parse_as("sim.seed")?)
            .with_antithetic(self.parse_as("sim.antithetic")?);
        if let Some(r) = self.optional("sim.disk_radius")? {
            sim = sim.with_disk_radius(r);
        }
        let engine = EngineConfig {
            tol: Tolerance::new(self.parse_as("quad.rel_tol")?, self.parse_as("quad.abs_tol")?),
            ..EngineConfig::default()
        };
        let label = match self.get("label") {
            "" => None,
            s => Some(s.to_string()),
        };
        let output = match self.get("output.path") {
            "" => None,
            s => Some(PathBuf::from(s)),
        };
        let spec = SweepSpec { base, case, metric, axis, values, methods, hold, library, sim, engine, label, output };
        spec.check().map_err(ConfigError::Invalid)?;
        Ok(spec)
    }
}

fn value_error(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::Value { key: key.into(), value: value.into(), reason: reason.into() }
}

/// `a,b,c`, `a:b` (unit step) or `a:step:b`, endpoints included.
pub fn parse_values(text: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("`{}`: {e}", s.trim()));
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [_] => text.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        [a, b] => range(num(a)?, 1.0, num(b)?)?,
        [a, step, b] => range(num(a)?, num(step)?, num(b)?)?,
        _ => return Err("too many `:`".into()),
    };
    if values.is_empty() || values.windows(2).any(|w| !(w[0] < w[1])) || values.iter().any(|v| !v.is_finite()) {
        return Err("values must be finite, nonempty and strictly increasing".into());
    }
    Ok(values)
}

fn range(start: f64, step: f64, end: f64) -> Result<Vec<f64>, String> {
    if !(step > 0.0) || !(end >= start) {
        return Err("range needs a positive step and end ≥ start".into());
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    if n > 100_000 {
        return Err("range too long".into());
    }
    // Multiply rather than accumulate so endpoints come out exact.
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}

pub fn parse_methods(text: &str) -> Result<Vec<MethodSel>, String> {
    let mut out: Vec<MethodSel> = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let m: MethodSel = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err("at least one method is required".into());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_figure_settings() {
        let spec = Config::default().to_spec().unwrap();
        assert_eq!(spec.base.alpha, 4.0);
        assert_eq!(spec.base.beta, 1.0);
        assert_eq!(spec.values, (1..=10).map(f64::from).collect::<Vec<_>>());
        assert_eq!(spec.methods, vec![MethodSel::AnalyticApprox]);
    }

    #[test]
    fn parses_comments_and_dotted_keys() {
        let cfg = Config::parse("# fig 4\ncase = ktx\ncase.k = 1, 5\n\nparams.n_t = 30\n").unwrap();
        let spec = cfg.to_spec().unwrap();
        assert_eq!(spec.case, CaseKind::KTx(vec![1, 5]));
        assert_eq!(spec.base.n_t, 30);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert_eq!(Config::parse("params.sigma = 3").unwrap_err(), ConfigError::UnknownKey("params.sigma".into()));
        assert_eq!(Config::parse("\njust words").unwrap_err(), ConfigError::Syntax { line: 2 });
    }

    #[test]
    fn environment_overrides() {
        let mut cfg = Config::default();
        let vars = [
            ("CLUSTERCACHE_PARAMS__SIGMA_A".to_string(), "12".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ];
        cfg.apply_env(vars).unwrap();
        assert_eq!(cfg.get("params.sigma_a"), "12");
        let bad = [("CLUSTERCACHE_NOPE".to_string(), "1".to_string())];
        assert!(cfg.apply_env(bad).is_err());
    }

    #[test]
    fn value_lists() {
        assert_eq!(parse_values("1:4").unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(parse_values("0:0.5:1.5").unwrap(), vec![0.0, 0.5, 1.0, 1.5]);
        assert_eq!(parse_values("2, 3,7").unwrap(), vec![2.0, 3.0, 7.0]);
        assert!(parse_values("3,2").is_err());
        assert!(parse_values("").is_err());
        assert!(parse_values("1:0:3").is_err());
    }

    #[test]
    fn methods_dedupe_and_require_one() {
        assert_eq!(parse_methods("monte_carlo, monte_carlo").unwrap(), vec![MethodSel::MonteCarlo]);
        assert!(parse_methods(" ").is_err());
        assert!(parse_methods("magic").is_err());
    }

    #[test]
    fn every_default_parses() {
        let cfg = Config::default();
        for (k, _, _) in KEYS {
            assert!(cfg.values.contains_key(*k));
        }
        assert!(cfg.to_spec().is_ok());
    }
}
