//! Flat `key=value` configuration files.
//!
//! One entry per line, `#` starts a comment, no sections. Keys are read
//! through typed getters that mark them as used; [`FlatConfig::finish`]
//! rejects whatever was never read, so a misspelled key is an error rather
//! than a silently ignored line.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::distributions::{DiscreteFinite, DistributionSpec, Law};
use crate::error::{Error, Result};
use crate::estimators::EstimatorSpec;

#[derive(Clone, Debug, Default)]
pub struct FlatConfig {
    entries: Vec<(String, String)>,
    used: BTreeSet<String>,
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = FlatConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(line, format!("line {} is not key=value", lineno + 1)));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::config("", format!("line {} has an empty key", lineno + 1)));
            }
            if cfg.contains(key) {
                return Err(Error::config(key, "duplicate key"));
            }
            cfg.entries.push((key.to_string(), value.trim().to_string()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn from_pairs<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Result<Self> {
        let mut cfg = FlatConfig::default();
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Adds an entry; duplicate keys are rejected.
    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) -> Result<()> {
        let key = key.into();
        if self.contains(&key) {
            return Err(Error::config(key, "duplicate key"));
        }
        self.entries.push((key, value.into()));
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.iter().any(|(k, _)| k == key)
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Raw value of `key`, marking it as used.
    pub fn get(&mut self, key: &str) -> Option<String> {
        let value = self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone());
        if value.is_some() {
            self.used.insert(key.to_string());
        }
        value
    }

    pub fn require(&mut self, key: &str) -> Result<String> {
        self.get(key).ok_or_else(|| Error::config(key, "missing required key"))
    }

    pub fn parsed<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::config(key, format!("cannot parse {v:?}: {e}"))),
        }
    }

    pub fn parsed_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn require_parsed<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parsed(key)?.ok_or_else(|| Error::config(key, "missing required key"))
    }

    /// Comma-separated reals.
    pub fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::config(key, format!("cannot parse {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Errors on the first entry never read.
    pub fn finish(&self) -> Result<()> {
        match self.entries.iter().find(|(k, _)| !self.used.contains(k)) {
            Some((k, _)) => Err(Error::config(k.clone(), "unknown key")),
            None => Ok(()),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}

fn wrap_spec(key: &str, r: Result<DistributionSpec>) -> Result<DistributionSpec> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        other => Error::config(key, other.to_string()),
    })
}

fn parse_atoms(text: &str) -> Result<DiscreteFinite> {
    let atoms = text
        .split(',')
        .map(|pair| {
            let (v, p) = pair
                .split_once(':')
                .ok_or_else(|| Error::config("atoms", format!("expected value:prob, got {pair:?}")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::config("atoms", format!("cannot parse {s:?}: {e}")))
            };
            Ok((parse(v)?, parse(p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    DiscreteFinite::new(atoms).map_err(|e| Error::config("atoms", e.to_string()))
}

fn law_from_config(cfg: &mut FlatConfig, name: &str, key: &str, nested: bool) -> Result<DistributionSpec> {
    let spec = match name {
        "gaussian" => DistributionSpec::gaussian(cfg.parsed_or("mean", 0.0)?, cfg.parsed_or("sd", 1.0)?),
        "student_t" => DistributionSpec::student_t(
            cfg.require_parsed("dof")?,
            cfg.parsed_or("location", 0.0)?,
            cfg.parsed_or("scale", 1.0)?,
        ),
        "pareto" => DistributionSpec::pareto(
            cfg.require_parsed("alpha")?,
            cfg.parsed_or("mean", 0.0)?,
            cfg.parsed_or("scale", 1.0)?,
        ),
        "lognormal" => DistributionSpec::lognormal(cfg.parsed_or("logmean", 0.0)?, cfg.parsed_or("logsd", 1.0)?),
        "rademacher" => Ok(DistributionSpec::rademacher()),
        "discrete" => DistributionSpec::discrete(parse_atoms(&cfg.require("atoms")?)?),
        "contaminated" if !nested => {
            let base_name = cfg.require("base")?;
            let base = law_from_config(cfg, &base_name, "base", true)?;
            DistributionSpec::contaminated(
                base,
                cfg.require_parsed("epsilon")?,
                cfg.require_parsed("outlier_value")?,
            )
        }
        other => return Err(Error::config(key, format!("unknown distribution {other:?}"))),
    };
    wrap_spec(key, spec)
}

/// Reads `dist=<name>` and its parameters.
pub fn distribution_from_config(cfg: &mut FlatConfig) -> Result<DistributionSpec> {
    let name = cfg.require("dist")?;
    law_from_config(cfg, &name, "dist", false)
}

fn law_entries(spec: &DistributionSpec, name_key: &str, out: &mut Vec<(String, String)>) {
    let mut push = |k: &str, v: String| out.push((k.to_string(), v));
    match spec.law() {
        Law::Gaussian { mean, sd } => {
            push(name_key, "gaussian".into());
            push("mean", format!("{mean:?}"));
            push("sd", format!("{sd:?}"));
        }
        Law::StudentT { dof, location, scale } => {
            push(name_key, "student_t".into());
            push("dof", format!("{dof:?}"));
            push("location", format!("{location:?}"));
            push("scale", format!("{scale:?}"));
        }
        Law::Pareto { alpha, mean, scale } => {
            push(name_key, "pareto".into());
            push("alpha", format!("{alpha:?}"));
            push("mean", format!("{mean:?}"));
            push("scale", format!("{scale:?}"));
        }
        Law::LogNormal { logmean, logsd } => {
            push(name_key, "lognormal".into());
            push("logmean", format!("{logmean:?}"));
            push("logsd", format!("{logsd:?}"));
        }
        Law::Rademacher => push(name_key, "rademacher".into()),
        Law::Discrete { atoms } => {
            push(name_key, "discrete".into());
            let text: Vec<String> = atoms.atoms().map(|(v, p)| format!("{v:?}:{p:?}")).collect();
            push("atoms", text.join(","));
        }
        Law::Contaminated { base, epsilon, outlier_value } => {
            push(name_key, "contaminated".into());
            push("epsilon", format!("{epsilon:?}"));
            push("outlier_value", format!("{outlier_value:?}"));
            law_entries(base, "base", out);
        }
    }
}

/// Config entries that [`distribution_from_config`] reads back to `spec`.
pub fn distribution_to_config(spec: &DistributionSpec) -> Vec<(String, String)> {
    let mut out = Vec::new();
    law_entries(spec, "dist", &mut out);
    out
}

/// Reads `estimator=<name>` and its parameters.
pub fn estimator_from_config(cfg: &mut FlatConfig) -> Result<EstimatorSpec> {
    let name = cfg.require("estimator")?;
    Ok(match name.as_str() {
        "sample_mean" => EstimatorSpec::SampleMean,
        "mom" => EstimatorSpec::Mom {
            k: cfg.require_parsed("k")?,
            shuffle: cfg.parsed_or("shuffle", false)?,
        },
        "exact_umom" => EstimatorSpec::ExactUmom {
            m: cfg.require_parsed("m")?,
        },
        "incomplete_umom" => EstimatorSpec::IncompleteUmom {
            m: cfg.require_parsed("m")?,
            subsets: cfg.require_parsed("subsets")?,
            with_replacement: cfg.parsed_or("with_replacement", true)?,
        },
        "hodges_lehmann" => EstimatorSpec::HodgesLehmann {
            m: cfg.require_parsed("m")?,
        },
        other => return Err(Error::config("estimator", format!("unknown estimator {other:?}"))),
    })
}

pub fn estimator_to_config(spec: &EstimatorSpec) -> Vec<(String, String)> {
    let mut out = vec![("estimator".to_string(), spec.name().to_string())];
    let mut push = |k: &str, v: String| out.push((k.to_string(), v));
    match *spec {
        EstimatorSpec::SampleMean => {}
        EstimatorSpec::Mom { k, shuffle } => {
            push("k", k.to_string());
            push("shuffle", shuffle.to_string());
        }
        EstimatorSpec::ExactUmom { m } | EstimatorSpec::HodgesLehmann { m } => push("m", m.to_string()),
        EstimatorSpec::IncompleteUmom { m, subsets, with_replacement } => {
            push("m", m.to_string());
            push("subsets", subsets.to_string());
            push("with_replacement", with_replacement.to_string());
        }
    }
    out
}
