//! Configuration files: a seed, an optional grid-spacing override and a
//! list of experiment blocks.
//!
//! ```toml
//! seed = 7
//! h = "1/64"
//!
//! [[experiments]]
//! kind = "hodge"
//! fields = 10
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use pseudoharmonic::experiments::ExperimentSpec;
use serde::{Deserialize, Deserializer};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, deserialize_with = "spacing")]
    pub h: Option<f64>,
    #[serde(default)]
    pub experiments: Vec<ExperimentSpec>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Parses a grid spacing written as a decimal (`0.0039`) or a fraction (`1/256`).
pub fn parse_h(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let num: f64 = a.trim().parse().map_err(|_| format!("bad numerator in `{s}`"))?;
            let den: f64 = b.trim().parse().map_err(|_| format!("bad denominator in `{s}`"))?;
            num / den
        }
        None => s.parse().map_err(|_| format!("`{s}` is not a number"))?,
    };
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("grid spacing must be positive and finite, got `{s}`"))
    }
}

fn spacing<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Num(v)) => parse_h(&v.to_string()).map(Some).map_err(serde::de::Error::custom),
        Some(Raw::Text(s)) => parse_h(&s).map(Some).map_err(serde::de::Error::custom),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacings() {
        assert_eq!(parse_h("1/256").unwrap(), 1.0 / 256.0);
        assert_eq!(parse_h(" 0.5 ").unwrap(), 0.5);
        assert!(parse_h("0").is_err());
        assert!(parse_h("1/0").is_err());
        assert!(parse_h("a/2").is_err());
        assert!(parse_h("-1").is_err());
    }

    #[test]
    fn parses_experiments_with_defaults() {
        let c = Config::parse(
            r#"
            seed = 3
            h = "1/64"
            [[experiments]]
            kind = "hodge"
            fields = 2
            [[experiments]]
            kind = "probe"
            amplitudes = [0.1, 0.2, 0.3]
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.h, Some(1.0 / 64.0));
        assert_eq!(c.experiments.len(), 2);
        assert_eq!(c.experiments[1].name(), "probe");
    }

    #[test]
    fn empty_and_invalid_configs() {
        let c = Config::parse("").unwrap();
        assert!(c.experiments.is_empty() && c.seed.is_none());
        assert!(Config::parse("bogus = 1").is_err());
        assert!(Config::parse("[[experiments]]\nkind = \"nope\"").is_err());
        assert!(Config::parse("[[experiments]]\nkind = \"hodge\"\nfieldz = 1").is_err());
        assert!(Config::parse("h = \"x\"").is_err());
    }
}
