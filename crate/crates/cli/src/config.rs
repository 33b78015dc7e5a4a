use std::path::Path;

use anyhow::{bail, Context, Result};
use ebioc::data::{ExpertConfig, IngestConfig, ScenarioSpec};
use ebioc::eval::CornerConfig;
use ebioc::learning::TrainConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Samples per demonstration `M`.
    pub samples: usize,
    /// Report horizons in seconds.
    pub horizons: Vec<f64>,
    pub missing_radius: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { samples: 10, horizons: vec![1.0, 2.0, 3.0, 4.0], missing_radius: 1.0 }
    }
}

/// Every tunable of every pipeline stage, one table per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    pub expert: ExpertConfig,
    pub ingest: IngestConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub corner: CornerConfig,
}

fn remove_path(v: &mut toml::Value, path: &[String], key: &str) -> bool {
    let mut cur = v;
    for seg in path {
        cur = match cur {
            toml::Value::Table(t) => match t.get_mut(seg) {
                Some(x) => x,
                None => return false,
            },
            toml::Value::Array(a) => match seg.parse::<usize>().ok().and_then(|i| a.get_mut(i)) {
                Some(x) => x,
                None => return false,
            },
            _ => return false,
        };
    }
    match cur {
        toml::Value::Table(t) => t.remove(key).is_some(),
        _ => false,
    }
}

fn unknown_field(msg: &str) -> Option<String> {
    let rest = msg.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

/// Parses TOML into `T`, failing with the full list of unrecognized keys.
pub fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut value: toml::Value = toml::from_str(text)?;
    let mut unknown = Vec::new();
    loop {
        match serde_path_to_error::deserialize::<_, T>(value.clone()) {
            Ok(t) if unknown.is_empty() => return Ok(t),
            Ok(_) => bail!("unknown configuration keys: {}", unknown.join(", ")),
            Err(e) => {
                let path: Vec<String> = e.path().iter().map(|s| s.to_string()).collect();
                let Some(key) = unknown_field(&e.inner().to_string()) else {
                    if unknown.is_empty() {
                        bail!("invalid configuration at '{}': {}", e.path(), e.inner());
                    }
                    bail!("unknown configuration keys: {}", unknown.join(", "));
                };
                // the reported path may or may not end with the offending key
                let parent: Vec<String> = if path.last() == Some(&key) { path[..path.len() - 1].to_vec() } else { path };
                let full = parent.iter().cloned().chain([key.clone()]).collect::<Vec<_>>().join(".");
                if !remove_path(&mut value, &parent, &key) {
                    bail!("unknown configuration key '{full}'");
                }
                unknown.push(full);
            }
        }
    }
}

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_toml(&text).with_context(|| format!("in {}", p.display()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(parse_toml::<ExperimentConfig>("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn nested_keys_are_addressable() {
        let c: ExperimentConfig = parse_toml("[train]\nepochs = 3\n[train.sampler]\nsteps = 7\nkind = \"gd\"\n[eval]\nsamples = 2\n").unwrap();
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.train.sampler.steps, 7);
        assert_eq!(c.eval.samples, 2);
    }

    #[test]
    fn every_unknown_key_is_listed() {
        let err = parse_toml::<ExperimentConfig>("typo = 1\n[train]\nepochz = 3\n[train.sampler]\nstepz = 7\n").unwrap_err().to_string();
        for k in ["typo", "train.epochz", "train.sampler.stepz"] {
            assert!(err.contains(k), "{err}");
        }
    }

    #[test]
    fn defaults_survive_a_round_trip() {
        let c = ExperimentConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(parse_toml::<ExperimentConfig>(&text).unwrap(), c);
    }
}
