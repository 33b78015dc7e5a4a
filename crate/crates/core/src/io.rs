//! JSONL datasets and the JSON checkpoint container.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::generator::PolicyGenerator;
use crate::types::{Demonstration, JointScene};

pub const CHECKPOINT_VERSION: u32 = 1;

/// One JSON document per line. Blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(r: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::Structure(format!("line {}: {e}", i + 1)))?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut w: W) -> Result<()> {
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(BufReader::new(File::open(path)?))
}

pub fn write_jsonl_file<T: Serialize>(items: &[T], path: &Path) -> Result<()> {
    write_jsonl(items, BufWriter::new(File::create(path)?))
}

/// A dataset line: either a single demonstration or a joint scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Record {
    Scene(JointScene),
    Demo(Demonstration),
}

impl Record {
    pub fn into_scene(self) -> Result<JointScene> {
        match self {
            Record::Scene(s) => {
                s.check_structure()?;
                Ok(s)
            }
            Record::Demo(d) => JointScene::new(vec![d]),
        }
    }
}

/// Reads a dataset of demonstrations and/or joint scenes as scenes.
pub fn read_scenes(path: &Path) -> Result<Vec<JointScene>> {
    read_jsonl_file::<Record>(path)?.into_iter().map(Record::into_scene).collect()
}

/// Trained cost, optional generator and the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub cost: CostFunction,
    #[serde(default)]
    pub generator: Option<PolicyGenerator>,
    pub config_hash: String,
    pub config: serde_json::Value,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Checkpoint = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("checkpoint version {} is not supported", c.version)));
        }
        if let Some(g) = &c.generator {
            g.validate()?;
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostModel;
    use crate::data::{gen_expert_demos, gen_scenarios, reference_normalizer, ExpertConfig, ScenarioSpec, ThetaPreset};
    use crate::rng::substream;

    fn demos() -> Vec<Demonstration> {
        let sc = gen_scenarios(&ScenarioSpec { count: 3, horizon: 8, ..Default::default() }, 1).unwrap();
        gen_expert_demos(&sc, ThetaPreset::LaneKeeper.theta(), &ExpertConfig::default(), 1).unwrap()
    }

    #[test]
    fn dataset_round_trips_bit_exactly() {
        let d = demos();
        let mut buf = Vec::new();
        write_jsonl(&d, &mut buf).unwrap();
        let back: Vec<Demonstration> = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn demos_and_scenes_mix_in_one_file() {
        let d = demos();
        let recs = vec![Record::Demo(d[0].clone()), Record::Scene(JointScene::new(vec![d[1].clone(), d[2].clone()]).unwrap())];
        let mut buf = Vec::new();
        write_jsonl(&recs, &mut buf).unwrap();
        let back: Vec<Record> = read_jsonl(&buf[..]).unwrap();
        let scenes: Vec<JointScene> = back.into_iter().map(|r| r.into_scene().unwrap()).collect();
        assert_eq!(scenes[0].agents.len(), 1);
        assert_eq!(scenes[1].agents.len(), 2);
    }

    #[test]
    fn bad_line_is_reported_with_its_number() {
        let text = "\n{\"agents\": []}\n";
        match read_jsonl::<Demonstration, _>(text.as_bytes()) {
            Err(Error::Structure(m)) => assert!(m.starts_with("line 2"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn checkpoint_round_trips() {
        let dir = std::env::temp_dir().join(format!("ebioc-ckpt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.json");
        let c = Checkpoint {
            version: CHECKPOINT_VERSION,
            cost: CostFunction::new(CostModel::linear(ThetaPreset::Defensive.theta()), reference_normalizer(), Default::default()),
            generator: Some(PolicyGenerator::init(PolicyGenerator::default_hidden(), Default::default(), &mut substream(0, "g", &[]))),
            config_hash: "abc".into(),
            config: serde_json::json!({"epochs": 3}),
        };
        c.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), c);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
