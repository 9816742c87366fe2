//! JSON scenario-tree files.
//!
//! ```json
//! {"n": 2, "dim": 1,
//!  "paths": [{"values": [[0.1], [1.0]], "weight": 1},
//!            {"values": [[-0.1], [-1.0]], "weight": 1}],
//!  "metric": {"ground": "absolute", "p": 1, "bounded": false}}
//! ```
//!
//! Instead of `paths` a file may list raw tree `nodes`
//! (`{"id", "parent", "value", "mass"}`), which is how malformed trees are
//! fed to validation.

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{FiniteProcess, MetricBlock, MetricSpec, RawNode, StatePoint, DEFAULT_TOL};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathRecord {
    pub values: Vec<Vec<f64>>,
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub n: usize,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<Vec<PathRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<RawNode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricBlock>,
}

/// A loaded scenario tree plus what the loader noticed on the way.
#[derive(Clone, Debug)]
pub struct LoadedScenario {
    pub process: FiniteProcess,
    pub metric: Option<MetricSpec>,
    /// Total raw weight before normalization.
    pub scale: f64,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_process(proc: &FiniteProcess) -> Self {
        Self {
            n: proc.horizon(),
            dim: proc.dim(),
            paths: Some(
                proc.paths()
                    .into_iter()
                    .map(|(p, w)| PathRecord {
                        values: p.iter().map(|x| x.coords().to_vec()).collect(),
                        weight: w,
                    })
                    .collect(),
            ),
            nodes: None,
            metric: None,
        }
    }

    pub fn metric_spec(&self) -> Result<Option<MetricSpec>> {
        self.metric.as_ref().map(MetricBlock::to_spec).transpose()
    }

    /// The tree exactly as written, without enforcing invariants.
    pub fn raw_process(&self) -> Result<FiniteProcess> {
        match (&self.paths, &self.nodes) {
            (_, Some(nodes)) => FiniteProcess::from_raw_nodes(self.n, self.dim, nodes),
            (Some(_), None) => Ok(self.load()?.process),
            (None, None) => Err(Error::Parse("file has neither `paths` nor `nodes`".into())),
        }
    }

    pub fn load(&self) -> Result<LoadedScenario> {
        let metric = self.metric_spec()?;
        match (&self.paths, &self.nodes) {
            (Some(records), None) => {
                let mut paths = Vec::with_capacity(records.len());
                for (index, rec) in records.iter().enumerate() {
                    if rec.values.len() != self.n {
                        return Err(Error::Parse(format!(
                            "path {index} has {} periods, header says n = {}",
                            rec.values.len(),
                            self.n
                        )));
                    }
                    let mut path = Vec::with_capacity(self.n);
                    for v in &rec.values {
                        if v.len() != self.dim {
                            return Err(Error::Parse(format!(
                                "path {index} has a state of dimension {}, header says dim = {}",
                                v.len(),
                                self.dim
                            )));
                        }
                        path.push(StatePoint::new(v.clone())?);
                    }
                    paths.push((path, rec.weight));
                }
                let scale = records.iter().map(|r| r.weight).sum();
                let process = FiniteProcess::from_paths(&paths, DEFAULT_TOL)?;
                Ok(LoadedScenario {
                    process,
                    metric,
                    scale,
                })
            }
            (None, Some(_)) => {
                let raw = self.raw_process()?;
                let scale = raw.node(raw.root()).mass;
                let process = raw.canonicalize(DEFAULT_TOL)?;
                Ok(LoadedScenario {
                    process,
                    metric,
                    scale,
                })
            }
            (Some(_), Some(_)) => Err(Error::Parse(
                "file must contain `paths` or `nodes`, not both".into(),
            )),
            (None, None) => Err(Error::Parse("file has neither `paths` nor `nodes`".into())),
        }
    }
}

pub fn read_scenario_file(path: impl AsRef<FsPath>) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
        Error::Parse(format!("cannot read {}: {e}", path.as_ref().display()))
    })?;
    ScenarioFile::parse(&text)
}

pub fn load_scenario(path: impl AsRef<FsPath>) -> Result<LoadedScenario> {
    read_scenario_file(path)?.load()
}

pub fn scenario_json(proc: &FiniteProcess) -> String {
    serde_json::to_string_pretty(&ScenarioFile::from_process(proc)).expect("serializable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::epsilon_reveal;
    use crate::process::Ground;

    #[test]
    fn parse_with_metric_and_scale() {
        let text = r#"{"n": 2, "dim": 1,
            "paths": [{"values": [[0.0], [1.0]], "weight": 1},
                      {"values": [[0.0], [-1.0]], "weight": 3}],
            "metric": {"ground": "euclidean", "p": 2, "bounded": true}}"#;
        let loaded = ScenarioFile::parse(text).unwrap().load().unwrap();
        assert_eq!(loaded.scale, 4.0);
        assert_eq!(loaded.process.paths()[0].1, 0.75);
        let m = loaded.metric.unwrap();
        assert_eq!(m.ground, Ground::Euclidean);
        assert_eq!(m.p(), 2.0);
        assert!(m.bounded);
    }

    #[test]
    fn header_mismatch_is_a_parse_error() {
        let text = r#"{"n": 3, "dim": 1, "paths": [{"values": [[0.0], [1.0]], "weight": 1}]}"#;
        assert!(matches!(
            ScenarioFile::parse(text).unwrap().load(),
            Err(Error::Parse(_))
        ));
        assert!(matches!(ScenarioFile::parse("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn table_metric_block() {
        let text = r#"{"n": 1, "dim": 1,
            "paths": [{"values": [[0.0]], "weight": 1}],
            "metric": {"ground": "table", "points": [[0.0], [1.0]],
                       "table": [[0.0, 2.0], [2.0, 0.0]]}}"#;
        let loaded = ScenarioFile::parse(text).unwrap().load().unwrap();
        assert!(matches!(loaded.metric.unwrap().ground, Ground::Table(_)));
    }

    #[test]
    fn round_trip_through_json() {
        let p = epsilon_reveal(0.25);
        let back = ScenarioFile::parse(&scenario_json(&p))
            .unwrap()
            .load()
            .unwrap();
        assert_eq!(back.process, p);
    }

    #[test]
    fn node_format() {
        let text = r#"{"n": 1, "dim": 1, "nodes": [
            {"id": 0, "mass": 1.0},
            {"id": 1, "parent": 0, "value": [2.0], "mass": 0.5},
            {"id": 2, "parent": 0, "value": [3.0], "mass": 0.5}]}"#;
        let loaded = ScenarioFile::parse(text).unwrap().load().unwrap();
        assert_eq!(loaded.process.leaves().len(), 2);
    }
}
