use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{EngineConfig, Precision};
use crate::graph::{gen_synthetic, load_hetgraph, DatasetShape, HetGraph, SyntheticSpec};
use crate::model::ModelKind;
use crate::perf::HardwareConfig;

/// Where the heterogeneous graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    /// A graph file in the text format read by `load_hetgraph`.
    File { path: PathBuf },
    /// A benchmark-shaped synthetic graph seeded by the experiment seed.
    Preset {
        shape: DatasetShape,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "one")]
        feature_scale: f64,
    },
    Synthetic { spec: SyntheticSpec },
    /// `SyntheticSpec::relation_family`, seeded by the experiment seed.
    Family {
        types: usize,
        graphs: usize,
        vertices: usize,
        edges: usize,
        feature_dim: usize,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Preset { shape: DatasetShape::Dblp, scale: 0.05, feature_scale: 0.05 }
    }
}

impl DatasetSource {
    pub fn load(&self, seed: u64) -> Result<HetGraph> {
        match self {
            DatasetSource::File { path } => load_hetgraph(path),
            DatasetSource::Preset { shape, scale, feature_scale } => {
                gen_synthetic(&shape.spec(*scale, *feature_scale, seed))
            }
            DatasetSource::Synthetic { spec } => gen_synthetic(spec),
            DatasetSource::Family { types, graphs, vertices, edges, feature_dim } => gen_synthetic(
                &SyntheticSpec::relation_family(seed, *types, *graphs, *vertices, *edges, *feature_dim)?,
            ),
        }
    }
}

/// Semantic-graph execution order policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScheduleChoice {
    /// Shortest Hamiltonian path over the similarity hypergraph.
    Similarity,
    Random(u64),
    /// Replay an order from a JSON file.
    Given(PathBuf),
}

impl fmt::Display for ScheduleChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleChoice::Similarity => f.write_str("similarity"),
            ScheduleChoice::Random(s) => write!(f, "random:{s}"),
            ScheduleChoice::Given(p) => write!(f, "given:{}", p.display()),
        }
    }
}

impl FromStr for ScheduleChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "similarity" {
            return Ok(ScheduleChoice::Similarity);
        }
        if let Some(seed) = s.strip_prefix("random:") {
            return seed
                .parse()
                .map(ScheduleChoice::Random)
                .map_err(|_| Error::Config(format!("bad random schedule seed `{seed}`")));
        }
        if let Some(path) = s.strip_prefix("given:") {
            if !path.is_empty() {
                return Ok(ScheduleChoice::Given(path.into()));
            }
        }
        Err(Error::Config(format!(
            "schedule `{s}` is not one of similarity, random:<seed>, given:<file>"
        )))
    }
}

impl TryFrom<String> for ScheduleChoice {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ScheduleChoice> for String {
    fn from(s: ScheduleChoice) -> Self {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub lanes: usize,
    pub threshold: usize,
    /// Report the fused pipeline; off reports the staged baseline.
    pub fusion: bool,
    pub balance: bool,
    pub rab: bool,
    pub precision: Precision,
    pub schedule: ScheduleChoice,
    pub hidden: usize,
    /// Defaults to the model's usual depth.
    pub layers: Option<usize>,
    /// Random orders averaged by the schedule sweeps.
    pub random_orders: u64,
    /// Also write the event trace.
    pub trace: bool,
}

impl Default for EngineSection {
    fn default() -> Self {
        Self {
            lanes: 4,
            threshold: 256,
            fusion: true,
            balance: true,
            rab: true,
            precision: Precision::F64,
            schedule: ScheduleChoice::Similarity,
            hidden: 64,
            layers: None,
            random_orders: 10,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Required, from the file or `--seed`.
    pub seed: Option<u64>,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    #[serde(default)]
    pub dataset: DatasetSource,
    #[serde(default)]
    pub engine: EngineSection,
    /// `num_lanes` and `element_bytes` follow the engine section.
    #[serde(default)]
    pub hardware: HardwareConfig,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

fn default_model() -> ModelKind {
    ModelKind::Han
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            model: default_model(),
            dataset: DatasetSource::default(),
            engine: EngineSection::default(),
            hardware: HardwareConfig::default(),
            out_dir: default_out(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().replace('\n', " ")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config("a seed is required (config `seed` or --seed)".into()))
    }

    /// Sets one hardware field from `key=value`, where value is TOML.
    pub fn set_hardware(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("hardware override `{assignment}` is not key=value")))?;
        let parsed: toml::Table = toml::from_str(&format!("v = {}", value.trim()))
            .map_err(|e| Error::Config(format!("hardware override `{assignment}`: {e}")))?;
        let mut table = match toml::Value::try_from(&self.hardware) {
            Ok(toml::Value::Table(t)) => t,
            _ => return Err(Error::Config("hardware config is not a table".into())),
        };
        let key = key.trim();
        let mut slot = &mut table;
        let mut parts: Vec<&str> = key.split('.').collect();
        let last = parts.pop().unwrap_or_default();
        for p in parts {
            slot = match slot.get_mut(p) {
                Some(toml::Value::Table(t)) => t,
                _ => return Err(Error::Config(format!("unknown hardware field `{key}`"))),
            };
        }
        if !slot.contains_key(last) {
            return Err(Error::Config(format!("unknown hardware field `{key}`")));
        }
        slot.insert(last.to_string(), parsed["v"].clone());
        self.hardware = toml::Value::Table(table)
            .try_into()
            .map_err(|e| Error::Config(format!("hardware override `{assignment}`: {e}")))?;
        Ok(())
    }

    /// Checks consistency and aligns the hardware section with the engine.
    pub fn validate(&mut self) -> Result<()> {
        self.seed()?;
        let e = &self.engine;
        if e.lanes == 0 || e.threshold == 0 || e.hidden == 0 {
            return Err(Error::Config("lanes, threshold and hidden must be positive".into()));
        }
        if e.layers == Some(0) {
            return Err(Error::Config("layers must be positive".into()));
        }
        if let ScheduleChoice::Given(p) = &e.schedule {
            if !p.is_file() {
                return Err(Error::Config(format!("schedule file {} does not exist", p.display())));
            }
        }
        if let DatasetSource::File { path } = &self.dataset {
            if !path.is_file() {
                return Err(Error::Config(format!("graph file {} does not exist", path.display())));
            }
        }
        self.hardware.num_lanes = e.lanes;
        self.hardware.validate(e.hidden as u64 + 1)
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            num_lanes: self.engine.lanes,
            threshold: self.engine.threshold,
            balance: self.engine.balance,
            rab: self.engine.rab,
            precision: self.engine.precision,
            element_bytes: self.hardware.element_bytes as usize,
        }
    }

    pub fn layers(&self) -> usize {
        self.engine.layers.unwrap_or_else(|| self.model.default_layers())
    }
}
