//! `fgrl-config/1` experiment configs.

use std::path::{Path, PathBuf};

use fgrl_core::domset::ValueBoundMode;
use fgrl_core::instances::{
    DomHardParams, GridParams, RandomMdpParams, StarParams, TreeBanditParams,
};
use fgrl_core::mdp::PairId;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_FORMAT: &str = "fgrl-config/1";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl ConfigError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Field {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSource {
    /// An `fgrl-instance/1` document; relative paths resolve against the config file.
    File { path: PathBuf },
    Random { params: RandomMdpParams },
    Grid { params: GridParams },
    /// One of the appendix example graphs on a single-state MDP.
    Example {
        name: String,
        #[serde(default = "one")]
        horizon: usize,
    },
    TreeBandit {
        params: TreeBanditParams,
        /// Choose the optimal representative as `seed mod α`, so that lowest-index
        /// tie breaking cannot land on it for free.
        #[serde(default)]
        optimal_from_seed: bool,
    },
    DomsetHard { params: DomHardParams },
    Star { params: StarParams },
}

fn one() -> usize {
    1
}

/// Replaces the instance's own graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphOverride {
    Empty,
    Complete,
    Cliques { groups: Vec<Vec<PairId>> },
    Random { density: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentSpec {
    Orlc {
        #[serde(default)]
        bias_filter: Option<f64>,
    },
    Domset {
        /// Defaults to the set the instance generator provides.
        #[serde(default)]
        dominating: Option<Vec<PairId>>,
        #[serde(default)]
        mode: ValueBoundMode,
    },
    Multitask {
        /// Total task count including the environment task.
        tasks: usize,
        /// Known rewards of the extra tasks are uniform draws from this seed.
        #[serde(default)]
        task_seed: u64,
    },
    UniformBaseline,
}

impl AgentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Orlc { .. } => "orlc",
            Self::Domset { .. } => "domset",
            Self::Multitask { .. } => "multitask",
            Self::UniformBaseline => "uniform_baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    Episodes(usize),
    Epsilon(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path into the config, e.g. `instance.params.alpha`.
    pub path: String,
    pub values: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format: String,
    #[serde(default)]
    pub name: String,
    pub instance: InstanceSource,
    #[serde(default)]
    pub graph: Option<GraphOverride>,
    pub agent: AgentSpec,
    #[serde(default)]
    pub episodes: Option<usize>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub budget: Option<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub sweep: Option<SweepAxis>,
}

fn default_delta() -> f64 {
    0.1
}

impl ExperimentConfig {
    pub fn from_value(value: serde_json::Value) -> Result<Self, ConfigError> {
        match value.get("format").and_then(|f| f.as_str()) {
            Some(CONFIG_FORMAT) => {}
            Some(other) => {
                return Err(ConfigError::field(
                    "format",
                    format!("unsupported {other:?}, expected {CONFIG_FORMAT:?}"),
                ))
            }
            None => return Err(ConfigError::field("format", "missing")),
        }
        let cfg: Self = match serde_json::from_value(value.clone()) {
            Ok(cfg) => cfg,
            Err(e) => return Err(locate_error(&value, e)),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value =
            serde_json::from_str(s).map_err(|e| ConfigError::field("", e.to_string()))?;
        Self::from_value(value)
    }

    /// Loads a config and resolves relative instance paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_value(load_value(path)?)
    }

    pub fn stop_rule(&self) -> StopRule {
        match (self.episodes, self.epsilon) {
            (Some(t), None) => StopRule::Episodes(t),
            (None, Some(e)) => StopRule::Epsilon(e),
            _ => unreachable!("validated"),
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let stop = match (self.episodes, self.epsilon) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(ConfigError::field(
                    "episodes",
                    "exactly one of `episodes` and `epsilon` must be set",
                ))
            }
            (Some(0), _) => return Err(ConfigError::field("episodes", "must be positive")),
            (Some(t), None) => StopRule::Episodes(t),
            (None, Some(e)) if !(e > 0.0 && e.is_finite()) => {
                return Err(ConfigError::field("epsilon", "must be positive and finite"))
            }
            (None, Some(e)) => StopRule::Epsilon(e),
        };
        if self.seeds.is_empty() {
            return Err(ConfigError::field("seeds", "must be nonempty"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ConfigError::field("delta", "must lie in (0, 1)"));
        }
        match (&self.agent, stop) {
            (AgentSpec::Orlc { .. }, _) => {}
            (AgentSpec::UniformBaseline, StopRule::Epsilon(_)) => {
                return Err(ConfigError::field(
                    "epsilon",
                    "uniform_baseline has no certificate; use `episodes`",
                ))
            }
            (AgentSpec::Domset { .. } | AgentSpec::Multitask { .. }, StopRule::Episodes(_)) => {
                return Err(ConfigError::field(
                    "episodes",
                    format!("{} stops on a certificate; use `epsilon`", self.agent.name()),
                ))
            }
            (AgentSpec::Multitask { tasks: 0, .. }, _) => {
                return Err(ConfigError::field("agent.tasks", "must be at least 1"))
            }
            _ => {}
        }
        if let Some(GraphOverride::Random { density, .. }) = &self.graph {
            if !(0.0..=1.0).contains(density) {
                return Err(ConfigError::field("graph.density", "must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Raw config JSON with a relative `instance.path` made relative to the
/// config file's directory.
pub fn load_value(path: &Path) -> Result<serde_json::Value, ConfigError> {
    let mut value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)
        .map_err(|e| ConfigError::field("", e.to_string()))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    if let Some(inst) = value.get_mut("instance").and_then(|i| i.as_object_mut()) {
        if inst.get("source").and_then(|s| s.as_str()) == Some("file") {
            if let Some(p) = inst.get("path").and_then(|p| p.as_str()).map(PathBuf::from) {
                if p.is_relative() {
                    let joined = dir.join(p).to_string_lossy().into_owned();
                    inst.insert("path".into(), joined.into());
                }
            }
        }
    }
    Ok(value)
}

/// Narrows a whole-config deserialization error to the section that causes it.
fn locate_error(value: &serde_json::Value, whole: serde_json::Error) -> ConfigError {
    use serde::de::DeserializeOwned;
    fn check<T: DeserializeOwned>(v: &serde_json::Value) -> Result<(), String> {
        serde_json::from_value::<T>(v.clone()).map(|_| ()).map_err(|e| e.to_string())
    }
    let Some(map) = value.as_object() else {
        return ConfigError::field("", whole.to_string());
    };
    if let Some(inst) = map.get("instance") {
        if let Some(params) = inst.get("params") {
            let r = match inst.get("source").and_then(|s| s.as_str()) {
                Some("random") => check::<RandomMdpParams>(params),
                Some("grid") => check::<GridParams>(params),
                Some("tree_bandit") => check::<TreeBanditParams>(params),
                Some("domset_hard") => check::<DomHardParams>(params),
                Some("star") => check::<StarParams>(params),
                _ => Ok(()),
            };
            if let Err(m) = r {
                return ConfigError::field("instance.params", m);
            }
        }
        if let Err(m) = check::<InstanceSource>(inst) {
            return ConfigError::field("instance", m);
        }
    }
    type Check = fn(&serde_json::Value) -> Result<(), String>;
    let sections: [(&str, Check); 9] = [
        ("graph", check::<Option<GraphOverride>>),
        ("agent", check::<AgentSpec>),
        ("episodes", check::<Option<usize>>),
        ("epsilon", check::<Option<f64>>),
        ("delta", check::<f64>),
        ("budget", check::<Option<usize>>),
        ("seeds", check::<Vec<u64>>),
        ("output", check::<Option<PathBuf>>),
        ("sweep", check::<Option<SweepAxis>>),
    ];
    for (key, f) in sections {
        if let Some(v) = map.get(key) {
            if let Err(m) = f(v) {
                return ConfigError::field(key, m);
            }
        }
    }
    ConfigError::field("", whole.to_string())
}

/// Sets `path` (dotted, numeric segments index arrays) inside `root`.
pub fn set_path(
    root: &mut serde_json::Value,
    path: &str,
    value: serde_json::Value,
) -> Result<(), ConfigError> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            serde_json::Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string())
                    .or_insert_with(|| serde_json::Value::Object(Default::default()))
            }
            serde_json::Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| ConfigError::field(path, format!("{part:?} is not an index")))?;
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| ConfigError::field(path, format!("index {idx} out of range")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(ConfigError::field(path, format!("{part:?} is not inside an object"))),
        };
    }
    Err(ConfigError::field(path, "empty path"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::json!({
            "format": "fgrl-config/1",
            "instance": {"source": "random", "params": {"states": 3, "actions": 2, "horizon": 2, "support": 2, "seed": 1}},
            "agent": {"kind": "orlc"},
            "episodes": 10,
            "seeds": [1, 2]
        })
    }

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_value(base()).unwrap();
        assert_eq!(cfg.stop_rule(), StopRule::Episodes(10));
        assert_eq!(cfg.delta, 0.1);
    }

    #[test]
    fn two_stop_rules_rejected() {
        let mut v = base();
        v["epsilon"] = serde_json::json!(0.5);
        let err = ExperimentConfig::from_value(v).unwrap_err().to_string();
        assert!(err.contains("exactly one"), "{err}");
    }

    #[test]
    fn errors_name_the_field() {
        let mut v = base();
        v["instance"]["params"]["states"] = serde_json::json!("three");
        let err = ExperimentConfig::from_value(v).unwrap_err().to_string();
        assert!(err.starts_with("instance.params:") && err.contains("three"), "{err}");
        let mut v = base();
        v["seeds"] = serde_json::json!([]);
        assert_eq!(ExperimentConfig::from_value(v).unwrap_err().to_string(), "seeds: must be nonempty");
        let mut v = base();
        v["format"] = serde_json::json!("fgrl-config/0");
        assert!(ExperimentConfig::from_value(v).unwrap_err().to_string().starts_with("format"));
    }

    #[test]
    fn agent_and_stop_rule_must_agree() {
        let mut v = base();
        v["agent"] = serde_json::json!({"kind": "domset"});
        let err = ExperimentConfig::from_value(v).unwrap_err().to_string();
        assert!(err.starts_with("episodes"), "{err}");
    }

    #[test]
    fn set_path_walks_objects_and_arrays() {
        let mut v = base();
        set_path(&mut v, "instance.params.seed", serde_json::json!(9)).unwrap();
        set_path(&mut v, "seeds.1", serde_json::json!(7)).unwrap();
        assert_eq!(v["instance"]["params"]["seed"], 9);
        assert_eq!(v["seeds"][1], 7);
        assert!(set_path(&mut v, "seeds.5", serde_json::json!(0)).is_err());
    }
}
