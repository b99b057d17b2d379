//! The `fgrl-instance/1` JSON document: one MDP plus its feedback graph.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeSpec, FeedbackGraph, GraphError};
use crate::mdp::{ActionId, InitialStates, MdpError, RewardModel, StateActionSpace, StateId, TabularMdp};

pub const INSTANCE_FORMAT: &str = "fgrl-instance/1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("unsupported format {0:?}, expected \"fgrl-instance/1\"")]
    Version(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub format: String,
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub pairs: Vec<(StateId, ActionId)>,
    pub transitions: Vec<Vec<(StateId, f64)>>,
    pub rewards: Vec<RewardModel>,
    pub initial_states: InitialStates,
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub bias_seed: u64,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl InstanceDoc {
    pub fn from_parts(mdp: &TabularMdp, graph: &FeedbackGraph) -> Self {
        let space = mdp.space();
        Self {
            format: INSTANCE_FORMAT.to_string(),
            num_states: space.num_states(),
            num_actions: space.num_actions(),
            horizon: mdp.horizon(),
            pairs: space.pairs().to_vec(),
            transitions: (0..mdp.num_pairs()).map(|x| mdp.transition(x).to_vec()).collect(),
            rewards: (0..mdp.num_pairs()).map(|x| *mdp.reward_model(x)).collect(),
            initial_states: mdp.initial_states().clone(),
            edges: graph.edge_specs(),
            bias_seed: graph.bias_seed(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_metadata(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).expect("metadata serializes");
        self.metadata.insert(key.to_string(), v);
        self
    }

    pub fn build(&self) -> Result<(TabularMdp, FeedbackGraph), FormatError> {
        if self.format != INSTANCE_FORMAT {
            return Err(FormatError::Version(self.format.clone()));
        }
        let space = StateActionSpace::new(self.num_states, self.num_actions, self.pairs.clone())?;
        let mdp = TabularMdp::new(
            space,
            self.horizon,
            self.transitions.clone(),
            self.rewards.clone(),
            self.initial_states.clone(),
        )?;
        let graph =
            FeedbackGraph::with_bias_seed(self.pairs.len(), self.edges.iter().copied(), self.bias_seed)?;
        graph.check_compatible(&mdp)?;
        Ok((mdp, graph))
    }

    pub fn from_json(s: &str) -> Result<Self, FormatError> {
        // Check the tag first so an old document gets a version error rather
        // than a confusing missing-field one.
        let raw: serde_json::Value = serde_json::from_str(s)?;
        match raw.get("format").and_then(|f| f.as_str()) {
            Some(INSTANCE_FORMAT) => Ok(serde_json::from_value(raw)?),
            other => Err(FormatError::Version(other.unwrap_or("").to_string())),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<(TabularMdp, FeedbackGraph), FormatError> {
    InstanceDoc::from_json(&std::fs::read_to_string(path)?)?.build()
}

pub fn save_instance(path: impl AsRef<Path>, doc: &InstanceDoc) -> Result<(), FormatError> {
    std::fs::write(path, doc.to_json())?;
    Ok(())
}
