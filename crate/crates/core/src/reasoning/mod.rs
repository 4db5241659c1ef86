//! Reasoning backends: scene description, landmark prediction,
//! localization and action selection.

mod oracle;
mod remote;

pub use oracle::{OracleBackend, OracleRules};
pub use remote::{RemoteBackend, RemoteConfig, API_KEY_ENV};

use crate::action::{Action, TurnDirection};
use crate::perception::LdictEntry;
use crate::prompting::{PromptError, ReasoningContext, ScoredResponse, SvapImage};
use crate::topomap::{NodeId, TopoMap};
use image::RgbImage;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend call timed out")]
    Timeout,
    #[error("response has no score block")]
    Unparseable,
    #[error("every legal answer scored zero")]
    AllZero,
    #[error("malformed landmark prediction: {0}")]
    MalformedPrediction(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl From<PromptError> for BackendError {
    fn from(e: PromptError) -> Self {
        match e {
            PromptError::AllZero => BackendError::AllZero,
            PromptError::Unparseable => BackendError::Unparseable,
            other => BackendError::InvalidRequest(other.to_string()),
        }
    }
}

/// A structural landmark seen in the current view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerceivedTurn {
    pub direction: TurnDirection,
    /// The opening starts at the robot's current cell.
    pub near: bool,
}

/// Structured perception results for the current step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Percept {
    pub ldict: Vec<LdictEntry>,
    pub turns: Vec<PerceivedTurn>,
}

/// Inputs to localization and action selection.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub svap: &'a SvapImage,
    pub context: &'a ReasoningContext,
    pub percept: &'a Percept,
    /// Full topological map, predictions included.
    pub topo: &'a TopoMap,
}

pub trait ReasoningBackend: Send + Sync {
    fn id(&self) -> &str;

    fn describe_scene(&self, view: Option<&RgbImage>, entries: &[LdictEntry]) -> Result<String, BackendError>;

    fn predict_landmarks(
        &self,
        map_image: &RgbImage,
        topo: &TopoMap,
    ) -> Result<BTreeMap<NodeId, Vec<String>>, BackendError>;

    fn localize(&self, query: Query<'_>) -> Result<(NodeId, ScoredResponse), BackendError>;

    fn select_action(&self, query: Query<'_>, position: NodeId) -> Result<(Action, ScoredResponse), BackendError>;
}

/// Per-episode backend call accounting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CallStats {
    pub describe: u32,
    pub predict: u32,
    pub localize: u32,
    pub act: u32,
    pub latency_s: f64,
}

impl CallStats {
    pub fn total(&self) -> u32 {
        self.describe + self.predict + self.localize + self.act
    }
}
