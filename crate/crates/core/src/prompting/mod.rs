//! Prompt artifacts: the composite visual prompt, the navigation plan,
//! text prompts for localization and action selection, and score parsing.

pub mod plan;
pub mod prompts;
pub mod scores;
pub mod svap;

use crate::action::Action;
use crate::topomap::NodeId;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use plan::{generate_plan, NavPlan, EXPECTED_MARKER};
pub use prompts::{
    build_action_prompt, build_describe_prompt, build_localization_prompt, build_predict_prompt, PromptPacket,
    ResponseSchema,
};
pub use scores::{parse_scored_response, render_score_block, ScoredResponse};
pub use svap::{render_svap, SvapImage};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("candidate set is empty")]
    EmptyCandidateSet,
    #[error("no score block found in response")]
    Unparseable,
    #[error("every legal answer scored zero")]
    AllZero,
    #[error("legal answer set is empty")]
    NoLegalAnswers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviousStep {
    pub position: NodeId,
    pub action: Option<Action>,
    pub scene_description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedExperience {
    pub step: u32,
    pub scene_description: String,
    pub position: NodeId,
    pub action: Action,
    pub similarity: f64,
}

/// What the prompts may know about earlier steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum History {
    /// Experience memory ablated: prompts carry no previous step at all.
    Disabled,
    Enabled {
        previous: Option<PreviousStep>,
        retrieved: Option<RetrievedExperience>,
    },
}

impl History {
    pub fn none() -> Self {
        History::Enabled { previous: None, retrieved: None }
    }

    pub fn previous(&self) -> Option<&PreviousStep> {
        match self {
            History::Enabled { previous, .. } => previous.as_ref(),
            History::Disabled => None,
        }
    }

    pub fn retrieved(&self) -> Option<&RetrievedExperience> {
        match self {
            History::Enabled { retrieved, .. } => retrieved.as_ref(),
            History::Disabled => None,
        }
    }
}

/// Text inputs shared by the localization and action prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningContext {
    pub scene_description: String,
    pub history: History,
    pub plan_text: String,
    pub candidates: Vec<NodeId>,
}
