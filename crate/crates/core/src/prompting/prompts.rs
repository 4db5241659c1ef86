//! Prompt builders over the frozen templates in `prompts/`.

use crate::action::Action;
use crate::perception::LdictEntry;
use crate::topomap::{NodeId, TopoMap};
use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::scores::render_score_block;
use super::{History, ReasoningContext};

pub const LOCALIZATION_SYSTEM: &str = include_str!("../../prompts/localization_system.txt");
pub const LOCALIZATION_USER: &str = include_str!("../../prompts/localization_user.txt");
pub const ACTION_SYSTEM: &str = include_str!("../../prompts/action_system.txt");
pub const ACTION_USER: &str = include_str!("../../prompts/action_user.txt");
pub const DESCRIBE_SYSTEM: &str = include_str!("../../prompts/describe_system.txt");
pub const DESCRIBE_USER: &str = include_str!("../../prompts/describe_user.txt");
pub const PREDICT_SYSTEM: &str = include_str!("../../prompts/predict_system.txt");
pub const PREDICT_USER: &str = include_str!("../../prompts/predict_user.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseSchema {
    Localization,
    Action,
    Description,
    Prediction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptPacket {
    pub system_text: String,
    pub user_text: String,
    pub image: Option<RgbImage>,
    pub expected_schema: ResponseSchema,
    /// Answer keys in tie-break order; empty for free-text schemas.
    pub legal_answers: Vec<String>,
}

/// Replaces `{name}` slots. Unknown slots are left untouched.
pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in slots {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

fn action_text(action: Option<Action>) -> &'static str {
    action.map_or("no previous action", Action::label)
}

pub fn render_history(history: &History) -> String {
    let History::Enabled { previous, retrieved } = history else {
        return "History: no history available.".to_string();
    };
    let mut out = String::from("Previous step:\n");
    match previous {
        Some(p) => {
            out.push_str(&format!("- position: node {}\n", p.position));
            out.push_str(&format!("- action: {}\n", action_text(p.action)));
            out.push_str(&format!("- observation: {}\n", p.scene_description.as_deref().unwrap_or("none")));
        }
        None => out.push_str("- position: unknown\n- action: no previous action\n- observation: none\n"),
    }
    match retrieved {
        Some(r) => {
            out.push_str(&format!("Retrieved experience (step {}, similarity {:.3}):\n", r.step, r.similarity));
            out.push_str(&format!("- observation: {}\n", r.scene_description));
            out.push_str(&format!("- position: node {}\n", r.position));
            out.push_str(&format!("- action: {}", r.action.label()));
        }
        None => out.push_str("Retrieved experience: none"),
    }
    out
}

fn uniform_example(keys: &[String]) -> String {
    let p = 1.0 / keys.len() as f64;
    render_score_block(&keys.iter().map(|k| (k.clone(), p)).collect::<Vec<_>>())
}

/// Candidate ids as answer keys, ascending.
pub fn candidate_keys(candidates: &[NodeId]) -> Vec<String> {
    let mut ids = candidates.to_vec();
    ids.sort_unstable();
    ids.dedup();
    ids.iter().map(ToString::to_string).collect()
}

pub fn action_keys() -> Vec<String> {
    Action::ALL.iter().map(|a| a.label().to_string()).collect()
}

pub fn build_localization_prompt(ctx: &ReasoningContext, image: Option<&RgbImage>) -> PromptPacket {
    let keys = candidate_keys(&ctx.candidates);
    let user = fill(
        LOCALIZATION_USER,
        &[
            ("scene_description", &ctx.scene_description),
            ("history", &render_history(&ctx.history)),
            ("plan", &ctx.plan_text),
            ("candidates", &keys.join(", ")),
            ("example", &uniform_example(&keys)),
        ],
    );
    PromptPacket {
        system_text: LOCALIZATION_SYSTEM.to_string(),
        user_text: user,
        image: image.cloned(),
        expected_schema: ResponseSchema::Localization,
        legal_answers: keys,
    }
}

pub fn build_action_prompt(ctx: &ReasoningContext, position: NodeId, image: Option<&RgbImage>) -> PromptPacket {
    let keys = action_keys();
    let user = fill(
        ACTION_USER,
        &[
            ("scene_description", &ctx.scene_description),
            ("history", &render_history(&ctx.history)),
            ("plan", &ctx.plan_text),
            ("position", &position.to_string()),
            ("actions", &keys.join(", ")),
            ("example", &uniform_example(&keys)),
        ],
    );
    PromptPacket {
        system_text: ACTION_SYSTEM.to_string(),
        user_text: user,
        image: image.cloned(),
        expected_schema: ResponseSchema::Action,
        legal_answers: keys,
    }
}

pub fn ldict_lines(entries: &[LdictEntry]) -> String {
    if entries.is_empty() {
        return "(none)".to_string();
    }
    entries.iter().map(|e| format!("{} on your {}", e.label, e.quadrant.label())).collect::<Vec<_>>().join("\n")
}

pub fn build_describe_prompt(entries: &[LdictEntry], view: Option<&RgbImage>) -> PromptPacket {
    PromptPacket {
        system_text: DESCRIBE_SYSTEM.to_string(),
        user_text: fill(DESCRIBE_USER, &[("landmarks", &ldict_lines(entries))]),
        image: view.cloned(),
        expected_schema: ResponseSchema::Description,
        legal_answers: Vec::new(),
    }
}

pub fn build_predict_prompt(topo: &TopoMap, map_image: Option<&RgbImage>) -> PromptPacket {
    let nodes = topo
        .robot_nodes
        .iter()
        .map(|n| {
            let labels: Vec<&str> = topo.landmarks_at(n.id).map(|l| l.label.as_str()).collect();
            let labels = if labels.is_empty() { "(none)".to_string() } else { labels.join(", ") };
            format!("node {}: {labels}", n.id)
        })
        .collect::<Vec<_>>()
        .join("\n");
    PromptPacket {
        system_text: PREDICT_SYSTEM.to_string(),
        user_text: fill(PREDICT_USER, &[("nodes", &nodes)]),
        image: map_image.cloned(),
        expected_schema: ResponseSchema::Prediction,
        legal_answers: topo.robot_ids().iter().map(ToString::to_string).collect(),
    }
}
