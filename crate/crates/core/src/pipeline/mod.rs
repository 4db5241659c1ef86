//! Per-step orchestration: perception and prompt preparation, position
//! estimation, action selection, and bookkeeping for the next step.

mod episode;
mod trace;

pub use episode::{run, EpisodeResult, SimConfig, SimEpisode, SplRefKind};
pub use trace::{EpisodeTrace, ObservationSummary, SimInfo, StepTrace, TraceHeader};

use crate::action::Action;
use crate::memory::{ExperienceStore, MemoryError};
use crate::perception::{
    annotate_view, assign_quadrants, classify_turns, extract_edges, Detector, HoughParams, Observation, Segmenter,
};
use crate::prompting::{
    generate_plan, render_svap, History, NavPlan, PreviousStep, PromptError, ReasoningContext, RetrievedExperience,
    SvapImage,
};
use crate::reasoning::{BackendError, CallStats, PerceivedTurn, Percept, Query, ReasoningBackend};
use crate::sketchmap::HandDrawnMap;
use crate::topomap::{NodeId, PruneParams, TopoConfig, TopoError, TopoMap};
use image::RgbImage;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Topo(#[from] TopoError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("episode is not running")]
    NotRunning,
    #[error("step limit reached")]
    StepLimit,
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationFlags {
    pub no_ldict: bool,
    pub no_predicted_landmarks: bool,
    pub no_pruning: bool,
    pub no_experience: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown ablation {0:?}; expected no_ldict, no_pred, no_pruning or no_em")]
pub struct UnknownAblation(pub String);

impl AblationFlags {
    pub const NAMES: [&'static str; 4] = ["no_ldict", "no_pred", "no_pruning", "no_em"];

    /// Parses a comma-separated list such as `no_em,no_pruning`.
    pub fn parse_list(list: &str) -> Result<Self, UnknownAblation> {
        let mut f = Self::default();
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "no_ldict" => f.no_ldict = true,
                "no_pred" | "no_predicted_landmarks" => f.no_predicted_landmarks = true,
                "no_pruning" => f.no_pruning = true,
                "no_em" | "no_experience" => f.no_experience = true,
                other => return Err(UnknownAblation(other.to_string())),
            }
        }
        Ok(f)
    }

    /// Short variant name: `full` or the enabled ablations joined by `+`.
    pub fn variant_name(&self) -> String {
        let on = [self.no_ldict, self.no_predicted_landmarks, self.no_pruning, self.no_experience];
        let names: Vec<&str> = Self::NAMES.iter().zip(on).filter(|(_, b)| *b).map(|(n, _)| *n).collect();
        if names.is_empty() {
            "full".to_string()
        } else {
            names.join("+")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub flags: AblationFlags,
    pub topo: TopoConfig,
    pub prune: PruneParams,
    pub hough: Option<HoughParams>,
    /// Detected turns whose anchor is at most this deep count as being at
    /// the robot's current position.
    pub near_turn_depth_m: f64,
    /// Defaults to four times the robot-node count.
    pub max_steps: Option<u32>,
    /// Zeroes latencies and timestamps so traces are byte-stable.
    pub deterministic: bool,
    /// Keep SVAP rasters in the step results.
    pub keep_svap: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            flags: AblationFlags::default(),
            topo: TopoConfig::default(),
            prune: PruneParams::default(),
            hough: None,
            near_turn_depth_m: 2.5,
            max_steps: None,
            deterministic: false,
            keep_svap: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Running,
    Succeeded,
    Failed,
    Aborted,
}

impl EpisodeStatus {
    pub fn is_terminal(self) -> bool {
        self != EpisodeStatus::Running
    }
}

/// Perception models used by the pipeline.
pub struct Perception<'a> {
    pub detector: &'a dyn Detector,
    pub segmenter: &'a dyn Segmenter,
}

#[derive(Debug, Clone)]
pub struct EpisodeState {
    pub map: HandDrawnMap,
    pub topo: TopoMap,
    pub plan: NavPlan,
    pub store: ExperienceStore,
    /// Previous estimate and action (p', a').
    pub prev_position: Option<NodeId>,
    pub prev_action: Option<Action>,
    pub prev_scene: Option<String>,
    pub t: u32,
    pub max_steps: u32,
    pub status: EpisodeStatus,
    pub stats: CallStats,
    pub config: PipelineConfig,
}

/// Result of one pipeline step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub trace: StepTrace,
    pub action: Action,
    pub svap: Option<SvapImage>,
}

fn timed<T>(deterministic: bool, f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let v = f();
    (v, if deterministic { 0.0 } else { start.elapsed().as_secs_f64() })
}

/// Builds the topological map, runs landmark prediction once, and writes
/// the navigation plan.
pub fn init_episode(
    map: HandDrawnMap,
    backend: &dyn ReasoningBackend,
    config: PipelineConfig,
) -> Result<EpisodeState, PipelineError> {
    let mut topo = TopoMap::from_map(&map, &config.topo)?;
    let mut stats = CallStats::default();
    if !config.flags.no_predicted_landmarks {
        let (pred, dt) = timed(config.deterministic, || backend.predict_landmarks(&map.drawing, &topo));
        stats.predict += 1;
        stats.latency_s += dt;
        topo = topo.integrate_predictions(&pred?)?;
    }
    let plan = generate_plan(&topo);
    let max_steps = config.max_steps.unwrap_or(4 * topo.robot_nodes.len() as u32);
    Ok(EpisodeState {
        prev_position: Some(topo.start_node()),
        prev_action: None,
        prev_scene: None,
        map,
        topo,
        plan,
        store: ExperienceStore::default(),
        t: 0,
        max_steps,
        status: EpisodeStatus::Running,
        stats,
        config,
    })
}

fn perceive(state: &EpisodeState, obs: &Observation, models: &Perception<'_>) -> (Percept, RgbImage) {
    let vocabulary = state.topo.vocabulary();
    let objects = models.detector.detect(obs, &vocabulary);
    let mut filtered = obs.clone();
    filtered.objects = objects;
    let ldict = if state.config.flags.no_ldict { Vec::new() } else { assign_quadrants(&filtered) };

    let mut turns = Vec::new();
    let mut turn_boxes = Vec::new();
    if let Some(mask) = models.segmenter.segment(obs) {
        let params = state.config.hough.unwrap_or_else(|| HoughParams::for_width(obs.width));
        if let Ok(edges) = extract_edges(&mask, &params) {
            for t in classify_turns(&edges, obs.width, obs.height) {
                let near = obs.depth.as_ref().is_some_and(|d| {
                    let x = (t.bbox.center_x() as u32).min(d.width() - 1);
                    let y = (t.bbox.y_min as u32).min(d.height() - 1);
                    let z = f64::from(d.get_pixel(x, y)[0]);
                    z > 0.0 && z <= state.config.near_turn_depth_m
                });
                turns.push(PerceivedTurn { direction: t.direction, near });
                turn_boxes.push(t);
            }
        }
    }
    let view = obs.view_image.clone().unwrap_or_else(|| RgbImage::new(obs.width, obs.height));
    let shown = if state.config.flags.no_ldict { &[][..] } else { &filtered.objects[..] };
    let annotated = annotate_view(&view, shown, &turn_boxes);
    (Percept { ldict, turns }, annotated)
}

/// Runs one step on `observation`. Backend failures abort the episode.
pub fn step(
    state: &mut EpisodeState,
    backend: &dyn ReasoningBackend,
    models: &Perception<'_>,
    observation: &Observation,
) -> Result<StepOutput, PipelineError> {
    if state.status != EpisodeStatus::Running {
        return Err(PipelineError::NotRunning);
    }
    if state.t >= state.max_steps {
        state.status = EpisodeStatus::Aborted;
        return Err(PipelineError::StepLimit);
    }
    let result = step_inner(state, backend, models, observation);
    if result.is_err() {
        state.status = EpisodeStatus::Aborted;
    }
    result
}

fn step_inner(
    state: &mut EpisodeState,
    backend: &dyn ReasoningBackend,
    models: &Perception<'_>,
    observation: &Observation,
) -> Result<StepOutput, PipelineError> {
    let det = state.config.deterministic;
    let flags = state.config.flags;
    let (percept, annotated) = perceive(state, observation, models);

    let (sd, describe_s) = timed(det, || backend.describe_scene(Some(&annotated), &percept.ldict));
    state.stats.describe += 1;
    let sd = sd?;

    let retrieved = if flags.no_experience {
        None
    } else {
        state.store.retrieve(&sd).map(|(e, similarity)| RetrievedExperience {
            step: e.step,
            scene_description: e.scene_description.clone(),
            position: e.position,
            action: e.action,
            similarity,
        })
    };

    let pruned = if flags.no_pruning {
        state.topo.clone()
    } else {
        state.topo.prune(state.prev_position, state.prev_action, &state.config.prune)
    };
    let svap = render_svap(&annotated, &state.map.drawing, &pruned)?;
    let candidates = pruned.robot_ids();

    let history = if flags.no_experience {
        History::Disabled
    } else {
        History::Enabled {
            previous: state.prev_position.map(|position| PreviousStep {
                position,
                action: state.prev_action,
                scene_description: state.prev_scene.clone(),
            }),
            retrieved: retrieved.clone(),
        }
    };
    let context = ReasoningContext {
        scene_description: sd.clone(),
        history,
        plan_text: state.plan.full_text.clone(),
        candidates: candidates.clone(),
    };
    let query = Query { svap: &svap, context: &context, percept: &percept, topo: &state.topo };

    let (loc, localize_s) = timed(det, || backend.localize(query));
    state.stats.localize += 1;
    let (position, loc_scores, loc_fallback) = match loc {
        Ok((p, r)) if candidates.contains(&p) => (p, r.scores, false),
        Ok(_) | Err(BackendError::AllZero | BackendError::Unparseable) => {
            let p = state.prev_position.filter(|p| candidates.contains(p)).unwrap_or(candidates[0]);
            (p, Vec::new(), true)
        }
        Err(e) => return Err(e.into()),
    };

    let (act, act_s) = timed(det, || backend.select_action(query, position));
    state.stats.act += 1;
    let (action, act_scores, act_fallback) = match act {
        Ok((a, r)) => (a, r.scores, false),
        Err(BackendError::AllZero | BackendError::Unparseable) => (Action::Stop, Vec::new(), true),
        Err(e) => return Err(e.into()),
    };
    state.stats.latency_s += describe_s + localize_s + act_s;

    state.store.record_step(state.t, &sd, position, action)?;
    let trace = StepTrace {
        t: state.t,
        observation: ObservationSummary::from_percept(&percept),
        scene_description: sd.clone(),
        retrieved: retrieved.map(|r| (r.step, r.similarity)),
        prev_position: state.prev_position,
        prev_action: state.prev_action,
        candidates,
        svap_path: None,
        localization_scores: loc_scores,
        position,
        localization_fallback: loc_fallback,
        action_scores: act_scores,
        action,
        action_fallback: act_fallback,
        latency_s: [describe_s, localize_s, act_s],
        sim: None,
    };

    state.prev_position = Some(position);
    state.prev_action = Some(action);
    state.prev_scene = Some(sd);
    state.t += 1;
    if action == Action::Stop {
        state.status =
            if position == state.topo.goal_node() { EpisodeStatus::Succeeded } else { EpisodeStatus::Failed };
    } else if state.t >= state.max_steps {
        state.status = EpisodeStatus::Aborted;
    }
    let svap = state.config.keep_svap.then_some(svap);
    Ok(StepOutput { trace, action, svap })
}
