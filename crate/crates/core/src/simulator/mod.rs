//! Deterministic grid-world environment.

mod render;
mod sketch;
mod world;

pub use render::{observe, ViewConfig};
pub use sketch::{
    cell_center_px, distort, distort_scene, ground_truth_scene, route_corners, DistortionConfig, SketchScene,
    PX_PER_CELL,
};
pub use world::{load_world, Cell, CellRef, Floor, GridWorld, Heading, RobotPose, WorldFile, WorldLandmark};

use crate::action::Action;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("world schema: {0}")]
    Schema(String),
    #[error("no free path joins start and goal")]
    DisconnectedStartGoal,
    #[error("invalid distortion config: {0}")]
    InvalidDistortion(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResult {
    pub pose: RobotPose,
    pub advanced_cells: u32,
}

/// Executes a discrete action. Forward advances up to `stride` cells and
/// stops early at walls; on a stair cell, forward into a wall moves to the
/// paired cell, keeping the heading, and counts as one cell.
pub fn execute(world: &GridWorld, pose: &RobotPose, action: Action, stride: u32) -> StepResult {
    let mut pose = *pose;
    let mut advanced = 0;
    match action {
        Action::TurnLeft => pose.heading = pose.heading.left(),
        Action::TurnRight => pose.heading = pose.heading.right(),
        Action::Stop => {}
        Action::MoveForward => {
            for _ in 0..stride {
                let ahead = pose.cell.step(pose.heading);
                if world.is_free(ahead) {
                    pose.cell = ahead;
                } else if let Some(partner) = world.stair_partner(pose.cell) {
                    pose.cell = partner;
                } else {
                    break;
                }
                advanced += 1;
            }
        }
    }
    StepResult { pose, advanced_cells: advanced }
}

pub const SUCCESS_RADIUS_M: f64 = 0.5;

/// Reference length for SPL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplReference {
    /// Shortest free path in the world.
    Shortest,
    /// The sketched path converted to meters.
    Sketch { length_m: f64 },
}

/// What metrics need from a finished episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub final_pose: RobotPose,
    /// The episode ended with a stop action.
    pub stopped: bool,
    pub advanced_cells: Vec<u32>,
    pub backend_latency_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub success: bool,
    pub spl: f64,
    pub distance_m: f64,
    pub steps: u32,
    pub backend_latency_s: f64,
}

/// Distance in meters from a pose to the goal centre; infinite across floors.
pub fn distance_to_goal(world: &GridWorld, pose: &RobotPose) -> f64 {
    if pose.cell.floor != world.goal.floor {
        return f64::INFINITY;
    }
    let dc = (pose.cell.col - world.goal.col) as f64;
    let dr = (pose.cell.row - world.goal.row) as f64;
    dc.hypot(dr) * world.cell_size
}

pub fn spl(success: bool, reference_m: f64, traveled_m: f64) -> f64 {
    if !success {
        return 0.0;
    }
    let denom = traveled_m.max(reference_m);
    if denom <= 0.0 {
        1.0
    } else {
        reference_m / denom
    }
}

pub fn metrics(world: &GridWorld, outcome: &EpisodeOutcome, reference: SplReference) -> Metrics {
    let distance_m = f64::from(outcome.advanced_cells.iter().sum::<u32>()) * world.cell_size;
    let success = outcome.stopped && distance_to_goal(world, &outcome.final_pose) <= SUCCESS_RADIUS_M;
    let reference_m = match reference {
        SplReference::Shortest => world.shortest_path_length_m(),
        SplReference::Sketch { length_m } => length_m,
    };
    Metrics {
        success,
        spl: spl(success, reference_m, distance_m),
        distance_m,
        steps: outcome.advanced_cells.len() as u32,
        backend_latency_s: outcome.backend_latency_s,
    }
}
