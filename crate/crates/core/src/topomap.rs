//! Topological map built over the sketched path: a chain of robot position
//! nodes plus landmark nodes, each attached to one robot node.

use crate::action::{Action, TurnDirection};
use crate::geometry::{signed_turn_deg, Point};
use crate::sketchmap::{resample_path, HandDrawnMap, SketchError, Waypoint};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub type NodeId = usize;

pub const DEFAULT_ANGLE_THRESHOLD_DEG: f64 = 30.0;

#[derive(Debug, Error)]
pub enum TopoError {
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error("unknown robot node {0}")]
    UnknownNode(NodeId),
    #[error("nodes {0} and {1} are not connected")]
    Disconnected(NodeId, NodeId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotNode {
    pub id: NodeId,
    pub position: Point,
    pub is_junction: bool,
    pub floor: i32,
    /// Signed heading change at this node in degrees, positive = right.
    #[serde(default)]
    pub heading_change_deg: f64,
}

impl RobotNode {
    pub fn junction_direction(&self) -> Option<TurnDirection> {
        if !self.is_junction {
            None
        } else if self.heading_change_deg < 0.0 {
            Some(TurnDirection::Left)
        } else {
            Some(TurnDirection::Right)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkNode {
    pub id: NodeId,
    pub label: String,
    pub position: Point,
    pub floor: i32,
    pub predicted: bool,
    /// Robot node this landmark's association edge points to.
    pub anchor: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoMap {
    pub robot_nodes: Vec<RobotNode>,
    pub landmark_nodes: Vec<LandmarkNode>,
}

/// Logistic retention parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub threshold: f64,
}

impl Default for PruneParams {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 2.0, gamma: 0.5, threshold: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalAction {
    TurnLeft,
    TurnRight,
    Stop,
}

impl TerminalAction {
    pub fn label(self) -> &'static str {
        match self {
            TerminalAction::TurnLeft => "turn left",
            TerminalAction::TurnRight => "turn right",
            TerminalAction::Stop => "stop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentLandmark {
    pub label: String,
    pub predicted: bool,
    pub anchor: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub nodes: Vec<NodeId>,
    pub landmarks: Vec<SegmentLandmark>,
    pub terminal_action: TerminalAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopoConfig {
    /// Robot-node spacing in pixels; `None` uses a twentieth of the drawing diagonal.
    pub node_interval: Option<f64>,
    /// Landmarks farther than this from every robot node are ignored.
    pub assoc_radius: Option<f64>,
    pub angle_threshold_deg: f64,
}

impl Default for TopoConfig {
    fn default() -> Self {
        Self { node_interval: None, assoc_radius: None, angle_threshold_deg: DEFAULT_ANGLE_THRESHOLD_DEG }
    }
}

impl TopoConfig {
    pub fn interval_for(&self, map: &HandDrawnMap) -> f64 {
        self.node_interval.unwrap_or_else(|| map.diagonal() / 20.0)
    }
}

/// Splits a path into maximal same-floor runs.
fn floor_runs(path: &[Waypoint]) -> Vec<(i32, Vec<Point>)> {
    let mut runs: Vec<(i32, Vec<Point>)> = Vec::new();
    for w in path {
        match runs.last_mut() {
            Some((floor, pts)) if *floor == w.floor => pts.push(w.point),
            _ => runs.push((w.floor, vec![w.point])),
        }
    }
    runs
}

impl TopoMap {
    /// Builds the topological map: robot nodes resampled along the path,
    /// and each landmark attached to its nearest robot node on the same
    /// floor (ties go to the lower node id).
    pub fn build(map: &HandDrawnMap, node_interval: f64, assoc_radius: Option<f64>) -> Result<TopoMap, TopoError> {
        let runs = floor_runs(&map.path);
        let total: f64 = runs.iter().map(|(_, pts)| crate::geometry::polyline_length(pts)).sum();
        if total <= 0.0 {
            return Err(SketchError::ZeroLengthPath.into());
        }
        let mut robot_nodes = Vec::new();
        for (floor, pts) in runs {
            let samples = if pts.len() < 2 || crate::geometry::polyline_length(&pts) <= 0.0 {
                vec![pts[0]]
            } else {
                resample_path(&pts, node_interval)?
            };
            for position in samples {
                robot_nodes.push(RobotNode {
                    id: robot_nodes.len(),
                    position,
                    is_junction: false,
                    floor,
                    heading_change_deg: 0.0,
                });
            }
        }

        let mut landmark_nodes = Vec::new();
        for l in &map.landmarks {
            let same_floor = robot_nodes.iter().any(|n| n.floor == l.floor);
            let mut best: Option<(NodeId, f64)> = None;
            for n in robot_nodes.iter().filter(|n| !same_floor || n.floor == l.floor) {
                let d = n.position.distance(l.position);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((n.id, d));
                }
            }
            let Some((anchor, dist)) = best else { continue };
            if assoc_radius.is_some_and(|r| dist > r) {
                log::debug!("landmark {:?} is {dist:.1}px from the path, skipped", l.label);
                continue;
            }
            landmark_nodes.push(LandmarkNode {
                id: robot_nodes.len() + landmark_nodes.len(),
                label: l.label.clone(),
                position: l.position,
                floor: l.floor,
                predicted: false,
                anchor,
            });
        }
        Ok(TopoMap { robot_nodes, landmark_nodes })
    }

    /// Builds with a [`TopoConfig`] and marks junctions.
    pub fn from_map(map: &HandDrawnMap, config: &TopoConfig) -> Result<TopoMap, TopoError> {
        Ok(Self::build(map, config.interval_for(map), config.assoc_radius)?.mark_junctions(config.angle_threshold_deg))
    }

    pub fn start_node(&self) -> NodeId {
        self.robot_nodes[0].id
    }

    pub fn goal_node(&self) -> NodeId {
        self.robot_nodes[self.robot_nodes.len() - 1].id
    }

    pub fn robot_index(&self, id: NodeId) -> Option<usize> {
        self.robot_nodes.binary_search_by_key(&id, |n| n.id).ok()
    }

    pub fn robot_node(&self, id: NodeId) -> Option<&RobotNode> {
        self.robot_index(id).map(|i| &self.robot_nodes[i])
    }

    pub fn robot_ids(&self) -> Vec<NodeId> {
        self.robot_nodes.iter().map(|n| n.id).collect()
    }

    /// Association and chain edges. Chain edges join consecutive robot nodes
    /// whose ids are adjacent, so pruned maps only keep edges between
    /// retained neighbours.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut edges: Vec<(NodeId, NodeId)> =
            self.robot_nodes.windows(2).filter(|w| w[1].id == w[0].id + 1).map(|w| (w[0].id, w[1].id)).collect();
        edges.extend(self.landmark_nodes.iter().map(|l| (l.anchor, l.id)));
        edges
    }

    /// Direction of chain edge `i -> i+1` (by index). Floor-change edges
    /// inherit the previous same-floor heading, since the drawn jump between
    /// floor plans says nothing about travel direction.
    fn edge_heading(&self, i: usize) -> Point {
        let n = &self.robot_nodes;
        let raw = |j: usize| n[j + 1].position - n[j].position;
        if n[i].floor == n[i + 1].floor {
            return raw(i);
        }
        (0..i)
            .rev()
            .find(|&j| n[j].floor == n[j + 1].floor)
            .or_else(|| (i + 1..n.len() - 1).find(|&j| n[j].floor == n[j + 1].floor))
            .map(raw)
            .unwrap_or_default()
    }

    /// Marks robot node `i` as a junction when the heading change between
    /// its incoming and outgoing chain edges exceeds `angle_threshold_deg`.
    /// Endpoints never are.
    pub fn mark_junctions(&self, angle_threshold_deg: f64) -> TopoMap {
        let mut out = self.clone();
        let n = out.robot_nodes.len();
        for i in 0..n {
            let change = if i == 0 || i + 1 == n {
                0.0
            } else {
                signed_turn_deg(self.edge_heading(i - 1), self.edge_heading(i))
            };
            out.robot_nodes[i].heading_change_deg = change;
            out.robot_nodes[i].is_junction = change.abs() > angle_threshold_deg;
        }
        out
    }

    pub fn junctions(&self) -> Vec<NodeId> {
        self.robot_nodes.iter().filter(|n| n.is_junction).map(|n| n.id).collect()
    }

    pub fn landmarks_at(&self, node: NodeId) -> impl Iterator<Item = &LandmarkNode> {
        self.landmark_nodes.iter().filter(move |l| l.anchor == node)
    }

    /// Splits the chain at junction nodes; each junction closes its segment.
    pub fn segment_by_junctions(&self) -> Vec<Segment> {
        let mut segments = Vec::new();
        let mut current: Vec<NodeId> = Vec::new();
        let last = self.robot_nodes.len().saturating_sub(1);
        for (i, node) in self.robot_nodes.iter().enumerate() {
            current.push(node.id);
            let terminal = match node.junction_direction() {
                Some(TurnDirection::Left) if i != last => Some(TerminalAction::TurnLeft),
                Some(TurnDirection::Right) if i != last => Some(TerminalAction::TurnRight),
                _ if i == last => Some(TerminalAction::Stop),
                _ => None,
            };
            if let Some(terminal_action) = terminal {
                let nodes = std::mem::take(&mut current);
                let landmarks = self
                    .landmark_nodes
                    .iter()
                    .filter(|l| nodes.contains(&l.anchor))
                    .map(|l| SegmentLandmark { label: l.label.clone(), predicted: l.predicted, anchor: l.anchor })
                    .collect();
                segments.push(Segment { nodes, landmarks, terminal_action });
            }
        }
        segments
    }

    /// Hop count along chain edges between two robot nodes.
    pub fn graph_distance(&self, a: NodeId, b: NodeId) -> Result<usize, TopoError> {
        let ia = self.robot_index(a).ok_or(TopoError::UnknownNode(a))?;
        let ib = self.robot_index(b).ok_or(TopoError::UnknownNode(b))?;
        let (lo, hi) = (ia.min(ib), ia.max(ib));
        // The chain is simple, so hops equal the index gap whenever every
        // node in between is present.
        if self.robot_nodes[hi].id - self.robot_nodes[lo].id != hi - lo {
            return Err(TopoError::Disconnected(a, b));
        }
        Ok(hi - lo)
    }

    /// Transition inconsistency: 0 when `node` is reachable from `prev`
    /// under `prev_action`, 1 otherwise.
    pub fn transition_penalty(&self, node: NodeId, prev: NodeId, prev_action: Option<Action>) -> f64 {
        let (Some(i), Some(p)) = (self.robot_index(node), self.robot_index(prev)) else {
            return 1.0;
        };
        let reachable = match prev_action {
            None => true,
            Some(Action::MoveForward) => i >= p && i - p <= 2,
            Some(_) => i.abs_diff(p) <= 1,
        };
        if reachable {
            0.0
        } else {
            1.0
        }
    }

    /// Logistic retention probability of `node` given the previous estimate
    /// and action.
    pub fn retention(
        &self,
        node: NodeId,
        prev: NodeId,
        prev_action: Option<Action>,
        params: &PruneParams,
    ) -> Result<f64, TopoError> {
        let d = self.graph_distance(node, prev)? as f64;
        let delta = self.transition_penalty(node, prev, prev_action);
        Ok(retention_probability(d, delta, params))
    }

    /// Keeps robot nodes whose retention strictly exceeds the threshold,
    /// always keeping `prev` itself. With no previous estimate every node is
    /// kept. Landmarks follow their anchors.
    pub fn prune(&self, prev: Option<NodeId>, prev_action: Option<Action>, params: &PruneParams) -> TopoMap {
        let Some(prev) = prev.filter(|p| self.robot_index(*p).is_some()) else {
            return self.clone();
        };
        let keep: BTreeSet<NodeId> = self
            .robot_nodes
            .iter()
            .filter(|n| {
                n.id == prev || self.retention(n.id, prev, prev_action, params).is_ok_and(|z| z > params.threshold)
            })
            .map(|n| n.id)
            .collect();
        self.subgraph(&keep)
    }

    pub fn subgraph(&self, keep: &BTreeSet<NodeId>) -> TopoMap {
        TopoMap {
            robot_nodes: self.robot_nodes.iter().filter(|n| keep.contains(&n.id)).cloned().collect(),
            landmark_nodes: self.landmark_nodes.iter().filter(|l| keep.contains(&l.anchor)).cloned().collect(),
        }
    }

    /// Adds predicted landmarks at the given robot nodes. A (label, node)
    /// pair that already exists is skipped, so repeated calls are no-ops.
    pub fn integrate_predictions(&self, predictions: &BTreeMap<NodeId, Vec<String>>) -> Result<TopoMap, TopoError> {
        let mut out = self.clone();
        let mut next_id = self
            .robot_nodes
            .iter()
            .map(|n| n.id)
            .chain(self.landmark_nodes.iter().map(|l| l.id))
            .max()
            .map_or(0, |m| m + 1);
        let key = |label: &str| label.trim().to_lowercase();
        let mut existing: BTreeSet<(String, NodeId)> =
            self.landmark_nodes.iter().map(|l| (key(&l.label), l.anchor)).collect();
        for (&node, labels) in predictions {
            let robot = self.robot_node(node).ok_or(TopoError::UnknownNode(node))?;
            for label in labels {
                let label = label.trim();
                if label.is_empty() || !existing.insert((key(label), node)) {
                    continue;
                }
                out.landmark_nodes.push(LandmarkNode {
                    id: next_id,
                    label: label.to_string(),
                    position: robot.position,
                    floor: robot.floor,
                    predicted: true,
                    anchor: node,
                });
                next_id += 1;
            }
        }
        Ok(out)
    }

    /// Distinct landmark labels, drawn and predicted.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        self.landmark_nodes.iter().map(|l| l.label.to_lowercase()).collect()
    }

    /// Debug/overlay graph file with node and edge arrays.
    pub fn to_graph_json(&self) -> serde_json::Value {
        let mut nodes: Vec<serde_json::Value> = self
            .robot_nodes
            .iter()
            .map(|n| {
                serde_json::json!({
                    "id": n.id, "kind": "robot", "x": n.position.x, "y": n.position.y,
                    "floor": n.floor, "junction": n.is_junction,
                })
            })
            .collect();
        nodes.extend(self.landmark_nodes.iter().map(|l| {
            serde_json::json!({
                "id": l.id, "kind": "landmark", "label": l.label, "x": l.position.x,
                "y": l.position.y, "floor": l.floor, "predicted": l.predicted,
            })
        }));
        let edges: Vec<[NodeId; 2]> = self.edges().into_iter().map(|(a, b)| [a, b]).collect();
        serde_json::json!({ "version": 1, "nodes": nodes, "edges": edges })
    }
}

/// `1 / (1 + exp(alpha * (d - beta) + gamma * delta))`.
pub fn retention_probability(hops: f64, delta: f64, params: &PruneParams) -> f64 {
    1.0 / (1.0 + (params.alpha * (hops - params.beta) + params.gamma * delta).exp())
}
