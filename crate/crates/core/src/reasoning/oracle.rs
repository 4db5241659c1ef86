//! Deterministic rule-based backend over ground-truth-like percepts.

use crate::action::{Action, TurnDirection};
use crate::perception::LdictEntry;
use crate::prompting::prompts::{action_keys, candidate_keys};
use crate::prompting::ScoredResponse;
use crate::topomap::{NodeId, TopoMap};
use image::RgbImage;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use super::{BackendError, Query, ReasoningBackend};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRules {
    /// Label → labels expected nearby.
    #[serde(default)]
    pub co_occurrence: BTreeMap<String, Vec<String>>,
    /// Hops around a candidate whose landmarks count as visible from it.
    #[serde(default = "default_radius")]
    pub visibility_radius: usize,
}

fn default_radius() -> usize {
    4
}

impl Default for OracleRules {
    fn default() -> Self {
        Self { co_occurrence: BTreeMap::new(), visibility_radius: default_radius() }
    }
}

impl OracleRules {
    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let rules: OracleRules =
            serde_json::from_str(text).map_err(|e| BackendError::InvalidRequest(format!("oracle rules: {e}")))?;
        rules.validated()
    }

    /// Lowercases labels and rejects empty ones.
    pub fn validated(self) -> Result<Self, BackendError> {
        let mut co = BTreeMap::new();
        for (k, vs) in self.co_occurrence {
            let k = k.trim().to_lowercase();
            let vs: Vec<String> = vs.iter().map(|v| v.trim().to_lowercase()).collect();
            if k.is_empty() || vs.iter().any(String::is_empty) {
                return Err(BackendError::InvalidRequest("oracle rules contain an empty label".into()));
            }
            co.insert(k, vs);
        }
        Ok(Self { co_occurrence: co, visibility_radius: self.visibility_radius })
    }
}

/// Weight of the structural match term.
const STRUCTURE_WEIGHT: f64 = 0.5;
/// Weight of the dead-reckoning prior; below one label so it only breaks ties.
const PRIOR_WEIGHT: f64 = 0.1;

#[derive(Debug, Clone, Default)]
pub struct OracleBackend {
    pub rules: OracleRules,
}

impl OracleBackend {
    pub fn new(rules: OracleRules) -> Self {
        Self { rules }
    }

    fn labels_near(&self, topo: &TopoMap, index: usize, radius: usize, drawn_only: bool) -> BTreeSet<String> {
        topo.landmark_nodes
            .iter()
            .filter(|l| !(drawn_only && l.predicted))
            .filter(|l| topo.robot_index(l.anchor).is_some_and(|i| i.abs_diff(index) <= radius))
            .map(|l| l.label.trim().to_lowercase())
            .collect()
    }

    /// Contiguous same-direction junction run containing chain index `i`.
    fn junction_run(topo: &TopoMap, i: usize) -> Option<(usize, TurnDirection)> {
        let dir = topo.robot_nodes[i].junction_direction()?;
        let mut first = i;
        while first > 0 && topo.robot_nodes[first - 1].junction_direction() == Some(dir) {
            first -= 1;
        }
        Some((first, dir))
    }

    /// Per candidate: shared labels within the visibility radius, plus 0.5
    /// when a near turn matches a junction within one hop, plus a prior
    /// decaying with hops from the dead-reckoned node.
    pub fn localization_scores(&self, q: &Query<'_>) -> Vec<(NodeId, f64)> {
        let topo = q.topo;
        let observed: BTreeSet<String> = q.percept.ldict.iter().map(|e| e.label.trim().to_lowercase()).collect();
        let near_turns: BTreeSet<TurnDirection> =
            q.percept.turns.iter().filter(|t| t.near).map(|t| t.direction).collect();
        let expected = q.context.history.previous().and_then(|p| {
            let i = topo.robot_index(p.position)?;
            Some(match p.action {
                Some(Action::MoveForward) => (i + 1).min(topo.robot_nodes.len() - 1),
                _ => i,
            })
        });
        let mut ids = q.context.candidates.clone();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter()
            .filter_map(|c| {
                let i = topo.robot_index(c)?;
                let overlap =
                    self.labels_near(topo, i, self.rules.visibility_radius, false).intersection(&observed).count();
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(topo.robot_nodes.len() - 1);
                let structural = topo.robot_nodes[lo..=hi]
                    .iter()
                    .filter_map(|n| n.junction_direction())
                    .any(|d| near_turns.contains(&d));
                let prior = expected.map_or(0.0, |e| PRIOR_WEIGHT / (1.0 + e.abs_diff(i) as f64));
                Some((c, overlap as f64 + if structural { STRUCTURE_WEIGHT } else { 0.0 } + prior))
            })
            .collect()
    }

    /// Stop at the goal node. Turn when a near opening matches the next
    /// junction run starting within one node of `position`, unless the
    /// previous step already turned there. Otherwise move forward.
    pub fn choose_action(&self, q: &Query<'_>, position: NodeId) -> Action {
        let topo = q.topo;
        let Some(i) = topo.robot_index(position) else { return Action::Stop };
        if i + 1 == topo.robot_nodes.len() {
            return Action::Stop;
        }
        let prev = q.context.history.previous();
        let prev_index = prev.and_then(|p| topo.robot_index(p.position));
        let near: BTreeSet<TurnDirection> = q.percept.turns.iter().filter(|t| t.near).map(|t| t.direction).collect();
        for j in [Some(i), Some(i + 1), i.checked_sub(1)].into_iter().flatten() {
            let Some((first, dir)) = (j < topo.robot_nodes.len()).then(|| Self::junction_run(topo, j)).flatten() else {
                continue;
            };
            if first != j || !near.contains(&dir) {
                continue;
            }
            let turned =
                prev.is_some_and(|p| p.action == Some(dir.action())) && prev_index.is_some_and(|k| k.abs_diff(j) <= 1);
            if !turned {
                return dir.action();
            }
        }
        Action::MoveForward
    }
}

fn response(keys: &[String], scores: Vec<f64>) -> ScoredResponse {
    let total: f64 = scores.iter().sum();
    let n = keys.len() as f64;
    let probs: Vec<f64> =
        if total > 0.0 { scores.iter().map(|s| s / total).collect() } else { vec![1.0 / n; keys.len()] };
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    let scores: Vec<(String, f64)> = keys.iter().cloned().zip(probs).collect();
    let raw_text = crate::prompting::render_score_block(&scores);
    ScoredResponse { chosen: keys[best].clone(), scores, raw_text }
}

impl ReasoningBackend for OracleBackend {
    fn id(&self) -> &str {
        "oracle"
    }

    fn describe_scene(&self, _view: Option<&RgbImage>, entries: &[LdictEntry]) -> Result<String, BackendError> {
        if entries.is_empty() {
            return Ok("You see nothing notable.".to_string());
        }
        let parts: Vec<String> =
            entries.iter().map(|e| format!("{} on your {}", e.label, e.quadrant.label())).collect();
        Ok(format!("You see: {}.", parts.join("; ")))
    }

    fn predict_landmarks(
        &self,
        _map: &RgbImage,
        topo: &TopoMap,
    ) -> Result<BTreeMap<NodeId, Vec<String>>, BackendError> {
        if topo.robot_nodes.is_empty() {
            return Err(BackendError::InvalidRequest("empty topological map".into()));
        }
        let mut out = BTreeMap::new();
        for (i, n) in topo.robot_nodes.iter().enumerate() {
            let drawn = self.labels_near(topo, i, 1, true);
            let present = self.labels_near(topo, i, 1, false);
            let predicted: BTreeSet<String> = drawn
                .iter()
                .filter_map(|l| self.rules.co_occurrence.get(l))
                .flatten()
                .filter(|l| !present.contains(*l))
                .cloned()
                .collect();
            out.insert(n.id, predicted.into_iter().collect());
        }
        Ok(out)
    }

    fn localize(&self, q: Query<'_>) -> Result<(NodeId, ScoredResponse), BackendError> {
        let scored = self.localization_scores(&q);
        if scored.is_empty() {
            return Err(BackendError::InvalidRequest("no known candidates".into()));
        }
        let keys = candidate_keys(&scored.iter().map(|s| s.0).collect::<Vec<_>>());
        let r = response(&keys, scored.iter().map(|s| s.1).collect());
        let chosen = r.chosen.parse().expect("candidate keys are node ids");
        Ok((chosen, r))
    }

    fn select_action(&self, q: Query<'_>, position: NodeId) -> Result<(Action, ScoredResponse), BackendError> {
        let action = self.choose_action(&q, position);
        let keys = action_keys();
        let scores = Action::ALL.iter().map(|a| if *a == action { 0.85 } else { 0.05 }).collect();
        Ok((action, response(&keys, scores)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::perception::Quadrant;
    use crate::prompting::{History, PreviousStep, ReasoningContext};
    use crate::reasoning::{PerceivedTurn, Percept};
    use crate::topomap::{LandmarkNode, RobotNode};

    fn topo(n: usize, junctions: &[(usize, f64)], landmarks: &[(&str, usize, bool)]) -> TopoMap {
        let robot_nodes = (0..n)
            .map(|id| {
                let turn = junctions.iter().find(|j| j.0 == id).map(|j| j.1);
                RobotNode {
                    id,
                    position: Point::new(10.0 * id as f64, 0.0),
                    is_junction: turn.is_some(),
                    floor: 0,
                    heading_change_deg: turn.unwrap_or(0.0),
                }
            })
            .collect();
        let landmark_nodes = landmarks
            .iter()
            .enumerate()
            .map(|(k, &(label, anchor, predicted))| LandmarkNode {
                id: n + k,
                label: label.into(),
                position: Point::new(10.0 * anchor as f64, 5.0),
                floor: 0,
                predicted,
                anchor,
            })
            .collect();
        TopoMap { robot_nodes, landmark_nodes }
    }

    fn svap() -> crate::prompting::SvapImage {
        crate::prompting::SvapImage { image: RgbImage::new(1, 1), view_width: 0, node_ids: vec![] }
    }

    fn ctx(candidates: Vec<NodeId>, history: History) -> ReasoningContext {
        ReasoningContext { scene_description: String::new(), history, plan_text: String::new(), candidates }
    }

    fn seen(labels: &[&str]) -> Percept {
        Percept {
            ldict: labels.iter().map(|l| LdictEntry { label: l.to_string(), quadrant: Quadrant::Front }).collect(),
            turns: vec![],
        }
    }

    #[test]
    fn describe_templates() {
        let o = OracleBackend::default();
        let e = [LdictEntry { label: "box".into(), quadrant: Quadrant::Left }];
        assert_eq!(o.describe_scene(None, &e).unwrap(), "You see: box on your left.");
        assert_eq!(o.describe_scene(None, &[]).unwrap(), "You see nothing notable.");
        let two = [e[0].clone(), LdictEntry { label: "cone".into(), quadrant: Quadrant::Front }];
        assert_eq!(o.describe_scene(None, &two).unwrap(), "You see: box on your left; cone on your front.");
    }

    #[test]
    fn predictions_follow_rules() {
        let rules = OracleRules {
            co_occurrence: BTreeMap::from([("desk".into(), vec!["chair".into()])]),
            visibility_radius: 4,
        };
        let o = OracleBackend::new(rules);
        let t = topo(8, &[], &[("desk", 1, false), ("desk", 6, false), ("chair", 6, false)]);
        let p = o.predict_landmarks(&RgbImage::new(1, 1), &t).unwrap();
        assert_eq!(p[&1], vec!["chair"]);
        assert_eq!(p[&0], vec!["chair"]);
        assert!(p[&3].is_empty());
        assert!(p[&6].is_empty());
    }

    #[test]
    fn localization_by_overlap() {
        let o = OracleBackend::default();
        // node 0 sees box and cone, node 9 only box
        let t = topo(10, &[], &[("box", 0, false), ("cone", 0, false), ("box", 9, false)]);
        let c = ctx(vec![0, 9], History::Disabled);
        let p = seen(&["box", "cone"]);
        let q = Query { svap: &svap(), context: &c, percept: &p, topo: &t };
        assert_eq!(o.localize(q).unwrap().0, 0);
        let single = ctx(vec![9], History::Disabled);
        let q = Query { svap: &svap(), context: &single, percept: &p, topo: &t };
        assert_eq!(o.localize(q).unwrap().0, 9);
    }

    #[test]
    fn ties_follow_dead_reckoning_then_lowest_id() {
        let o = OracleBackend::default();
        let t = topo(6, &[], &[]);
        let prev = History::Enabled {
            previous: Some(PreviousStep { position: 2, action: Some(Action::MoveForward), scene_description: None }),
            retrieved: None,
        };
        let c = ctx(vec![2, 3], prev);
        let q = Query { svap: &svap(), context: &c, percept: &Percept::default(), topo: &t };
        assert_eq!(o.localize(q).unwrap().0, 3);
        let c = ctx(vec![2, 3], History::Disabled);
        let q = Query { svap: &svap(), context: &c, percept: &Percept::default(), topo: &t };
        let (id, r) = o.localize(q).unwrap();
        assert_eq!(id, 2);
        assert!((r.scores.iter().map(|s| s.1).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn structural_match_counts() {
        let o = OracleBackend::default();
        let t = topo(8, &[(5, -90.0)], &[]);
        let c = ctx(vec![1, 5], History::Disabled);
        let p = Percept { ldict: vec![], turns: vec![PerceivedTurn { direction: TurnDirection::Left, near: true }] };
        let q = Query { svap: &svap(), context: &c, percept: &p, topo: &t };
        assert_eq!(o.localize(q).unwrap().0, 5);
    }

    fn near(direction: TurnDirection) -> Percept {
        Percept { ldict: vec![], turns: vec![PerceivedTurn { direction, near: true }] }
    }

    #[test]
    fn actions() {
        let o = OracleBackend::default();
        let t = topo(6, &[(2, -90.0)], &[]);
        let c = ctx(vec![], History::Disabled);
        let blind = Percept::default();
        let left = near(TurnDirection::Left);
        let sv = svap();
        let act =
            |p: &Percept, pos| o.select_action(Query { svap: &sv, context: &c, percept: p, topo: &t }, pos).unwrap().0;
        assert_eq!(act(&blind, 5), Action::Stop);
        assert_eq!(act(&blind, 1), Action::MoveForward);
        // the junction is believed but no opening is visible yet
        assert_eq!(act(&blind, 2), Action::MoveForward);
        assert_eq!(act(&left, 2), Action::TurnLeft);
        // belief one node off either way still turns at a visible opening
        assert_eq!(act(&left, 1), Action::TurnLeft);
        assert_eq!(act(&left, 3), Action::TurnLeft);
        assert_eq!(act(&left, 4), Action::MoveForward);
        assert_eq!(act(&near(TurnDirection::Right), 2), Action::MoveForward);
        let turned = ctx(
            vec![],
            History::Enabled {
                previous: Some(PreviousStep { position: 2, action: Some(Action::TurnLeft), scene_description: None }),
                retrieved: None,
            },
        );
        let q = Query { svap: &svap(), context: &turned, percept: &left, topo: &t };
        assert_eq!(o.select_action(q, 2).unwrap().0, Action::MoveForward);
    }

    #[test]
    fn left_from_cross_product() {
        // heading east then north on screen (y down): cross < 0 means left
        let a = Point::new(10.0, 0.0);
        let b = Point::new(0.0, -10.0);
        assert!(a.cross(b) < 0.0);
        let turn = crate::geometry::signed_turn_deg(a, b);
        let t = topo(5, &[(2, turn)], &[]);
        let c = ctx(vec![], History::Disabled);
        let p = near(TurnDirection::Left);
        let q = Query { svap: &svap(), context: &c, percept: &p, topo: &t };
        assert_eq!(OracleBackend::default().select_action(q, 2).unwrap().0, Action::TurnLeft);
    }

    #[test]
    fn shipped_rules_parse() {
        let r = OracleRules::from_json(crate::fixtures::ORACLE_RULES_JSON).unwrap();
        assert_eq!(r.visibility_radius, 4);
        assert_eq!(r.co_occurrence["desk"], vec!["chair"]);
    }
}
