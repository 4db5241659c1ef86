use crate::topomap::{Segment, SegmentLandmark, TerminalAction, TopoMap};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub const EXPECTED_MARKER: &str = "(expected)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavPlan {
    pub sentences: Vec<String>,
    pub full_text: String,
}

/// Names in path order. Drawn landmarks are all listed; a predicted label
/// is listed once, and not at all when a drawn one shares it.
fn landmark_names<'a>(landmarks: impl Iterator<Item = &'a SegmentLandmark> + Clone) -> Vec<String> {
    let drawn: BTreeSet<&str> = landmarks.clone().filter(|l| !l.predicted).map(|l| l.label.as_str()).collect();
    let mut seen_predicted = BTreeSet::new();
    landmarks
        .filter(|l| !l.predicted || (!drawn.contains(l.label.as_str()) && seen_predicted.insert(l.label.as_str())))
        .map(|l| if l.predicted { format!("{} {EXPECTED_MARKER}", l.label) } else { l.label.clone() })
        .collect()
}

/// "a", "a and b", "a, b and c".
pub fn join_names(names: &[String]) -> String {
    match names {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn sentence(topo: &TopoMap, segment: &Segment) -> String {
    let passed = landmark_names(segment.landmarks.iter());
    let passed = if passed.is_empty() { "the open area".to_string() } else { format!("the {}", join_names(&passed)) };

    let closing = *segment.nodes.last().expect("segments are non-empty");
    let closing_idx = topo.robot_index(closing).unwrap_or(0);
    let near_close = landmark_names(
        segment.landmarks.iter().filter(|l| topo.robot_index(l.anchor).is_some_and(|i| i.abs_diff(closing_idx) <= 1)),
    );
    let cue = match (near_close.is_empty(), segment.terminal_action) {
        (false, _) => join_names(&near_close),
        (true, TerminalAction::Stop) => "the goal".to_string(),
        (true, _) => "the junction".to_string(),
    };
    format!("Move forward pass {passed}, and {} when you see {cue}.", segment.terminal_action.label())
}

/// One sentence per junction-bounded segment.
pub fn generate_plan(topo: &TopoMap) -> NavPlan {
    let sentences: Vec<String> = topo.segment_by_junctions().iter().map(|s| sentence(topo, s)).collect();
    let full_text = sentences.join(" ");
    NavPlan { sentences, full_text }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::topomap::{LandmarkNode, RobotNode};

    fn chain(points: &[(f64, f64)], junctions: &[(usize, f64)]) -> TopoMap {
        let robot_nodes = points
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| {
                let turn = junctions.iter().find(|j| j.0 == id).map(|j| j.1);
                RobotNode {
                    id,
                    position: Point::new(x, y),
                    is_junction: turn.is_some(),
                    floor: 0,
                    heading_change_deg: turn.unwrap_or(0.0),
                }
            })
            .collect();
        TopoMap { robot_nodes, landmark_nodes: vec![] }
    }

    fn landmark(topo: &mut TopoMap, label: &str, anchor: usize, predicted: bool) {
        let id = topo.robot_nodes.len() + topo.landmark_nodes.len();
        let position = topo.robot_nodes[anchor].position;
        topo.landmark_nodes.push(LandmarkNode { id, label: label.into(), position, floor: 0, predicted, anchor });
    }

    #[test]
    fn single_segment() {
        let mut topo = chain(&[(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)], &[]);
        landmark(&mut topo, "box", 2, false);
        let plan = generate_plan(&topo);
        assert_eq!(plan.sentences, vec!["Move forward pass the box, and stop when you see box."]);
    }

    #[test]
    fn left_junction_and_expected_marker() {
        let mut topo = chain(&[(0.0, 0.0), (10.0, 0.0), (20.0, 0.0), (20.0, -10.0), (20.0, -20.0)], &[(2, -90.0)]);
        landmark(&mut topo, "desk", 2, false);
        landmark(&mut topo, "chair", 2, true);
        landmark(&mut topo, "door", 4, false);
        let plan = generate_plan(&topo);
        assert_eq!(plan.sentences.len(), 2);
        assert_eq!(
            plan.sentences[0],
            "Move forward pass the desk and chair (expected), and turn left when you see desk and chair (expected)."
        );
        assert_eq!(plan.sentences[1], "Move forward pass the door, and stop when you see door.");
        assert_eq!(plan.full_text, plan.sentences.join(" "));
    }

    #[test]
    fn empty_segments_use_fallbacks() {
        let topo = chain(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)], &[(1, 90.0)]);
        let plan = generate_plan(&topo);
        assert_eq!(
            plan.sentences,
            vec![
                "Move forward pass the open area, and turn right when you see the junction.",
                "Move forward pass the open area, and stop when you see the goal.",
            ]
        );
    }

    #[test]
    fn predicted_labels_listed_once_and_drawn_ones_win() {
        let mut topo = chain(&[(0.0, 0.0), (10.0, 0.0), (20.0, 0.0), (30.0, 0.0)], &[]);
        landmark(&mut topo, "desk", 0, false);
        landmark(&mut topo, "chair", 0, true);
        landmark(&mut topo, "chair", 1, true);
        landmark(&mut topo, "desk", 2, true);
        landmark(&mut topo, "desk", 3, false);
        let plan = generate_plan(&topo);
        assert_eq!(
            plan.sentences,
            ["Move forward pass the desk, chair (expected) and desk, and stop when you see desk."]
        );
    }

    #[test]
    fn each_landmark_in_one_sentence() {
        let mut topo = chain(
            &[(0.0, 0.0), (10.0, 0.0), (20.0, 0.0), (20.0, 10.0), (20.0, 20.0), (30.0, 20.0)],
            &[(2, 90.0), (4, -90.0)],
        );
        for (label, anchor) in [("sofa", 0), ("plant", 2), ("lamp", 3), ("tv", 5)] {
            landmark(&mut topo, label, anchor, false);
        }
        let plan = generate_plan(&topo);
        assert_eq!(plan.sentences.len(), topo.segment_by_junctions().len());
        for label in ["sofa", "plant", "lamp", "tv"] {
            assert_eq!(plan.sentences.iter().filter(|s| s.contains(label)).count(), 1, "{label}");
        }
    }
}
