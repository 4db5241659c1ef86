//! Rule-based structural landmark detection from binned edges.
//!
//! In a forward-facing view the floor of a corridor shows up as a
//! trapezoid. An opening on the left interrupts the left flank: the flank
//! (positive slope) rises from the bottom of the image and meets a
//! horizontal edge running off to the left, which is the near edge of the
//! side corridor's floor. The right side mirrors this with a negative slope.

use crate::action::TurnDirection;
use serde::{Deserialize, Serialize};

use super::edges::{EdgeSet, LineSegment};
use super::BBox;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedTurn {
    pub direction: TurnDirection,
    pub bbox: BBox,
}

/// Gap tolerance between joining segments, as a fraction of image width.
pub const JOIN_TOLERANCE: f64 = 0.02;

/// The flank must touch the horizontal's inner end (the end nearer the
/// image centre) and lie below it.
fn joins(horizontal: &LineSegment, flank: &LineSegment, direction: TurnDirection, eps: f64) -> bool {
    use crate::geometry::point_segment_distance;
    let inner = match (direction, horizontal.a.x > horizontal.b.x) {
        (TurnDirection::Left, true) | (TurnDirection::Right, false) => horizontal.a,
        _ => horizontal.b,
    };
    let h_y = 0.5 * (horizontal.a.y + horizontal.b.y);
    point_segment_distance(inner, flank.a, flank.b) <= eps && flank.midpoint().y > h_y
}

fn bbox_of(a: &LineSegment, b: &LineSegment, width: u32, height: u32) -> BBox {
    let xs = [a.a.x, a.b.x, b.a.x, b.b.x];
    let ys = [a.a.y, a.b.y, b.a.y, b.b.y];
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (w, h) = (f64::from(width), f64::from(height));
    let mut bbox =
        BBox::new(min(&xs).clamp(0.0, w), min(&ys).clamp(0.0, h), max(&xs).clamp(0.0, w), max(&ys).clamp(0.0, h));
    if bbox.x_max - bbox.x_min < 1.0 {
        bbox.x_max = (bbox.x_min + 1.0).min(w);
        bbox.x_min = bbox.x_max - 1.0;
    }
    if bbox.y_max - bbox.y_min < 1.0 {
        bbox.y_max = (bbox.y_min + 1.0).min(h);
        bbox.y_min = bbox.y_max - 1.0;
    }
    bbox
}

/// Classifies left and right turns from edge intersections.
pub fn classify_turns(edges: &EdgeSet, width: u32, height: u32) -> Vec<DetectedTurn> {
    let eps = JOIN_TOLERANCE * f64::from(width);
    let half = 0.5 * f64::from(width);
    let mut found = Vec::new();
    for h in &edges.horizontal {
        if h.max_x() <= half {
            for p in edges.positive.iter().filter(|p| joins(h, p, TurnDirection::Left, eps)) {
                found.push(DetectedTurn { direction: TurnDirection::Left, bbox: bbox_of(h, p, width, height) });
            }
        }
        if h.min_x() >= half {
            for n in edges.negative.iter().filter(|n| joins(h, n, TurnDirection::Right, eps)) {
                found.push(DetectedTurn { direction: TurnDirection::Right, bbox: bbox_of(h, n, width, height) });
            }
        }
    }
    merge_duplicates(found)
}

/// Merges same-direction detections whose overlap covers at least half of
/// the smaller box.
fn merge_duplicates(mut turns: Vec<DetectedTurn>) -> Vec<DetectedTurn> {
    let mut merged = true;
    while merged {
        merged = false;
        'outer: for i in 0..turns.len() {
            for j in i + 1..turns.len() {
                let (a, b) = (&turns[i], &turns[j]);
                if a.direction != b.direction {
                    continue;
                }
                let smaller = a.bbox.area().min(b.bbox.area());
                if a.bbox.intersection(&b.bbox) >= 0.5 * smaller {
                    turns[i].bbox = a.bbox.union(&b.bbox);
                    turns.remove(j);
                    merged = true;
                    break 'outer;
                }
            }
        }
    }
    turns.sort_by(|a, b| {
        a.direction
            .cmp(&b.direction)
            .then(a.bbox.y_min.total_cmp(&b.bbox.y_min))
            .then(a.bbox.x_min.total_cmp(&b.bbox.x_min))
    });
    turns
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    fn seg(ax: f64, ay: f64, bx: f64, by: f64) -> LineSegment {
        LineSegment::new(Point::new(ax, ay), Point::new(bx, by))
    }

    #[test]
    fn horizontal_meeting_flank_from_below_is_left_turn() {
        let mut edges = EdgeSet::default();
        edges.insert(seg(0.0, 80.0, 56.0, 80.0));
        edges.insert(seg(16.0, 143.0, 56.0, 81.0));
        let turns = classify_turns(&edges, 192, 144);
        assert_eq!(turns.len(), 1);
        assert_eq!(turns[0].direction, TurnDirection::Left);
        assert!(turns[0].bbox.is_valid_within(192, 144));
    }

    #[test]
    fn flank_above_does_not_count() {
        let mut edges = EdgeSet::default();
        edges.insert(seg(0.0, 80.0, 56.0, 80.0));
        edges.insert(seg(56.0, 79.0, 80.0, 30.0));
        assert!(classify_turns(&edges, 192, 144).is_empty());
    }

    #[test]
    fn centered_horizontal_ignored() {
        let mut edges = EdgeSet::default();
        edges.insert(seg(60.0, 50.0, 130.0, 50.0));
        edges.insert(seg(30.0, 140.0, 60.0, 51.0));
        edges.insert(seg(130.0, 51.0, 160.0, 140.0));
        assert!(classify_turns(&edges, 192, 144).is_empty());
    }

    #[test]
    fn duplicates_merge() {
        let mut edges = EdgeSet::default();
        edges.insert(seg(0.0, 80.0, 56.0, 80.0));
        edges.insert(seg(0.0, 81.0, 55.0, 81.0));
        edges.insert(seg(16.0, 143.0, 56.0, 82.0));
        assert_eq!(classify_turns(&edges, 192, 144).len(), 1);
    }
}
