//! Edge extraction from a traversable mask: boundary pixels, a Hough line
//! transform with iterative peak removal, and angle binning.

use crate::geometry::Point;
use image::GrayImage;
use serde::{Deserialize, Serialize};

use super::PerceptionError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoughParams {
    pub theta_step_deg: f64,
    pub rho_step: f64,
    /// Accumulator peaks below this vote count end the search.
    pub min_votes: u32,
    /// Shortest segment kept, pixels.
    pub min_length: f64,
    /// Largest gap between consecutive boundary points inside one segment.
    pub max_gap: f64,
    /// Distance from the peak line within which points are claimed.
    pub band: f64,
    pub max_segments: usize,
}

impl Default for HoughParams {
    fn default() -> Self {
        Self {
            theta_step_deg: 1.0,
            rho_step: 1.0,
            min_votes: 10,
            min_length: 10.0,
            max_gap: 4.0,
            band: 1.5,
            max_segments: 48,
        }
    }
}

impl HoughParams {
    pub fn for_width(width: u32) -> Self {
        let min_length = (0.05 * f64::from(width)).max(8.0);
        Self { min_length, min_votes: (0.8 * min_length) as u32, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeCategory {
    Horizontal,
    Vertical,
    PositiveSlope,
    NegativeSlope,
}

impl EdgeCategory {
    /// Bins an angle in degrees, measured counter-clockwise from the image
    /// x-axis with y pointing up, normalized to (-90, 90].
    pub fn of_angle(angle_deg: f64) -> EdgeCategory {
        let a = angle_deg.abs();
        if a <= 15.0 {
            EdgeCategory::Horizontal
        } else if a >= 75.0 {
            EdgeCategory::Vertical
        } else if angle_deg > 0.0 {
            EdgeCategory::PositiveSlope
        } else {
            EdgeCategory::NegativeSlope
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSegment {
    pub a: Point,
    pub b: Point,
    pub angle_deg: f64,
}

impl LineSegment {
    pub fn new(a: Point, b: Point) -> Self {
        let mut angle = (-(b.y - a.y)).atan2(b.x - a.x).to_degrees();
        if angle <= -90.0 {
            angle += 180.0;
        } else if angle > 90.0 {
            angle -= 180.0;
        }
        Self { a, b, angle_deg: angle }
    }

    pub fn category(&self) -> EdgeCategory {
        EdgeCategory::of_angle(self.angle_deg)
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn midpoint(&self) -> Point {
        self.a.lerp(self.b, 0.5)
    }

    pub fn min_x(&self) -> f64 {
        self.a.x.min(self.b.x)
    }

    pub fn max_x(&self) -> f64 {
        self.a.x.max(self.b.x)
    }
}

/// Segments grouped by orientation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeSet {
    pub horizontal: Vec<LineSegment>,
    pub vertical: Vec<LineSegment>,
    pub positive: Vec<LineSegment>,
    pub negative: Vec<LineSegment>,
}

impl EdgeSet {
    pub fn insert(&mut self, seg: LineSegment) {
        match seg.category() {
            EdgeCategory::Horizontal => self.horizontal.push(seg),
            EdgeCategory::Vertical => self.vertical.push(seg),
            EdgeCategory::PositiveSlope => self.positive.push(seg),
            EdgeCategory::NegativeSlope => self.negative.push(seg),
        }
    }

    pub fn len(&self) -> usize {
        self.horizontal.len() + self.vertical.len() + self.positive.len() + self.negative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all(&self) -> impl Iterator<Item = &LineSegment> {
        self.horizontal.iter().chain(&self.vertical).chain(&self.positive).chain(&self.negative)
    }
}

fn traversable(v: u8) -> bool {
    v > 127
}

/// Traversable pixels with at least one non-traversable 4-neighbour inside
/// the image. The image border itself never counts as a boundary.
pub(crate) fn boundary_pixels(mask: &GrayImage) -> Vec<(u32, u32)> {
    let (w, h) = mask.dimensions();
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !traversable(mask.get_pixel(x, y)[0]) {
                continue;
            }
            let blocked = |dx: i64, dy: i64| {
                let nx = i64::from(x) + dx;
                let ny = i64::from(y) + dy;
                nx >= 0
                    && ny >= 0
                    && nx < i64::from(w)
                    && ny < i64::from(h)
                    && !traversable(mask.get_pixel(nx as u32, ny as u32)[0])
            };
            if blocked(-1, 0) || blocked(1, 0) || blocked(0, -1) || blocked(0, 1) {
                out.push((x, y));
            }
        }
    }
    out
}

struct Accumulator {
    cos: Vec<f64>,
    sin: Vec<f64>,
    rho_step: f64,
    rho_offset: usize,
    n_rho: usize,
    votes: Vec<u32>,
}

impl Accumulator {
    fn new(params: &HoughParams, width: u32, height: u32) -> Self {
        let n_theta = (180.0 / params.theta_step_deg).round() as usize;
        let (sin, cos) = (0..n_theta).map(|i| (i as f64 * params.theta_step_deg).to_radians().sin_cos()).unzip();
        let diag = f64::from(width).hypot(f64::from(height));
        let rho_offset = (diag / params.rho_step).ceil() as usize + 1;
        let n_rho = 2 * rho_offset + 1;
        Self { cos, sin, rho_step: params.rho_step, rho_offset, n_rho, votes: vec![0; n_theta * n_rho] }
    }

    fn vote(&mut self, (x, y): (f64, f64), add: bool) {
        for t in 0..self.cos.len() {
            let rho = x * self.cos[t] + y * self.sin[t];
            let r = (rho / self.rho_step).round() as i64 + self.rho_offset as i64;
            let cell = &mut self.votes[t * self.n_rho + r as usize];
            if add {
                *cell += 1;
            } else {
                *cell = cell.saturating_sub(1);
            }
        }
    }

    fn peak(&self) -> (usize, u32) {
        let mut best = (0, 0);
        for (i, &v) in self.votes.iter().enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }

    fn line(&self, cell: usize) -> (f64, f64, f64) {
        let t = cell / self.n_rho;
        let r = cell % self.n_rho;
        let rho = (r as f64 - self.rho_offset as f64) * self.rho_step;
        (self.cos[t], self.sin[t], rho)
    }
}

/// Extracts boundary segments of the traversable region and bins them by angle.
pub fn extract_edges(mask: &GrayImage, params: &HoughParams) -> Result<EdgeSet, PerceptionError> {
    if !mask.pixels().any(|p| traversable(p[0])) {
        return Err(PerceptionError::EmptyMask);
    }
    let points: Vec<(f64, f64)> =
        boundary_pixels(mask).into_iter().map(|(x, y)| (f64::from(x), f64::from(y))).collect();
    let mut alive = vec![true; points.len()];
    let mut acc = Accumulator::new(params, mask.width(), mask.height());
    for &p in &points {
        acc.vote(p, true);
    }

    let mut edges = EdgeSet::default();
    let mut emitted = 0;
    while emitted < params.max_segments {
        let (cell, votes) = acc.peak();
        if votes < params.min_votes.max(1) {
            break;
        }
        let (c, s, rho) = acc.line(cell);
        let mut on_line: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .filter(|(i, (x, y))| alive[*i] && (x * c + y * s - rho).abs() <= params.band)
            .map(|(i, (x, y))| (-x * s + y * c, i))
            .collect();
        on_line.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut found = false;
        let mut start = 0;
        for end in 1..=on_line.len() {
            let split = end == on_line.len() || on_line[end].0 - on_line[end - 1].0 > params.max_gap;
            if !split {
                continue;
            }
            let (t0, t1) = (on_line[start].0, on_line[end - 1].0);
            if t1 - t0 >= params.min_length {
                let foot = |t: f64| Point::new(rho * c - t * s, rho * s + t * c);
                edges.insert(LineSegment::new(foot(t0), foot(t1)));
                for &(_, i) in &on_line[start..end] {
                    alive[i] = false;
                    acc.vote(points[i], false);
                }
                found = true;
                emitted += 1;
            }
            start = end;
        }
        if !found {
            acc.votes[cell] = 0;
        }
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Luma;

    /// Trapezoid: wide at the bottom, narrow at the top, like a straight
    /// corridor floor seen in perspective.
    pub(crate) fn trapezoid(w: u32, h: u32) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            let (x, y) = (f64::from(x), f64::from(y));
            let top = 0.3 * f64::from(h);
            let t = (y - top) / (f64::from(h) - top);
            let half = 10.0 + t * 0.4 * f64::from(w);
            let cx = 0.5 * f64::from(w);
            Luma([if y >= top && (x - cx).abs() <= half { 255 } else { 0 }])
        })
    }

    #[test]
    fn angle_bins() {
        assert_eq!(EdgeCategory::of_angle(0.0), EdgeCategory::Horizontal);
        assert_eq!(EdgeCategory::of_angle(15.0), EdgeCategory::Horizontal);
        assert_eq!(EdgeCategory::of_angle(45.0), EdgeCategory::PositiveSlope);
        assert_eq!(EdgeCategory::of_angle(-45.0), EdgeCategory::NegativeSlope);
        assert_eq!(EdgeCategory::of_angle(75.0), EdgeCategory::Vertical);
        assert_eq!(EdgeCategory::of_angle(90.0), EdgeCategory::Vertical);
        // rising to the right on screen (y decreasing) is a positive slope
        let s = LineSegment::new(Point::new(0.0, 100.0), Point::new(50.0, 50.0));
        assert_eq!(s.category(), EdgeCategory::PositiveSlope);
    }

    #[test]
    fn trapezoid_edges() {
        let mask = trapezoid(200, 150);
        let edges = extract_edges(&mask, &HoughParams::for_width(200)).unwrap();
        assert!(edges.vertical.is_empty(), "{edges:?}");
        assert!(edges.positive.iter().any(|s| s.midpoint().x < 100.0));
        assert!(edges.negative.iter().any(|s| s.midpoint().x > 100.0));
        assert!(edges.positive.iter().all(|s| s.midpoint().x < 100.0));
        assert!(edges.negative.iter().all(|s| s.midpoint().x > 100.0));
        assert_eq!(edges.horizontal.len(), 1);
        assert!((edges.horizontal[0].a.y - 45.0).abs() <= 1.5);
    }

    #[test]
    fn empty_and_full_masks() {
        let empty = GrayImage::new(50, 50);
        assert_eq!(extract_edges(&empty, &HoughParams::default()), Err(PerceptionError::EmptyMask));
        let full = GrayImage::from_pixel(50, 50, Luma([255]));
        assert!(extract_edges(&full, &HoughParams::default()).unwrap().is_empty());
    }
}
