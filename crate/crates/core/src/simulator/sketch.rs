//! Hand-drawn map synthesis: a ground-truth floor-plan sketch of a world
//! and seeded distortions of it.

use crate::geometry::Point;
use crate::raster::{draw_text, GLYPH};
use crate::sketchmap::{HandDrawnMap, LandmarkAnnotation, SketchBundle, Waypoint};
use image::{Rgb, RgbImage};
use imageproc::drawing::{draw_filled_circle_mut, draw_filled_rect_mut, draw_line_segment_mut};
use imageproc::rect::Rect;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::world::{Cell, CellRef, GridWorld};
use super::SimError;

pub const PX_PER_CELL: f64 = 20.0;
const FLOOR_GAP_CELLS: f64 = 1.0;

/// Vector description of a sketch, rendered to a raster on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchScene {
    pub width: u32,
    pub height: u32,
    /// Wall blocks as (x, y, w, h) in pixels.
    pub walls: Vec<[f64; 4]>,
    pub path: Vec<Waypoint>,
    pub landmarks: Vec<LandmarkAnnotation>,
}

fn floor_offset(world: &GridWorld, floor: usize) -> f64 {
    let widest = world.floors.iter().map(|f| f.width).max().unwrap_or(0) as f64;
    floor as f64 * (widest + FLOOR_GAP_CELLS) * PX_PER_CELL
}

/// Pixel centre of a cell in the ground-truth sketch.
pub fn cell_center_px(world: &GridWorld, c: CellRef) -> Point {
    Point::new((c.col as f64 + 0.5) * PX_PER_CELL + floor_offset(world, c.floor), (c.row as f64 + 0.5) * PX_PER_CELL)
}

/// Keeps the endpoints, every cell where the route turns, and both cells of
/// each stair hop.
pub fn route_corners(route: &[CellRef]) -> Vec<CellRef> {
    let n = route.len();
    let mut out = Vec::new();
    for i in 0..n {
        let keep = if i == 0 || i + 1 == n {
            true
        } else {
            let (a, b, c) = (route[i - 1], route[i], route[i + 1]);
            if a.floor != b.floor || b.floor != c.floor {
                true
            } else {
                (b.col - a.col, b.row - a.row) != (c.col - b.col, c.row - b.row)
            }
        };
        if keep {
            out.push(route[i]);
        }
    }
    out
}

pub fn ground_truth_scene(world: &GridWorld) -> SketchScene {
    let widest = world.floors.iter().map(|f| f.width).max().unwrap_or(0) as f64;
    let tallest = world.floors.iter().map(|f| f.height).max().unwrap_or(0) as f64;
    let nf = world.floors.len() as f64;
    let width = ((nf * widest + (nf - 1.0) * FLOOR_GAP_CELLS) * PX_PER_CELL) as u32;
    let height = (tallest * PX_PER_CELL) as u32;

    let mut walls = Vec::new();
    for (f, floor) in world.floors.iter().enumerate() {
        for row in 0..floor.height as i64 {
            for col in 0..floor.width as i64 {
                let c = CellRef::new(f, col, row);
                if world.cell(c) != Cell::Wall {
                    continue;
                }
                let near_free = (-1..=1).any(|dr| (-1..=1).any(|dc| floor.get(col + dc, row + dr) != Cell::Wall));
                if near_free {
                    let p = cell_center_px(world, c);
                    let half = PX_PER_CELL / 2.0;
                    walls.push([p.x - half, p.y - half, PX_PER_CELL, PX_PER_CELL]);
                }
            }
        }
    }
    let path = route_corners(&world.route())
        .into_iter()
        .map(|c| Waypoint { point: cell_center_px(world, c), floor: c.floor as i32 })
        .collect();
    let landmarks = world
        .landmarks
        .iter()
        .map(|l| LandmarkAnnotation {
            label: l.label.clone(),
            position: cell_center_px(world, l.cell),
            floor: l.cell.floor as i32,
        })
        .collect();
    SketchScene { width, height, walls, path, landmarks }
}

const INK: Rgb<u8> = Rgb([70, 70, 70]);
const PATH_INK: Rgb<u8> = Rgb([30, 90, 220]);
const LANDMARK_INK: Rgb<u8> = Rgb([230, 120, 20]);

impl SketchScene {
    pub fn render(&self) -> RgbImage {
        let mut img = RgbImage::from_pixel(self.width.max(1), self.height.max(1), Rgb([255, 255, 255]));
        for &[x, y, w, h] in &self.walls {
            let (x0, y0) = (x.round() as i32, y.round() as i32);
            let (x1, y1) = ((x + w).round() as i32, (y + h).round() as i32);
            if x1 > x0 && y1 > y0 {
                draw_filled_rect_mut(&mut img, Rect::at(x0, y0).of_size((x1 - x0) as u32, (y1 - y0) as u32), INK);
            }
        }
        for pair in self.path.windows(2) {
            if pair[0].floor == pair[1].floor {
                let (a, b) = (pair[0].point, pair[1].point);
                draw_line_segment_mut(&mut img, (a.x as f32, a.y as f32), (b.x as f32, b.y as f32), PATH_INK);
                draw_line_segment_mut(
                    &mut img,
                    (a.x as f32 + 1.0, a.y as f32 + 1.0),
                    (b.x as f32 + 1.0, b.y as f32 + 1.0),
                    PATH_INK,
                );
            }
        }
        if let (Some(s), Some(g)) = (self.path.first(), self.path.last()) {
            draw_filled_circle_mut(&mut img, (s.point.x as i32, s.point.y as i32), 4, Rgb([0, 170, 0]));
            draw_filled_circle_mut(&mut img, (g.point.x as i32, g.point.y as i32), 4, Rgb([210, 0, 0]));
        }
        for l in &self.landmarks {
            let (x, y) = (l.position.x as i32, l.position.y as i32);
            draw_filled_circle_mut(&mut img, (x, y), 3, LANDMARK_INK);
            draw_text(&mut img, i64::from(x) + 4, i64::from(y) - i64::from(GLYPH) / 2, &l.label, LANDMARK_INK);
        }
        img
    }

    pub fn to_map(&self) -> HandDrawnMap {
        HandDrawnMap { drawing: self.render(), landmarks: self.landmarks.clone(), path: self.path.clone() }
    }

    pub fn to_bundle(&self) -> SketchBundle {
        self.to_map().to_bundle()
    }

    /// Planar path length in pixels, skipping floor hops.
    pub fn path_length_px(&self) -> f64 {
        self.path.windows(2).filter(|p| p[0].floor == p[1].floor).map(|p| p[0].point.distance(p[1].point)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionConfig {
    /// Landmark jitter standard deviation as a fraction of the map diagonal.
    /// Path vertices get half of it.
    pub jitter_sigma: f64,
    pub omission_rate: f64,
    /// Per-axis scale factors are drawn uniformly from this range.
    pub scale_warp: (f64, f64),
    pub seed: u64,
}

impl Default for DistortionConfig {
    fn default() -> Self {
        Self { jitter_sigma: 0.0, omission_rate: 0.0, scale_warp: (1.0, 1.0), seed: 0 }
    }
}

impl DistortionConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let (lo, hi) = self.scale_warp;
        let ok = self.jitter_sigma >= 0.0
            && self.jitter_sigma.is_finite()
            && (0.0..=1.0).contains(&self.omission_rate)
            && lo > 0.0
            && lo <= hi
            && hi.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidDistortion(format!("{self:?}")))
        }
    }
}

fn clamp_into(p: Point, w: u32, h: u32) -> Point {
    Point::new(p.x.clamp(0.0, f64::from(w) - 1.0), p.y.clamp(0.0, f64::from(h) - 1.0))
}

/// Applies seeded warp, jitter and omission to a scene.
pub fn distort_scene(scene: &SketchScene, config: &DistortionConfig) -> Result<SketchScene, SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (lo, hi) = config.scale_warp;
    let mut factor = || if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let (sx, sy) = (factor(), factor());
    let width = ((f64::from(scene.width) * sx).round() as u32).max(1);
    let height = ((f64::from(scene.height) * sy).round() as u32).max(1);
    let diag = f64::from(width).hypot(f64::from(height));
    let sigma = config.jitter_sigma * diag;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let warp = |p: Point| Point::new(p.x * sx, p.y * sy);

    let walls = scene.walls.iter().map(|&[x, y, w, h]| [x * sx, y * sy, w * sx, h * sy]).collect();
    let path = scene
        .path
        .iter()
        .map(|w| {
            let j = Point::new(unit.sample(&mut rng), unit.sample(&mut rng)) * (sigma / 2.0);
            Waypoint { point: clamp_into(warp(w.point) + j, width, height), floor: w.floor }
        })
        .collect();
    let mut landmarks = Vec::new();
    for l in &scene.landmarks {
        let j = Point::new(unit.sample(&mut rng), unit.sample(&mut rng)) * sigma;
        let dropped = rng.gen::<f64>() < config.omission_rate;
        if !dropped {
            landmarks.push(LandmarkAnnotation {
                label: l.label.clone(),
                position: clamp_into(warp(l.position) + j, width, height),
                floor: l.floor,
            });
        }
    }
    Ok(SketchScene { width, height, walls, path, landmarks })
}

/// Distorted sketch bundle of a ground-truth scene.
pub fn distort(ground_truth: &SketchScene, config: &DistortionConfig) -> Result<SketchBundle, SimError> {
    Ok(distort_scene(ground_truth, config)?.to_bundle())
}
