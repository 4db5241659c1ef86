//! Synthetic egocentric observations.
//!
//! The camera is a pinhole one cell above the floor and two cells behind
//! the back edge of the robot's cell, looking along the heading. A floor
//! point at depth `z` cells and lateral offset `u` cells (positive right)
//! projects to `x = cx + fx * u / z`, `y = cy + fy / z`. The bottom image row
//! sits at `z = 1`, so the cell behind the robot is the nearest one drawn.

use crate::perception::{BBox, DepthImage, DetectedObject, Intrinsics, Observation};
use image::{GrayImage, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use super::world::{Cell, CellRef, GridWorld, RobotPose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewConfig {
    pub width: u32,
    pub height: u32,
    pub fov_deg: f64,
    /// Object detection range in cells.
    pub range_cells: f64,
    /// Farthest corridor cell ahead that is rendered.
    pub max_ahead: i64,
    /// Widest side opening rendered, in cells.
    pub max_side: i64,
}

impl Default for ViewConfig {
    fn default() -> Self {
        Self { width: 192, height: 144, fov_deg: 90.0, range_cells: 4.0, max_ahead: 3, max_side: 3 }
    }
}

impl ViewConfig {
    pub fn intrinsics(&self) -> Intrinsics {
        let (w, h) = (f64::from(self.width), f64::from(self.height));
        let cy = h / 9.0;
        Intrinsics { fx: w * 5.0 / 6.0, fy: h - cy, cx: w / 2.0, cy }
    }
}

/// Robot-relative cell lookup: `ahead` cells forward, `side` cells to the right.
pub(crate) fn relative(pose: &RobotPose, ahead: i64, side: i64) -> CellRef {
    let (fc, fr) = pose.heading.delta();
    let (rc, rr) = pose.heading.right().delta();
    CellRef {
        floor: pose.cell.floor,
        col: pose.cell.col + ahead * fc + side * rc,
        row: pose.cell.row + ahead * fr + side * rr,
    }
}

/// Robot-relative floor cells drawn into the traversable mask.
pub(crate) fn visible_floor(world: &GridWorld, pose: &RobotPose, cfg: &ViewConfig) -> BTreeSet<(i64, i64)> {
    let free = |a: i64, s: i64| world.is_free(relative(pose, a, s));
    let mut corridor = Vec::new();
    if free(-1, 0) {
        corridor.push(-1);
    }
    corridor.push(0);
    for a in 1..=cfg.max_ahead {
        if !free(a, 0) {
            break;
        }
        corridor.push(a);
    }
    let mut out = BTreeSet::new();
    for &a in &corridor {
        out.insert((a, 0));
        for dir in [-1i64, 1] {
            for s in 1..=cfg.max_side {
                if !free(a, dir * s) {
                    break;
                }
                out.insert((a, dir * s));
            }
        }
    }
    out
}

fn label_color(label: &str) -> Rgb<u8> {
    let mut h: u32 = 0x811c_9dc5;
    for b in label.bytes() {
        h ^= u32::from(b);
        h = h.wrapping_mul(0x0100_0193);
    }
    Rgb([(h & 0x7f) as u8 + 100, ((h >> 8) & 0x7f) as u8 + 60, ((h >> 16) & 0x7f) as u8 + 60])
}

/// Ground-truth object landmarks in range, inside the field of view, with
/// line of sight, ordered by distance then label.
pub(crate) fn visible_objects(world: &GridWorld, pose: &RobotPose, cfg: &ViewConfig) -> Vec<DetectedObject> {
    let k = cfg.intrinsics();
    let (w, h) = (f64::from(cfg.width), f64::from(cfg.height));
    let (fc, fr) = pose.heading.delta();
    let (rc, rr) = pose.heading.right().delta();
    let mut found: Vec<(f64, DetectedObject)> = Vec::new();
    for l in world.landmarks.iter().filter(|l| l.cell.floor == pose.cell.floor) {
        let (dc, dr) = (l.cell.col - pose.cell.col, l.cell.row - pose.cell.row);
        let ahead = (dc * fc + dr * fr) as f64;
        let side = (dc * rc + dr * rr) as f64;
        let dist = ahead.hypot(side);
        if dist == 0.0 || dist > cfg.range_cells {
            continue;
        }
        let bearing = side.atan2(ahead).to_degrees();
        let half_fov = cfg.fov_deg / 2.0;
        if bearing.abs() > half_fov || !line_of_sight(world, pose.cell, l.cell) {
            continue;
        }
        let center_x = w / 2.0 + bearing / half_fov * w / 2.0;
        let z = ahead + 2.5;
        let half_w = 0.3 * k.fx / z;
        let bottom = k.cy + k.fy / z;
        let top = bottom - 0.8 * k.fy / z;
        let x_min = (center_x - half_w).clamp(0.0, w - 1.0);
        let x_max = (center_x + half_w).clamp(x_min + 1.0, w);
        let y_min = top.clamp(0.0, h - 1.0);
        let y_max = bottom.clamp(y_min + 1.0, h);
        found.push((dist, DetectedObject { label: l.label.clone(), bbox: BBox::new(x_min, y_min, x_max, y_max) }));
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.label.cmp(&b.1.label)));
    found.into_iter().map(|(_, o)| o).collect()
}

/// Ray from the robot's cell centre to the target cell's nearest face;
/// every cell crossed before the target must be free.
pub(crate) fn line_of_sight(world: &GridWorld, from: CellRef, to: CellRef) -> bool {
    let (x0, y0) = (from.col as f64, from.row as f64);
    let tx = x0.clamp(to.col as f64 - 0.45, to.col as f64 + 0.45);
    let ty = y0.clamp(to.row as f64 - 0.45, to.row as f64 + 0.45);
    let steps = ((tx - x0).abs().max((ty - y0).abs()) * 20.0).ceil() as usize;
    for i in 1..steps {
        let t = i as f64 / steps as f64;
        let c = CellRef { col: (x0 + t * (tx - x0)).round() as i64, row: (y0 + t * (ty - y0)).round() as i64, ..from };
        if c == from || c == to {
            continue;
        }
        if world.cell(c) != Cell::Free {
            return false;
        }
    }
    true
}

/// Renders the observation at `pose`.
pub fn observe(world: &GridWorld, pose: &RobotPose, cfg: &ViewConfig) -> Observation {
    let k = cfg.intrinsics();
    let floor = visible_floor(world, pose, cfg);
    let (w, h) = (cfg.width, cfg.height);
    let mut mask = GrayImage::new(w, h);
    let mut depth = DepthImage::new(w, h);
    let mut view = RgbImage::new(w, h);
    for py in 0..h {
        let v = f64::from(py) + 0.5;
        for px in 0..w {
            if v <= k.cy {
                view.put_pixel(px, py, Rgb([205, 210, 230]));
                continue;
            }
            let z = k.fy / (v - k.cy);
            depth.put_pixel(px, py, Luma([(z * world.cell_size) as f32]));
            let u = (f64::from(px) + 0.5 - k.cx) * z / k.fx;
            // z - 1 cells is the distance past the back edge of the cell behind the robot
            let cell = (z.floor() as i64 - 2, u.round() as i64);
            if floor.contains(&cell) {
                mask.put_pixel(px, py, Luma([255]));
                view.put_pixel(px, py, Rgb([175, 170, 160]));
            } else {
                view.put_pixel(px, py, Rgb([95, 90, 100]));
            }
        }
    }
    let objects = visible_objects(world, pose, cfg);
    for o in &objects {
        let c = label_color(&o.label);
        for y in o.bbox.y_min as u32..(o.bbox.y_max.ceil() as u32).min(h) {
            for x in o.bbox.x_min as u32..(o.bbox.x_max.ceil() as u32).min(w) {
                view.put_pixel(x, y, c);
            }
        }
    }
    Observation {
        width: w,
        height: h,
        objects,
        mask: Some(mask),
        depth: Some(depth),
        view_image: Some(view),
        intrinsics: Some(k),
    }
}
