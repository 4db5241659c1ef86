//! Deterministic parts of the spatial interpreter: quadrant mapping,
//! structural turn detection on traversable masks, annotated views and
//! pinhole projection.

mod annotate;
mod edges;
mod turns;

pub use annotate::{annotate_view, OBJECT_COLOR, STRUCTURAL_COLOR};
pub use edges::{extract_edges, EdgeCategory, EdgeSet, HoughParams, LineSegment};
pub use turns::{classify_turns, DetectedTurn};

use image::{GrayImage, ImageBuffer, Luma, RgbImage};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Per-pixel depth in meters; 0 marks an invalid reading.
pub type DepthImage = ImageBuffer<Luma<f32>, Vec<f32>>;

#[derive(Debug, Error, PartialEq)]
pub enum PerceptionError {
    #[error("mask has no traversable pixels")]
    EmptyMask,
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("invalid intrinsics: focal lengths must be positive")]
    InvalidIntrinsics,
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    pub fn center_x(&self) -> f64 {
        0.5 * (self.x_min + self.x_max)
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min).max(0.0) * (self.y_max - self.y_min).max(0.0)
    }

    pub fn intersection(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        w.max(0.0) * h.max(0.0)
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox::new(
            self.x_min.min(other.x_min),
            self.y_min.min(other.y_min),
            self.x_max.max(other.x_max),
            self.y_max.max(other.y_max),
        )
    }

    pub fn is_valid_within(&self, width: u32, height: u32) -> bool {
        self.x_min >= 0.0
            && self.y_min >= 0.0
            && self.x_max <= f64::from(width)
            && self.y_max <= f64::from(height)
            && self.x_min < self.x_max
            && self.y_min < self.y_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedObject {
    pub label: String,
    pub bbox: BBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// One egocentric percept.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub width: u32,
    pub height: u32,
    pub objects: Vec<DetectedObject>,
    pub mask: Option<GrayImage>,
    pub depth: Option<DepthImage>,
    pub view_image: Option<RgbImage>,
    pub intrinsics: Option<Intrinsics>,
}

impl Observation {
    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, objects: Vec::new(), mask: None, depth: None, view_image: None, intrinsics: None }
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        for o in &self.objects {
            if !o.bbox.is_valid_within(self.width, self.height) {
                return Err(PerceptionError::InvalidObservation(format!(
                    "bbox of {:?} outside {}x{}",
                    o.label, self.width, self.height
                )));
            }
        }
        let dims = (self.width, self.height);
        if self.mask.as_ref().is_some_and(|m| m.dimensions() != dims)
            || self.depth.as_ref().is_some_and(|d| d.dimensions() != dims)
        {
            return Err(PerceptionError::InvalidObservation("raster size mismatch".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrant {
    Left,
    Front,
    Right,
}

impl Quadrant {
    pub fn label(self) -> &'static str {
        match self {
            Quadrant::Left => "left",
            Quadrant::Front => "front",
            Quadrant::Right => "right",
        }
    }

    /// Equal-width thirds; a boundary belongs to the higher quadrant.
    pub fn of(center_x: f64, width: u32) -> Quadrant {
        let w = f64::from(width);
        if center_x < w / 3.0 {
            Quadrant::Left
        } else if center_x < 2.0 * w / 3.0 {
            Quadrant::Front
        } else {
            Quadrant::Right
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LdictEntry {
    pub label: String,
    pub quadrant: Quadrant,
}

/// One entry per detected object, in input order.
pub fn assign_quadrants(observation: &Observation) -> Vec<LdictEntry> {
    observation
        .objects
        .iter()
        .map(|o| LdictEntry { label: o.label.clone(), quadrant: Quadrant::of(o.bbox.center_x(), observation.width) })
        .collect()
}

/// Pinhole back-projection of pixel (u, v) at `depth_m` into the camera frame.
pub fn project_pixel(u: f64, v: f64, depth_m: f64, k: &Intrinsics) -> Result<[f64; 3], PerceptionError> {
    if depth_m.is_nan() || depth_m <= 0.0 {
        return Err(PerceptionError::NonPositiveDepth(depth_m));
    }
    if !(k.fx > 0.0 && k.fy > 0.0) {
        return Err(PerceptionError::InvalidIntrinsics);
    }
    Ok([(u - k.cx) * depth_m / k.fx, (v - k.cy) * depth_m / k.fy, depth_m])
}

/// Forward projection of a camera-frame point to pixel coordinates.
pub fn reproject(point: [f64; 3], k: &Intrinsics) -> (f64, f64) {
    let [x, y, z] = point;
    (k.fx * x / z + k.cx, k.fy * y / z + k.cy)
}

/// Open-vocabulary object detection, prompted with the map's landmark classes.
pub trait Detector: Send + Sync {
    fn detect(&self, observation: &Observation, vocabulary: &BTreeSet<String>) -> Vec<DetectedObject>;
}

/// Uses the objects already present in the observation (simulator ground
/// truth), keeping only classes in the vocabulary.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruthDetector;

impl Detector for GroundTruthDetector {
    fn detect(&self, observation: &Observation, vocabulary: &BTreeSet<String>) -> Vec<DetectedObject> {
        observation.objects.iter().filter(|o| vocabulary.contains(&o.label.to_lowercase())).cloned().collect()
    }
}

/// Produces the traversable-region mask for an observation.
pub trait Segmenter: Send + Sync {
    fn segment(&self, observation: &Observation) -> Option<GrayImage>;
}

/// Passes through the mask carried by the observation.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProvidedMask;

impl Segmenter for ProvidedMask {
    fn segment(&self, observation: &Observation) -> Option<GrayImage> {
        observation.mask.clone()
    }
}
