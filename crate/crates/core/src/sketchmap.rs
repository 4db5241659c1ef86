//! Sketch bundles: the on-disk form of a hand-drawn map.
//!
//! A bundle is a directory (or zip archive) holding `map.png`, the raster
//! drawing, and `annotations.json`:
//!
//! ```json
//! { "version": 1,
//!   "landmarks": [{"label": "desk", "x": 120, "y": 40, "floor": 0}],
//!   "path": [[10, 200], [10, 40], [300, 40]] }
//! ```
//!
//! Path vertices may carry an optional third element, the floor index.
//! Coordinates are pixels, x rightward and y downward from the top-left.
//! The first path vertex is the start, the last one is the goal.

use crate::geometry::{polyline_length, Point};
use image::RgbImage;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::io::{Cursor, Read, Write};
use std::path::Path;
use thiserror::Error;

pub const BUNDLE_VERSION: u32 = 1;
pub const IMAGE_FILE: &str = "map.png";
pub const ANNOTATIONS_FILE: &str = "annotations.json";

#[derive(Debug, Error)]
pub enum SketchError {
    #[error("bundle has no {IMAGE_FILE}")]
    MissingImage,
    #[error("annotations have no path")]
    MissingPath,
    #[error("path has {0} vertices, at least 2 are required")]
    PathTooShort(usize),
    #[error("coordinate ({x}, {y}) lies outside the {width}x{height} drawing")]
    OutOfBoundsCoordinate { x: f64, y: f64, width: u32, height: u32 },
    #[error("unsupported bundle version {0}")]
    UnsupportedVersion(u32),
    #[error("landmark #{0} has an empty label")]
    EmptyLabel(usize),
    #[error("bundle has no {ANNOTATIONS_FILE}")]
    MissingAnnotations,
    #[error("malformed annotations: {0}")]
    Malformed(String),
    #[error("path has zero length")]
    ZeroLengthPath,
    #[error("resampling interval must be positive, got {0}")]
    InvalidInterval(f64),
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("zip error: {0}")]
    Zip(#[from] zip::result::ZipError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A labelled landmark drawn on the sketch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkAnnotation {
    pub label: String,
    pub position: Point,
    pub floor: i32,
}

/// A path vertex with the floor it was drawn on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub point: Point,
    pub floor: i32,
}

/// A parsed and validated hand-drawn map.
#[derive(Debug, Clone, PartialEq)]
pub struct HandDrawnMap {
    pub drawing: RgbImage,
    pub landmarks: Vec<LandmarkAnnotation>,
    pub path: Vec<Waypoint>,
}

impl HandDrawnMap {
    pub fn start(&self) -> Point {
        self.path[0].point
    }

    pub fn goal(&self) -> Point {
        self.path[self.path.len() - 1].point
    }

    pub fn width(&self) -> u32 {
        self.drawing.width()
    }

    pub fn height(&self) -> u32 {
        self.drawing.height()
    }

    pub fn diagonal(&self) -> f64 {
        f64::from(self.width()).hypot(f64::from(self.height()))
    }

    pub fn path_points(&self) -> Vec<Point> {
        self.path.iter().map(|w| w.point).collect()
    }

    /// Serializes back into the bundle form.
    pub fn to_bundle(&self) -> SketchBundle {
        SketchBundle {
            image: self.drawing.clone(),
            annotations: Annotations {
                version: Some(BUNDLE_VERSION),
                landmarks: self
                    .landmarks
                    .iter()
                    .map(|l| AnnotatedLandmark {
                        label: l.label.clone(),
                        x: l.position.x,
                        y: l.position.y,
                        floor: (l.floor != 0).then_some(l.floor),
                        extra: BTreeMap::new(),
                    })
                    .collect(),
                path: Some(self.path.iter().map(|w| PathVertex::from(*w)).collect()),
                extra: BTreeMap::new(),
            },
        }
    }
}

/// Raw `annotations.json` contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Annotations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u32>,
    #[serde(default)]
    pub landmarks: Vec<AnnotatedLandmark>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<PathVertex>>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedLandmark {
    pub label: String,
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<i32>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

/// `[x, y]` or `[x, y, floor]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PathVertex {
    Xy([f64; 2]),
    XyFloor([f64; 3]),
}

impl PathVertex {
    fn waypoint(self) -> Waypoint {
        match self {
            PathVertex::Xy([x, y]) => Waypoint { point: Point::new(x, y), floor: 0 },
            PathVertex::XyFloor([x, y, f]) => Waypoint { point: Point::new(x, y), floor: f as i32 },
        }
    }
}

impl From<Waypoint> for PathVertex {
    fn from(w: Waypoint) -> Self {
        if w.floor == 0 {
            PathVertex::Xy([w.point.x, w.point.y])
        } else {
            PathVertex::XyFloor([w.point.x, w.point.y, f64::from(w.floor)])
        }
    }
}

/// The serialized form of a sketch: drawing plus annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchBundle {
    pub image: RgbImage,
    pub annotations: Annotations,
}

/// Result of parsing: the map plus any non-fatal warnings.
#[derive(Debug, Clone)]
pub struct ParsedBundle {
    pub map: HandDrawnMap,
    pub warnings: Vec<String>,
}

impl SketchBundle {
    /// Validates the bundle into a [`HandDrawnMap`].
    pub fn validate(&self) -> Result<ParsedBundle, SketchError> {
        let mut warnings = Vec::new();
        let ann = &self.annotations;
        match ann.version {
            Some(BUNDLE_VERSION) => {}
            Some(v) => return Err(SketchError::UnsupportedVersion(v)),
            None => warnings.push(format!("missing version, assuming {BUNDLE_VERSION}")),
        }
        for key in ann.extra.keys() {
            warnings.push(format!("ignoring unknown annotation field {key:?}"));
        }
        let (width, height) = self.image.dimensions();
        if width == 0 || height == 0 {
            return Err(SketchError::MissingImage);
        }
        let in_bounds = |p: Point| -> Result<(), SketchError> {
            if p.is_finite() && p.x >= 0.0 && p.y >= 0.0 && p.x < f64::from(width) && p.y < f64::from(height) {
                Ok(())
            } else {
                Err(SketchError::OutOfBoundsCoordinate { x: p.x, y: p.y, width, height })
            }
        };

        let mut landmarks = Vec::with_capacity(ann.landmarks.len());
        for (i, l) in ann.landmarks.iter().enumerate() {
            let label = l.label.trim();
            if label.is_empty() {
                return Err(SketchError::EmptyLabel(i));
            }
            for key in l.extra.keys() {
                warnings.push(format!("landmark #{i}: ignoring unknown field {key:?}"));
            }
            let position = Point::new(l.x, l.y);
            in_bounds(position)?;
            landmarks.push(LandmarkAnnotation { label: label.to_string(), position, floor: l.floor.unwrap_or(0) });
        }

        let raw_path = ann.path.as_ref().ok_or(SketchError::MissingPath)?;
        if raw_path.len() < 2 {
            return Err(SketchError::PathTooShort(raw_path.len()));
        }
        let path: Vec<Waypoint> = raw_path.iter().map(|v| v.waypoint()).collect();
        for w in &path {
            in_bounds(w.point)?;
        }

        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(ParsedBundle { map: HandDrawnMap { drawing: self.image.clone(), landmarks, path }, warnings })
    }

    pub fn from_parts(png: &[u8], annotations_json: &[u8]) -> Result<Self, SketchError> {
        let image = image::load_from_memory_with_format(png, image::ImageFormat::Png)?.to_rgb8();
        let annotations: Annotations =
            serde_json::from_slice(annotations_json).map_err(|e| SketchError::Malformed(e.to_string()))?;
        Ok(Self { image, annotations })
    }

    pub fn read_dir(dir: &Path) -> Result<Self, SketchError> {
        let png = std::fs::read(dir.join(IMAGE_FILE)).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => SketchError::MissingImage,
            _ => SketchError::Io(e),
        })?;
        let json = std::fs::read(dir.join(ANNOTATIONS_FILE)).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => SketchError::MissingAnnotations,
            _ => SketchError::Io(e),
        })?;
        Self::from_parts(&png, &json)
    }

    /// Reads a zip archive; entries are matched by file name, so a single
    /// top-level folder inside the archive is fine.
    pub fn read_zip(bytes: &[u8]) -> Result<Self, SketchError> {
        let mut archive = zip::ZipArchive::new(Cursor::new(bytes))?;
        let mut png = None;
        let mut json = None;
        for i in 0..archive.len() {
            let mut entry = archive.by_index(i)?;
            let name = entry.name().rsplit('/').next().unwrap_or_default().to_string();
            let slot = match name.as_str() {
                IMAGE_FILE => &mut png,
                ANNOTATIONS_FILE => &mut json,
                _ => continue,
            };
            let mut buf = Vec::new();
            entry.read_to_end(&mut buf)?;
            *slot = Some(buf);
        }
        let png = png.ok_or(SketchError::MissingImage)?;
        let json = json.ok_or(SketchError::MissingAnnotations)?;
        Self::from_parts(&png, &json)
    }

    pub fn annotations_json(&self) -> String {
        serde_json::to_string_pretty(&self.annotations).expect("annotations serialize")
    }

    pub fn png_bytes(&self) -> Result<Vec<u8>, SketchError> {
        let mut out = Cursor::new(Vec::new());
        self.image.write_to(&mut out, image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), SketchError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(IMAGE_FILE), self.png_bytes()?)?;
        std::fs::write(dir.join(ANNOTATIONS_FILE), self.annotations_json())?;
        Ok(())
    }

    pub fn to_zip(&self) -> Result<Vec<u8>, SketchError> {
        let mut writer = zip::ZipWriter::new(Cursor::new(Vec::new()));
        let options = zip::write::SimpleFileOptions::default();
        writer.start_file(IMAGE_FILE, options)?;
        writer.write_all(&self.png_bytes()?)?;
        writer.start_file(ANNOTATIONS_FILE, options)?;
        writer.write_all(self.annotations_json().as_bytes())?;
        Ok(writer.finish()?.into_inner())
    }
}

/// Parses a bundle from a directory or a `.zip` file.
pub fn parse_bundle(path: &Path) -> Result<ParsedBundle, SketchError> {
    let bundle =
        if path.is_dir() { SketchBundle::read_dir(path)? } else { SketchBundle::read_zip(&std::fs::read(path)?)? };
    bundle.validate()
}

/// Parses a zip archive held in memory.
pub fn parse_bundle_bytes(bytes: &[u8]) -> Result<ParsedBundle, SketchError> {
    SketchBundle::read_zip(bytes)?.validate()
}

/// Samples `polyline` at arc-length spacing `interval`, keeping both endpoints.
pub fn resample_path(polyline: &[Point], interval: f64) -> Result<Vec<Point>, SketchError> {
    if polyline.len() < 2 {
        return Err(SketchError::PathTooShort(polyline.len()));
    }
    if !interval.is_finite() || interval <= 0.0 {
        return Err(SketchError::InvalidInterval(interval));
    }
    let total = polyline_length(polyline);
    if total <= 0.0 {
        return Err(SketchError::ZeroLengthPath);
    }
    // Tolerance keeps a sample that lands on the endpoint from being emitted twice.
    let eps = 1e-9 * total.max(1.0);
    let mut out = vec![polyline[0]];
    let mut next = interval;
    let mut walked = 0.0;
    for seg in polyline.windows(2) {
        let len = seg[0].distance(seg[1]);
        while len > 0.0 && next <= walked + len && next < total - eps {
            out.push(seg[0].lerp(seg[1], (next - walked) / len));
            next += interval;
        }
        walked += len;
    }
    out.push(polyline[polyline.len() - 1]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(json: &str) -> SketchBundle {
        SketchBundle { image: RgbImage::new(200, 100), annotations: serde_json::from_str(json).unwrap() }
    }

    #[test]
    fn one_vertex_path_is_too_short() {
        let b = bundle(r#"{"version":1,"landmarks":[],"path":[[1,1]]}"#);
        assert!(matches!(b.validate(), Err(SketchError::PathTooShort(1))));
    }

    #[test]
    fn negative_landmark_is_out_of_bounds() {
        let b = bundle(r#"{"version":1,"landmarks":[{"label":"box","x":-3,"y":10}],"path":[[1,1],[5,5]]}"#);
        assert!(matches!(b.validate(), Err(SketchError::OutOfBoundsCoordinate { .. })));
    }

    #[test]
    fn missing_path_and_bad_version() {
        let b = bundle(r#"{"version":1,"landmarks":[]}"#);
        assert!(matches!(b.validate(), Err(SketchError::MissingPath)));
        let b = bundle(r#"{"version":7,"path":[[1,1],[5,5]]}"#);
        assert!(matches!(b.validate(), Err(SketchError::UnsupportedVersion(7))));
    }

    #[test]
    fn unknown_fields_produce_warnings() {
        let b = bundle(
            r#"{"version":1,"author":"x","landmarks":[{"label":" desk ","x":3,"y":4,"color":"red"}],"path":[[1,1],[5,5,1]]}"#,
        );
        let parsed = b.validate().unwrap();
        assert_eq!(parsed.warnings.len(), 2);
        assert_eq!(parsed.map.landmarks[0].label, "desk");
        assert_eq!(parsed.map.path[1].floor, 1);
    }

    #[test]
    fn empty_label_rejected() {
        let b = bundle(r#"{"version":1,"landmarks":[{"label":"  ","x":3,"y":4}],"path":[[1,1],[5,5]]}"#);
        assert!(matches!(b.validate(), Err(SketchError::EmptyLabel(0))));
    }

    #[test]
    fn straight_segment_resamples_evenly() {
        let pts = resample_path(&[Point::new(0.0, 0.0), Point::new(100.0, 0.0)], 25.0).unwrap();
        let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![0.0, 25.0, 50.0, 75.0, 100.0]);
        assert!(pts.iter().all(|p| p.y == 0.0));
    }

    #[test]
    fn large_interval_keeps_endpoints_only() {
        let line = [Point::new(0.0, 0.0), Point::new(100.0, 0.0)];
        assert_eq!(resample_path(&line, 1000.0).unwrap(), line.to_vec());
    }

    #[test]
    fn zero_length_and_bad_interval() {
        let p = Point::new(3.0, 3.0);
        assert!(matches!(resample_path(&[p, p], 5.0), Err(SketchError::ZeroLengthPath)));
        let line = [Point::new(0.0, 0.0), Point::new(1.0, 0.0)];
        assert!(matches!(resample_path(&line, 0.0), Err(SketchError::InvalidInterval(_))));
    }

    /// Independent oracle: walk the polyline one tiny step at a time and
    /// record the point each time the travelled distance crosses a multiple
    /// of the interval.
    fn brute_force_walk(polyline: &[Point], interval: f64) -> Vec<Point> {
        let step = 1e-3;
        let mut out = vec![polyline[0]];
        let mut travelled = 0.0_f64;
        let mut k = 1.0;
        for seg in polyline.windows(2) {
            let len = seg[0].distance(seg[1]);
            let n = (len / step).round() as usize;
            for i in 1..=n {
                let before = travelled;
                travelled += len / n as f64;
                if before < k * interval && travelled >= k * interval - 1e-12 {
                    out.push(seg[0].lerp(seg[1], i as f64 / n as f64));
                    k += 1.0;
                }
            }
        }
        if out.last().unwrap().distance(*polyline.last().unwrap()) > 1e-6 {
            out.push(*polyline.last().unwrap());
        }
        out
    }

    #[test]
    fn l_shape_matches_brute_force_walk() {
        let l = [Point::new(0.0, 0.0), Point::new(50.0, 0.0), Point::new(50.0, 50.0)];
        let got = resample_path(&l, 25.0).unwrap();
        let want = brute_force_walk(&l, 25.0);
        assert_eq!(got.len(), 5);
        assert_eq!(want.len(), 5);
        for (g, w) in got.iter().zip(&want) {
            assert!(g.distance(*w) < 1e-2, "{g:?} vs {w:?}");
        }
        assert!(got[1].distance(Point::new(50.0, 0.0)) <= 25.0 + 1e-9);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn polyline() -> impl Strategy<Value = Vec<Point>> {
            prop::collection::vec((0.0..500.0f64, 0.0..500.0f64), 2..8)
                .prop_map(|v| v.into_iter().map(|(x, y)| Point::new(x, y)).collect())
        }

        proptest! {
            #[test]
            fn resample_gaps_bounded(poly in polyline(), interval in 1.0..80.0f64) {
                prop_assume!(polyline_length(&poly) > 1e-3);
                let pts = resample_path(&poly, interval).unwrap();
                prop_assert_eq!(pts[0], poly[0]);
                prop_assert_eq!(*pts.last().unwrap(), *poly.last().unwrap());
                for w in pts.windows(2) {
                    prop_assert!(w[0].distance(w[1]) <= interval + 1e-6);
                }
            }
        }
    }
}
