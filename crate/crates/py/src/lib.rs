//! Python module `hamnav`: worlds, sketches, topological maps, retention,
//! turn detection, score parsing and closed-loop episodes.

// pyo3 0.22's argument conversion expands to `PyErr::from(PyErr)`.
#![allow(clippy::useless_conversion)]

use hamnav_core::action::Action;
use hamnav_core::fixtures;
use hamnav_core::perception::{classify_turns, extract_edges, HoughParams};
use hamnav_core::pipeline::{self, AblationFlags, SimConfig, SplRefKind};
use hamnav_core::prompting::parse_scored_response as core_parse;
use hamnav_core::reasoning::{OracleBackend, ReasoningBackend};
use hamnav_core::simulator::{self, distort_scene, ground_truth_scene, DistortionConfig, GridWorld};
use hamnav_core::sketchmap::{parse_bundle_bytes, HandDrawnMap, SketchBundle};
use hamnav_core::topomap::{retention_probability, PruneParams, TopoConfig, TopoMap};
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "World", frozen)]
#[derive(Clone)]
struct PyWorld {
    inner: Arc<GridWorld>,
}

#[pymethods]
impl PyWorld {
    /// A shipped fixture world by name.
    #[staticmethod]
    fn fixture(name: &str) -> PyResult<Self> {
        fixtures::world(name).map(|w| Self { inner: Arc::new(w) }).map_err(|e| PyKeyError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        GridWorld::from_json(text).map(|w| Self { inner: Arc::new(w) }).map_err(value_err)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn cell_size(&self) -> f64 {
        self.inner.cell_size
    }

    #[getter]
    fn floors(&self) -> usize {
        self.inner.floors.len()
    }

    fn shortest_path_length_m(&self) -> f64 {
        self.inner.shortest_path_length_m()
    }

    /// Ground-truth sketch, or a distorted one when any distortion is set.
    #[pyo3(signature = (jitter=0.0, omission=0.0, warp=(1.0, 1.0), seed=0))]
    fn sketch(&self, jitter: f64, omission: f64, warp: (f64, f64), seed: u64) -> PyResult<PySketch> {
        let cfg = DistortionConfig { jitter_sigma: jitter, omission_rate: omission, scale_warp: warp, seed };
        let scene = distort_scene(&ground_truth_scene(&self.inner), &cfg).map_err(value_err)?;
        Ok(PySketch { inner: scene.to_map() })
    }

    fn __repr__(&self) -> String {
        format!("World({:?})", self.inner.name)
    }
}

#[pyclass(name = "Sketch", frozen)]
#[derive(Clone)]
struct PySketch {
    inner: HandDrawnMap,
}

#[pymethods]
impl PySketch {
    /// Parses a zipped bundle (`map.png` + `annotations.json`).
    #[staticmethod]
    fn from_zip(data: &[u8]) -> PyResult<Self> {
        parse_bundle_bytes(data).map(|p| Self { inner: p.map }).map_err(value_err)
    }

    #[staticmethod]
    fn from_parts(png: &[u8], annotations_json: &[u8]) -> PyResult<Self> {
        SketchBundle::from_parts(png, annotations_json)
            .and_then(|b| b.validate())
            .map(|p| Self { inner: p.map })
            .map_err(value_err)
    }

    /// (label, x, y, floor) per landmark.
    #[getter]
    fn landmarks(&self) -> Vec<(String, f64, f64, i32)> {
        self.inner.landmarks.iter().map(|l| (l.label.clone(), l.position.x, l.position.y, l.floor)).collect()
    }

    /// (x, y, floor) per path vertex.
    #[getter]
    fn path(&self) -> Vec<(f64, f64, i32)> {
        self.inner.path.iter().map(|w| (w.point.x, w.point.y, w.floor)).collect()
    }

    #[getter]
    fn size(&self) -> (u32, u32) {
        (self.inner.width(), self.inner.height())
    }

    fn to_zip<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let zip = self.inner.to_bundle().to_zip().map_err(value_err)?;
        Ok(PyBytes::new_bound(py, &zip))
    }

    fn annotations_json(&self) -> String {
        self.inner.to_bundle().annotations_json()
    }

    /// Topological map with robot nodes every `node_interval` pixels.
    #[pyo3(signature = (node_interval=None))]
    fn topomap(&self, node_interval: Option<f64>) -> PyResult<PyTopoMap> {
        let cfg = TopoConfig { node_interval, ..TopoConfig::default() };
        TopoMap::from_map(&self.inner, &cfg).map(|t| PyTopoMap { inner: t }).map_err(value_err)
    }
}

#[pyclass(name = "TopoMap", frozen)]
struct PyTopoMap {
    inner: TopoMap,
}

#[pymethods]
impl PyTopoMap {
    #[getter]
    fn robot_nodes(&self) -> usize {
        self.inner.robot_nodes.len()
    }

    #[getter]
    fn junctions(&self) -> Vec<usize> {
        self.inner.junctions()
    }

    /// (label, anchor node, predicted) per landmark node.
    #[getter]
    fn landmarks(&self) -> Vec<(String, usize, bool)> {
        self.inner.landmark_nodes.iter().map(|l| (l.label.clone(), l.anchor, l.predicted)).collect()
    }

    fn graph_distance(&self, a: usize, b: usize) -> PyResult<usize> {
        self.inner.graph_distance(a, b).map_err(value_err)
    }

    /// Robot node ids kept after pruning around `prev` given the last action
    /// (`"move forward"`, `"turn left"`, `"turn right"`, `"stop"` or None).
    #[pyo3(signature = (prev, action=None))]
    fn prune(&self, prev: Option<usize>, action: Option<&str>) -> PyResult<Vec<usize>> {
        let action = action.map(Action::from_str).transpose().map_err(value_err)?;
        Ok(self.inner.prune(prev, action, &PruneParams::default()).robot_ids())
    }

    /// Plan text, one sentence per junction-bounded segment.
    fn plan(&self) -> Vec<String> {
        hamnav_core::prompting::generate_plan(&self.inner).sentences
    }

    fn to_json(&self) -> String {
        self.inner.to_graph_json().to_string()
    }
}

/// Retention score for a node `hops` away with transition penalty `delta`.
#[pyfunction]
#[pyo3(signature = (hops, delta, alpha=0.5, beta=2.0, gamma=0.5))]
fn retention(hops: f64, delta: f64, alpha: f64, beta: f64, gamma: f64) -> f64 {
    retention_probability(hops, delta, &PruneParams { alpha, beta, gamma, ..PruneParams::default() })
}

#[pyfunction]
fn spl(success: bool, reference_m: f64, traveled_m: f64) -> f64 {
    simulator::spl(success, reference_m, traveled_m)
}

type TurnBox = (String, (f64, f64, f64, f64));

/// Turns in a grayscale PNG mask as (direction, (x_min, y_min, x_max, y_max)).
#[pyfunction]
fn detect_turns(png: &[u8]) -> PyResult<Vec<TurnBox>> {
    let mask = image::load_from_memory(png).map_err(value_err)?.to_luma8();
    let edges = extract_edges(&mask, &HoughParams::for_width(mask.width())).map_err(value_err)?;
    Ok(classify_turns(&edges, mask.width(), mask.height())
        .into_iter()
        .map(|t| {
            let b = t.bbox;
            (format!("{:?}", t.direction).to_lowercase(), (b.x_min, b.y_min, b.x_max, b.y_max))
        })
        .collect())
}

/// Parses a scored model response; returns (chosen, {answer: score}).
#[pyfunction]
fn parse_scored_response(raw: &str, legal: Vec<String>) -> PyResult<(String, BTreeMap<String, f64>)> {
    let r = core_parse(raw, &legal).map_err(value_err)?;
    Ok((r.chosen.clone(), r.score_map()))
}

/// Runs one oracle-backed episode. Returns (metrics dict, trace as JSON lines).
#[pyfunction]
#[pyo3(signature = (world, sketch=None, ablate=Vec::new(), seed=0, max_steps=None, spl_ref="shortest"))]
fn run_episode(
    world: &PyWorld,
    sketch: Option<&PySketch>,
    ablate: Vec<String>,
    seed: u64,
    max_steps: Option<u32>,
    spl_ref: &str,
) -> PyResult<(BTreeMap<String, f64>, String)> {
    let flags = AblationFlags::parse_list(&ablate.join(",")).map_err(value_err)?;
    let map = match sketch {
        Some(s) => s.inner.clone(),
        None => ground_truth_scene(&world.inner).to_map(),
    };
    let mut cfg = SimConfig { seed, ..SimConfig::default() };
    cfg.spl_ref = match spl_ref {
        "shortest" => SplRefKind::Shortest,
        "sketch" => SplRefKind::Sketch,
        other => return Err(value_err(format!("spl_ref must be shortest or sketch, got {other:?}"))),
    };
    cfg.pipeline.flags = flags;
    cfg.pipeline.max_steps = max_steps;
    cfg.pipeline.deterministic = true;
    let backend: Arc<dyn ReasoningBackend> = Arc::new(OracleBackend::new(fixtures::oracle_rules()));
    let r = pipeline::run(map, world.inner.clone(), backend, cfg, None).map_err(value_err)?;
    let m = r.metrics;
    let metrics = BTreeMap::from([
        ("success".to_string(), f64::from(u8::from(m.success))),
        ("spl".to_string(), m.spl),
        ("distance_m".to_string(), m.distance_m),
        ("steps".to_string(), f64::from(m.steps)),
    ]);
    Ok((metrics, r.trace.to_jsonl()))
}

#[pyfunction]
fn fixture_worlds() -> Vec<&'static str> {
    fixtures::world_names()
}

#[pymodule]
pub fn hamnav(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWorld>()?;
    m.add_class::<PySketch>()?;
    m.add_class::<PyTopoMap>()?;
    m.add_function(wrap_pyfunction!(retention, m)?)?;
    m.add_function(wrap_pyfunction!(spl, m)?)?;
    m.add_function(wrap_pyfunction!(detect_turns, m)?)?;
    m.add_function(wrap_pyfunction!(parse_scored_response, m)?)?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(fixture_worlds, m)?)?;
    Ok(())
}
