//! Closed-loop episodes against the grid-world simulator.

use super::{
    init_episode, step, EpisodeState, EpisodeStatus, EpisodeTrace, Perception, PipelineConfig, PipelineError, SimInfo,
    StepTrace, TraceHeader,
};
use crate::action::Action;
use crate::perception::{Detector, GroundTruthDetector, ProvidedMask, Segmenter};
use crate::prompting::SvapImage;
use crate::reasoning::ReasoningBackend;
use crate::simulator::{
    execute, metrics, observe, EpisodeOutcome, GridWorld, Metrics, RobotPose, SplReference, ViewConfig, PX_PER_CELL,
};
use crate::sketchmap::HandDrawnMap;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

/// How SPL's reference length is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplRefKind {
    #[default]
    Shortest,
    /// Sketched path length at the ground-truth sketch scale.
    Sketch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub pipeline: PipelineConfig,
    pub view: ViewConfig,
    /// Cells advanced per forward action.
    pub stride: u32,
    pub spl_ref: SplRefKind,
    /// Recorded in the trace header.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let mut pipeline = PipelineConfig::default();
        pipeline.topo.node_interval = Some(PX_PER_CELL);
        Self { pipeline, view: ViewConfig::default(), stride: 1, spl_ref: SplRefKind::Shortest, seed: 0 }
    }
}

impl SimConfig {
    /// Near-turn depth threshold scaled to the world's cell size.
    fn for_world(mut self, world: &GridWorld) -> Self {
        self.pipeline.near_turn_depth_m = 2.5 * world.cell_size;
        self
    }
}

/// One episode: pipeline state, simulator pose and the growing trace.
pub struct SimEpisode {
    world: Arc<GridWorld>,
    backend: Arc<dyn ReasoningBackend>,
    detector: Arc<dyn Detector>,
    segmenter: Arc<dyn Segmenter>,
    config: SimConfig,
    state: EpisodeState,
    pose: RobotPose,
    header: TraceHeader,
    steps: Vec<StepTrace>,
    svaps: Vec<SvapImage>,
    advanced: Vec<u32>,
    sketch_length_px: f64,
    error: Option<String>,
}

impl std::fmt::Debug for SimEpisode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimEpisode")
            .field("world", &self.world.name)
            .field("backend", &self.backend.id())
            .field("t", &self.state.t)
            .field("status", &self.state.status)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub trace: EpisodeTrace,
    pub metrics: Metrics,
}

impl SimEpisode {
    pub fn new(
        map: HandDrawnMap,
        world: Arc<GridWorld>,
        backend: Arc<dyn ReasoningBackend>,
        config: SimConfig,
    ) -> Result<Self, PipelineError> {
        let config = config.for_world(&world);
        let sketch_length_px =
            map.path.windows(2).filter(|w| w[0].floor == w[1].floor).map(|w| w[0].point.distance(w[1].point)).sum();
        let state = init_episode(map, backend.as_ref(), config.pipeline)?;
        let started_unix_s = if config.pipeline.deterministic {
            0.0
        } else {
            SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
        };
        let header = TraceHeader {
            backend: backend.id().to_string(),
            world: Some(world.name.clone()),
            flags: config.pipeline.flags,
            seed: config.seed,
            started_unix_s,
            robot_nodes: state.topo.robot_nodes.len(),
            junctions: state.topo.junctions(),
            predicted_landmarks: state.topo.landmark_nodes.iter().filter(|l| l.predicted).count(),
            plan: state.plan.full_text.clone(),
        };
        Ok(Self {
            pose: world.start,
            world,
            backend,
            detector: Arc::new(GroundTruthDetector),
            segmenter: Arc::new(ProvidedMask),
            config,
            state,
            header,
            steps: Vec::new(),
            svaps: Vec::new(),
            advanced: Vec::new(),
            sketch_length_px,
            error: None,
        })
    }

    pub fn with_perception(mut self, detector: Arc<dyn Detector>, segmenter: Arc<dyn Segmenter>) -> Self {
        self.detector = detector;
        self.segmenter = segmenter;
        self
    }

    pub fn state(&self) -> &EpisodeState {
        &self.state
    }

    pub fn status(&self) -> EpisodeStatus {
        self.state.status
    }

    pub fn pose(&self) -> RobotPose {
        self.pose
    }

    pub fn steps(&self) -> &[StepTrace] {
        &self.steps
    }

    pub fn world(&self) -> &GridWorld {
        &self.world
    }

    /// SVAP of step `t`, kept only when `keep_svap` is set.
    pub fn svap(&self, t: usize) -> Option<&SvapImage> {
        self.svaps.get(t)
    }

    /// Observe, run one pipeline step and execute the chosen action.
    pub fn advance(&mut self) -> Result<&StepTrace, PipelineError> {
        let obs = observe(&self.world, &self.pose, &self.config.view);
        let models = Perception { detector: self.detector.as_ref(), segmenter: self.segmenter.as_ref() };
        let out = match step(&mut self.state, self.backend.as_ref(), &models, &obs) {
            Ok(out) => out,
            Err(e) => {
                if !matches!(e, PipelineError::StepLimit | PipelineError::NotRunning) {
                    log::warn!("episode aborted at t={}: {e}", self.state.t);
                    self.error = Some(e.to_string());
                }
                return Err(e);
            }
        };
        let result = execute(&self.world, &self.pose, out.action, self.config.stride);
        self.pose = result.pose;
        self.advanced.push(result.advanced_cells);
        let mut trace = out.trace;
        trace.sim = Some(SimInfo { pose: result.pose, advanced_cells: result.advanced_cells });
        if let Some(svap) = out.svap {
            self.svaps.push(svap);
        }
        self.steps.push(trace);
        if out.action == Action::Stop {
            // ground truth decides, not the agent's belief
            self.state.status = if self.metrics().success { EpisodeStatus::Succeeded } else { EpisodeStatus::Failed };
        }
        Ok(self.steps.last().expect("just pushed"))
    }

    /// Advances until a terminal status.
    pub fn run_to_end(&mut self) {
        while self.state.status == EpisodeStatus::Running {
            if self.advance().is_err() {
                self.state.status = EpisodeStatus::Aborted;
            }
        }
    }

    pub fn metrics(&self) -> Metrics {
        let outcome = EpisodeOutcome {
            final_pose: self.pose,
            stopped: self.steps.last().is_some_and(|s| s.action == Action::Stop),
            advanced_cells: self.advanced.clone(),
            backend_latency_s: self.state.stats.latency_s,
        };
        let reference = match self.config.spl_ref {
            SplRefKind::Shortest => SplReference::Shortest,
            SplRefKind::Sketch => {
                SplReference::Sketch { length_m: self.sketch_length_px / PX_PER_CELL * self.world.cell_size }
            }
        };
        metrics(&self.world, &outcome, reference)
    }

    pub fn trace(&self) -> EpisodeTrace {
        EpisodeTrace {
            header: self.header.clone(),
            steps: self.steps.clone(),
            status: self.state.status,
            stats: self.state.stats.clone(),
            metrics: self.state.status.is_terminal().then(|| self.metrics()),
            error: self.error.clone(),
        }
    }

    /// Writes `trace.jsonl` and, when SVAPs were kept, `svap/<t>.png`.
    pub fn write_outputs(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut trace = self.trace();
        if !self.svaps.is_empty() {
            let svap_dir = dir.join("svap");
            std::fs::create_dir_all(&svap_dir)?;
            for (t, s) in self.svaps.iter().enumerate() {
                s.image.save(svap_dir.join(format!("{t}.png"))).map_err(std::io::Error::other)?;
                trace.steps[t].svap_path = Some(format!("svap/{t}.png"));
            }
        }
        let f = std::fs::File::create(dir.join("trace.jsonl"))?;
        trace.write_jsonl(std::io::BufWriter::new(f))
    }
}

/// Runs a full episode, writing outputs to `out` when given.
pub fn run(
    map: HandDrawnMap,
    world: Arc<GridWorld>,
    backend: Arc<dyn ReasoningBackend>,
    config: SimConfig,
    out: Option<&Path>,
) -> Result<EpisodeResult, PipelineError> {
    let mut config = config;
    config.pipeline.keep_svap |= out.is_some();
    let mut ep = SimEpisode::new(map, world, backend, config)?;
    ep.run_to_end();
    if let Some(dir) = out {
        ep.write_outputs(dir).map_err(|e| PipelineError::Io(e.to_string()))?;
    }
    Ok(EpisodeResult { trace: ep.trace(), metrics: ep.metrics() })
}
