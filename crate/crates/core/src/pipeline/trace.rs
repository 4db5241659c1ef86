//! Episode trace: one JSON object per line.
//!
//! Line 1 is a `header` record, then one `step` record per executed step,
//! then an optional `metrics` record. Every record carries a `record` tag.

use super::{AblationFlags, EpisodeStatus};
use crate::action::{Action, TurnDirection};
use crate::perception::Quadrant;
use crate::reasoning::{CallStats, Percept};
use crate::simulator::{Metrics, RobotPose};
use crate::topomap::NodeId;
use serde::{Deserialize, Serialize};
use std::io::{self, BufRead, Write};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSummary {
    pub objects: Vec<(String, Quadrant)>,
    /// Structural turns with the near-field flag.
    pub turns: Vec<(TurnDirection, bool)>,
}

impl ObservationSummary {
    pub fn from_percept(p: &Percept) -> Self {
        Self {
            objects: p.ldict.iter().map(|e| (e.label.clone(), e.quadrant)).collect(),
            turns: p.turns.iter().map(|t| (t.direction, t.near)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimInfo {
    /// Ground-truth pose after executing the step's action.
    pub pose: RobotPose,
    pub advanced_cells: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub t: u32,
    pub observation: ObservationSummary,
    pub scene_description: String,
    /// (step, similarity) of the retrieved experience.
    pub retrieved: Option<(u32, f64)>,
    pub prev_position: Option<NodeId>,
    pub prev_action: Option<Action>,
    pub candidates: Vec<NodeId>,
    pub svap_path: Option<String>,
    pub localization_scores: Vec<(String, f64)>,
    pub position: NodeId,
    /// Localization response was unusable and p' was reused.
    pub localization_fallback: bool,
    pub action_scores: Vec<(String, f64)>,
    pub action: Action,
    pub action_fallback: bool,
    /// describe, localize, act, in seconds.
    pub latency_s: [f64; 3],
    pub sim: Option<SimInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub backend: String,
    pub world: Option<String>,
    pub flags: AblationFlags,
    pub seed: u64,
    /// Seconds since the Unix epoch; 0 in deterministic mode.
    pub started_unix_s: f64,
    pub robot_nodes: usize,
    pub junctions: Vec<NodeId>,
    pub predicted_landmarks: usize,
    pub plan: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub steps: Vec<StepTrace>,
    pub status: EpisodeStatus,
    pub stats: CallStats,
    pub metrics: Option<Metrics>,
    /// Why the episode aborted, when a step failed.
    pub error: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header(TraceHeader),
    Step(StepTrace),
    Metrics { status: EpisodeStatus, stats: CallStats, metrics: Option<Metrics>, error: Option<String> },
}

impl EpisodeTrace {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        let line = |w: &mut W, r: &Record| -> io::Result<()> {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")
        };
        line(&mut w, &Record::Header(self.header.clone()))?;
        for s in &self.steps {
            line(&mut w, &Record::Step(s.clone()))?;
        }
        line(
            &mut w,
            &Record::Metrics {
                status: self.status,
                stats: self.stats.clone(),
                metrics: self.metrics,
                error: self.error.clone(),
            },
        )
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> io::Result<Self> {
        let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
        let mut header = None;
        let mut steps = Vec::new();
        let mut tail = None;
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line).map_err(|e| bad(format!("line {}: {e}", n + 1)))? {
                Record::Header(h) => header = Some(h),
                Record::Step(s) => steps.push(s),
                Record::Metrics { status, stats, metrics, error } => tail = Some((status, stats, metrics, error)),
            }
        }
        let header = header.ok_or_else(|| bad("missing header record".into()))?;
        let (status, stats, metrics, error) = tail.ok_or_else(|| bad("missing metrics record".into()))?;
        Ok(Self { header, steps, status, stats, metrics, error })
    }
}
