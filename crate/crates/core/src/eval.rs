//! Batch evaluation of ablation variants over a suite of seeded episodes.

use crate::fixtures;
use crate::pipeline::{run, AblationFlags, SimConfig};
use crate::reasoning::ReasoningBackend;
use crate::simulator::{distort_scene, ground_truth_scene, DistortionConfig, GridWorld, SimError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::Arc;

/// One suite row: `trials` episodes on a fixture world. With a distortion,
/// trial `k` uses seed `distortion.seed + k`; without one every trial uses
/// the ground-truth sketch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub world: String,
    #[serde(default)]
    pub distortion: Option<DistortionConfig>,
    pub trials: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub entries: Vec<SuiteEntry>,
}

impl Suite {
    /// Every fixture world with the same distortion and trial count.
    pub fn all_worlds(distortion: Option<DistortionConfig>, trials: u32) -> Self {
        Self {
            entries: fixtures::world_names()
                .into_iter()
                .map(|w| SuiteEntry { world: w.to_string(), distortion, trials })
                .collect(),
        }
    }

    pub fn episode_count(&self) -> usize {
        self.entries.iter().map(|e| e.trials as usize).sum()
    }

    fn resolve(&self) -> Result<Vec<Arc<GridWorld>>, SimError> {
        self.entries.iter().map(|e| fixtures::world(&e.world).map(Arc::new)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub success: bool,
    pub spl: f64,
    pub distance_m: f64,
    pub steps: u32,
    pub error: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub variant: String,
    pub episodes: usize,
    pub sr: f64,
    pub spl: f64,
    pub distance_m: f64,
    pub steps: f64,
    pub errors: usize,
    pub successes: usize,
}

impl VariantRow {
    fn aggregate(variant: String, records: &[EpisodeRecord]) -> Self {
        let n = records.len();
        let mean = |f: &dyn Fn(&EpisodeRecord) -> f64| {
            if n == 0 {
                0.0
            } else {
                records.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let successes = records.iter().filter(|r| r.success).count();
        Self {
            variant,
            episodes: n,
            sr: mean(&|r| f64::from(u8::from(r.success))),
            spl: mean(&|r| r.spl),
            distance_m: mean(&|r| r.distance_m),
            steps: mean(&|r| f64::from(r.steps)),
            errors: records.iter().filter(|r| r.error).count(),
            successes,
        }
    }
}

pub const CSV_HEADER: &str = "variant,episodes,sr,spl,distance_m,steps,errors";

pub fn to_csv(rows: &[VariantRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{:.4},{:.4},{:.3},{:.2},{}",
            r.variant, r.episodes, r.sr, r.spl, r.distance_m, r.steps, r.errors
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Runs every episode of `suite` and returns per-episode records in suite
/// order. Failures to build an episode are recorded, never propagated.
pub fn run_variant(
    suite: &Suite,
    flags: AblationFlags,
    backend: Arc<dyn ReasoningBackend>,
    base: SimConfig,
) -> Result<Vec<EpisodeRecord>, SimError> {
    let worlds = suite.resolve()?;
    let jobs: Vec<(usize, u32)> =
        suite.entries.iter().enumerate().flat_map(|(i, e)| (0..e.trials).map(move |k| (i, k))).collect();
    let records = jobs
        .par_iter()
        .map(|&(i, k)| {
            let entry = &suite.entries[i];
            let world = &worlds[i];
            let scene = ground_truth_scene(world);
            let seed = entry.distortion.map_or(u64::from(k), |d| d.seed + u64::from(k));
            let map = match entry.distortion {
                Some(d) => match distort_scene(&scene, &DistortionConfig { seed, ..d }) {
                    Ok(s) => s.to_map(),
                    Err(e) => {
                        log::warn!("{}: trial {k}: {e}", entry.world);
                        return EpisodeRecord { success: false, spl: 0.0, distance_m: 0.0, steps: 0, error: true };
                    }
                },
                None => scene.to_map(),
            };
            let mut config = base;
            config.pipeline.flags = flags;
            config.seed = seed;
            match run(map, world.clone(), backend.clone(), config, None) {
                Ok(r) => EpisodeRecord {
                    success: r.metrics.success,
                    spl: r.metrics.spl,
                    distance_m: r.metrics.distance_m,
                    steps: r.metrics.steps,
                    error: r.trace.error.is_some(),
                },
                Err(e) => {
                    log::warn!("{}: trial {k}: {e}", entry.world);
                    EpisodeRecord { success: false, spl: 0.0, distance_m: 0.0, steps: 0, error: true }
                }
            }
        })
        .collect();
    Ok(records)
}

/// One row per variant, in the given order.
pub fn evaluate(
    suite: &Suite,
    variants: &[AblationFlags],
    backend: Arc<dyn ReasoningBackend>,
    base: SimConfig,
) -> Result<Vec<VariantRow>, SimError> {
    variants
        .iter()
        .map(|&flags| {
            let records = run_variant(suite, flags, backend.clone(), base)?;
            Ok(VariantRow::aggregate(flags.variant_name(), &records))
        })
        .collect()
}
