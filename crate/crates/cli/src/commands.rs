//! Subcommand implementations, kept free of argument parsing.

use crate::config::{resolve_world, BackendKind, FileConfig};
use anyhow::{bail, Context, Result};
use hamnav_core::eval::{evaluate, to_csv, Suite, SuiteEntry, VariantRow};
use hamnav_core::perception::{classify_turns, extract_edges, HoughParams};
use hamnav_core::pipeline::{run, AblationFlags, EpisodeResult, SimConfig, SplRefKind};
use hamnav_core::simulator::{distort, ground_truth_scene, DistortionConfig, GridWorld};
use hamnav_core::sketchmap::{parse_bundle, SketchBundle};
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Where the hand-drawn map comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SketchSource {
    /// A bundle directory or `.zip`.
    Bundle(PathBuf),
    /// Generated from the world's ground-truth sketch.
    Distort(DistortionConfig),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub world: String,
    pub sketch: SketchSource,
    pub backend: BackendKind,
    pub file: FileConfig,
    pub flags: AblationFlags,
    pub seed: u64,
    pub max_steps: Option<u32>,
    pub deterministic: bool,
    pub spl_ref: SplRefKind,
    pub out: Option<PathBuf>,
}

pub fn sketch_bundle(world: &GridWorld, source: &SketchSource) -> Result<SketchBundle> {
    match source {
        SketchSource::Bundle(path) => Ok(parse_bundle(path)?.map.to_bundle()),
        SketchSource::Distort(cfg) => Ok(distort(&ground_truth_scene(world), cfg)?),
    }
}

pub fn metrics_line(r: &EpisodeResult) -> String {
    let m = &r.metrics;
    format!("SR={} SPL={:.4} D={:.2} STEPS={}", u8::from(m.success), m.spl, m.distance_m, m.steps)
}

/// Runs one episode. Config problems are errors; navigation failure is not.
pub fn cmd_run(cfg: &RunConfig) -> Result<EpisodeResult> {
    let world = Arc::new(resolve_world(&cfg.world)?);
    let parsed = match &cfg.sketch {
        SketchSource::Bundle(path) => parse_bundle(path).with_context(|| format!("sketch {}", path.display()))?,
        SketchSource::Distort(d) => distort(&ground_truth_scene(&world), d)?.validate()?,
    };
    for w in &parsed.warnings {
        log::warn!("sketch: {w}");
    }
    let backend = cfg.file.backend(cfg.backend)?;
    let mut sim = SimConfig { spl_ref: cfg.spl_ref, seed: cfg.seed, ..SimConfig::default() };
    sim.pipeline.flags = cfg.flags;
    sim.pipeline.max_steps = cfg.max_steps;
    sim.pipeline.deterministic = cfg.deterministic;
    Ok(run(parsed.map, world, backend, sim, cfg.out.as_deref())?)
}

/// Suite file: TOML with `[[entries]]` tables of `world`, `trials` and an
/// optional `[entries.distortion]`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    entries: Vec<SuiteEntry>,
}

pub fn load_suite(path: &Path) -> Result<Suite> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let f: SuiteFile = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if f.entries.is_empty() {
        bail!("suite {} has no entries", path.display());
    }
    Ok(Suite { entries: f.entries })
}

/// Parses `full,no_em,no_pruning+no_em` into variants.
pub fn parse_variants(list: &str) -> Result<Vec<AblationFlags>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|v| {
            if v == "full" {
                Ok(AblationFlags::default())
            } else {
                Ok(AblationFlags::parse_list(&v.replace('+', ","))?)
            }
        })
        .collect()
}

pub fn default_variants() -> Vec<AblationFlags> {
    std::iter::once("full").chain(AblationFlags::NAMES).map(|v| parse_variants(v).expect("known names")[0]).collect()
}

pub fn cmd_eval(
    suite: &Suite,
    variants: &[AblationFlags],
    backend: BackendKind,
    file: &FileConfig,
    seeds: Option<u32>,
) -> Result<Vec<VariantRow>> {
    let mut suite = suite.clone();
    if let Some(n) = seeds {
        suite.entries.iter_mut().for_each(|e| e.trials = n);
    }
    let mut base = SimConfig::default();
    base.pipeline.deterministic = true;
    Ok(evaluate(&suite, variants, file.backend(backend)?, base)?)
}

pub fn eval_csv(rows: &[VariantRow]) -> String {
    to_csv(rows)
}

/// One `LEFT|RIGHT x_min y_min x_max y_max` line per detected turn.
pub fn cmd_detect_turns(mask_path: &Path) -> Result<String> {
    let mask = image::open(mask_path).with_context(|| format!("reading {}", mask_path.display()))?.to_luma8();
    let params = HoughParams::for_width(mask.width());
    let edges = extract_edges(&mask, &params)?;
    let mut out = String::new();
    for t in classify_turns(&edges, mask.width(), mask.height()) {
        let b = t.bbox;
        let dir = format!("{:?}", t.direction).to_uppercase();
        writeln!(out, "{dir} {:.0} {:.0} {:.0} {:.0}", b.x_min, b.y_min, b.x_max, b.y_max)?;
    }
    Ok(out)
}

/// Writes a bundle for a world: a directory, or a zip when `out` ends in `.zip`.
pub fn cmd_sketch(world: &str, distortion: &DistortionConfig, out: &Path) -> Result<SketchBundle> {
    let world = resolve_world(world)?;
    let bundle = distort(&ground_truth_scene(&world), distortion)?;
    if out.extension().is_some_and(|e| e.eq_ignore_ascii_case("zip")) {
        std::fs::write(out, bundle.to_zip()?)?;
    } else {
        bundle.write_dir(out)?;
    }
    Ok(bundle)
}
