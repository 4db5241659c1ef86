//! Acceptance suite. Runs every headline criterion, prints one PASS/FAIL
//! line per criterion and exits non-zero if any fails.

use hamnav_core::action::{Action, TurnDirection};
use hamnav_core::eval::{run_variant, Suite};
use hamnav_core::fixtures;
use hamnav_core::geometry::Point;
use hamnav_core::perception::{classify_turns, extract_edges, DetectedTurn, HoughParams};
use hamnav_core::pipeline::{run, AblationFlags, SimConfig, SimEpisode};
use hamnav_core::prompting::{parse_scored_response, render_score_block};
use hamnav_core::reasoning::{OracleBackend, ReasoningBackend};
use hamnav_core::simulator::{
    distort_scene, ground_truth_scene, metrics, CellRef, DistortionConfig, EpisodeOutcome, GridWorld, Heading,
    RobotPose, SplReference,
};
use hamnav_core::topomap::{retention_probability, PruneParams, RobotNode, TopoMap};
use image::{GrayImage, Luma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn oracle() -> Arc<dyn ReasoningBackend> {
    Arc::new(OracleBackend::new(fixtures::oracle_rules()))
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

// ---- retention ----

fn chain(n: usize) -> TopoMap {
    TopoMap {
        robot_nodes: (0..n)
            .map(|id| RobotNode {
                id,
                position: Point::new(10.0 * id as f64, 0.0),
                is_junction: false,
                floor: 0,
                heading_change_deg: 0.0,
            })
            .collect(),
        landmark_nodes: Vec::new(),
    }
}

/// Reachability from `p` under the previous action, restated independently.
fn consistent(j: usize, p: usize, action: Option<Action>) -> bool {
    match action {
        None => true,
        Some(Action::MoveForward) => j >= p && j - p <= 2,
        Some(_) => j.abs_diff(p) <= 1,
    }
}

fn retention() -> Verdict {
    let started = Instant::now();
    let params = PruneParams::default();
    let z = |d: f64, delta: f64| retention_probability(d, delta, &params);
    let mut bad = Vec::new();
    if z(2.0, 0.0) != 0.5 {
        bad.push(format!("z(2,0)={}", z(2.0, 0.0)));
    }
    if (z(0.0, 0.0) - 0.731059).abs() > 1e-6 {
        bad.push(format!("z(0,0)={}", z(0.0, 0.0)));
    }
    if (z(4.0, 1.0) - 0.182426).abs() > 1e-6 {
        bad.push(format!("z(4,1)={}", z(4.0, 1.0)));
    }
    let topo = chain(20);
    let actions =
        [None, Some(Action::MoveForward), Some(Action::TurnLeft), Some(Action::TurnRight), Some(Action::Stop)];
    let mut cases = 0;
    for p in 0..20usize {
        for action in actions {
            let kept: BTreeSet<usize> = topo.prune(Some(p), action, &params).robot_nodes.iter().map(|n| n.id).collect();
            let want: BTreeSet<usize> =
                (0..20usize).filter(|&j| j.abs_diff(p) < 2 && consistent(j, p, action)).collect();
            if kept != want {
                bad.push(format!("p={p} {action:?}: kept {kept:?} want {want:?}"));
            }
            cases += 1;
        }
    }
    let elapsed = started.elapsed();
    let pass = bad.is_empty() && within(elapsed, 1.0);
    let detail = if bad.is_empty() {
        format!("3 values exact, {cases} chain cases match {{d<2, delta=0}}, {elapsed:.2?}")
    } else {
        bad.join("; ")
    };
    verdict(pass, detail)
}

// ---- closed loop ----

fn closed_loop() -> Verdict {
    let started = Instant::now();
    let names = fixtures::world_names();
    let mut successes = 0;
    let mut spl_sum = 0.0;
    let mut failures = Vec::new();
    for k in 0..20u64 {
        let name = names[k as usize % names.len()];
        let world = Arc::new(fixtures::world(name).expect("fixture"));
        let map = ground_truth_scene(&world).to_map();
        let mut config = SimConfig { seed: k, ..SimConfig::default() };
        config.pipeline.deterministic = true;
        match run(map, world, oracle(), config, None) {
            Ok(r) if r.metrics.success => {
                successes += 1;
                spl_sum += r.metrics.spl;
            }
            Ok(_) => failures.push(format!("{name}#{k}")),
            Err(e) => failures.push(format!("{name}#{k}: {e}")),
        }
    }
    let elapsed = started.elapsed();
    let mean_spl = spl_sum / 20.0;
    let pass = successes == 20 && mean_spl >= 0.90 && within(elapsed, 30.0);
    let mut detail = format!("SR={}/20 mean SPL={mean_spl:.4} {elapsed:.2?}", successes);
    if !failures.is_empty() {
        detail.push_str(&format!(" failed: {}", failures.join(", ")));
    }
    verdict(pass, detail)
}

// ---- ablation direction and predicted landmarks ----

fn distorted_suite() -> Suite {
    let d = DistortionConfig { jitter_sigma: 0.05, omission_rate: 0.3, scale_warp: (1.0, 1.0), seed: 0 };
    Suite::all_worlds(Some(d), 50)
}

fn ablations() -> (Verdict, Verdict) {
    let started = Instant::now();
    let suite = distorted_suite();
    let mut base = SimConfig::default();
    base.pipeline.deterministic = true;
    let mut successes: BTreeMap<&str, usize> = BTreeMap::new();
    let mut errors = 0;
    for name in ["full", "no_ldict", "no_pred", "no_pruning", "no_em"] {
        let flags = if name == "full" { AblationFlags::default() } else { AblationFlags::parse_list(name).unwrap() };
        let records = run_variant(&suite, flags, oracle(), base).expect("suite resolves");
        errors += records.iter().filter(|r| r.error).count();
        successes.insert(name, records.iter().filter(|r| r.success).count());
    }
    let elapsed = started.elapsed();
    let full = successes["full"];
    let n = suite.episode_count();
    let table: Vec<String> = successes.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let ordered = successes.values().all(|&s| s <= full);
    let info_ablations = successes["no_pruning"] <= full && successes["no_em"] <= full;
    let direction = verdict(
        ordered && info_ablations && errors == 0 && within(elapsed, 300.0),
        format!("successes of {n}: {} errors={errors} {elapsed:.2?}", table.join(" ")),
    );
    let with_pred = successes["full"];
    let without = successes["no_pred"];
    let pnpp = verdict(with_pred >= without, format!("with predictions {with_pred}/{n}, without {without}/{n}"));
    (direction, pnpp)
}

// ---- turn detector ----

#[derive(Clone, Copy)]
struct MaskSpec {
    width: u32,
    height: u32,
    /// Horizon row as a fraction of height.
    horizon: f64,
    /// Corridor half-widths at the horizon and the bottom row, fractions of width.
    top_half: f64,
    bottom_half: f64,
    /// Side-opening row bands, fractions of height.
    left: Option<(f64, f64)>,
    right: Option<(f64, f64)>,
}

/// Perspective floor of a corridor. Side openings extend to the image edge;
/// when any opening exists the corridor ends at its far edge.
fn draw(s: &MaskSpec) -> GrayImage {
    let (w, h) = (f64::from(s.width), f64::from(s.height));
    let cx = 0.5 * w;
    let band = |o: Option<(f64, f64)>| o.map(|(a, b)| (a * h, b * h));
    let (left, right) = (band(s.left), band(s.right));
    let end = left.iter().chain(right.iter()).map(|o| o.0).fold(s.horizon * h, f64::max);
    GrayImage::from_fn(s.width, s.height, |x, y| {
        let (px, py) = (f64::from(x) + 0.5, f64::from(y) + 0.5);
        if py < end {
            return Luma([0]);
        }
        let t = (py - s.horizon * h) / (h - s.horizon * h);
        let hw = w * (s.top_half + (s.bottom_half - s.top_half) * t);
        let inside = (px - cx).abs() <= hw;
        let in_band = |o: Option<(f64, f64)>| o.is_some_and(|(a, b)| py >= a && py <= b);
        let side = (px < cx && in_band(left)) || (px > cx && in_band(right));
        Luma([if inside || side { 255 } else { 0 }])
    })
}

fn mask_suite() -> Vec<(&'static str, MaskSpec, Vec<TurnDirection>)> {
    use TurnDirection::{Left, Right};
    let base =
        MaskSpec { width: 192, height: 144, horizon: 0.3, top_half: 0.05, bottom_half: 0.4, left: None, right: None };
    let sized = |w: u32, h: u32| MaskSpec { width: w, height: h, ..base };
    vec![
        ("straight 192", base, vec![]),
        ("straight 256", sized(256, 192), vec![]),
        ("straight 320 narrow", MaskSpec { top_half: 0.03, bottom_half: 0.3, ..sized(320, 240) }, vec![]),
        ("straight 192 wide", MaskSpec { horizon: 0.4, top_half: 0.08, bottom_half: 0.45, ..base }, vec![]),
        ("L left 192", MaskSpec { left: Some((0.5, 0.65)), ..base }, vec![Left]),
        ("L left 320 near", MaskSpec { left: Some((0.6, 0.75)), ..sized(320, 240) }, vec![Left]),
        ("L right 192", MaskSpec { right: Some((0.5, 0.65)), ..base }, vec![Right]),
        ("L right 256 far", MaskSpec { right: Some((0.42, 0.55)), ..sized(256, 192) }, vec![Right]),
        ("T 192", MaskSpec { left: Some((0.5, 0.65)), right: Some((0.5, 0.65)), ..base }, vec![Left, Right]),
        ("T 256", MaskSpec { left: Some((0.55, 0.7)), right: Some((0.55, 0.7)), ..sized(256, 192) }, vec![Left, Right]),
        (
            "T 320 staggered",
            MaskSpec { left: Some((0.5, 0.62)), right: Some((0.52, 0.66)), ..sized(320, 240) },
            vec![Left, Right],
        ),
        (
            "T 192 wide",
            MaskSpec { left: Some((0.45, 0.6)), right: Some((0.45, 0.6)), bottom_half: 0.45, ..base },
            vec![Left, Right],
        ),
    ]
}

fn detect(mask: &GrayImage) -> Vec<DetectedTurn> {
    let (w, h) = mask.dimensions();
    extract_edges(mask, &HoughParams::for_width(w)).map_or_else(|_| Vec::new(), |e| classify_turns(&e, w, h))
}

fn directions(turns: &[DetectedTurn]) -> Vec<TurnDirection> {
    let set: BTreeSet<TurnDirection> = turns.iter().map(|t| t.direction).collect();
    set.into_iter().collect()
}

fn flip(d: TurnDirection) -> TurnDirection {
    match d {
        TurnDirection::Left => TurnDirection::Right,
        TurnDirection::Right => TurnDirection::Left,
    }
}

/// Mirrored detections: same count, flipped directions, and boxes that
/// mirror within `tol` pixels.
fn mirrors(a: &[DetectedTurn], b: &[DetectedTurn], width: u32, tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let w = f64::from(width);
    let mut unmatched: Vec<&DetectedTurn> = b.iter().collect();
    for t in a {
        let pos = unmatched.iter().position(|m| {
            m.direction == flip(t.direction)
                && (m.bbox.x_min - (w - t.bbox.x_max)).abs() <= tol
                && (m.bbox.x_max - (w - t.bbox.x_min)).abs() <= tol
                && (m.bbox.y_min - t.bbox.y_min).abs() <= tol
                && (m.bbox.y_max - t.bbox.y_max).abs() <= tol
        });
        match pos {
            Some(i) => {
                unmatched.remove(i);
            }
            None => return false,
        }
    }
    true
}

fn turn_detector() -> Verdict {
    let suite = mask_suite();
    let mut correct = 0;
    let mut symmetric = 0;
    let mut notes = Vec::new();
    for (name, shape, want) in &suite {
        let mask = draw(shape);
        let turns = detect(&mask);
        let got = directions(&turns);
        if &got == want {
            correct += 1;
        } else {
            notes.push(format!("{name}: got {got:?}"));
        }
        let mirrored = detect(&image::imageops::flip_horizontal(&mask));
        if mirrors(&turns, &mirrored, shape.width, 2.0) {
            symmetric += 1;
        } else {
            notes.push(format!("{name}: not mirror-symmetric"));
        }
    }
    let n = suite.len();
    let mut detail = format!("{correct}/{n} correct, {symmetric}/{n} mirror-symmetric");
    if !notes.is_empty() {
        detail.push_str(&format!(" ({})", notes.join("; ")));
    }
    verdict(correct >= 11 && symmetric == n, detail)
}

// ---- SPL ----

/// Breadth-first move count over free 4-neighbours and stair links.
fn bfs_moves(world: &GridWorld, from: CellRef, to: CellRef) -> Option<usize> {
    let free = |c: CellRef| {
        let Some(f) = world.floors.get(c.floor) else { return false };
        c.col >= 0
            && c.row >= 0
            && (c.col as usize) < f.width
            && (c.row as usize) < f.height
            && f.cells[c.row as usize * f.width + c.col as usize] == hamnav_core::simulator::Cell::Free
    };
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([(from, 0usize)]);
    while let Some((c, d)) = queue.pop_front() {
        if c == to {
            return Some(d);
        }
        let mut next: Vec<CellRef> = [(0, -1), (1, 0), (0, 1), (-1, 0)]
            .iter()
            .map(|(dc, dr)| CellRef { floor: c.floor, col: c.col + dc, row: c.row + dr })
            .filter(|&n| free(n))
            .collect();
        for &(a, b) in &world.stairs {
            if a == c {
                next.push(b);
            } else if b == c {
                next.push(a);
            }
        }
        for n in next {
            if seen.insert(n) {
                queue.push_back((n, d + 1));
            }
        }
    }
    None
}

fn reference_spl(world: &GridWorld, final_pose: RobotPose, stopped: bool, advanced: u32) -> f64 {
    let g = world.goal;
    let c = final_pose.cell;
    let at_goal = c.floor == g.floor
        && (((c.col - g.col) as f64).powi(2) + ((c.row - g.row) as f64).powi(2)).sqrt() * world.cell_size <= 0.5;
    if !(stopped && at_goal) {
        return 0.0;
    }
    let shortest = bfs_moves(world, world.start.cell, g).expect("connected") as f64 * world.cell_size;
    let traveled = f64::from(advanced) * world.cell_size;
    if shortest.max(traveled) == 0.0 {
        1.0
    } else {
        shortest / shortest.max(traveled)
    }
}

fn spl_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let names = fixtures::world_names();
    let mut mismatches = Vec::new();
    let mut seen_success = 0;
    let mut seen_partial = 0;
    for k in 0..10 {
        let name = names[rng.gen_range(0..names.len())];
        let world = Arc::new(fixtures::world(name).expect("fixture"));
        let distortion = DistortionConfig {
            jitter_sigma: rng.gen_range(0.0..0.1),
            omission_rate: rng.gen_range(0.0..0.5),
            scale_warp: (1.0, 1.0),
            seed: rng.gen(),
        };
        let map = distort_scene(&ground_truth_scene(&world), &distortion).expect("valid distortion").to_map();
        let mut config = SimConfig::default();
        config.pipeline.deterministic = true;
        config.pipeline.max_steps = Some(rng.gen_range(5..120));
        let mut episode = SimEpisode::new(map, world.clone(), oracle(), config).expect("episode");
        episode.run_to_end();
        let steps = episode.steps();
        let final_pose = steps.last().and_then(|s| s.sim).map_or(world.start, |s| s.pose);
        let stopped = steps.last().is_some_and(|s| s.action == Action::Stop);
        let advanced: u32 = steps.iter().filter_map(|s| s.sim).map(|s| s.advanced_cells).sum();
        let want = reference_spl(&world, final_pose, stopped, advanced);
        let got = episode.metrics().spl;
        if (want - got).abs() > 1e-9 {
            mismatches.push(format!("{name}#{k}: module {got} reference {want}"));
        }
        seen_success += usize::from(want > 0.0);
        seen_partial += usize::from(want > 0.0 && want < 1.0);
    }

    let mut out_of_range = 0;
    let mut fuzz_partial = 0;
    let worlds = fixtures::all_worlds();
    for _ in 0..1000 {
        let world = &worlds[rng.gen_range(0..worlds.len())];
        let floor = rng.gen_range(0..world.floors.len());
        let f = &world.floors[floor];
        let cell = if rng.gen_bool(0.5) {
            world.goal
        } else {
            CellRef { floor, col: rng.gen_range(-1..=f.width as i64), row: rng.gen_range(-1..=f.height as i64) }
        };
        let outcome = EpisodeOutcome {
            final_pose: RobotPose { cell, heading: Heading::ALL[rng.gen_range(0..4)] },
            stopped: rng.gen_bool(0.7),
            advanced_cells: (0..rng.gen_range(0..80)).map(|_| rng.gen_range(0..3)).collect(),
            backend_latency_s: 0.0,
        };
        let reference = if rng.gen_bool(0.5) {
            SplReference::Shortest
        } else {
            SplReference::Sketch { length_m: rng.gen_range(0.0..200.0) }
        };
        let spl = metrics(world, &outcome, reference).spl;
        if !(0.0..=1.0).contains(&spl) {
            out_of_range += 1;
        }
        if reference == SplReference::Shortest {
            let traveled = outcome.advanced_cells.iter().sum();
            let want = reference_spl(world, outcome.final_pose, outcome.stopped, traveled);
            if (want - spl).abs() > 1e-9 {
                mismatches.push(format!("fuzzed {outcome:?}: module {spl} reference {want}"));
            }
            fuzz_partial += usize::from(want > 0.0 && want < 1.0);
        }
    }
    let pass = mismatches.is_empty() && out_of_range == 0;
    let mut detail = format!(
        "10 episodes match reference ({seen_success} successes, {seen_partial} with detours), \
         {out_of_range}/1000 fuzzed outcomes out of [0,1], \
         {fuzz_partial} fuzzed detours match reference"
    );
    if !mismatches.is_empty() {
        detail = mismatches.join("; ");
    }
    verdict(pass, detail)
}

// ---- score parser ----

fn legal_set(rng: &mut ChaCha8Rng) -> Vec<String> {
    if rng.gen_bool(0.3) {
        Action::ALL.iter().map(|a| a.label().to_string()).collect()
    } else {
        let start = rng.gen_range(0..40);
        (start..start + rng.gen_range(1..6)).map(|i: usize| i.to_string()).collect()
    }
}

fn fuzzed_reply(rng: &mut ChaCha8Rng, legal: &[String]) -> String {
    const NOISE: [&str; 10] = ["Sure! ", "```", "{", "}", "\"", ":", ",", "NaN", "-1", "\u{2192} "];
    let pick = |rng: &mut ChaCha8Rng| legal[rng.gen_range(0..legal.len())].clone();
    let value = |rng: &mut ChaCha8Rng| match rng.gen_range(0..6) {
        0 => "-0.4".to_string(),
        1 => "1e400".to_string(),
        2 => "\"high\"".to_string(),
        _ => format!("{:.3}", rng.gen_range(0.0..1.0)),
    };
    let body: Vec<String> = (0..rng.gen_range(0..5))
        .map(|_| {
            let key = if rng.gen_bool(0.8) { pick(rng) } else { "bogus".to_string() };
            format!("\"{key}\": {}", value(rng))
        })
        .collect();
    let mut text = match rng.gen_range(0..5) {
        0 => format!("{{{}}}", body.join(", ")),
        1 => format!("Reasoning first.\n```json\n{{{}}}\n```\nDone.", body.join(", ")),
        2 => body.iter().map(|b| b.replace('"', "")).collect::<Vec<_>>().join("\n"),
        3 => format!("The answer is {{{}", body.join(", ")),
        _ => (0..rng.gen_range(0..40)).map(|_| rng.gen::<char>()).collect(),
    };
    for _ in 0..rng.gen_range(0..4) {
        let at = text.char_indices().map(|(i, _)| i).nth(rng.gen_range(0..=text.chars().count())).unwrap_or(text.len());
        text.insert_str(at, NOISE[rng.gen_range(0..NOISE.len())]);
    }
    text
}

fn score_parser() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut crashes = 0;
    let mut illegal = 0;
    let (mut parsed, mut rejected) = (0, 0);
    for _ in 0..1000 {
        let legal = legal_set(&mut rng);
        let reply = fuzzed_reply(&mut rng, &legal);
        match catch_unwind(AssertUnwindSafe(|| parse_scored_response(&reply, &legal))) {
            Err(_) => crashes += 1,
            Ok(Ok(r)) => {
                parsed += 1;
                let total: f64 = r.scores.iter().map(|s| s.1).sum();
                if !legal.contains(&r.chosen) || (total - 1.0).abs() > 1e-9 || r.scores.iter().any(|s| s.1 < 0.0) {
                    illegal += 1;
                }
            }
            Ok(Err(_)) => rejected += 1,
        }
    }

    let mut variant = 0;
    for _ in 0..1000 {
        let legal = legal_set(&mut rng);
        let scores: Vec<(String, f64)> = legal.iter().map(|l| (l.clone(), rng.gen_range(0.01..1.0))).collect();
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if s.1 > scores[best].1 {
                best = i;
            }
        }
        let k = 10f64.powf(rng.gen_range(-3.0..3.0));
        let scaled: Vec<(String, f64)> = scores.iter().map(|(l, v)| (l.clone(), v * k)).collect();
        let a = parse_scored_response(&render_score_block(&scores), &legal).map(|r| r.chosen);
        let b = parse_scored_response(&render_score_block(&scaled), &legal).map(|r| r.chosen);
        if a.as_ref().ok() != Some(&legal[best]) || a != b {
            variant += 1;
        }
    }
    verdict(
        crashes == 0 && illegal == 0 && variant == 0,
        format!(
            "1000 fuzzed: {crashes} crashes, {illegal} illegal, {parsed} parsed, {rejected} errors; \
             {variant}/1000 scaled maps changed argmax"
        ),
    )
}

// ---- determinism ----

fn determinism() -> Verdict {
    let world = Arc::new(fixtures::world("office_a").expect("fixture"));
    let d = DistortionConfig { jitter_sigma: 0.05, omission_rate: 0.3, scale_warp: (0.9, 1.1), seed: 3 };
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().expect("tempdir")).collect();
    for dir in &dirs {
        let map = distort_scene(&ground_truth_scene(&world), &d).expect("distortion").to_map();
        let mut config = SimConfig { seed: 3, ..SimConfig::default() };
        config.pipeline.deterministic = true;
        run(map, world.clone(), oracle(), config, Some(dir.path())).expect("episode runs");
    }
    let files = |root: &std::path::Path| -> BTreeMap<String, Vec<u8>> {
        let mut out = BTreeMap::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(p) = stack.pop() {
            for e in std::fs::read_dir(&p).expect("readable").flatten() {
                let path = e.path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                    out.insert(rel, std::fs::read(&path).expect("readable"));
                }
            }
        }
        out
    };
    let (a, b) = (files(dirs[0].path()), files(dirs[1].path()));
    let trace_bytes = a.get("trace.jsonl").map_or(0, Vec::len);
    verdict(a == b && trace_bytes > 0, format!("{} files identical, trace.jsonl {trace_bytes} bytes", a.len()))
}

fn main() {
    let mut results: Vec<(&str, Verdict)> = vec![("retention", retention()), ("closed-loop", closed_loop())];
    let (direction, pnpp) = ablations();
    results.push(("ablation-direction", direction));
    results.push(("predicted-landmarks", pnpp));
    results.push(("turn-detector", turn_detector()));
    results.push(("spl", spl_correctness()));
    results.push(("score-parser", score_parser()));
    results.push(("determinism", determinism()));
    let failed = results.iter().filter(|(_, v)| !v.pass).count();
    for (name, v) in &results {
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
