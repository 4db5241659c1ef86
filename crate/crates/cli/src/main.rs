use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use hamnav_cli::commands::{self, RunConfig, SketchSource};
use hamnav_cli::config::{BackendKind, FileConfig};
use hamnav_core::pipeline::{AblationFlags, SplRefKind};
use hamnav_core::simulator::DistortionConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hamnav", version, about = "Navigate grid worlds from hand-drawn maps")]
struct Cli {
    /// TOML file selecting and configuring the reasoning backend.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DistortArgs {
    /// Landmark jitter as a fraction of the map diagonal.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Probability of omitting each landmark.
    #[arg(long, default_value_t = 0.0)]
    omission: f64,
    #[arg(long, default_value_t = 1.0)]
    warp_min: f64,
    #[arg(long, default_value_t = 1.0)]
    warp_max: f64,
}

impl DistortArgs {
    fn config(&self, seed: u64) -> DistortionConfig {
        DistortionConfig {
            jitter_sigma: self.jitter,
            omission_rate: self.omission,
            scale_warp: (self.warp_min, self.warp_max),
            seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and print `SR=.. SPL=.. D=.. STEPS=..`.
    Run {
        /// Fixture world name or world file.
        #[arg(long)]
        world: String,
        /// Sketch bundle directory or zip.
        #[arg(long, conflicts_with = "distort")]
        sketch: Option<PathBuf>,
        /// Generate the sketch from the world instead.
        #[arg(long)]
        distort: bool,
        #[command(flatten)]
        distortion: DistortArgs,
        #[arg(long, value_enum)]
        backend: Option<BackendKind>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated ablations: no_ldict, no_pred, no_pruning, no_em.
        #[arg(long, default_value = "")]
        ablate: String,
        #[arg(long)]
        deterministic: bool,
        #[arg(long)]
        max_steps: Option<u32>,
        #[arg(long, value_enum, default_value = "shortest")]
        spl_ref: SplRefArg,
        /// Directory for trace.jsonl and svap/<t>.png.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate ablation variants over a suite and print a CSV table.
    Eval {
        /// Suite TOML; defaults to every fixture world at 5% jitter, 30% omission.
        #[arg(long)]
        suite: Option<PathBuf>,
        /// Variants such as `full,no_em,no_pruning+no_em`; defaults to full plus each single ablation.
        #[arg(long)]
        ablate: Option<String>,
        /// Trials per suite entry, overriding the file.
        #[arg(long)]
        seeds: Option<u32>,
        #[arg(long, value_enum)]
        backend: Option<BackendKind>,
        /// Also write the table here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the JSON API used by the browser companion.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        bind: std::net::IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
    /// Print structural turns found in a traversable-region mask.
    DetectTurns {
        /// Grayscale PNG, traversable pixels > 127.
        mask: PathBuf,
    },
    /// Export a (possibly distorted) sketch bundle of a world.
    Sketch {
        #[arg(long)]
        world: String,
        #[command(flatten)]
        distortion: DistortArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory, or a path ending in `.zip`.
        #[arg(long)]
        out: PathBuf,
    },
    /// List fixture worlds.
    Worlds,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SplRefArg {
    Shortest,
    Sketch,
}

/// Exit codes: 0 success, 2 navigation failure, 1 configuration error.
fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Run {
            world,
            sketch,
            distort,
            distortion,
            backend,
            seed,
            ablate,
            deterministic,
            max_steps,
            spl_ref,
            out,
        } => {
            let sketch = match (sketch, distort) {
                (Some(p), false) => SketchSource::Bundle(p),
                (None, true) => SketchSource::Distort(distortion.config(seed)),
                _ => bail!("give exactly one of --sketch or --distort"),
            };
            let cfg = RunConfig {
                world,
                sketch,
                backend: backend.unwrap_or(file.backend),
                flags: AblationFlags::parse_list(&ablate)?,
                file,
                seed,
                max_steps,
                deterministic,
                spl_ref: match spl_ref {
                    SplRefArg::Shortest => SplRefKind::Shortest,
                    SplRefArg::Sketch => SplRefKind::Sketch,
                },
                out,
            };
            let r = commands::cmd_run(&cfg)?;
            println!("{}", commands::metrics_line(&r));
            Ok(if r.metrics.success { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Eval { suite, ablate, seeds, backend, out } => {
            let suite = match suite {
                Some(p) => commands::load_suite(&p)?,
                None => hamnav_core::eval::Suite::all_worlds(
                    Some(DistortionConfig { jitter_sigma: 0.05, omission_rate: 0.3, ..DistortionConfig::default() }),
                    10,
                ),
            };
            let variants = match ablate {
                Some(list) => commands::parse_variants(&list)?,
                None => commands::default_variants(),
            };
            let rows = commands::cmd_eval(&suite, &variants, backend.unwrap_or(file.backend), &file, seeds)?;
            let csv = commands::eval_csv(&rows);
            print!("{csv}");
            if let Some(p) = out {
                std::fs::write(p, &csv)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { bind, port } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(hamnav_cli::serve::serve((bind, port).into(), file))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::DetectTurns { mask } => {
            print!("{}", commands::cmd_detect_turns(&mask)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sketch { world, distortion, seed, out } => {
            let b = commands::cmd_sketch(&world, &distortion.config(seed), &out)?;
            let parsed = b.validate()?;
            println!(
                "wrote {} ({} landmarks, {} path points)",
                out.display(),
                parsed.map.landmarks.len(),
                parsed.map.path.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Worlds => {
            for w in hamnav_core::fixtures::all_worlds() {
                println!("{}\t{} floor(s)\t{} landmarks", w.name, w.floors.len(), w.landmarks.len());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
