#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod plot;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use traffic_events::calibration::CalibrationFile;
use traffic_events::evaluation::{self, Detection, VideoInfo, DEFAULT_MATCH_THRESHOLD};
use traffic_events::pipeline::tracks::write_tracks_csv;
use traffic_events::pipeline::{
    collisions_to_jsonl, events_from_jsonl, events_to_jsonl, generate_scenario, parse_tracks, run_pipeline_with,
    scenes, PipelineConfig, RunOptions, ScenarioFile, SyntheticScenario,
};

#[derive(Parser)]
#[command(
    name = "traffic-events",
    version,
    about = "Vehicle action and collision detection from tracked boxes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect events and collision alerts in a track file.
    Run(RunArgs),
    /// Generate tracks from a scripted scenario.
    Simulate(SimulateArgs),
    /// Score detected events against annotations.
    Score(ScoreArgs),
    /// Draw DET curves from a DET CSV.
    Plot(PlotArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Track file (CSV or JSON-lines).
    #[arg(long)]
    tracks: PathBuf,
    /// Calibration JSON.
    #[arg(long)]
    calibration: PathBuf,
    /// Pipeline configuration (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Event JSON-lines output; stdout when omitted.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Collision alert JSON-lines output.
    #[arg(long)]
    collisions: Option<PathBuf>,
    /// Per-pair footprint distance CSV output.
    #[arg(long)]
    distances: Option<PathBuf>,
    /// Process tracks on a single thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Maneuvers,
    HeadOn,
    ParallelLanes,
    Busy,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Scenario JSON.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scene on the demo camera.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Pixel noise; overrides the scenario value.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Track CSV output; stdout when omitted.
    #[arg(long)]
    tracks: Option<PathBuf>,
    /// Ground-truth annotation JSON-lines output.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Calibration JSON output (presets only).
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, default_value = "synthetic")]
    video_id: String,
}

#[derive(clap::Args)]
struct ScoreArgs {
    /// Detected events (JSON-lines).
    #[arg(long)]
    events: PathBuf,
    /// Annotations (JSON-lines).
    #[arg(long)]
    annotations: PathBuf,
    /// Video the events belong to; annotations of other videos are ignored.
    #[arg(long)]
    video_id: String,
    #[arg(long)]
    num_frames: u64,
    #[arg(long)]
    fps: f64,
    #[arg(long, default_value_t = DEFAULT_MATCH_THRESHOLD)]
    match_threshold: f64,
    /// Metrics JSON output; stdout when omitted.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// DET samples CSV output.
    #[arg(long)]
    det: Option<PathBuf>,
}

#[derive(clap::Args)]
struct PlotArgs {
    /// DET CSV written by `score`.
    #[arg(long)]
    det: PathBuf,
    /// SVG output.
    #[arg(long)]
    out: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    let config = match &args.config {
        Some(p) => PipelineConfig::from_toml(&read(p)?)?,
        None => PipelineConfig::default(),
    };
    let camera = CalibrationFile::from_json(&read(&args.calibration)?)?.build()?;
    let points = parse_tracks(&read(&args.tracks)?, config.fps)?;
    let options = RunOptions {
        parallel: !args.sequential,
        record_distances: args.distances.is_some(),
        keep_states: false,
    };
    let out = run_pipeline_with(&config, &camera, &points, options)?;
    if !out.dropped_frames.is_empty() {
        eprintln!(
            "{} frames could not be placed on the ground and were skipped",
            out.dropped_frames.len()
        );
    }
    write_or_print(args.events.as_deref(), &events_to_jsonl(&out.events))?;
    if let Some(p) = &args.collisions {
        write_or_print(Some(p), &collisions_to_jsonl(&out.collisions))?;
    }
    if let Some(p) = &args.distances {
        let mut csv = String::from("track_a,track_b,t_s,distance_m\n");
        for ((a, b), series) in &out.distances {
            for (t, d) in series {
                csv.push_str(&format!("{a},{b},{t},{d}\n"));
            }
        }
        write_or_print(Some(p), &csv)?;
    }
    Ok(())
}

fn preset_scene(preset: Preset, noise: f64) -> traffic_events::Result<SyntheticScenario> {
    match preset {
        Preset::Maneuvers => scenes::maneuver_scene(noise),
        Preset::HeadOn => scenes::head_on_scene(noise, 20.0, 0.75),
        Preset::ParallelLanes => scenes::parallel_lane_scene(noise, 3.5, 10.0, 4.0),
        Preset::Busy => scenes::busy_scene(20, 30.0, noise),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut scene = match (&args.scenario, args.preset) {
        (Some(p), _) => ScenarioFile::from_json(&read(p)?)?.build()?,
        (None, Some(preset)) => {
            let scene = preset_scene(preset, args.noise.unwrap_or(0.0))?;
            if let Some(p) = &args.calibration {
                write_or_print(Some(p), &serde_json::to_string_pretty(&scenes::demo_calibration())?)?;
            }
            scene
        }
        (None, None) => bail!("give --scenario or --preset"),
    };
    if args.scenario.is_some() && args.calibration.is_some() {
        bail!("--calibration output is only available for presets");
    }
    if let Some(n) = args.noise {
        if !(n >= 0.0) {
            bail!("noise must be non-negative");
        }
        scene.noise_px = n;
    }
    let points = generate_scenario(&scene, args.seed);
    write_or_print(args.tracks.as_deref(), &write_tracks_csv(&points))?;
    if let Some(p) = &args.annotations {
        let lines: String = scene
            .ground_truth(&args.video_id)
            .iter()
            .map(|g| g.to_json_line() + "\n")
            .collect();
        write_or_print(Some(p), &lines)?;
    }
    eprintln!(
        "{} track points over {} frames, {} scripted events",
        points.len(),
        scene.num_frames(),
        scene.expected_events.len()
    );
    Ok(())
}

fn score(args: ScoreArgs) -> Result<()> {
    let events = events_from_jsonl(&read(&args.events)?)?;
    let gts: Vec<_> = evaluation::parse_annotations(&read(&args.annotations)?)?
        .into_iter()
        .filter(|g| g.video_id == args.video_id)
        .collect();
    let detections: Vec<Detection> = events
        .into_iter()
        .map(|event| Detection {
            video_id: args.video_id.clone(),
            event,
        })
        .collect();
    let videos = [VideoInfo {
        video_id: args.video_id.clone(),
        num_frames: args.num_frames,
        fps: args.fps,
    }];
    if !(args.fps > 0.0) || args.num_frames == 0 {
        bail!("fps and num_frames must be positive");
    }
    let report = evaluation::score(&detections, &gts, &videos, args.match_threshold);
    write_or_print(
        args.metrics.as_deref(),
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;
    if let Some(p) = &args.det {
        write_or_print(Some(p), &report.det_csv())?;
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Simulate(a) => simulate(a),
        Command::Score(a) => score(a),
        Command::Plot(a) => {
            let curves = plot::parse_det_csv(&read(&a.det)?)?;
            write_or_print(Some(&a.out), &plot::det_svg(&curves))
        }
    }
}
