//! Stage chain: tracks → smoothing → ground projection → kinematics →
//! events, plus per-frame collision checks.

pub mod config;
pub mod scenes;
pub mod synthetic;
pub mod tracks;

use std::collections::{BTreeMap, HashMap};

use nalgebra::{Point2, Vector2};
use rayon::prelude::*;

use crate::calibration::CameraModel;
use crate::collision::{CollisionAlert, CollisionMonitor};
use crate::error::Result;
use crate::events::{detect_events, EventRecord};
use crate::ground::{make_observation, GroundObservation};
use crate::kinematics::{ground_states, GroundState};
use crate::smoothing::smooth_track;

pub use config::PipelineConfig;
pub use synthetic::{generate_scenario, ScenarioFile, ScriptBuilder, ScriptedTrack, SyntheticScenario, Waypoint};
pub use tracks::{parse_tracks, BBox, ClassLabel, TrackId, TrackPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Process track segments on the rayon pool.
    pub parallel: bool,
    /// Keep per-pair footprint distance series.
    pub record_distances: bool,
    /// Keep per-frame ground observations and kinematic states.
    pub keep_states: bool,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOutput {
    /// Ordered by `(t_e, track_id, type, t_s)`.
    pub events: Vec<EventRecord>,
    /// Ordered by `(t_s, track_a, track_b)`.
    pub collisions: Vec<CollisionAlert>,
    pub distances: BTreeMap<(TrackId, TrackId), Vec<(f64, f64)>>,
    pub observations: Vec<GroundObservation>,
    pub states: Vec<(TrackId, GroundState)>,
    /// Frames whose ground projection failed, as `(track_id, frame_index)`.
    pub dropped_frames: Vec<(TrackId, u64)>,
}

struct SegmentResult {
    events: Vec<EventRecord>,
    observations: Vec<GroundObservation>,
    states: Vec<GroundState>,
    dropped: Vec<u64>,
}

fn process_segment(config: &PipelineConfig, camera: &CameraModel, points: &[TrackPoint]) -> SegmentResult {
    let track_id = points[0].track_id;
    let contours: HashMap<u64, &[Point2<f64>]> = points
        .iter()
        .filter_map(|p| p.contour.as_deref().map(|c| (p.frame_index, c)))
        .collect();
    let smoothed = smooth_track(points, config.fps, config.noise);

    // Runs of consecutive frames that projected successfully.
    let mut runs: Vec<Vec<GroundObservation>> = vec![Vec::new()];
    let mut dropped = Vec::new();
    let mut prev_orientation = None;
    for s in &smoothed {
        let contour = contours.get(&s.frame_index).copied();
        match make_observation(
            camera,
            track_id,
            s,
            contour,
            prev_orientation,
            config.fps,
            &config.geometry,
        ) {
            Ok(obs) => {
                prev_orientation = obs.orientation;
                runs.last_mut().unwrap().push(obs);
            }
            Err(_) => {
                dropped.push(s.frame_index);
                if !runs.last().unwrap().is_empty() {
                    runs.push(Vec::new());
                }
            }
        }
    }

    let mut events = Vec::new();
    let mut states = Vec::new();
    for run in runs.iter().filter(|r| r.len() >= 2) {
        let velocities: Vec<(u64, Vector2<f64>)> = run.iter().map(|o| (o.frame_index, o.ground_velocity)).collect();
        let series = ground_states(&velocities, config.fps, &config.kinematics);
        events.extend(detect_events(&series, track_id, &config.detector));
        states.extend(series);
    }
    SegmentResult {
        events,
        observations: runs.into_iter().flatten().collect(),
        states,
        dropped,
    }
}

/// Splits tracks into gap-free segments in `(track_id, frame)` order.
fn segments(config: &PipelineConfig, points: &[TrackPoint]) -> Vec<Vec<TrackPoint>> {
    tracks::group_by_track(points)
        .into_values()
        .flat_map(|pts| tracks::split_on_gaps(pts, config.max_track_gap_frames))
        .filter(|seg| !seg.is_empty())
        .collect()
}

pub fn run_pipeline_with(
    config: &PipelineConfig,
    camera: &CameraModel,
    points: &[TrackPoint],
    options: RunOptions,
) -> Result<PipelineOutput> {
    config.validate()?;
    let segs = segments(config, points);
    // Collecting an indexed parallel iterator keeps segment order, which is
    // the reassembly point that makes output independent of scheduling.
    let results: Vec<SegmentResult> = if options.parallel {
        segs.par_iter().map(|s| process_segment(config, camera, s)).collect()
    } else {
        segs.iter().map(|s| process_segment(config, camera, s)).collect()
    };

    let mut out = PipelineOutput::default();
    let mut by_frame: BTreeMap<u64, Vec<GroundObservation>> = BTreeMap::new();
    for (seg, r) in segs.iter().zip(results) {
        let track_id = seg[0].track_id;
        out.events.extend(r.events);
        out.dropped_frames.extend(r.dropped.iter().map(|f| (track_id, *f)));
        if options.keep_states {
            out.states.extend(r.states.into_iter().map(|s| (track_id, s)));
            out.observations.extend(r.observations.iter().cloned());
        }
        for o in r.observations {
            by_frame.entry(o.frame_index).or_default().push(o);
        }
    }
    out.events.sort_by(|a, b| {
        a.t_e
            .total_cmp(&b.t_e)
            .then(a.track_id.cmp(&b.track_id))
            .then(a.event_type.cmp(&b.event_type))
            .then(a.t_s.total_cmp(&b.t_s))
    });

    let mut monitor = CollisionMonitor::new(config.collision);
    if options.record_distances {
        monitor = monitor.recording_distances();
    }
    for frame in by_frame.values_mut() {
        frame.sort_by_key(|o| o.track_id);
        out.collisions.extend(monitor.observe(frame));
    }
    out.distances = monitor.distances().clone();
    Ok(out)
}

/// Events and collision alerts for a set of tracks.
pub fn run_pipeline(
    config: &PipelineConfig,
    camera: &CameraModel,
    points: &[TrackPoint],
) -> Result<(Vec<EventRecord>, Vec<CollisionAlert>)> {
    let out = run_pipeline_with(
        config,
        camera,
        points,
        RunOptions {
            parallel: true,
            ..Default::default()
        },
    )?;
    Ok((out.events, out.collisions))
}

/// Events as JSON-lines.
pub fn events_to_jsonl(events: &[EventRecord]) -> String {
    events
        .iter()
        .map(|e| serde_json::to_string(e).expect("plain struct serializes") + "\n")
        .collect()
}

pub fn events_from_jsonl(text: &str) -> Result<Vec<EventRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| crate::Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn collisions_to_jsonl(alerts: &[CollisionAlert]) -> String {
    alerts.iter().map(|a| a.to_json_line() + "\n").collect()
}
