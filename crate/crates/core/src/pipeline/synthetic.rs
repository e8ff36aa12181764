//! Scripted ground-plane scenes rendered into noisy pixel tracks.

use std::collections::BTreeMap;

use nalgebra::{Point2, Point3, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationFile, CameraModel};
use crate::error::{Error, Result};
use crate::evaluation::GroundTruthEvent;
use crate::events::{EventRecord, EventType};
use crate::ground::{convex_hull, Quadrangle};
use crate::pipeline::tracks::{BBox, ClassLabel, TrackId, TrackPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t_s: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedTrack {
    pub track_id: TrackId,
    #[serde(default = "default_class")]
    pub class_label: ClassLabel,
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
    pub waypoints: Vec<Waypoint>,
}

fn default_class() -> ClassLabel {
    ClassLabel::Car
}

impl ScriptedTrack {
    fn validate(&self) -> Result<()> {
        if !(self.length_m > 0.0 && self.width_m > 0.0 && self.height_m > 0.0) {
            return Err(Error::Scenario(format!(
                "track {}: dimensions must be positive",
                self.track_id
            )));
        }
        if self.waypoints.is_empty() {
            return Err(Error::Scenario(format!("track {}: no waypoints", self.track_id)));
        }
        if self.waypoints.windows(2).any(|w| !(w[1].t_s > w[0].t_s)) {
            return Err(Error::Scenario(format!(
                "track {}: waypoint timestamps must strictly increase",
                self.track_id
            )));
        }
        Ok(())
    }

    /// Position and unit heading at time `t`, or `None` outside the script.
    pub fn pose_at(&self, t: f64) -> Option<(Point2<f64>, Vector2<f64>)> {
        let wp = &self.waypoints;
        let (first, last) = (wp.first()?, wp.last()?);
        if t < first.t_s - 1e-9 || t > last.t_s + 1e-9 {
            return None;
        }
        let seg = wp
            .windows(2)
            .position(|w| t <= w[1].t_s)
            .unwrap_or(wp.len().saturating_sub(2));
        let point = |w: &Waypoint| Point2::new(w.x, w.y);
        if wp.len() == 1 {
            return Some((point(first), Vector2::x()));
        }
        let (a, b) = (&wp[seg], &wp[seg + 1]);
        let s = ((t - a.t_s) / (b.t_s - a.t_s)).clamp(0.0, 1.0);
        let pos = point(a) + (point(b) - point(a)) * s;
        Some((pos, self.heading_of_segment(seg)))
    }

    /// Direction of segment `seg`, borrowing from the nearest moving segment
    /// (earlier first) when the vehicle stands still.
    fn heading_of_segment(&self, seg: usize) -> Vector2<f64> {
        let dir = |i: usize| {
            let (a, b) = (&self.waypoints[i], &self.waypoints[i + 1]);
            let d = Vector2::new(b.x - a.x, b.y - a.y);
            (d.norm() > 1e-12).then(|| d.normalize())
        };
        let n = self.waypoints.len() - 1;
        (0..=seg)
            .rev()
            .find_map(dir)
            .or_else(|| (seg + 1..n).find_map(dir))
            .unwrap_or_else(Vector2::x)
    }

    /// Ground footprint and 8 cuboid corners (bottom face first) at time `t`.
    pub fn cuboid_at(&self, t: f64) -> Option<(Quadrangle, [Point3<f64>; 8])> {
        let (pos, heading) = self.pose_at(t)?;
        let fp = Quadrangle::oriented(pos, heading, self.length_m, self.width_m).ok()?;
        let v = fp.vertices();
        let corners = std::array::from_fn(|i| {
            let g = v[i % 4];
            Point3::new(g.x, g.y, if i < 4 { 0.0 } else { self.height_m })
        });
        Some((fp, corners))
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScenario {
    pub camera: CameraModel,
    pub fps: f64,
    /// Standard deviation of the Gaussian pixel noise on box corners and
    /// contour vertices.
    pub noise_px: f64,
    pub tracks: Vec<ScriptedTrack>,
    pub expected_events: Vec<EventRecord>,
}

/// JSON form of a scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub calibration: CalibrationFile,
    pub fps: f64,
    #[serde(default)]
    pub noise_px: f64,
    pub tracks: Vec<ScriptedTrack>,
    #[serde(default)]
    pub expected_events: Vec<EventRecord>,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<SyntheticScenario> {
        SyntheticScenario::new(
            self.calibration.build()?,
            self.fps,
            self.noise_px,
            self.tracks.clone(),
            self.expected_events.clone(),
        )
    }
}

impl SyntheticScenario {
    pub fn new(
        camera: CameraModel,
        fps: f64,
        noise_px: f64,
        tracks: Vec<ScriptedTrack>,
        expected_events: Vec<EventRecord>,
    ) -> Result<Self> {
        if !(fps > 0.0) {
            return Err(Error::Scenario("fps must be positive".into()));
        }
        if !(noise_px >= 0.0 && noise_px.is_finite()) {
            return Err(Error::Scenario("noise_px must be finite and non-negative".into()));
        }
        for t in &tracks {
            t.validate()?;
        }
        let mut ids: Vec<TrackId> = tracks.iter().map(|t| t.track_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Scenario("duplicate track_id".into()));
        }
        Ok(Self {
            camera,
            fps,
            noise_px,
            tracks,
            expected_events,
        })
    }

    /// Frames covered by a track's script.
    pub fn frames_of(&self, track: &ScriptedTrack) -> std::ops::RangeInclusive<u64> {
        let first = (track.waypoints[0].t_s * self.fps - 1e-9).ceil().max(0.0) as u64;
        let last = (track.waypoints.last().unwrap().t_s * self.fps + 1e-9).floor().max(0.0) as u64;
        first..=last
    }

    /// Last frame index over all tracks plus one.
    pub fn num_frames(&self) -> u64 {
        self.tracks
            .iter()
            .map(|t| self.frames_of(t).end() + 1)
            .max()
            .unwrap_or(0)
    }

    /// Noise-free image corners of a track's cuboid, or `None` when any
    /// corner leaves the view.
    pub fn project_cuboid(&self, track: &ScriptedTrack, frame: u64) -> Option<[Point2<f64>; 8]> {
        let (_, corners) = track.cuboid_at(frame as f64 / self.fps)?;
        let size = self.camera.image_size();
        let mut img = [Point2::origin(); 8];
        for (dst, c) in img.iter_mut().zip(&corners) {
            if self.camera.depth(c) <= 0.0 {
                return None;
            }
            *dst = self.camera.project_world_to_image(c).ok()?;
            if !size.contains(dst) {
                return None;
            }
        }
        Some(img)
    }

    /// Annotations for the expected events with noise-free boxes on every
    /// visible frame of the event.
    pub fn ground_truth(&self, video_id: &str) -> Vec<GroundTruthEvent> {
        let by_id: BTreeMap<TrackId, &ScriptedTrack> = self.tracks.iter().map(|t| (t.track_id, t)).collect();
        self.expected_events
            .iter()
            .map(|e| {
                let mut frames = BTreeMap::new();
                if let Some(track) = by_id.get(&e.track_id) {
                    let first = (e.t_s * self.fps - 1e-9).ceil().max(0.0) as u64;
                    let last = (e.t_e * self.fps + 1e-9).floor().max(0.0) as u64;
                    for f in first..=last {
                        if let Some(img) = self.project_cuboid(track, f) {
                            frames.insert(f, bounds(&img));
                        }
                    }
                }
                GroundTruthEvent {
                    video_id: video_id.to_string(),
                    event_type: e.event_type,
                    t_s: e.t_s,
                    t_e: e.t_e,
                    frames,
                }
            })
            .collect()
    }
}

fn bounds(points: &[Point2<f64>]) -> BBox {
    let min = points.iter().fold(Point2::new(f64::MAX, f64::MAX), |m, p| {
        Point2::new(m.x.min(p.x), m.y.min(p.y))
    });
    let max = points.iter().fold(Point2::new(f64::MIN, f64::MIN), |m, p| {
        Point2::new(m.x.max(p.x), m.y.max(p.y))
    });
    BBox::from_corners(min, max)
}

/// Renders every scripted track into per-frame detections with contours.
///
/// Box corners `(left, top)` and `(right, bottom)` and every cuboid corner
/// feeding the contour receive independent `N(0, noise_px²)` offsets. Frames
/// where any cuboid corner is behind the camera or outside the image are
/// omitted. Each track draws from its own stream of a ChaCha8 generator
/// seeded with `seed`, so output is reproducible per seed.
pub fn generate_scenario(spec: &SyntheticScenario, seed: u64) -> Vec<TrackPoint> {
    let normal = Normal::new(0.0, spec.noise_px).expect("validated noise");
    let mut tracks: Vec<&ScriptedTrack> = spec.tracks.iter().collect();
    tracks.sort_by_key(|t| t.track_id);
    let mut out = Vec::new();
    for track in tracks {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(track.track_id as u64);
        let mut noise = || {
            if spec.noise_px > 0.0 {
                normal.sample(&mut rng)
            } else {
                0.0
            }
        };
        for frame in spec.frames_of(track) {
            let Some(img) = spec.project_cuboid(track, frame) else {
                continue;
            };
            let b = bounds(&img);
            let (l, t) = (b.left + noise(), b.top + noise());
            let (r, bt) = (b.right() + noise(), b.bottom() + noise());
            let noisy: Vec<Point2<f64>> = img.iter().map(|p| Point2::new(p.x + noise(), p.y + noise())).collect();
            if !(r > l && bt > t) {
                continue;
            }
            out.push(TrackPoint {
                frame_index: frame,
                time_s: frame as f64 / spec.fps,
                track_id: track.track_id,
                class_label: track.class_label,
                confidence: 1.0,
                bbox: BBox::new(l, t, r - l, bt - t),
                contour: Some(convex_hull(&noisy)),
            });
        }
    }
    out
}

/// Builds a scripted track segment by segment, sampling one waypoint per
/// frame and recording the events each maneuver implies.
#[derive(Debug, Clone)]
pub struct ScriptBuilder {
    track_id: TrackId,
    fps: f64,
    t: f64,
    pos: Point2<f64>,
    heading_deg: f64,
    speed: f64,
    waypoints: Vec<Waypoint>,
    events: Vec<EventRecord>,
}

impl ScriptBuilder {
    pub fn new(track_id: TrackId, fps: f64, t0: f64, start: Point2<f64>, heading_deg: f64, speed: f64) -> Self {
        Self {
            track_id,
            fps,
            t: t0,
            pos: start,
            heading_deg,
            speed,
            waypoints: vec![Waypoint {
                t_s: t0,
                x: start.x,
                y: start.y,
            }],
            events: Vec::new(),
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn position(&self) -> Point2<f64> {
        self.pos
    }

    /// Advances `duration` seconds with speed ramping linearly to `end_speed`
    /// and heading changing uniformly by `turn_deg`.
    fn advance(&mut self, duration: f64, end_speed: f64, turn_deg: f64) {
        let n = (duration * self.fps).round().max(1.0) as usize;
        let dt = duration / n as f64;
        let (v0, h0) = (self.speed, self.heading_deg);
        // Midpoint sub-steps keep arcs and ramps accurate to well below a millimeter.
        const SUB: usize = 16;
        for k in 0..n {
            for j in 0..SUB {
                let s = (k as f64 + (j as f64 + 0.5) / SUB as f64) / n as f64;
                let v = v0 + (end_speed - v0) * s;
                let h = (h0 + turn_deg * s).to_radians();
                self.pos += Vector2::new(h.cos(), h.sin()) * v * dt / SUB as f64;
            }
            self.t += dt;
            self.waypoints.push(Waypoint {
                t_s: self.t,
                x: self.pos.x,
                y: self.pos.y,
            });
        }
        self.speed = end_speed;
        self.heading_deg = h0 + turn_deg;
    }

    fn record(&mut self, event_type: EventType, t_s: f64, theta: Option<f64>, v: (Option<f64>, Option<f64>)) {
        self.events.push(EventRecord {
            event_type,
            track_id: self.track_id,
            t_s,
            t_e: self.t,
            theta,
            v_start: v.0,
            v_end: v.1,
            score: 1.0,
        });
    }

    /// Constant speed and heading.
    pub fn straight(mut self, duration: f64) -> Self {
        self.advance(duration, self.speed, 0.0);
        self
    }

    /// Constant-speed arc; positive angles turn left (counterclockwise).
    /// Records a turn event when `|turn_deg|` exceeds 30°; 135° or more is a U-turn.
    pub fn arc(mut self, turn_deg: f64, duration: f64) -> Self {
        let t_s = self.t;
        self.advance(duration, self.speed, turn_deg);
        let event_type = if turn_deg.abs() >= 135.0 {
            Some(EventType::UTurn)
        } else if turn_deg > 30.0 {
            Some(EventType::TurnLeft)
        } else if turn_deg < -30.0 {
            Some(EventType::TurnRight)
        } else {
            None
        };
        if let Some(ty) = event_type {
            self.record(ty, t_s, Some(turn_deg), (None, None));
        }
        self
    }

    /// Linear speed ramp; from rest it records a start, to rest a stop.
    pub fn ramp(mut self, end_speed: f64, duration: f64) -> Self {
        let (t_s, v0) = (self.t, self.speed);
        self.advance(duration, end_speed, 0.0);
        if v0 == 0.0 && end_speed > 0.0 {
            self.record(EventType::Start, t_s, None, (Some(v0), Some(end_speed)));
        } else if end_speed == 0.0 && v0 > 0.0 {
            self.record(EventType::Stop, t_s, None, (Some(v0), Some(end_speed)));
        }
        self
    }

    pub fn finish(self, length_m: f64, width_m: f64, height_m: f64) -> (ScriptedTrack, Vec<EventRecord>) {
        (
            ScriptedTrack {
                track_id: self.track_id,
                class_label: ClassLabel::Car,
                length_m,
                width_m,
                height_m,
                waypoints: self.waypoints,
            },
            self.events,
        )
    }
}
