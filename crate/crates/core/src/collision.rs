//! Footprint distances, constant-velocity prediction and overlap-based
//! collision alerts.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground::{GroundObservation, Quadrangle};
use crate::pipeline::tracks::TrackId;

/// Distance from a point to the closed segment `[a, b]`.
pub fn point_edge_distance(p: Point2<f64>, a: Point2<f64>, b: Point2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

pub fn point_quadrangle_distance(p: Point2<f64>, q: &Quadrangle) -> f64 {
    q.edges()
        .iter()
        .map(|(a, b)| point_edge_distance(p, *a, *b))
        .fold(f64::INFINITY, f64::min)
}

/// Separating-axis test over the eight edge normals; touching counts as overlap.
pub fn quadrangles_overlap(q1: &Quadrangle, q2: &Quadrangle) -> bool {
    for q in [q1, q2] {
        for (a, b) in q.edges() {
            let axis = Vector2::new(-(b.y - a.y), b.x - a.x);
            let project = |poly: &Quadrangle| {
                poly.vertices()
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        let d = axis.dot(&v.coords);
                        (lo.min(d), hi.max(d))
                    })
            };
            let (lo1, hi1) = project(q1);
            let (lo2, hi2) = project(q2);
            if hi1 < lo2 || hi2 < lo1 {
                return false;
            }
        }
    }
    true
}

/// Minimum distance between two quadrangles: vertex-to-edge minimum both
/// ways when disjoint, zero when they overlap.
pub fn quadrangle_distance(q1: &Quadrangle, q2: &Quadrangle) -> f64 {
    if quadrangles_overlap(q1, q2) {
        return 0.0;
    }
    let one_way = |from: &Quadrangle, to: &Quadrangle| {
        from.vertices()
            .iter()
            .map(|p| point_quadrangle_distance(*p, to))
            .fold(f64::INFINITY, f64::min)
    };
    one_way(q1, q2).min(one_way(q2, q1))
}

/// Constant-velocity position after `dt` seconds.
pub fn predict_center(p: Point2<f64>, v: Vector2<f64>, dt: f64) -> Point2<f64> {
    p + v * dt
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollisionParams {
    pub collision_horizon_s: f64,
    pub collision_step_s: f64,
    /// How long a track must have been observed without a gap before it
    /// takes part in collision checks; covers the filter's start-up transient.
    pub collision_min_track_age_s: f64,
}

impl Default for CollisionParams {
    fn default() -> Self {
        Self {
            collision_horizon_s: 1.0,
            collision_step_s: 0.1,
            collision_min_track_age_s: 0.2,
        }
    }
}

impl CollisionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.collision_horizon_s > 0.0 && self.collision_step_s > 0.0) {
            return Err(Error::Config("collision horizon and step must be positive".into()));
        }
        if !(self.collision_min_track_age_s >= 0.0) {
            return Err(Error::Config("collision_min_track_age_s must be non-negative".into()));
        }
        Ok(())
    }

    fn offsets(&self) -> impl Iterator<Item = f64> + '_ {
        let steps = (self.collision_horizon_s / self.collision_step_s + 1e-9).floor() as usize;
        (0..=steps).map(move |k| (k as f64 * self.collision_step_s).min(self.collision_horizon_s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionAlert {
    pub t_s: f64,
    pub track_a: TrackId,
    pub track_b: TrackId,
    /// Smallest prediction offset at which the footprints overlap.
    pub horizon_s: f64,
    pub min_distance_now: f64,
}

#[derive(Serialize, Deserialize)]
struct AlertLine {
    t_s: f64,
    track_a: TrackId,
    track_b: TrackId,
    horizon_s: f64,
    predicted_overlap: bool,
}

impl CollisionAlert {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&AlertLine {
            t_s: self.t_s,
            track_a: self.track_a,
            track_b: self.track_b,
            horizon_s: self.horizon_s,
            predicted_overlap: true,
        })
        .expect("plain struct serializes")
    }
}

/// Earliest predicted overlap offset for one pair.
fn sweep_pair(a: &GroundObservation, b: &GroundObservation, params: &CollisionParams) -> Option<f64> {
    params.offsets().find(|&dt| {
        let qa = a.footprint.translated(a.ground_velocity * dt);
        let qb = b.footprint.translated(b.ground_velocity * dt);
        quadrangles_overlap(&qa, &qb)
    })
}

fn can_meet(a: &GroundObservation, b: &GroundObservation, params: &CollisionParams) -> bool {
    let gap = (a.footprint.centroid() - b.footprint.centroid()).norm();
    let reach = params.collision_horizon_s * (a.ground_velocity.norm() + b.ground_velocity.norm())
        + a.footprint.circumradius()
        + b.footprint.circumradius();
    gap <= reach
}

fn detect(frame: &[GroundObservation], params: &CollisionParams, prune: bool) -> Vec<CollisionAlert> {
    let mut alerts = Vec::new();
    for (i, a) in frame.iter().enumerate() {
        for b in &frame[i + 1..] {
            if a.track_id == b.track_id || (prune && !can_meet(a, b, params)) {
                continue;
            }
            if let Some(dt) = sweep_pair(a, b, params) {
                let (first, second) = if a.track_id < b.track_id { (a, b) } else { (b, a) };
                alerts.push(CollisionAlert {
                    t_s: a.time_s,
                    track_a: first.track_id,
                    track_b: second.track_id,
                    horizon_s: dt,
                    min_distance_now: quadrangle_distance(&a.footprint, &b.footprint),
                });
            }
        }
    }
    alerts.sort_by_key(|x| (x.track_a, x.track_b));
    alerts
}

/// Checks every pair of same-frame observations for predicted overlap within
/// the horizon, reporting the smallest overlapping offset per pair.
pub fn detect_collisions(frame: &[GroundObservation], params: &CollisionParams) -> Vec<CollisionAlert> {
    detect(frame, params, true)
}

/// Same as [`detect_collisions`] without distance pruning.
pub fn detect_collisions_exhaustive(frame: &[GroundObservation], params: &CollisionParams) -> Vec<CollisionAlert> {
    detect(frame, params, false)
}

/// Frame-by-frame alerting with one alert per pair per overlap episode, plus
/// the per-pair distance history.
#[derive(Debug, Default)]
pub struct CollisionMonitor {
    params: CollisionParams,
    active: BTreeSet<(TrackId, TrackId)>,
    /// Last frame and start time of the current gap-free run per track.
    runs: BTreeMap<TrackId, (u64, f64)>,
    distances: BTreeMap<(TrackId, TrackId), Vec<(f64, f64)>>,
    record_distances: bool,
}

impl CollisionMonitor {
    pub fn new(params: CollisionParams) -> Self {
        Self {
            params,
            ..Default::default()
        }
    }

    pub fn recording_distances(mut self) -> Self {
        self.record_distances = true;
        self
    }

    /// Processes one frame's observations; returns newly raised alerts.
    pub fn observe(&mut self, frame: &[GroundObservation]) -> Vec<CollisionAlert> {
        if self.record_distances {
            for (i, a) in frame.iter().enumerate() {
                for b in &frame[i + 1..] {
                    let key = (a.track_id.min(b.track_id), a.track_id.max(b.track_id));
                    let d = quadrangle_distance(&a.footprint, &b.footprint);
                    self.distances.entry(key).or_default().push((a.time_s, d));
                }
            }
        }
        for o in frame {
            let start = match self.runs.get(&o.track_id) {
                Some(&(last, start)) if last + 1 == o.frame_index || last == o.frame_index => start,
                _ => o.time_s,
            };
            self.runs.insert(o.track_id, (o.frame_index, start));
        }
        let min_age = self.params.collision_min_track_age_s;
        let settled: Vec<GroundObservation> = frame
            .iter()
            .filter(|o| o.time_s - self.runs[&o.track_id].1 >= min_age - 1e-9)
            .cloned()
            .collect();
        let alerts = detect_collisions(&settled, &self.params);
        let now: BTreeSet<(TrackId, TrackId)> = alerts.iter().map(|a| (a.track_a, a.track_b)).collect();
        let fresh = alerts
            .into_iter()
            .filter(|a| !self.active.contains(&(a.track_a, a.track_b)))
            .collect();
        self.active = now;
        fresh
    }

    /// Distance time series `(t_s, meters)` per pair.
    pub fn distances(&self) -> &BTreeMap<(TrackId, TrackId), Vec<(f64, f64)>> {
        &self.distances
    }
}
