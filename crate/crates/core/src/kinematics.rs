//! Polar ground velocity and sliding-window least-squares accelerations.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicsParams {
    /// Window half-width in frames; the window holds `2w + 1` frames.
    pub w: usize,
    /// Speed (m/s) below which the heading is held.
    pub v_theta_floor: f64,
}

impl KinematicsParams {
    /// One-second window at the given frame rate.
    pub fn for_fps(fps: f64) -> Self {
        Self {
            w: ((0.5 * fps).ceil() as usize).max(1),
            v_theta_floor: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundState {
    pub frame_index: u64,
    pub time_s: f64,
    /// Speed, m/s.
    pub v_r: f64,
    /// Unwrapped heading, degrees.
    pub v_theta: f64,
    /// Radial acceleration, m/s².
    pub a_r: f64,
    /// Heading rate, deg/s.
    pub a_theta: f64,
    pub window_valid: bool,
}

/// Speed and heading in degrees, heading in `(-180, 180]`.
pub fn to_polar(v: Vector2<f64>) -> (f64, f64) {
    let r = v.norm();
    if r == 0.0 {
        return (0.0, 0.0);
    }
    let theta = v.y.atan2(v.x).to_degrees();
    (r, if theta <= -180.0 { theta + 360.0 } else { theta })
}

/// Maps an angle difference into `(-180, 180]`.
pub fn wrap_degrees(a: f64) -> f64 {
    let r = (a + 180.0).rem_euclid(360.0) - 180.0;
    if r <= -180.0 {
        r + 360.0
    } else {
        r
    }
}

/// Removes ±360° jumps from a heading series.
///
/// Frames slower than `floor` copy the previous heading; leading slow frames
/// take the first heading measured above the floor.
pub fn unwrap_angles(raw: &[f64], speeds: &[f64], floor: f64) -> Vec<f64> {
    assert_eq!(raw.len(), speeds.len());
    let first_valid = speeds.iter().position(|&s| s >= floor);
    let seed = first_valid.map_or_else(|| raw.first().copied().unwrap_or(0.0), |i| raw[i]);
    let mut out = Vec::with_capacity(raw.len());
    let mut prev: Option<f64> = None;
    for (&a, &s) in raw.iter().zip(speeds) {
        let value = match prev {
            None if s >= floor => a,
            None => seed,
            Some(p) if s < floor => p,
            Some(p) => p + wrap_degrees(a - p),
        };
        out.push(value);
        prev = Some(value);
    }
    out
}

/// Ordinary least-squares slope (per second) of `series` over the window
/// `[t0 - w, t0 + w]`, samples spaced `1 / fps` apart. `None` if the window
/// leaves the series.
pub fn window_slope(series: &[f64], t0: usize, w: usize, fps: f64) -> Option<f64> {
    if t0 < w || t0 + w >= series.len() {
        return None;
    }
    let window = &series[t0 - w..=t0 + w];
    let n = window.len() as f64;
    let t_mean = w as f64 / fps;
    let y_mean = window.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in window.iter().enumerate() {
        let dt = i as f64 / fps - t_mean;
        sxy += dt * (y - y_mean);
        sxx += dt * dt;
    }
    Some(sxy / sxx)
}

/// Builds per-frame ground states from consecutive ground velocities
/// (one per frame, uniformly spaced).
pub fn ground_states(frames: &[(u64, Vector2<f64>)], fps: f64, params: &KinematicsParams) -> Vec<GroundState> {
    let polar: Vec<(f64, f64)> = frames.iter().map(|(_, v)| to_polar(*v)).collect();
    let speeds: Vec<f64> = polar.iter().map(|p| p.0).collect();
    let raw: Vec<f64> = polar.iter().map(|p| p.1).collect();
    let headings = unwrap_angles(&raw, &speeds, params.v_theta_floor);
    frames
        .iter()
        .enumerate()
        .map(|(i, (frame_index, _))| {
            let a_r = window_slope(&speeds, i, params.w, fps);
            let a_theta = window_slope(&headings, i, params.w, fps);
            GroundState {
                frame_index: *frame_index,
                time_s: *frame_index as f64 / fps,
                v_r: speeds[i],
                v_theta: headings[i],
                a_r: a_r.unwrap_or(0.0),
                a_theta: a_theta.unwrap_or(0.0),
                window_valid: a_r.is_some(),
            }
        })
        .collect()
}
