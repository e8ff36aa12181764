//! Constant-velocity Kalman filtering of 2D boxes.
//!
//! The state is `(cx, cy_bottom, w, h, vx, vy)` in pixels and pixels per
//! frame, where `(cx, cy_bottom)` is the bottom-middle point of the box.
//! Noise standard deviations scale with the current box height.

use nalgebra::{Matrix4, Matrix4x6, Matrix6, Matrix6x4, Point2, Vector2, Vector4, Vector6};
use serde::{Deserialize, Serialize};

use crate::pipeline::tracks::{BBox, TrackPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseScales {
    /// Position / size standard deviation as a fraction of box height.
    pub position: f64,
    /// Velocity standard deviation per frame as a fraction of box height.
    pub velocity: f64,
}

impl Default for NoiseScales {
    fn default() -> Self {
        Self {
            position: 1.0 / 20.0,
            velocity: 1.0 / 160.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedTrackPoint {
    pub frame_index: u64,
    pub time_s: f64,
    pub bottom_middle: Point2<f64>,
    /// Velocity of the bottom-middle point in pixels per second.
    pub image_velocity: Vector2<f64>,
    pub box_size: Vector2<f64>,
    pub covariance: Matrix6<f64>,
    /// Measurement residual before the update; `None` for predict-only frames.
    pub innovation: Option<Vector4<f64>>,
    /// Predict-only state filling a frame without a detection.
    pub interpolated: bool,
}

impl SmoothedTrackPoint {
    pub fn bbox(&self) -> BBox {
        BBox::new(
            self.bottom_middle.x - self.box_size.x / 2.0,
            self.bottom_middle.y - self.box_size.y,
            self.box_size.x,
            self.box_size.y,
        )
    }
}

fn measurement(b: &BBox) -> Vector4<f64> {
    let bm = b.bottom_middle();
    Vector4::new(bm.x, bm.y, b.width, b.height)
}

#[derive(Debug, Clone)]
pub struct BoxKalmanFilter {
    mean: Vector6<f64>,
    covariance: Matrix6<f64>,
    noise: NoiseScales,
}

impl BoxKalmanFilter {
    const H: Matrix4x6<f64> = Matrix4x6::new(
        1.0, 0.0, 0.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
    );

    /// Starts a track at rest with inflated uncertainty.
    pub fn new(first: &BBox, noise: NoiseScales) -> Self {
        let z = measurement(first);
        let h = first.height;
        let pos = 2.0 * noise.position * h;
        let vel = 10.0 * noise.velocity * h;
        let covariance = Matrix6::from_diagonal(&Vector6::new(
            pos * pos,
            pos * pos,
            pos * pos,
            pos * pos,
            vel * vel,
            vel * vel,
        ));
        Self {
            mean: Vector6::new(z.x, z.y, z.z, z.w, 0.0, 0.0),
            covariance,
            noise,
        }
    }

    pub fn mean(&self) -> &Vector6<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix6<f64> {
        &self.covariance
    }

    /// Advances the state by one frame.
    pub fn predict(&mut self) {
        let mut f = Matrix6::identity();
        f[(0, 4)] = 1.0;
        f[(1, 5)] = 1.0;
        let h = self.mean[3].abs();
        let pos = self.noise.position * h;
        let vel = self.noise.velocity * h;
        let q = Matrix6::from_diagonal(&Vector6::new(
            pos * pos,
            pos * pos,
            pos * pos,
            pos * pos,
            vel * vel,
            vel * vel,
        ));
        self.mean = f * self.mean;
        self.covariance = f * self.covariance * f.transpose() + q;
    }

    /// Corrects the predicted state with a measured box; returns the innovation.
    pub fn update(&mut self, b: &BBox) -> Vector4<f64> {
        let z = measurement(b);
        let std = self.noise.position * self.mean[3].abs();
        let r = Matrix4::from_diagonal_element(std * std);
        let innovation = z - Self::H * self.mean;
        let s = Self::H * self.covariance * Self::H.transpose() + r;
        let s_inv = s.try_inverse().unwrap_or_else(Matrix4::zeros);
        let gain: Matrix6x4<f64> = self.covariance * Self::H.transpose() * s_inv;
        self.mean += gain * innovation;
        // Joseph form keeps the covariance symmetric positive semidefinite.
        let i_kh = Matrix6::identity() - gain * Self::H;
        let p = i_kh * self.covariance * i_kh.transpose() + gain * r * gain.transpose();
        self.covariance = (p + p.transpose()) * 0.5;
        innovation
    }
}

/// Filters one gap-free track segment.
///
/// Frames missing between two detections are filled with predict-only
/// states flagged as interpolated, so the output covers every frame from the
/// first to the last detection.
pub fn smooth_track(points: &[TrackPoint], fps: f64, noise: NoiseScales) -> Vec<SmoothedTrackPoint> {
    let Some(first) = points.first() else {
        return Vec::new();
    };
    let mut filter = BoxKalmanFilter::new(&first.bbox, noise);
    let mut out = Vec::with_capacity(points.len());
    let emit = |filter: &BoxKalmanFilter, frame_index: u64, innovation, interpolated| {
        let m = filter.mean();
        SmoothedTrackPoint {
            frame_index,
            time_s: frame_index as f64 / fps,
            bottom_middle: Point2::new(m[0], m[1]),
            image_velocity: Vector2::new(m[4], m[5]) * fps,
            box_size: Vector2::new(m[2].abs(), m[3].abs()),
            covariance: *filter.covariance(),
            innovation,
            interpolated,
        }
    };
    out.push(emit(&filter, first.frame_index, None, false));

    let mut frame = first.frame_index;
    for p in &points[1..] {
        while frame + 1 < p.frame_index {
            frame += 1;
            filter.predict();
            out.push(emit(&filter, frame, None, true));
        }
        frame = p.frame_index;
        filter.predict();
        let innovation = filter.update(&p.bbox);
        out.push(emit(&filter, frame, Some(innovation), false));
    }
    out
}
