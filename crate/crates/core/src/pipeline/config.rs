//! Flat key/value pipeline configuration (TOML).

use serde::{Deserialize, Serialize};

use crate::collision::CollisionParams;
use crate::error::{Error, Result};
use crate::events::DetectorParams;
use crate::ground::GeometryParams;
use crate::kinematics::KinematicsParams;
use crate::smoothing::NoiseScales;

pub const DEFAULT_FPS: f64 = 30.0;
pub const DEFAULT_MAX_TRACK_GAP_FRAMES: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub fps: f64,
    pub kinematics: KinematicsParams,
    pub detector: DetectorParams,
    pub noise: NoiseScales,
    pub collision: CollisionParams,
    pub geometry: GeometryParams,
    pub max_track_gap_frames: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::for_fps(DEFAULT_FPS)
    }
}

/// On-disk form: every parameter at top level, all optional.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    fps: Option<f64>,
    w: Option<usize>,
    v_theta_floor: Option<f64>,
    a_theta_trigger: Option<f64>,
    a_theta_border: Option<f64>,
    v_turn_min: Option<f64>,
    t_turn_min: Option<f64>,
    theta_min: Option<f64>,
    theta_max: Option<f64>,
    a_r_trigger: Option<f64>,
    a_r_border: Option<f64>,
    t_linear_min: Option<f64>,
    v_stop_max: Option<f64>,
    v_move_min: Option<f64>,
    noise_scale_position: Option<f64>,
    noise_scale_velocity: Option<f64>,
    collision_horizon_s: Option<f64>,
    collision_step_s: Option<f64>,
    collision_min_track_age_s: Option<f64>,
    max_track_gap_frames: Option<u64>,
    v_orient_min: Option<f64>,
    default_vehicle_width_m: Option<f64>,
}

impl PipelineConfig {
    /// Defaults with the kinematics window sized for `fps`.
    pub fn for_fps(fps: f64) -> Self {
        Self {
            fps,
            kinematics: KinematicsParams::for_fps(fps),
            detector: DetectorParams::default(),
            noise: NoiseScales::default(),
            collision: CollisionParams::default(),
            geometry: GeometryParams::default(),
            max_track_gap_frames: DEFAULT_MAX_TRACK_GAP_FRAMES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.into()));
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return fail("fps must be positive");
        }
        if self.kinematics.w < 1 {
            return fail("w must be at least 1");
        }
        if !(self.kinematics.v_theta_floor >= 0.0) {
            return fail("v_theta_floor must be non-negative");
        }
        if !(self.noise.position > 0.0 && self.noise.velocity > 0.0) {
            return fail("noise scales must be positive");
        }
        if !(self.geometry.v_orient_min >= 0.0 && self.geometry.default_vehicle_width_m > 0.0) {
            return fail("v_orient_min must be non-negative and default_vehicle_width_m positive");
        }
        self.collision.validate()?;
        self.detector.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut c = Self::for_fps(raw.fps.unwrap_or(DEFAULT_FPS));
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = raw.$field { $target = v; })*
            };
        }
        set! {
            w => c.kinematics.w,
            v_theta_floor => c.kinematics.v_theta_floor,
            a_theta_trigger => c.detector.a_theta_trigger,
            a_theta_border => c.detector.a_theta_border,
            v_turn_min => c.detector.v_turn_min,
            t_turn_min => c.detector.t_turn_min,
            theta_min => c.detector.theta_min,
            theta_max => c.detector.theta_max,
            a_r_trigger => c.detector.a_r_trigger,
            a_r_border => c.detector.a_r_border,
            t_linear_min => c.detector.t_linear_min,
            v_stop_max => c.detector.v_stop_max,
            v_move_min => c.detector.v_move_min,
            noise_scale_position => c.noise.position,
            noise_scale_velocity => c.noise.velocity,
            collision_horizon_s => c.collision.collision_horizon_s,
            collision_step_s => c.collision.collision_step_s,
            collision_min_track_age_s => c.collision.collision_min_track_age_s,
            max_track_gap_frames => c.max_track_gap_frames,
            v_orient_min => c.geometry.v_orient_min,
            default_vehicle_width_m => c.geometry.default_vehicle_width_m,
        }
        c.validate()?;
        Ok(c)
    }

    /// Every parameter, explicit.
    pub fn to_toml(&self) -> String {
        let raw = RawConfig {
            fps: Some(self.fps),
            w: Some(self.kinematics.w),
            v_theta_floor: Some(self.kinematics.v_theta_floor),
            a_theta_trigger: Some(self.detector.a_theta_trigger),
            a_theta_border: Some(self.detector.a_theta_border),
            v_turn_min: Some(self.detector.v_turn_min),
            t_turn_min: Some(self.detector.t_turn_min),
            theta_min: Some(self.detector.theta_min),
            theta_max: Some(self.detector.theta_max),
            a_r_trigger: Some(self.detector.a_r_trigger),
            a_r_border: Some(self.detector.a_r_border),
            t_linear_min: Some(self.detector.t_linear_min),
            v_stop_max: Some(self.detector.v_stop_max),
            v_move_min: Some(self.detector.v_move_min),
            noise_scale_position: Some(self.noise.position),
            noise_scale_velocity: Some(self.noise.velocity),
            collision_horizon_s: Some(self.collision.collision_horizon_s),
            collision_step_s: Some(self.collision.collision_step_s),
            collision_min_track_age_s: Some(self.collision.collision_min_track_age_s),
            max_track_gap_frames: Some(self.max_track_gap_frames),
            v_orient_min: Some(self.geometry.v_orient_min),
            default_vehicle_width_m: Some(self.geometry.default_vehicle_width_m),
        };
        toml::to_string(&raw).expect("flat config serializes")
    }
}
