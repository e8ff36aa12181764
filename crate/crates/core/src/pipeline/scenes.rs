//! Ready-made synthetic scenes on a fixed demo camera.

use nalgebra::{Matrix3, Point2, Vector2, Vector3};

use crate::calibration::{CalibrationFile, CameraModel};
use crate::error::Result;
use crate::events::EventRecord;
use crate::pipeline::synthetic::{ScriptBuilder, ScriptedTrack, SyntheticScenario};
use crate::pipeline::tracks::TrackId;

pub const DEMO_FPS: f64 = 30.0;

/// Car dimensions `(length, width, height)` in meters.
pub const CAR: (f64, f64, f64) = (4.5, 1.8, 1.5);

/// Calibration file for [`demo_camera`]: 1920×1080, f = 1200 px, 12 m above
/// the origin, looking along +Y and pitched 25° down.
pub fn demo_calibration() -> CalibrationFile {
    let (s, c) = 25f64.to_radians().sin_cos();
    let r = Matrix3::new(1.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s);
    let t = -r * Vector3::new(0.0, 0.0, 12.0);
    let rows = |m: &Matrix3<f64>| [0, 1, 2].map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]]);
    CalibrationFile {
        p: None,
        k: Some([[1200.0, 0.0, 960.0], [0.0, 1200.0, 540.0], [0.0, 0.0, 1.0]]),
        r: Some(rows(&r)),
        t: Some([t.x, t.y, t.z]),
        vp_u: None,
        vp_v: None,
        parallel_lines: None,
        scale_segment: None,
        camera_height_m: None,
        image_size: [1920.0, 1080.0],
    }
}

pub fn demo_camera() -> CameraModel {
    demo_calibration().build().expect("valid demo camera")
}

fn finish(b: ScriptBuilder, tracks: &mut Vec<ScriptedTrack>, events: &mut Vec<EventRecord>) -> f64 {
    let end = b.time();
    let (t, e) = b.finish(CAR.0, CAR.1, CAR.2);
    tracks.push(t);
    events.extend(e);
    end
}

/// Script for a constant-speed turn about `center`: 2 s straight, the arc,
/// then 2 s straight.
pub fn turn_script(
    id: TrackId,
    t0: f64,
    center: Point2<f64>,
    heading_deg: f64,
    turn_deg: f64,
    speed: f64,
    rate_deg_s: f64,
) -> ScriptBuilder {
    let h = heading_deg.to_radians();
    let dir = Vector2::new(h.cos(), h.sin());
    let to_center = Vector2::new(-dir.y, dir.x) * turn_deg.signum();
    let radius = speed / rate_deg_s.to_radians();
    let start = center - to_center * radius - dir * (2.0 * speed);
    ScriptBuilder::new(id, DEMO_FPS, t0, start, heading_deg, speed)
        .straight(2.0)
        .arc(turn_deg, turn_deg.abs() / rate_deg_s)
        .straight(2.0)
}

/// Ten vehicles, one after another, each performing a single maneuver:
/// three left turns, two right turns, one U-turn, two starts and two stops.
///
/// Turns run at 3 m/s (U-turn 4 m/s); starts and stops ramp at 1.1 m/s². Turns are laid out
/// so that each vehicle approaches or crosses the view while turning: seen
/// from behind, the bottom-middle of the box rides on the rear bumper, whose
/// heading trails the vehicle by about half a length over speed.
pub fn maneuver_scene(noise_px: f64) -> Result<SyntheticScenario> {
    let fps = DEMO_FPS;
    let mut tracks = Vec::new();
    let mut events = Vec::new();
    let mut t = 1.0;
    let mut id: TrackId = 1;
    let mut next = || {
        id += 1;
        id - 1
    };

    // (initial heading, turn, rate)
    let turns = [
        (120.0f64, 90.0f64, 15.0),
        (60.0, -90.0, 15.0),
        (240.0, 90.0, 15.0),
        (300.0, -90.0, 15.0),
        (270.0, 90.0, 15.0),
        (45.0, 180.0, 18.0),
    ];
    for (heading, turn, rate) in turns {
        let speed = if turn.abs() > 135.0 { 4.0 } else { 3.0 };
        let b = turn_script(next(), t, Point2::new(0.0, 28.0), heading, turn, speed, rate);
        t = finish(b, &mut tracks, &mut events) + 1.0;
    }

    // Straight crossing paths centered on (0, 17): 5.5 m/s reached or shed in 5 s.
    let (v, ramp) = (5.5, 5.0);
    let path = v * ramp / 2.0 + v * 1.5;
    let from = |heading: f64| {
        let h = heading.to_radians();
        Point2::new(0.0, 17.0) - Vector2::new(h.cos(), h.sin()) * (path / 2.0)
    };
    for heading in [0.0, 180.0] {
        let b = ScriptBuilder::new(next(), fps, t, from(heading), heading, 0.0)
            .straight(2.0)
            .ramp(v, ramp)
            .straight(1.5);
        t = finish(b, &mut tracks, &mut events) + 1.0;
    }
    for heading in [0.0, 180.0] {
        let b = ScriptBuilder::new(next(), fps, t, from(heading), heading, v)
            .straight(1.5)
            .ramp(0.0, ramp)
            .straight(2.0);
        t = finish(b, &mut tracks, &mut events) + 1.0;
    }

    SyntheticScenario::new(demo_camera(), fps, noise_px, tracks, events)
}

/// Two cars driving head-on along a lane at `y = 35` with combined closing
/// speed `closing_mps`; front bumpers touch at `t_meet_s` (the scene starts
/// at 0 and ends half a second after contact).
pub fn head_on_scene(noise_px: f64, closing_mps: f64, t_meet_s: f64) -> Result<SyntheticScenario> {
    let fps = DEMO_FPS;
    let v = closing_mps / 2.0;
    let half = CAR.0 / 2.0;
    let a_start = Point2::new(-half - v * t_meet_s, 35.0);
    let b_start = Point2::new(half + v * t_meet_s, 35.0);
    let duration = t_meet_s + 0.5;
    let mut tracks = Vec::new();
    let mut events = Vec::new();
    finish(
        ScriptBuilder::new(1, fps, 0.0, a_start, 0.0, v).straight(duration),
        &mut tracks,
        &mut events,
    );
    finish(
        ScriptBuilder::new(2, fps, 0.0, b_start, 180.0, v).straight(duration),
        &mut tracks,
        &mut events,
    );
    SyntheticScenario::new(demo_camera(), fps, noise_px, tracks, events)
}

/// Two cars side by side in lanes `lane_gap_m` apart (center to center),
/// same direction and speed.
pub fn parallel_lane_scene(noise_px: f64, lane_gap_m: f64, speed: f64, duration: f64) -> Result<SyntheticScenario> {
    let fps = DEMO_FPS;
    let mut tracks = Vec::new();
    let mut events = Vec::new();
    let x0 = -speed * duration / 2.0;
    for (id, y) in [(1, 20.0), (2, 20.0 + lane_gap_m)] {
        finish(
            ScriptBuilder::new(id, fps, 0.0, Point2::new(x0, y), 0.0, speed).straight(duration),
            &mut tracks,
            &mut events,
        );
    }
    SyntheticScenario::new(demo_camera(), fps, noise_px, tracks, events)
}

/// `n` cars visible at once, each looping through turns and speed changes
/// in its own lane for `duration` seconds.
pub fn busy_scene(n: usize, duration: f64, noise_px: f64) -> Result<SyntheticScenario> {
    let fps = DEMO_FPS;
    let mut tracks = Vec::new();
    let mut events = Vec::new();
    for i in 0..n {
        let row = (i / 5) as f64;
        let col = (i % 5) as f64;
        let start = Point2::new(-12.0 + 6.0 * col, 25.0 + 7.0 * row);
        let mut b = ScriptBuilder::new(i as TrackId + 1, fps, 0.0, start, 90.0 * i as f64, 0.0);
        while b.time() < duration {
            b = b
                .ramp(2.0, 2.0)
                .arc(180.0, 6.0)
                .arc(180.0, 6.0)
                .ramp(0.0, 2.0)
                .straight(1.0);
        }
        finish(b, &mut tracks, &mut events);
    }
    SyntheticScenario::new(demo_camera(), fps, noise_px, tracks, events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::synthetic::generate_scenario;
    use nalgebra::Point3;

    #[test]
    fn demo_camera_geometry() {
        let cam = demo_camera();
        assert!((cam.center() - Point3::new(0.0, 0.0, 12.0)).norm() < 1e-12);
        // The principal ray meets the ground 12 / tan 25° ahead.
        let g = cam.reproject_image_to_ground(Point2::new(960.0, 540.0)).unwrap();
        assert!((g - Point2::new(0.0, 12.0 / 25f64.to_radians().tan())).norm() < 1e-9);
    }

    #[test]
    fn maneuver_scene_is_fully_visible() {
        let scene = maneuver_scene(0.0).unwrap();
        let pts = generate_scenario(&scene, 0);
        let expected: u64 = scene.tracks.iter().map(|t| scene.frames_of(t).count() as u64).sum();
        assert_eq!(pts.len() as u64, expected);
        assert_eq!(scene.expected_events.len(), 10);
    }

    #[test]
    fn busy_scene_is_fully_visible() {
        let scene = busy_scene(20, 10.0, 0.0).unwrap();
        let pts = generate_scenario(&scene, 0);
        let expected: u64 = scene.tracks.iter().map(|t| scene.frames_of(t).count() as u64).sum();
        assert_eq!(pts.len() as u64, expected);
    }
}
