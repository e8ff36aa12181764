//! Trigger/border state machines over ground kinematics, detecting vehicle
//! turns (left, right, U-turn) and linear events (start, stop).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{wrap_degrees, GroundState};
use crate::pipeline::tracks::TrackId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    /// deg/s
    pub a_theta_trigger: f64,
    /// deg/s
    pub a_theta_border: f64,
    /// m/s
    pub v_turn_min: f64,
    /// s
    pub t_turn_min: f64,
    /// deg
    pub theta_min: f64,
    /// deg
    pub theta_max: f64,
    /// m/s²
    pub a_r_trigger: f64,
    /// m/s²
    pub a_r_border: f64,
    /// s
    pub t_linear_min: f64,
    /// m/s
    pub v_stop_max: f64,
    /// m/s
    pub v_move_min: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            a_theta_trigger: 10.0,
            a_theta_border: 4.0,
            v_turn_min: 0.5,
            t_turn_min: 1.0,
            theta_min: 30.0,
            theta_max: 135.0,
            a_r_trigger: 1.0,
            a_r_border: 0.4,
            t_linear_min: 1.0,
            v_stop_max: 0.3,
            v_move_min: 1.0,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.into()));
        if !(self.a_theta_trigger > self.a_theta_border) {
            return fail("a_theta_trigger must exceed a_theta_border");
        }
        if !(self.a_r_trigger > self.a_r_border) {
            return fail("a_r_trigger must exceed a_r_border");
        }
        if !(0.0 < self.theta_min && self.theta_min < self.theta_max && self.theta_max <= 180.0) {
            return fail("require 0 < theta_min < theta_max <= 180");
        }
        if !(self.v_stop_max < self.v_move_min) {
            return fail("v_stop_max must be below v_move_min");
        }
        if !(self.t_turn_min > 0.0 && self.t_linear_min > 0.0) {
            return fail("event durations must be positive");
        }
        if !(self.v_stop_max > 0.0 && self.v_turn_min >= 0.0 && self.a_theta_border >= 0.0 && self.a_r_border >= 0.0) {
            return fail("speed and rate thresholds must be nonnegative, v_stop_max positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    TurnLeft,
    TurnRight,
    UTurn,
    Start,
    Stop,
}

impl EventType {
    pub const ALL: [EventType; 5] = [Self::TurnLeft, Self::TurnRight, Self::UTurn, Self::Start, Self::Stop];

    pub fn name(&self) -> &'static str {
        match self {
            Self::TurnLeft => "turn_left",
            Self::TurnRight => "turn_right",
            Self::UTurn => "u_turn",
            Self::Start => "start",
            Self::Stop => "stop",
        }
    }

    pub fn is_turning(&self) -> bool {
        matches!(self, Self::TurnLeft | Self::TurnRight | Self::UTurn)
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    #[serde(rename = "type")]
    pub event_type: EventType,
    pub track_id: TrackId,
    #[serde(rename = "t_start_s")]
    pub t_s: f64,
    #[serde(rename = "t_end_s")]
    pub t_e: f64,
    #[serde(rename = "theta_deg")]
    pub theta: Option<f64>,
    #[serde(rename = "v_start_mps")]
    pub v_start: Option<f64>,
    #[serde(rename = "v_end_mps")]
    pub v_end: Option<f64>,
    pub score: f64,
}

/// Streaming trigger/border machine.
///
/// When the trigger fires outside an open interval, the interval start is
/// backtracked to the beginning of the current run of border frames. The
/// interval stays open while the border holds.
#[derive(Debug, Clone, Default)]
pub struct TriggerMachine {
    next: usize,
    run_start: Option<usize>,
    open: Option<usize>,
    last_end: Option<usize>,
}

impl TriggerMachine {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds the next frame; returns an interval closed by this frame.
    pub fn push(&mut self, trigger: bool, border: bool) -> Option<(usize, usize)> {
        let i = self.next;
        self.next += 1;
        if !border {
            self.run_start = None;
            let closed = self.open.take().map(|s| (s, i - 1));
            if let Some((_, e)) = closed {
                self.last_end = Some(e);
            }
            return closed;
        }
        let floor = self.last_end.map_or(0, |e| e + 1);
        let run_start = *self.run_start.get_or_insert(i);
        if self.open.is_none() && trigger {
            self.open = Some(run_start.max(floor));
        }
        None
    }

    /// Closes an interval still open at the end of the segment.
    pub fn finish(&mut self) -> Option<(usize, usize)> {
        let closed = self.open.take().map(|s| (s, self.next - 1));
        if let Some((_, e)) = closed {
            self.last_end = Some(e);
        }
        self.run_start = None;
        closed
    }
}

/// Runs a trigger machine over a series; intervals are inclusive frame indices.
pub fn run_trigger_machine<T>(
    series: &[T],
    trigger: impl Fn(&T) -> bool,
    border: impl Fn(&T) -> bool,
) -> Vec<(usize, usize)> {
    let mut machine = TriggerMachine::new();
    let mut out: Vec<(usize, usize)> = series
        .iter()
        .filter_map(|f| machine.push(trigger(f), border(f)))
        .collect();
    out.extend(machine.finish());
    out
}

pub fn score_event(event: &EventRecord, params: &DetectorParams) -> f64 {
    let raw = match event.event_type {
        EventType::TurnLeft | EventType::TurnRight => {
            let theta = event.theta.unwrap_or(0.0).abs();
            1.0 - (theta - 90.0).abs() / 90.0
        }
        EventType::UTurn => event.theta.unwrap_or(0.0).abs() / 180.0,
        EventType::Start => 1.0 - event.v_start.unwrap_or(0.0) / params.v_stop_max,
        EventType::Stop => 1.0 - event.v_end.unwrap_or(0.0) / params.v_stop_max,
    };
    raw.clamp(0.0, 1.0)
}

pub fn classify_turn(theta: f64, params: &DetectorParams) -> Option<EventType> {
    if theta.abs() <= params.theta_min {
        None
    } else if theta.abs() >= params.theta_max {
        Some(EventType::UTurn)
    } else if theta > 0.0 {
        Some(EventType::TurnLeft)
    } else {
        Some(EventType::TurnRight)
    }
}

pub fn detect_turning(series: &[GroundState], track_id: TrackId, params: &DetectorParams) -> Vec<EventRecord> {
    let gate = |s: &GroundState, rate: f64| s.window_valid && s.a_theta.abs() >= rate && s.v_r >= params.v_turn_min;
    run_trigger_machine(
        series,
        |s| gate(s, params.a_theta_trigger),
        |s| gate(s, params.a_theta_border),
    )
    .into_iter()
    .filter_map(|(s, e)| {
        let (start, end) = (&series[s], &series[e]);
        if end.time_s - start.time_s < params.t_turn_min {
            return None;
        }
        let theta = wrap_degrees(end.v_theta - start.v_theta);
        let event_type = classify_turn(theta, params)?;
        let mut event = EventRecord {
            event_type,
            track_id,
            t_s: start.time_s,
            t_e: end.time_s,
            theta: Some(theta),
            v_start: None,
            v_end: None,
            score: 0.0,
        };
        event.score = score_event(&event, params);
        Some(event)
    })
    .collect()
}

pub fn detect_linear(series: &[GroundState], track_id: TrackId, params: &DetectorParams) -> Vec<EventRecord> {
    let gate = |s: &GroundState, rate: f64| s.window_valid && s.a_r.abs() >= rate;
    run_trigger_machine(series, |s| gate(s, params.a_r_trigger), |s| gate(s, params.a_r_border))
        .into_iter()
        .filter_map(|(s, e)| {
            let (start, end) = (&series[s], &series[e]);
            if end.time_s - start.time_s < params.t_linear_min {
                return None;
            }
            let (vs, ve) = (start.v_r, end.v_r);
            let event_type = if vs <= params.v_stop_max && ve >= params.v_move_min {
                EventType::Start
            } else if vs >= params.v_move_min && ve <= params.v_stop_max {
                EventType::Stop
            } else {
                return None;
            };
            let mut event = EventRecord {
                event_type,
                track_id,
                t_s: start.time_s,
                t_e: end.time_s,
                theta: None,
                v_start: Some(vs),
                v_end: Some(ve),
                score: 0.0,
            };
            event.score = score_event(&event, params);
            Some(event)
        })
        .collect()
}

/// Both machines over one track segment, ordered by end time.
pub fn detect_events(series: &[GroundState], track_id: TrackId, params: &DetectorParams) -> Vec<EventRecord> {
    let mut events = detect_turning(series, track_id, params);
    events.extend(detect_linear(series, track_id, params));
    events.sort_by(|a, b| a.t_e.total_cmp(&b.t_e).then(a.event_type.cmp(&b.event_type)));
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pattern(s: &str) -> Vec<(bool, bool)> {
        // 'F' border false, 'B' border only, 'T' trigger and border.
        s.chars().map(|c| (c == 'T', c != 'F')).collect()
    }

    fn run(s: &str) -> Vec<(usize, usize)> {
        run_trigger_machine(&pattern(s), |f| f.0, |f| f.1)
    }

    #[test]
    fn machine_examples() {
        assert_eq!(run("BBBBTBBBB"), vec![(0, 8)]);
        assert_eq!(run("BBBBBBBBB"), vec![]);
        assert_eq!(run("FFBBTBBFF"), vec![(2, 6)]);
        assert_eq!(run("TBFBTFFBT"), vec![(0, 1), (3, 4), (7, 8)]);
        assert_eq!(run(""), vec![]);
    }

    fn reference(frames: &[(bool, bool)]) -> Vec<(usize, usize)> {
        // Every maximal border run containing a trigger frame.
        let mut out = Vec::new();
        let mut i = 0;
        while i < frames.len() {
            if !frames[i].1 {
                i += 1;
                continue;
            }
            let start = i;
            while i < frames.len() && frames[i].1 {
                i += 1;
            }
            if frames[start..i].iter().any(|f| f.0) {
                out.push((start, i - 1));
            }
        }
        out
    }

    #[test]
    fn machine_matches_reference_on_short_patterns() {
        for code in 0..3usize.pow(6) {
            let frames: Vec<(bool, bool)> = (0..6)
                .map(|k| match (code / 3usize.pow(k)) % 3 {
                    0 => (false, false),
                    1 => (false, true),
                    _ => (true, true),
                })
                .collect();
            assert_eq!(run_trigger_machine(&frames, |f| f.0, |f| f.1), reference(&frames));
        }
    }

    fn state(i: usize, fps: f64, v_r: f64, v_theta: f64, a_r: f64, a_theta: f64) -> GroundState {
        GroundState {
            frame_index: i as u64,
            time_s: i as f64 / fps,
            v_r,
            v_theta,
            a_r,
            a_theta,
            window_valid: true,
        }
    }

    /// Heading ramps at `rate` deg/s between `t0` and `t1`; a_theta is the exact rate.
    fn turn_series(rate: f64, t0: f64, t1: f64, speed: f64, offset: f64) -> Vec<GroundState> {
        let fps = 10.0;
        (0..100)
            .map(|i| {
                let t = i as f64 / fps;
                let active = t >= t0 && t <= t1;
                let heading = offset + rate * (t.clamp(t0, t1) - t0);
                state(i, fps, speed, heading, 0.0, if active { rate } else { 0.0 })
            })
            .collect()
    }

    #[test]
    fn sustained_turns_are_classified() {
        let p = DetectorParams::default();
        let left = detect_turning(&turn_series(30.0, 2.0, 5.0, 5.0, 10.0), 7, &p);
        assert_eq!(left.len(), 1);
        assert_eq!(left[0].event_type, EventType::TurnLeft);
        assert!((left[0].theta.unwrap() - 90.0).abs() < 1e-9);
        assert!((left[0].score - 1.0).abs() < 1e-9);

        let uturn = detect_turning(&turn_series(170.0 / 4.0, 2.0, 6.0, 5.0, 0.0), 7, &p);
        assert_eq!(uturn.len(), 1);
        assert_eq!(uturn[0].event_type, EventType::UTurn);

        let right = detect_turning(&turn_series(-20.0, 1.0, 4.0, 5.0, 170.0), 7, &p);
        assert_eq!(right[0].event_type, EventType::TurnRight);
        assert!((right[0].theta.unwrap() + 60.0).abs() < 1e-9);
    }

    #[test]
    fn slow_turn_is_ignored() {
        let p = DetectorParams::default();
        assert!(detect_turning(&turn_series(30.0, 2.0, 5.0, 0.4, 0.0), 1, &p).is_empty());
    }

    #[test]
    fn short_or_small_turns_are_invalid() {
        let p = DetectorParams::default();
        assert!(detect_turning(&turn_series(60.0, 2.0, 2.5, 5.0, 0.0), 1, &p).is_empty());
        assert!(detect_turning(&turn_series(12.0, 2.0, 4.0, 5.0, 0.0), 1, &p).is_empty());
    }

    fn speed_series(profile: impl Fn(f64) -> (f64, f64)) -> Vec<GroundState> {
        let fps = 10.0;
        (0..100)
            .map(|i| {
                let (v, a) = profile(i as f64 / fps);
                state(i, fps, v, 0.0, a, 0.0)
            })
            .collect()
    }

    #[test]
    fn start_and_stop() {
        let p = DetectorParams::default();
        let start = detect_linear(
            &speed_series(|t| {
                if t < 2.0 {
                    (0.0, 0.0)
                } else if t < 5.0 {
                    (8.0 * (t - 2.0) / 3.0, 8.0 / 3.0)
                } else {
                    (8.0, 0.0)
                }
            }),
            2,
            &p,
        );
        assert_eq!(start.len(), 1);
        assert_eq!(start[0].event_type, EventType::Start);
        assert_eq!(start[0].score, 1.0);

        let stop = detect_linear(
            &speed_series(|t| {
                if t < 2.0 {
                    (8.0, 0.0)
                } else if t < 5.0 {
                    (8.0 - 8.0 * (t - 2.0) / 3.0, -8.0 / 3.0)
                } else {
                    (0.0, 0.0)
                }
            }),
            2,
            &p,
        );
        assert_eq!(stop.len(), 1);
        assert_eq!(stop[0].event_type, EventType::Stop);
        assert!(stop[0].v_end.unwrap() <= p.v_stop_max);
    }

    #[test]
    fn speed_dip_is_not_an_event() {
        let p = DetectorParams::default();
        let dip = speed_series(|t| {
            if (2.0..4.0).contains(&t) {
                (8.0 - 1.5 * (t - 2.0), -1.5)
            } else if (4.0..6.0).contains(&t) {
                (5.0 + 1.5 * (t - 4.0), 1.5)
            } else {
                (8.0, 0.0)
            }
        });
        assert!(detect_linear(&dip, 1, &p).is_empty());
    }

    #[test]
    fn invalid_windows_never_trigger() {
        let p = DetectorParams::default();
        let mut s = turn_series(30.0, 2.0, 5.0, 5.0, 0.0);
        s.iter_mut().for_each(|f| f.window_valid = false);
        assert!(detect_turning(&s, 1, &p).is_empty());
    }

    #[test]
    fn score_examples() {
        let p = DetectorParams::default();
        let mut e = EventRecord {
            event_type: EventType::TurnLeft,
            track_id: 0,
            t_s: 0.0,
            t_e: 1.0,
            theta: Some(90.0),
            v_start: None,
            v_end: None,
            score: 0.0,
        };
        assert_eq!(score_event(&e, &p), 1.0);
        e.event_type = EventType::UTurn;
        e.theta = Some(180.0);
        assert_eq!(score_event(&e, &p), 1.0);
        e.theta = Some(-170.0);
        assert!((score_event(&e, &p) - 170.0 / 180.0).abs() < 1e-12);
        e.event_type = EventType::Start;
        e.theta = None;
        e.v_start = Some(0.0);
        assert_eq!(score_event(&e, &p), 1.0);
        e.v_start = Some(0.6);
        assert_eq!(score_event(&e, &p), 0.0);
    }

    #[test]
    fn right_angle_outscores_shallow_turn() {
        let p = DetectorParams::default();
        let mk = |theta: f64| EventRecord {
            event_type: EventType::TurnRight,
            track_id: 0,
            t_s: 0.0,
            t_e: 1.0,
            theta: Some(theta),
            v_start: None,
            v_end: None,
            score: 0.0,
        };
        assert!(score_event(&mk(-90.0), &p) > score_event(&mk(-(p.theta_min + 1e-6)), &p));
    }

    #[test]
    fn params_validation() {
        assert!(DetectorParams::default().validate().is_ok());
        let bad = DetectorParams {
            a_r_border: 2.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = DetectorParams {
            theta_max: 200.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn event_json_field_names() {
        let e = EventRecord {
            event_type: EventType::UTurn,
            track_id: 4,
            t_s: 1.5,
            t_e: 4.0,
            theta: Some(175.0),
            v_start: None,
            v_end: None,
            score: 0.5,
        };
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(
            json,
            r#"{"type":"u_turn","track_id":4,"t_start_s":1.5,"t_end_s":4.0,"theta_deg":175.0,"v_start_mps":null,"v_end_mps":null,"score":0.5}"#
        );
        let back: EventRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
    }

    proptest! {
        #[test]
        fn emitted_events_respect_machine_invariants(
            rates in prop::collection::vec(-40.0f64..40.0, 20..120),
            speeds in prop::collection::vec(0.0f64..6.0, 120),
        ) {
            let p = DetectorParams::default();
            let series: Vec<GroundState> = rates
                .iter()
                .enumerate()
                .map(|(i, &r)| state(i, 10.0, speeds[i], r * i as f64 / 10.0, r / 10.0, r))
                .collect();
            let trig = |s: &GroundState| s.a_theta.abs() >= p.a_theta_trigger && s.v_r >= p.v_turn_min;
            let border = |s: &GroundState| s.a_theta.abs() >= p.a_theta_border && s.v_r >= p.v_turn_min;
            let intervals = run_trigger_machine(&series, trig, border);
            for w in intervals.windows(2) {
                prop_assert!(w[0].1 < w[1].0);
            }
            for &(s, e) in &intervals {
                prop_assert!(series[s..=e].iter().all(border));
                prop_assert!(series[s..=e].iter().any(trig));
            }
            let events = detect_turning(&series, 0, &p);
            for ev in &events {
                prop_assert!(ev.t_e > ev.t_s);
                prop_assert!((0.0..=1.0).contains(&ev.score));
                prop_assert!(ev.theta.unwrap().abs() > p.theta_min);
            }
        }

        #[test]
        fn world_rotation_leaves_turn_angles_unchanged(rot in -720.0f64..720.0, rate in 15.0f64..60.0) {
            let p = DetectorParams::default();
            let base = detect_turning(&turn_series(rate, 2.0, 5.0, 5.0, 0.0), 1, &p);
            let rotated = detect_turning(&turn_series(rate, 2.0, 5.0, 5.0, rot), 1, &p);
            prop_assert_eq!(base.len(), rotated.len());
            for (a, b) in base.iter().zip(&rotated) {
                prop_assert!((a.theta.unwrap() - b.theta.unwrap()).abs() < 1e-9);
                prop_assert_eq!(a.event_type, b.event_type);
            }
        }
    }
}
