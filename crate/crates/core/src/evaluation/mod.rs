//! Detection scoring: event matching, miss / false-alarm metrics, DET
//! curves and tracking recall.

pub mod hungarian;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EventRecord, EventType};
use crate::pipeline::tracks::{BBox, TrackId};

pub use hungarian::max_weight_assignment;

/// Default minimum temporal IoU for a detection to match an annotation.
pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthEvent {
    pub video_id: String,
    pub event_type: EventType,
    pub t_s: f64,
    pub t_e: f64,
    pub frames: BTreeMap<u64, BBox>,
}

#[derive(Debug, Deserialize, Serialize)]
struct AnnotationFrame {
    frame: u64,
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

#[derive(Debug, Deserialize, Serialize)]
struct AnnotationLine {
    video_id: String,
    #[serde(rename = "type")]
    event_type: EventType,
    t_start_s: f64,
    t_end_s: f64,
    #[serde(default)]
    frames: Vec<AnnotationFrame>,
}

impl GroundTruthEvent {
    pub fn to_json_line(&self) -> String {
        let line = AnnotationLine {
            video_id: self.video_id.clone(),
            event_type: self.event_type,
            t_start_s: self.t_s,
            t_end_s: self.t_e,
            frames: self
                .frames
                .iter()
                .map(|(&frame, b)| AnnotationFrame {
                    frame,
                    left: b.left,
                    top: b.top,
                    width: b.width,
                    height: b.height,
                })
                .collect(),
        };
        serde_json::to_string(&line).expect("plain struct serializes")
    }
}

/// Reads annotation JSON-lines.
pub fn parse_annotations(text: &str) -> Result<Vec<GroundTruthEvent>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: AnnotationLine = serde_json::from_str(raw).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if !(rec.t_end_s > rec.t_start_s) {
            return Err(Error::Parse {
                line,
                message: "t_end_s must exceed t_start_s".into(),
            });
        }
        let mut frames = BTreeMap::new();
        for f in rec.frames {
            if frames
                .insert(f.frame, BBox::new(f.left, f.top, f.width, f.height))
                .is_some()
            {
                return Err(Error::Parse {
                    line,
                    message: format!("frame {} annotated twice", f.frame),
                });
            }
        }
        out.push(GroundTruthEvent {
            video_id: rec.video_id,
            event_type: rec.event_type,
            t_s: rec.t_start_s,
            t_e: rec.t_end_s,
            frames,
        });
    }
    Ok(out)
}

/// A system detection tagged with the video it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub video_id: String,
    pub event: EventRecord,
}

/// Frame timeline of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoInfo {
    pub video_id: String,
    pub num_frames: u64,
    pub fps: f64,
}

impl VideoInfo {
    pub fn minutes(&self) -> f64 {
        self.num_frames as f64 / self.fps / 60.0
    }
}

pub fn object_iou(a: &BBox, b: &BBox) -> f64 {
    let w = (a.right().min(b.right()) - a.left.max(b.left)).max(0.0);
    let h = (a.bottom().min(b.bottom()) - a.top.max(b.top)).max(0.0);
    let inter = w * h;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Mean per-frame box IoU over the annotated frames; frames the track does
/// not cover count as zero.
pub fn event_iou(track: &BTreeMap<u64, BBox>, gt: &GroundTruthEvent) -> f64 {
    if gt.frames.is_empty() {
        return 0.0;
    }
    let sum: f64 = gt
        .frames
        .iter()
        .map(|(f, b)| track.get(f).map_or(0.0, |t| object_iou(t, b)))
        .sum();
    sum / gt.frames.len() as f64
}

/// Intersection over union of the two time spans.
pub fn temporal_iou(det: &EventRecord, gt: &GroundTruthEvent) -> f64 {
    let inter = (det.t_e.min(gt.t_e) - det.t_s.max(gt.t_s)).max(0.0);
    let union = (det.t_e.max(gt.t_e) - det.t_s.min(gt.t_s)).max(0.0);
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Matching {
    /// `(detection index, gt index, overlap)`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub missed: Vec<usize>,
    pub false_alarms: Vec<usize>,
}

/// One-to-one matching within each `(type, video)` group maximizing total
/// overlap; pairs below `threshold` stay unmatched.
pub fn match_events(
    detections: &[Detection],
    gts: &[GroundTruthEvent],
    overlap: impl Fn(&EventRecord, &GroundTruthEvent) -> f64,
    threshold: f64,
) -> Matching {
    type Group = (Vec<usize>, Vec<usize>);
    let mut groups: BTreeMap<(EventType, &str), Group> = BTreeMap::new();
    for (i, d) in detections.iter().enumerate() {
        groups.entry((d.event.event_type, &d.video_id)).or_default().0.push(i);
    }
    for (j, g) in gts.iter().enumerate() {
        groups.entry((g.event_type, &g.video_id)).or_default().1.push(j);
    }
    let mut matching = Matching::default();
    for (dets, gt_idx) in groups.values() {
        let weights: Vec<Vec<f64>> = dets
            .iter()
            .map(|&i| {
                gt_idx
                    .iter()
                    .map(|&j| {
                        let o = overlap(&detections[i].event, &gts[j]);
                        if o >= threshold {
                            o
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let assignment = if gt_idx.is_empty() {
            vec![None; dets.len()]
        } else {
            max_weight_assignment(&weights)
        };
        let mut gt_used = vec![false; gt_idx.len()];
        for (r, a) in assignment.iter().enumerate() {
            match a {
                Some(c) if weights[r][*c] >= threshold && weights[r][*c] > 0.0 => {
                    gt_used[*c] = true;
                    matching.pairs.push((dets[r], gt_idx[*c], weights[r][*c]));
                }
                _ => matching.false_alarms.push(dets[r]),
            }
        }
        matching
            .missed
            .extend(gt_idx.iter().zip(&gt_used).filter(|(_, u)| !**u).map(|(j, _)| *j));
    }
    matching.pairs.sort_by_key(|p| p.0);
    matching.missed.sort_unstable();
    matching.false_alarms.sort_unstable();
    matching
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeMetrics {
    pub n_true: usize,
    pub n_detections: usize,
    pub n_matched: usize,
    pub n_missed: usize,
    pub n_false_alarms: usize,
    pub p_miss: f64,
    /// False alarms per minute.
    pub r_fa: f64,
    /// `None` when every frame carries a true event of this type.
    pub t_fa: Option<f64>,
    /// No ground-truth instances; `p_miss` is reported as 0.
    pub zero_support: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetSample {
    pub threshold: f64,
    pub p_miss: f64,
    pub r_fa: f64,
    pub t_fa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_type: BTreeMap<EventType, TypeMetrics>,
    /// Mean `p_miss` over types with ground-truth support.
    pub mean_p_miss: Option<f64>,
    #[serde(default)]
    pub det: BTreeMap<EventType, Vec<DetSample>>,
}

impl MetricsReport {
    /// DET samples as CSV: `type,threshold,p_miss,r_fa,t_fa`.
    pub fn det_csv(&self) -> String {
        let mut out = String::from("type,threshold,p_miss,r_fa,t_fa\n");
        for (ty, samples) in &self.det {
            for s in samples {
                let t_fa = s.t_fa.map(|v| v.to_string()).unwrap_or_default();
                out.push_str(&format!("{ty},{},{},{},{}\n", s.threshold, s.p_miss, s.r_fa, t_fa));
            }
        }
        out
    }
}

fn frame_span(t_s: f64, t_e: f64, fps: f64, num_frames: u64) -> Option<(u64, u64)> {
    let first = (t_s * fps - 1e-9).ceil().max(0.0);
    let last = (t_e * fps + 1e-9).floor();
    if last < first || num_frames == 0 {
        return None;
    }
    let last = last.min((num_frames - 1) as f64);
    (first <= last).then_some((first as u64, last as u64))
}

fn activity(spans: impl Iterator<Item = (f64, f64)>, video: &VideoInfo) -> Vec<i64> {
    let n = video.num_frames as usize;
    let mut diff = vec![0i64; n + 1];
    for (s, e) in spans {
        if let Some((a, b)) = frame_span(s, e, video.fps, video.num_frames) {
            diff[a as usize] += 1;
            diff[b as usize + 1] -= 1;
        }
    }
    let mut acc = 0;
    diff[..n]
        .iter()
        .map(|d| {
            acc += d;
            acc
        })
        .collect()
}

/// Per-type metrics from a matching.
pub fn compute_metrics(
    matching: &Matching,
    detections: &[Detection],
    gts: &[GroundTruthEvent],
    videos: &[VideoInfo],
) -> MetricsReport {
    let minutes: f64 = videos.iter().map(VideoInfo::minutes).sum();
    let mut per_type = BTreeMap::new();
    for ty in EventType::ALL {
        let n_true = gts.iter().filter(|g| g.event_type == ty).count();
        let n_detections = detections.iter().filter(|d| d.event.event_type == ty).count();
        let n_matched = matching.pairs.iter().filter(|p| gts[p.1].event_type == ty).count();
        let n_missed = matching.missed.iter().filter(|&&j| gts[j].event_type == ty).count();
        let n_false_alarms = matching
            .false_alarms
            .iter()
            .filter(|&&i| detections[i].event.event_type == ty)
            .count();
        let mut t_fa_excess = 0i64;
        let mut t_fa_empty = 0u64;
        for video in videos {
            let d = activity(
                detections
                    .iter()
                    .filter(|d| d.event.event_type == ty && d.video_id == video.video_id)
                    .map(|d| (d.event.t_s, d.event.t_e)),
                video,
            );
            let g = activity(
                gts.iter()
                    .filter(|g| g.event_type == ty && g.video_id == video.video_id)
                    .map(|g| (g.t_s, g.t_e)),
                video,
            );
            t_fa_excess += d.iter().zip(&g).map(|(d, g)| (d - g).max(0)).sum::<i64>();
            t_fa_empty += g.iter().filter(|&&g| g == 0).count() as u64;
        }
        per_type.insert(
            ty,
            TypeMetrics {
                n_true,
                n_detections,
                n_matched,
                n_missed,
                n_false_alarms,
                p_miss: if n_true == 0 {
                    0.0
                } else {
                    n_missed as f64 / n_true as f64
                },
                r_fa: if minutes > 0.0 {
                    n_false_alarms as f64 / minutes
                } else {
                    0.0
                },
                t_fa: (t_fa_empty > 0).then(|| t_fa_excess as f64 / t_fa_empty as f64),
                zero_support: n_true == 0,
            },
        );
    }
    let supported: Vec<f64> = per_type
        .values()
        .filter(|m| !m.zero_support)
        .map(|m| m.p_miss)
        .collect();
    let mean_p_miss = (!supported.is_empty()).then(|| supported.iter().sum::<f64>() / supported.len() as f64);
    MetricsReport {
        per_type,
        mean_p_miss,
        det: BTreeMap::new(),
    }
}

/// Matching and metrics using detections scoring at least `threshold`.
pub fn evaluate_at_threshold(
    detections: &[Detection],
    gts: &[GroundTruthEvent],
    videos: &[VideoInfo],
    match_threshold: f64,
    score_threshold: f64,
) -> MetricsReport {
    let kept: Vec<Detection> = detections
        .iter()
        .filter(|d| d.event.score >= score_threshold)
        .cloned()
        .collect();
    let matching = match_events(&kept, gts, temporal_iou, match_threshold);
    compute_metrics(&matching, &kept, gts, videos)
}

/// DET samples per type, sweeping the distinct detection scores from high to low.
pub fn det_curve(
    detections: &[Detection],
    gts: &[GroundTruthEvent],
    videos: &[VideoInfo],
    match_threshold: f64,
) -> BTreeMap<EventType, Vec<DetSample>> {
    let mut curves = BTreeMap::new();
    for ty in EventType::ALL {
        let dets: Vec<Detection> = detections
            .iter()
            .filter(|d| d.event.event_type == ty)
            .cloned()
            .collect();
        let type_gts: Vec<GroundTruthEvent> = gts.iter().filter(|g| g.event_type == ty).cloned().collect();
        let mut scores: Vec<f64> = dets.iter().map(|d| d.event.score).collect();
        scores.sort_by(|a, b| b.total_cmp(a));
        scores.dedup();
        let samples = scores
            .into_iter()
            .map(|threshold| {
                let report = evaluate_at_threshold(&dets, &type_gts, videos, match_threshold, threshold);
                let m = &report.per_type[&ty];
                DetSample {
                    threshold,
                    p_miss: m.p_miss,
                    r_fa: m.r_fa,
                    t_fa: m.t_fa,
                }
            })
            .collect();
        curves.insert(ty, samples);
    }
    curves
}

/// Full report: metrics on all detections plus DET curves.
pub fn score(
    detections: &[Detection],
    gts: &[GroundTruthEvent],
    videos: &[VideoInfo],
    match_threshold: f64,
) -> MetricsReport {
    let matching = match_events(detections, gts, temporal_iou, match_threshold);
    let mut report = compute_metrics(&matching, detections, gts, videos);
    report.det = det_curve(detections, gts, videos, match_threshold);
    report
}

/// Per-frame boxes of each track, keyed by `(video_id, track_id)`.
pub type TrackBoxes = BTreeMap<(String, TrackId), BTreeMap<u64, BBox>>;

/// Fraction of annotated events whose matched track reaches each event-IoU
/// threshold, per event type (types without annotations are omitted).
pub fn recall_table(
    tracks: &TrackBoxes,
    gts: &[GroundTruthEvent],
    thresholds: &[f64],
) -> BTreeMap<EventType, Vec<f64>> {
    let mut groups: BTreeMap<(EventType, &str), Vec<usize>> = BTreeMap::new();
    for (j, g) in gts.iter().enumerate() {
        groups.entry((g.event_type, &g.video_id)).or_default().push(j);
    }
    let mut best_iou = vec![0.0; gts.len()];
    for ((_, video), gt_idx) in &groups {
        let candidates: Vec<&BTreeMap<u64, BBox>> = tracks
            .iter()
            .filter(|((v, _), _)| v == video)
            .map(|(_, boxes)| boxes)
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let weights: Vec<Vec<f64>> = gt_idx
            .iter()
            .map(|&j| candidates.iter().map(|t| event_iou(t, &gts[j])).collect())
            .collect();
        for (r, a) in max_weight_assignment(&weights).into_iter().enumerate() {
            if let Some(c) = a {
                best_iou[gt_idx[r]] = weights[r][c];
            }
        }
    }
    let mut table = BTreeMap::new();
    for ty in EventType::ALL {
        let ious: Vec<f64> = gts
            .iter()
            .zip(&best_iou)
            .filter(|(g, _)| g.event_type == ty)
            .map(|(_, &iou)| iou)
            .collect();
        if ious.is_empty() {
            continue;
        }
        let row = thresholds
            .iter()
            .map(|&th| ious.iter().filter(|&&x| x >= th).count() as f64 / ious.len() as f64)
            .collect();
        table.insert(ty, row);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(ty: EventType, t_s: f64, t_e: f64, score: f64) -> Detection {
        Detection {
            video_id: "v".into(),
            event: EventRecord {
                event_type: ty,
                track_id: 0,
                t_s,
                t_e,
                theta: None,
                v_start: None,
                v_end: None,
                score,
            },
        }
    }

    fn gt(ty: EventType, t_s: f64, t_e: f64) -> GroundTruthEvent {
        GroundTruthEvent {
            video_id: "v".into(),
            event_type: ty,
            t_s,
            t_e,
            frames: BTreeMap::new(),
        }
    }

    fn video(minutes: f64, fps: f64) -> VideoInfo {
        VideoInfo {
            video_id: "v".into(),
            num_frames: (minutes * 60.0 * fps).round() as u64,
            fps,
        }
    }

    #[test]
    fn object_iou_examples() {
        let a = BBox::new(0.0, 0.0, 2.0, 2.0);
        assert_eq!(object_iou(&a, &a), 1.0);
        assert_eq!(object_iou(&a, &BBox::new(5.0, 5.0, 1.0, 1.0)), 0.0);
        assert!((object_iou(&a, &BBox::new(1.0, 0.0, 2.0, 2.0)) - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn event_iou_examples() {
        let boxes: BTreeMap<u64, BBox> = (0..4).map(|f| (f, BBox::new(0.0, 0.0, 2.0, 2.0))).collect();
        let mut g = gt(EventType::Start, 0.0, 1.0);
        g.frames = boxes.clone();
        assert_eq!(event_iou(&boxes, &g), 1.0);
        let half: BTreeMap<u64, BBox> = boxes.iter().filter(|(f, _)| **f < 2).map(|(f, b)| (*f, *b)).collect();
        assert_eq!(event_iou(&half, &g), 0.5);

        // IoUs {1.0, 0.5, missing}.
        let mut g3 = gt(EventType::Start, 0.0, 1.0);
        g3.frames = (0..3).map(|f| (f, BBox::new(0.0, 0.0, 2.0, 2.0))).collect();
        let mut t3 = BTreeMap::new();
        t3.insert(0, BBox::new(0.0, 0.0, 2.0, 2.0));
        t3.insert(1, BBox::new(0.0, 0.0, 2.0, 1.0));
        assert!((event_iou(&t3, &g3) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn matching_examples() {
        let g = vec![gt(EventType::TurnLeft, 0.0, 10.0)];
        let one = vec![det(EventType::TurnLeft, 0.0, 8.0, 1.0)];
        let m = match_events(&one, &g, temporal_iou, 0.2);
        assert_eq!(m.pairs.len(), 1);
        assert!((m.pairs[0].2 - 0.8).abs() < 1e-12);

        let two = vec![
            det(EventType::TurnLeft, 0.0, 8.0, 1.0),
            det(EventType::TurnLeft, 1.0, 9.0, 1.0),
        ];
        let m = match_events(&two, &g, temporal_iou, 0.2);
        assert_eq!((m.pairs.len(), m.false_alarms.len(), m.missed.len()), (1, 1, 0));

        let wrong_type = vec![det(EventType::TurnRight, 0.0, 10.0, 1.0)];
        let m = match_events(&wrong_type, &g, temporal_iou, 0.2);
        assert_eq!((m.pairs.len(), m.false_alarms.len(), m.missed.len()), (0, 1, 1));

        let weak = vec![det(EventType::TurnLeft, 9.0, 12.0, 1.0)];
        let m = match_events(&weak, &g, temporal_iou, 0.2);
        assert_eq!((m.pairs.len(), m.false_alarms.len(), m.missed.len()), (0, 1, 1));
    }

    #[test]
    fn three_by_three_overlap_matrix_matches_diagonal() {
        let table = [[0.9, 0.1, 0.0], [0.2, 0.8, 0.0], [0.0, 0.0, 0.7]];
        let dets: Vec<Detection> = (0..3)
            .map(|i| det(EventType::Stop, i as f64, i as f64 + 1.0, 1.0))
            .collect();
        let gts: Vec<GroundTruthEvent> = (0..3)
            .map(|j| gt(EventType::Stop, 10.0 + j as f64, 11.0 + j as f64))
            .collect();
        let overlap = |d: &EventRecord, g: &GroundTruthEvent| table[d.t_s as usize][(g.t_s - 10.0) as usize];
        let m = match_events(&dets, &gts, overlap, 0.05);
        let pairs: Vec<(usize, usize)> = m.pairs.iter().map(|p| (p.0, p.1)).collect();
        assert_eq!(pairs, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn metrics_count_example() {
        let gts = vec![gt(EventType::Start, 5.0, 8.0), gt(EventType::Start, 30.0, 33.0)];
        let dets = vec![
            det(EventType::Start, 5.0, 8.0, 1.0),
            det(EventType::Start, 50.0, 52.0, 1.0),
        ];
        let videos = vec![video(1.0, 10.0)];
        let m = match_events(&dets, &gts, temporal_iou, 0.2);
        let r = compute_metrics(&m, &dets, &gts, &videos);
        let s = &r.per_type[&EventType::Start];
        assert_eq!(s.p_miss, 0.5);
        assert_eq!(s.r_fa, 1.0);
        assert!(r.per_type[&EventType::Stop].zero_support);
        assert_eq!(r.mean_p_miss, Some(0.5));
    }

    #[test]
    fn no_detections() {
        let gts = vec![gt(EventType::Stop, 1.0, 2.0)];
        let videos = vec![video(1.0, 10.0)];
        let m = match_events(&[], &gts, temporal_iou, 0.2);
        let s = compute_metrics(&m, &[], &gts, &videos).per_type[&EventType::Stop].clone();
        assert_eq!((s.p_miss, s.r_fa, s.t_fa), (1.0, 0.0, Some(0.0)));
    }

    #[test]
    fn time_based_false_alarm_example() {
        // Ten frames at 1 fps, one false detection on frames 3..=5.
        let videos = vec![VideoInfo {
            video_id: "v".into(),
            num_frames: 10,
            fps: 1.0,
        }];
        let dets = vec![det(EventType::UTurn, 3.0, 5.0, 0.5)];
        let m = match_events(&dets, &[], temporal_iou, 0.2);
        let r = compute_metrics(&m, &dets, &[], &videos);
        assert_eq!(r.per_type[&EventType::UTurn].t_fa, Some(0.3));
    }

    #[test]
    fn t_fa_absent_without_event_free_frames() {
        let videos = vec![VideoInfo {
            video_id: "v".into(),
            num_frames: 5,
            fps: 1.0,
        }];
        let gts = vec![gt(EventType::Stop, 0.0, 4.0)];
        let r = evaluate_at_threshold(&[], &gts, &videos, 0.2, 0.0);
        assert_eq!(r.per_type[&EventType::Stop].t_fa, None);
    }

    #[test]
    fn det_curve_is_monotone_on_two_points() {
        let gts = vec![gt(EventType::TurnLeft, 10.0, 14.0)];
        let dets = vec![
            det(EventType::TurnLeft, 10.0, 14.0, 0.9),
            det(EventType::TurnLeft, 30.0, 33.0, 0.4),
        ];
        let videos = vec![video(1.0, 10.0)];
        let curve = &det_curve(&dets, &gts, &videos, 0.2)[&EventType::TurnLeft];
        assert_eq!(curve.len(), 2);
        assert_eq!((curve[0].threshold, curve[0].p_miss, curve[0].r_fa), (0.9, 0.0, 0.0));
        assert_eq!((curve[1].threshold, curve[1].p_miss, curve[1].r_fa), (0.4, 0.0, 1.0));
        let above = evaluate_at_threshold(&dets, &gts, &videos, 0.2, 0.95);
        assert_eq!(
            (
                above.per_type[&EventType::TurnLeft].p_miss,
                above.per_type[&EventType::TurnLeft].r_fa
            ),
            (1.0, 0.0)
        );
        let below = evaluate_at_threshold(&dets, &gts, &videos, 0.2, 0.0);
        let full = compute_metrics(&match_events(&dets, &gts, temporal_iou, 0.2), &dets, &gts, &videos);
        assert_eq!(below.per_type, full.per_type);
    }

    #[test]
    fn recall_table_examples() {
        let mk_gt = |frames: &[(u64, BBox)]| {
            let mut g = gt(EventType::TurnRight, 0.0, 1.0);
            g.frames = frames.iter().cloned().collect();
            g
        };
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        let g = mk_gt(&[(0, b), (1, b)]);
        let mut tracks = TrackBoxes::new();
        tracks.insert(("v".into(), 1), [(0, b), (1, b)].into_iter().collect());
        let th = [0.0, 0.1, 0.2, 0.3];
        assert_eq!(
            recall_table(&tracks, std::slice::from_ref(&g), &th)[&EventType::TurnRight],
            vec![1.0; 4]
        );
        assert_eq!(
            recall_table(&TrackBoxes::new(), std::slice::from_ref(&g), &[0.0, 0.5])[&EventType::TurnRight],
            vec![1.0, 0.0]
        );

        // Two annotations whose best tracks reach event IoU 0.35 and 0.15.
        let g1 = mk_gt(&[(0, b), (1, b)]);
        let g2 = mk_gt(&[(10, b), (11, b)]);
        let mut tracks = TrackBoxes::new();
        let partial = |iou: f64| BBox::new(0.0, 0.0, 10.0, 10.0 * iou);
        tracks.insert(("v".into(), 1), [(0, partial(0.7))].into_iter().collect());
        tracks.insert(("v".into(), 2), [(10, partial(0.3))].into_iter().collect());
        let row = &recall_table(&tracks, &[g1, g2], &th)[&EventType::TurnRight];
        assert_eq!(row, &vec![1.0, 1.0, 0.5, 0.5]);
    }

    #[test]
    fn annotations_round_trip() {
        let text = r#"{"video_id":"a","type":"stop","t_start_s":1.0,"t_end_s":2.5,"frames":[{"frame":30,"left":1.0,"top":2.0,"width":3.0,"height":4.0}]}"#;
        let gts = parse_annotations(text).unwrap();
        assert_eq!(gts[0].frames[&30], BBox::new(1.0, 2.0, 3.0, 4.0));
        assert_eq!(gts[0].to_json_line(), text);
        assert!(parse_annotations(r#"{"video_id":"a","type":"stop","t_start_s":3.0,"t_end_s":2.5}"#).is_err());
    }
}
