//! Per-frame 2D track records and the line-delimited track file format.
//!
//! CSV lines look like `frame,track_id,class,confidence,left,top,width,height`
//! with an optional trailing `contour=x0:y0;x1:y1;...` field. Lines starting
//! with `{` are read as JSON objects with the same field names, where the
//! contour is a list of `[x, y]` pairs. Blank lines and `#` comments are skipped.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Car,
    Bus,
    Truck,
}

impl FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "car" => Ok(Self::Car),
            "bus" => Ok(Self::Bus),
            "truck" => Ok(Self::Truck),
            other => Err(format!("unknown class label {other:?}")),
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Car => "car",
            Self::Bus => "bus",
            Self::Truck => "truck",
        })
    }
}

/// Axis-aligned image box in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Self {
        Self {
            left,
            top,
            width,
            height,
        }
    }

    pub fn from_corners(min: Point2<f64>, max: Point2<f64>) -> Self {
        Self::new(min.x, min.y, max.x - min.x, max.y - min.y)
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn bottom_middle(&self) -> Point2<f64> {
        Point2::new(self.left + self.width / 2.0, self.bottom())
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

pub type TrackId = i64;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackPoint {
    pub frame_index: u64,
    pub time_s: f64,
    pub track_id: TrackId,
    pub class_label: ClassLabel,
    pub confidence: f64,
    pub bbox: BBox,
    pub contour: Option<Vec<Point2<f64>>>,
}

#[derive(Debug, Deserialize)]
struct JsonRecord {
    frame: u64,
    track_id: TrackId,
    class: ClassLabel,
    confidence: f64,
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    #[serde(default)]
    contour: Option<Vec<[f64; 2]>>,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_field<T: FromStr>(line: usize, name: &str, raw: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    raw.trim()
        .parse()
        .map_err(|e| parse_error(line, format!("bad {name} {raw:?}: {e}")))
}

fn parse_contour(line: usize, raw: &str) -> Result<Vec<Point2<f64>>> {
    raw.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (x, y) = pair
                .split_once(':')
                .ok_or_else(|| parse_error(line, format!("contour vertex {pair:?} is not x:y")))?;
            Ok(Point2::new(
                parse_field(line, "contour x", x)?,
                parse_field(line, "contour y", y)?,
            ))
        })
        .collect()
}

type CsvRow = (u64, TrackId, ClassLabel, f64, BBox, Option<Vec<Point2<f64>>>);

fn parse_csv_line(line: usize, text: &str) -> Result<CsvRow> {
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() != 8 && fields.len() != 9 {
        return Err(parse_error(
            line,
            format!("expected 8 or 9 fields, found {}", fields.len()),
        ));
    }
    let contour = match fields.get(8) {
        Some(raw) => {
            let raw = raw
                .trim()
                .strip_prefix("contour=")
                .ok_or_else(|| parse_error(line, "ninth field must start with contour="))?;
            Some(parse_contour(line, raw)?)
        }
        None => None,
    };
    Ok((
        parse_field(line, "frame", fields[0])?,
        parse_field(line, "track_id", fields[1])?,
        fields[2].parse().map_err(|e: String| parse_error(line, e))?,
        parse_field(line, "confidence", fields[3])?,
        BBox::new(
            parse_field(line, "left", fields[4])?,
            parse_field(line, "top", fields[5])?,
            parse_field(line, "width", fields[6])?,
            parse_field(line, "height", fields[7])?,
        ),
        contour,
    ))
}

fn segments_intersect(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>, d: Point2<f64>) -> bool {
    let orient = |p: Point2<f64>, q: Point2<f64>, r: Point2<f64>| (q - p).perp(&(r - p));
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// True when no two non-adjacent edges of the closed polygon cross.
pub fn is_simple_polygon(poly: &[Point2<f64>]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(a, b, poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Parses a track file, returning points ordered by `(track_id, frame_index)`.
pub fn parse_tracks(text: &str, fps: f64) -> Result<Vec<TrackPoint>> {
    if !(fps > 0.0) {
        return Err(Error::Config("fps must be positive".into()));
    }
    let mut seen: BTreeMap<(TrackId, u64), (usize, TrackPoint)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (frame, track_id, class_label, confidence, bbox, contour) = if trimmed.starts_with('{') {
            let rec: JsonRecord = serde_json::from_str(trimmed).map_err(|e| parse_error(line, e.to_string()))?;
            let contour = rec.contour.map(|c| c.into_iter().map(Point2::from).collect());
            (
                rec.frame,
                rec.track_id,
                rec.class,
                rec.confidence,
                BBox::new(rec.left, rec.top, rec.width, rec.height),
                contour,
            )
        } else {
            parse_csv_line(line, trimmed)?
        };

        if !(bbox.width > 0.0 && bbox.height > 0.0) {
            return Err(parse_error(line, "box width and height must be positive"));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(parse_error(line, "confidence must lie in [0, 1]"));
        }
        if let Some(c) = &contour {
            if c.len() < 3 || !is_simple_polygon(c) {
                return Err(parse_error(
                    line,
                    "contour must be a simple polygon with at least 3 vertices",
                ));
            }
        }
        let point = TrackPoint {
            frame_index: frame,
            time_s: frame as f64 / fps,
            track_id,
            class_label,
            confidence,
            bbox,
            contour,
        };
        if let Some((first_line, _)) = seen.get(&(track_id, frame)) {
            return Err(Error::DuplicateRecord {
                track_id,
                frame_index: frame,
                first_line: *first_line,
                second_line: line,
            });
        }
        seen.insert((track_id, frame), (line, point));
    }
    Ok(seen.into_values().map(|(_, p)| p).collect())
}

/// Writes points as CSV track lines.
pub fn write_tracks_csv(points: &[TrackPoint]) -> String {
    let mut out = String::new();
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}",
            p.frame_index,
            p.track_id,
            p.class_label,
            p.confidence,
            p.bbox.left,
            p.bbox.top,
            p.bbox.width,
            p.bbox.height
        ));
        if let Some(c) = &p.contour {
            out.push_str(",contour=");
            let verts: Vec<String> = c.iter().map(|v| format!("{}:{}", v.x, v.y)).collect();
            out.push_str(&verts.join(";"));
        }
        out.push('\n');
    }
    out
}

/// Groups ordered points by track id.
pub fn group_by_track(points: &[TrackPoint]) -> BTreeMap<TrackId, Vec<TrackPoint>> {
    let mut tracks: BTreeMap<TrackId, Vec<TrackPoint>> = BTreeMap::new();
    for p in points {
        tracks.entry(p.track_id).or_default().push(p.clone());
    }
    for pts in tracks.values_mut() {
        pts.sort_by_key(|p| p.frame_index);
    }
    tracks
}

/// Splits one track into segments wherever consecutive frames are more than
/// `max_gap` frames apart.
pub fn split_on_gaps(points: Vec<TrackPoint>, max_gap: u64) -> Vec<Vec<TrackPoint>> {
    let mut segments: Vec<Vec<TrackPoint>> = Vec::new();
    for p in points {
        match segments.last_mut() {
            Some(seg) if p.frame_index - seg.last().unwrap().frame_index <= max_gap + 1 => seg.push(p),
            _ => segments.push(vec![p]),
        }
    }
    segments
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_csv_line() {
        let pts = parse_tracks("0,1,car,0.9,10,10,40,20\n", 30.0).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].bbox.width, 40.0);
        assert_eq!(pts[0].bbox, BBox::new(10.0, 10.0, 40.0, 20.0));
        assert_eq!(pts[0].class_label, ClassLabel::Car);
    }

    #[test]
    fn empty_input() {
        assert!(parse_tracks("", 30.0).unwrap().is_empty());
    }

    #[test]
    fn duplicate_names_both_lines() {
        let text = "7,3,car,0.9,0,0,10,10\n8,3,car,0.9,0,0,10,10\n7,3,bus,0.5,1,1,10,10\n";
        match parse_tracks(text, 30.0) {
            Err(Error::DuplicateRecord {
                track_id,
                frame_index,
                first_line,
                second_line,
            }) => {
                assert_eq!((track_id, frame_index, first_line, second_line), (3, 7, 1, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_dimensions_rejected_with_line_number() {
        let err = parse_tracks("0,1,car,0.9,0,0,10,10\n1,1,car,0.9,0,0,-4,10\n", 30.0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn malformed_line_reports_number() {
        let err = parse_tracks("0,1,car,0.9,0,0,10,10\n\n1,1,car,zero,0,0,10,10\n", 30.0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn output_ordered_by_track_then_frame() {
        let text = "5,2,car,1,0,0,1,1\n1,9,truck,1,0,0,1,1\n2,2,car,1,0,0,1,1\n";
        let pts = parse_tracks(text, 10.0).unwrap();
        let keys: Vec<_> = pts.iter().map(|p| (p.track_id, p.frame_index)).collect();
        assert_eq!(keys, vec![(2, 2), (2, 5), (9, 1)]);
        assert!((pts[1].time_s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn json_lines_and_contours() {
        let text = concat!(
            r#"{"frame":3,"track_id":4,"class":"bus","confidence":0.5,"left":1,"top":2,"width":3,"height":4,"contour":[[0,0],[4,0],[4,4]]}"#,
            "\n",
            "4,4,bus,0.5,1,2,3,4,contour=0:0;4:0;4:4;0:4\n"
        );
        let pts = parse_tracks(text, 30.0).unwrap();
        assert_eq!(pts[0].contour.as_ref().unwrap().len(), 3);
        assert_eq!(pts[1].contour.as_ref().unwrap().len(), 4);
    }

    #[test]
    fn self_intersecting_contour_rejected() {
        let err = parse_tracks("0,1,car,1,0,0,5,5,contour=0:0;4:4;4:0;0:4\n", 30.0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn csv_round_trip() {
        let text = "0,1,car,0.9,10.5,10,40,20,contour=0:0;4:0;4:4\n3,1,car,0.8,11,10,40,20\n";
        let pts = parse_tracks(text, 30.0).unwrap();
        assert_eq!(write_tracks_csv(&pts), text);
    }

    #[test]
    fn gaps_split_segments() {
        let text: String = [0u64, 1, 2, 14, 15, 26, 38]
            .iter()
            .map(|f| format!("{f},1,car,1,0,0,1,1\n"))
            .collect();
        let pts = parse_tracks(&text, 30.0).unwrap();
        let segs = split_on_gaps(pts, 10);
        let lens: Vec<_> = segs.iter().map(Vec::len).collect();
        // 15 -> 26 misses exactly 10 frames and stays joined.
        assert_eq!(lens, vec![3, 3, 1]);
    }
}
