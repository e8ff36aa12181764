//! Ground-plane observations: velocity projection, 3D boxes from contour
//! tangents, and vehicle footprints.

use nalgebra::{Point2, Point3, SMatrix, SVector, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::calibration::{CameraModel, VanishingPoint};
use crate::error::{Error, Result};
use crate::pipeline::tracks::{BBox, TrackId};
use crate::smoothing::SmoothedTrackPoint;

/// Convex ground quadrangle in meters, vertices counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrangle {
    vertices: [Point2<f64>; 4],
}

fn cross(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

fn signed_area(pts: &[Point2<f64>]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| cross(pts[i].coords, pts[(i + 1) % n].coords))
        .sum::<f64>()
        / 2.0
}

impl Quadrangle {
    /// Orders the four points counterclockwise around their centroid and
    /// checks convexity and nonzero area.
    pub fn new(points: [Point2<f64>; 4]) -> Result<Self> {
        let c = points.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords) / 4.0;
        let mut vertices = points;
        vertices.sort_by(|a, b| {
            let ta = (a.y - c.y).atan2(a.x - c.x);
            let tb = (b.y - c.y).atan2(b.x - c.x);
            ta.total_cmp(&tb)
        });
        let q = Self { vertices };
        let scale = q.edges().map(|(a, b)| (b - a).norm()).into_iter().fold(0.0, f64::max);
        if !(q.area() > 1e-12 * scale * scale) || !scale.is_finite() {
            return Err(Error::Degenerate("quadrangle has zero area".into()));
        }
        for i in 0..4 {
            let a = q.vertices[i];
            let b = q.vertices[(i + 1) % 4];
            let c = q.vertices[(i + 2) % 4];
            if cross(b - a, c - b) < -1e-9 * scale * scale {
                return Err(Error::Degenerate("quadrangle is not convex".into()));
            }
        }
        Ok(q)
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new([
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
    }

    /// Rectangle centered at `center` with its length along `heading`.
    pub fn oriented(center: Point2<f64>, heading: Vector2<f64>, length: f64, width: f64) -> Result<Self> {
        let d = heading.normalize() * (length / 2.0);
        let n = Vector2::new(-d.y, d.x).normalize() * (width / 2.0);
        Self::new([center + d + n, center - d + n, center - d - n, center + d - n])
    }

    pub fn vertices(&self) -> &[Point2<f64>; 4] {
        &self.vertices
    }

    pub fn edges(&self) -> [(Point2<f64>, Point2<f64>); 4] {
        let v = &self.vertices;
        [(v[0], v[1]), (v[1], v[2]), (v[2], v[3]), (v[3], v[0])]
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> Point2<f64> {
        // Area-weighted centroid of the polygon.
        let v = &self.vertices;
        let a = self.area();
        let mut c = Vector2::zeros();
        for i in 0..4 {
            let (p, q) = (v[i].coords, v[(i + 1) % 4].coords);
            c += (p + q) * cross(p, q);
        }
        Point2::from(c / (6.0 * a))
    }

    /// Largest distance from the centroid to a vertex.
    pub fn circumradius(&self) -> f64 {
        let c = self.centroid();
        self.vertices.iter().map(|v| (v - c).norm()).fold(0.0, f64::max)
    }

    pub fn translated(&self, offset: Vector2<f64>) -> Self {
        Self {
            vertices: self.vertices.map(|v| v + offset),
        }
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        self.edges().iter().all(|(a, b)| cross(b - a, p - a) >= 0.0)
    }
}

/// Convex hull (counterclockwise, no collinear points) by monotone chain.
pub fn convex_hull(points: &[Point2<f64>]) -> Vec<Point2<f64>> {
    let mut pts: Vec<Point2<f64>> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point2<f64>> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2<f64>>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 1] - hull[hull.len() - 2], p - hull[hull.len() - 1]) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Ground velocity (m/s) of an image point moving at `v_img` px/s, by a
/// one-frame finite difference of ground reprojections.
pub fn ground_velocity(camera: &CameraModel, p: Point2<f64>, v_img: Vector2<f64>, dt: f64) -> Result<Vector2<f64>> {
    if v_img == Vector2::zeros() {
        // Still require a valid ground point.
        camera.reproject_image_to_ground(p)?;
        return Ok(Vector2::zeros());
    }
    let g0 = camera.reproject_image_to_ground(p)?;
    let g1 = camera.reproject_image_to_ground(p + v_img * dt)?;
    Ok((g1 - g0) / dt)
}

/// The two lines through a vanishing point that touch the contour, as the
/// indices of the touching vertices (first: smallest signed angle or offset).
/// `None` when the vanishing point lies inside the contour's angular span.
pub fn contour_tangents(vp: &VanishingPoint, contour: &[Point2<f64>]) -> Option<(usize, usize)> {
    let key: Vec<f64> = match vp.finite() {
        Some(q) => {
            let c = contour.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords) / contour.len() as f64;
            let reference = c - q.coords;
            if reference.norm() == 0.0 {
                return None;
            }
            let angles: Vec<f64> = contour
                .iter()
                .map(|p| {
                    let d = p - q;
                    cross(reference, d).atan2(reference.dot(&d))
                })
                .collect();
            let lo = angles.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = angles.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo >= std::f64::consts::PI * 0.999 || contour.contains(&q) {
                return None;
            }
            angles
        }
        None => {
            let dir = vp.direction();
            contour.iter().map(|p| cross(dir, p.coords)).collect()
        }
    };
    let mut lo = 0;
    let mut hi = 0;
    for (i, k) in key.iter().enumerate() {
        if *k < key[lo] {
            lo = i;
        }
        if *k > key[hi] {
            hi = i;
        }
    }
    if lo == hi {
        return None;
    }
    Some((lo, hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Box3d {
    /// Image corners: the four bottom corners followed by the four top
    /// corners in the same order as the footprint vertices they stand on.
    pub image_corners: Vec<Point2<f64>>,
    pub footprint: Quadrangle,
    pub height_m: f64,
    /// Extents along the motion direction (length) and across it (width).
    pub length_m: f64,
    pub width_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoxEstimate {
    Tangent(Box3d),
    /// Tangent construction was ill-conditioned; carries the box-bottom fallback.
    Fallback(Quadrangle),
}

/// Builds a 3D box from the contour tangents through the three vanishing
/// points of the motion direction, its ground perpendicular and the vertical.
///
/// Each tangent line back-projects to a plane through the camera center that
/// supports the box at one corner. Writing the box as
/// `origin + s·d + n·d⊥ + z·up` with `s ∈ [s0, s1]`, `n ∈ [n0, n1]`,
/// `z ∈ [0, H]`, the supporting corner of each plane follows from the signs
/// of its normal, so each tangent gives one linear equation in
/// `(s0, s1, n0, n1, H)`. The six equations are solved in least squares.
pub fn build_3d_bbox(
    camera: &CameraModel,
    contour: &[Point2<f64>],
    motion_dir: Vector2<f64>,
    fallback_bbox: &BBox,
    default_width_m: f64,
) -> Result<BoxEstimate> {
    if contour.len() < 3 || signed_area(contour).abs() < 1e-9 {
        return Err(Error::Degenerate("contour has zero area".into()));
    }
    let fallback = || -> Result<BoxEstimate> {
        Ok(BoxEstimate::Fallback(fallback_footprint(
            camera,
            fallback_bbox,
            default_width_m,
        )?))
    };
    let d = motion_dir.normalize();
    let n = Vector2::new(-d.y, d.x);
    let vps = [
        camera.vanishing_point_of_ground_direction(&d),
        camera.vanishing_point_of_ground_direction(&n),
        camera.vertical_vanishing_point(),
    ];

    let lowest = contour.iter().max_by(|a, b| a.y.total_cmp(&b.y)).expect("nonempty");
    let origin = match camera.reproject_image_to_ground(*lowest) {
        Ok(o) => o,
        Err(_) => return fallback(),
    };
    let centroid = Point2::from(contour.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords) / contour.len() as f64);
    let p = camera.p();
    let scale = camera.scale();

    // Rows: [s0, s1, n0, n1, H] coefficients; rhs: negated constant.
    let mut a = SMatrix::<f64, 6, 5>::zeros();
    let mut b = SVector::<f64, 6>::zeros();
    let mut row = 0;
    for vp in &vps {
        let Some((i, j)) = contour_tangents(vp, contour) else {
            return fallback();
        };
        for &k in &[i, j] {
            let q = contour[k];
            let mut line = vp.0.cross(&Vector3::new(q.x, q.y, 1.0));
            if line.dot(&Vector3::new(centroid.x, centroid.y, 1.0)) < 0.0 {
                line = -line;
            }
            let plane: Vector4<f64> = p.transpose() * line;
            let m = Vector3::new(plane.x, plane.y, plane.z);
            let norm = m.norm();
            if norm == 0.0 {
                return fallback();
            }
            let (m, offset) = (m / norm, plane.w * scale / norm);
            let alpha = m.x * d.x + m.y * d.y;
            let beta = m.x * n.x + m.y * n.y;
            let gamma = m.z;
            let c = m.x * origin.x + m.y * origin.y + offset;
            let eps = 1e-9;
            if alpha > eps {
                a[(row, 0)] = alpha;
            } else if alpha < -eps {
                a[(row, 1)] = alpha;
            }
            if beta > eps {
                a[(row, 2)] = beta;
            } else if beta < -eps {
                a[(row, 3)] = beta;
            }
            if gamma < -eps {
                a[(row, 4)] = gamma;
            }
            b[row] = -c;
            row += 1;
        }
    }

    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let (smin, smax) = (sv.min(), sv.max());
    if !(smin > 1e-6 * smax) {
        return fallback();
    }
    let Ok(x) = svd.solve(&b, 1e-12) else {
        return fallback();
    };
    let (s0, s1, n0, n1, height) = (x[0], x[1], x[2], x[3], x[4]);
    if !(s1 > s0 && n1 > n0 && height > 0.0) {
        return fallback();
    }

    let corner = |s: f64, t: f64| origin + d * s + n * t;
    let bottom = [corner(s0, n0), corner(s1, n0), corner(s1, n1), corner(s0, n1)];
    let footprint = Quadrangle::new(bottom)?;
    let mut image_corners = Vec::with_capacity(8);
    for z in [0.0, height] {
        for g in footprint.vertices() {
            image_corners.push(camera.project_world_to_image(&Point3::new(g.x, g.y, z))?);
        }
    }
    Ok(BoxEstimate::Tangent(Box3d {
        image_corners,
        footprint,
        height_m: height,
        length_m: s1 - s0,
        width_m: n1 - n0,
    }))
}

/// Footprint from the bottom edge of the 2D box, swept away from the camera
/// by the default vehicle width.
pub fn fallback_footprint(camera: &CameraModel, bbox: &BBox, width_m: f64) -> Result<Quadrangle> {
    let g1 = camera.reproject_image_to_ground(Point2::new(bbox.left, bbox.bottom()))?;
    let g2 = camera.reproject_image_to_ground(Point2::new(bbox.right(), bbox.bottom()))?;
    let along = g2 - g1;
    if along.norm() == 0.0 {
        return Err(Error::Degenerate("box bottom edge has zero ground length".into()));
    }
    let mut away = Vector2::new(-along.y, along.x).normalize();
    let mid = Point2::from((g1.coords + g2.coords) / 2.0);
    if away.dot(&(mid - camera.ground_nadir())) < 0.0 {
        away = -away;
    }
    Quadrangle::new([g1, g2, g2 + away * width_m, g1 + away * width_m])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    /// Ground speed (m/s) below which orientation comes from history.
    pub v_orient_min: f64,
    pub default_vehicle_width_m: f64,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            v_orient_min: 0.3,
            default_vehicle_width_m: 1.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundObservation {
    pub track_id: TrackId,
    pub frame_index: u64,
    pub time_s: f64,
    /// Footprint center, meters.
    pub position: Point2<f64>,
    pub ground_velocity: Vector2<f64>,
    pub footprint: Quadrangle,
    /// Unit heading used to build the footprint, if any is known.
    pub orientation: Option<Vector2<f64>>,
    /// Orientation measured at this frame rather than carried over.
    pub orientation_valid: bool,
    /// Footprint came from the box-bottom fallback.
    pub fallback_footprint: bool,
}

/// Projects one smoothed track state to the ground.
pub fn make_observation(
    camera: &CameraModel,
    track_id: TrackId,
    s: &SmoothedTrackPoint,
    contour: Option<&[Point2<f64>]>,
    prev_orientation: Option<Vector2<f64>>,
    fps: f64,
    params: &GeometryParams,
) -> Result<GroundObservation> {
    let velocity = ground_velocity(camera, s.bottom_middle, s.image_velocity, 1.0 / fps)?;
    let speed = velocity.norm();
    let (orientation, orientation_valid) = if speed >= params.v_orient_min {
        (Some(velocity / speed), true)
    } else {
        (prev_orientation, false)
    };
    let bbox = s.bbox();
    let (footprint, fallback) = match (contour, orientation) {
        (Some(c), Some(dir)) => match build_3d_bbox(camera, c, dir, &bbox, params.default_vehicle_width_m)? {
            BoxEstimate::Tangent(b) => (b.footprint, false),
            BoxEstimate::Fallback(q) => (q, true),
        },
        _ => (fallback_footprint(camera, &bbox, params.default_vehicle_width_m)?, true),
    };
    Ok(GroundObservation {
        track_id,
        frame_index: s.frame_index,
        time_s: s.time_s,
        position: footprint.centroid(),
        ground_velocity: velocity,
        footprint,
        orientation,
        orientation_valid,
        fallback_footprint: fallback,
    })
}
