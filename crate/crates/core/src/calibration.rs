//! Pinhole camera model for a fixed surveillance view of a planar road.
//!
//! The world frame puts the road on `Z = 0` with `Z` pointing up, away from the
//! ground. A [`CameraModel`] can be built from a full projection matrix, from
//! `K`, `R`, `t`, from two orthogonal ground vanishing points, or from two sets
//! of annotated parallel lines. World coordinates handed to and returned from
//! the model are in meters; internally the projection matrix works in world
//! units and `scale` converts between the two.

use nalgebra::{Matrix2, Matrix3, Matrix3x4, Point2, Point3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Homogeneous `w` below this (relative to the vector norm) counts as a point at infinity.
pub const HOMOGENEOUS_EPS: f64 = 1e-12;

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: f64,
    pub height: f64,
}

impl ImageSize {
    pub fn new(width: f64, height: f64) -> Self {
        Self { width, height }
    }

    pub fn center(&self) -> Point2<f64> {
        Point2::new(self.width / 2.0, self.height / 2.0)
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width && p.y <= self.height
    }
}

/// An image point in homogeneous coordinates, possibly at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanishingPoint(pub Vector3<f64>);

impl VanishingPoint {
    pub fn from_point(p: Point2<f64>) -> Self {
        Self(Vector3::new(p.x, p.y, 1.0))
    }

    pub fn is_at_infinity(&self) -> bool {
        let n = self.0.norm();
        n == 0.0 || self.0.z.abs() < HOMOGENEOUS_EPS * n
    }

    /// The dehomogenized image point, or `None` when at infinity.
    pub fn finite(&self) -> Option<Point2<f64>> {
        if self.is_at_infinity() {
            None
        } else {
            Some(Point2::new(self.0.x / self.0.z, self.0.y / self.0.z))
        }
    }

    /// Unit image direction for a point at infinity.
    pub fn direction(&self) -> Vector2<f64> {
        Vector2::new(self.0.x, self.0.y).normalize()
    }
}

/// A line segment in the image, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSegment {
    pub a: Point2<f64>,
    pub b: Point2<f64>,
}

impl LineSegment {
    pub fn new(a: Point2<f64>, b: Point2<f64>) -> Self {
        Self { a, b }
    }

    /// Supporting line `(a, b, c)` with `a² + b² = 1`.
    fn normalized_line(&self) -> Result<Vector3<f64>> {
        let l = Vector3::new(self.a.x, self.a.y, 1.0).cross(&Vector3::new(self.b.x, self.b.y, 1.0));
        let n = (l.x * l.x + l.y * l.y).sqrt();
        if n == 0.0 {
            return Err(Error::Degenerate("line segment endpoints coincide".into()));
        }
        Ok(l / n)
    }
}

/// Two groups of image segments: world-parallel within each group, the two
/// ground directions perpendicular.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSegmentSet {
    pub u: Vec<LineSegment>,
    pub v: Vec<LineSegment>,
}

/// How metric scale is fixed for cameras whose translation is only known up to scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleReference {
    /// Two image points on the ground and their true separation.
    GroundSegment {
        a: Point2<f64>,
        b: Point2<f64>,
        meters: f64,
    },
    CameraHeight(f64),
}

/// Least-squares intersection of the segments' supporting lines.
///
/// Minimizes the sum of squared perpendicular distances from the point to
/// each line. Exactly parallel lines give a point at infinity in their
/// shared direction.
pub fn estimate_vanishing_point(segments: &[LineSegment]) -> Result<VanishingPoint> {
    if segments.len() < 2 {
        return Err(Error::Degenerate("at least two segments are required".into()));
    }
    let lines = segments
        .iter()
        .map(LineSegment::normalized_line)
        .collect::<Result<Vec<_>>>()?;

    let mut normal = Matrix2::zeros();
    let mut rhs = Vector2::zeros();
    for l in &lines {
        let n = Vector2::new(l.x, l.y);
        normal += n * n.transpose();
        rhs -= n * l.z;
    }

    let eig = normal.symmetric_eigen();
    let (lo, hi) = if eig.eigenvalues[0] <= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    if eig.eigenvalues[lo] > 1e-12 * eig.eigenvalues[hi] {
        let p = normal
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("singular normal equations".into()))?;
        return Ok(VanishingPoint(Vector3::new(p.x, p.y, 1.0)));
    }

    // All normals parallel: either one repeated line or a parallel pencil.
    let n0 = Vector2::new(lines[0].x, lines[0].y);
    let offsets: Vec<f64> = lines
        .iter()
        .map(|l| {
            if Vector2::new(l.x, l.y).dot(&n0) >= 0.0 {
                l.z
            } else {
                -l.z
            }
        })
        .collect();
    let spread = offsets.iter().cloned().fold(f64::MIN, f64::max) - offsets.iter().cloned().fold(f64::MAX, f64::min);
    let extent = segments
        .iter()
        .flat_map(|s| [s.a.coords.norm(), s.b.coords.norm()])
        .fold(1.0, f64::max);
    if spread <= 1e-12 * extent {
        return Err(Error::Degenerate("all segments are collinear".into()));
    }
    let dir = eig.eigenvectors.column(lo).into_owned();
    // Direction of the lines is perpendicular to their common normal.
    let along = Vector2::new(-n0.y, n0.x);
    let along = if along.dot(&dir).abs() > 0.0 { along } else { dir };
    let along = if along.x < 0.0 || (along.x == 0.0 && along.y < 0.0) {
        -along
    } else {
        along
    };
    Ok(VanishingPoint(Vector3::new(along.x, along.y, 0.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    k: Matrix3<f64>,
    r: Matrix3<f64>,
    t: Vector3<f64>,
    p: Matrix3x4<f64>,
    k_inv: Matrix3<f64>,
    center: Point3<f64>,
    image_size: ImageSize,
    scale: f64,
    vp_u: VanishingPoint,
    vp_v: VanishingPoint,
}

impl CameraModel {
    /// Builds a camera from intrinsics and extrinsics (world-to-camera `X_c = R X + t`).
    pub fn from_krt(k: Matrix3<f64>, r: Matrix3<f64>, t: Vector3<f64>, image_size: ImageSize) -> Result<Self> {
        if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0 && k[(2, 2)] > 0.0) {
            return Err(Error::InvalidCamera("K must have a positive diagonal".into()));
        }
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
            return Err(Error::InvalidCamera("K must be upper triangular".into()));
        }
        if (r.transpose() * r - Matrix3::identity()).abs().max() > ORTHONORMAL_TOL {
            return Err(Error::InvalidCamera("R is not orthonormal".into()));
        }
        if (r.determinant() - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidCamera("det(R) must be +1".into()));
        }
        // Normalize so K[2][2] = 1; P is unchanged up to scale.
        let k = k / k[(2, 2)];
        let k_inv = k
            .try_inverse()
            .ok_or_else(|| Error::InvalidCamera("K is singular".into()))?;
        let center = Point3::from(-(r.transpose() * t));
        if center.z.abs() < HOMOGENEOUS_EPS * center.coords.norm().max(1.0) {
            return Err(Error::InvalidCamera("camera center lies on the ground plane".into()));
        }
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        rt.set_column(3, &t);
        let p = k * rt;
        let vp_u = VanishingPoint(p.column(0).into_owned());
        let vp_v = VanishingPoint(p.column(1).into_owned());
        Ok(Self {
            k,
            r,
            t,
            p,
            k_inv,
            center,
            image_size,
            scale: 1.0,
            vp_u,
            vp_v,
        })
    }

    /// Decomposes a 3×4 projection matrix into `K[R|t]` via RQ decomposition.
    pub fn from_projection(p: Matrix3x4<f64>, image_size: ImageSize) -> Result<Self> {
        let mut p = p;
        let m: Matrix3<f64> = p.fixed_view::<3, 3>(0, 0).into_owned();
        let (mut k, mut r) =
            rq3(&m).ok_or_else(|| Error::InvalidCamera("projection matrix is rank deficient".into()))?;
        if r.determinant() < 0.0 {
            // P is only defined up to scale; pick the sign giving a proper rotation.
            p = -p;
            r = -r;
        }
        let scale = k[(2, 2)];
        k /= scale;
        let k_inv = k
            .try_inverse()
            .ok_or_else(|| Error::InvalidCamera("K is singular".into()))?;
        let t = k_inv * p.column(3) / scale;
        Self::from_krt(k, r, t, image_size)
    }

    /// Two-vanishing-point calibration with the principal point at the image
    /// center, zero skew and square pixels.
    ///
    /// World `X` maps to `u`, world `Y` to `v`, and `Z = X × Y` points up.
    /// The camera sits above the world origin.
    pub fn from_vanishing_points(
        u: Point2<f64>,
        v: Point2<f64>,
        image_size: ImageSize,
        scale_ref: ScaleReference,
    ) -> Result<Self> {
        let pp = image_size.center();
        let du = u - pp;
        let dv = v - pp;
        let f2 = -du.dot(&dv);
        if !(f2 > 0.0) || !f2.is_finite() {
            return Err(Error::IncompatibleVanishingPoints);
        }
        let f = f2.sqrt();
        let k = Matrix3::new(f, 0.0, pp.x, 0.0, f, pp.y, 0.0, 0.0, 1.0);

        // K⁻¹u with positive depth, so +X runs away from the camera.
        let r1 = Vector3::new(du.x, du.y, f).normalize();
        let mut r2 = Vector3::new(dv.x, dv.y, f).normalize();
        let mut r3 = r1.cross(&r2);
        // Image y grows downward; world up must point toward the top of the image.
        if r3.y > 0.0 {
            r2 = -r2;
            r3 = -r3;
        }
        let r = Matrix3::from_columns(&[r1, r2, r3]);
        let t = -r3; // camera center at (0, 0, 1) world units
        let camera = Self::from_krt(k, r, t, image_size)?;
        camera.with_scale_reference(scale_ref)
    }

    pub fn from_parallel_lines(
        lines: &LineSegmentSet,
        image_size: ImageSize,
        scale_ref: ScaleReference,
    ) -> Result<Self> {
        let u = estimate_vanishing_point(&lines.u)?
            .finite()
            .ok_or(Error::IncompatibleVanishingPoints)?;
        let v = estimate_vanishing_point(&lines.v)?
            .finite()
            .ok_or(Error::IncompatibleVanishingPoints)?;
        Self::from_vanishing_points(u, v, image_size, scale_ref)
    }

    /// Sets meters per world unit from a scale reference.
    pub fn with_scale_reference(mut self, scale_ref: ScaleReference) -> Result<Self> {
        self.scale = 1.0;
        let scale = match scale_ref {
            ScaleReference::CameraHeight(h) => {
                if !(h > 0.0) {
                    return Err(Error::InvalidCamera("camera height must be positive".into()));
                }
                h / self.center.z.abs()
            }
            ScaleReference::GroundSegment { a, b, meters } => {
                if !(meters > 0.0) {
                    return Err(Error::InvalidCamera("scale segment length must be positive".into()));
                }
                let d = (self.reproject_image_to_ground(a)? - self.reproject_image_to_ground(b)?).norm();
                if !(d > 0.0) {
                    return Err(Error::InvalidCamera("scale segment has zero ground length".into()));
                }
                meters / d
            }
        };
        self.scale = scale;
        Ok(self)
    }

    pub fn with_scale(mut self, meters_per_unit: f64) -> Self {
        self.scale = meters_per_unit;
        self
    }

    pub fn k(&self) -> &Matrix3<f64> {
        &self.k
    }

    pub fn r(&self) -> &Matrix3<f64> {
        &self.r
    }

    pub fn t(&self) -> &Vector3<f64> {
        &self.t
    }

    pub fn p(&self) -> &Matrix3x4<f64> {
        &self.p
    }

    pub fn image_size(&self) -> ImageSize {
        self.image_size
    }

    /// Meters per world unit.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Vanishing point of world direction `(1, 0, 0)`.
    pub fn u(&self) -> VanishingPoint {
        self.vp_u
    }

    /// Vanishing point of world direction `(0, 1, 0)`.
    pub fn v(&self) -> VanishingPoint {
        self.vp_v
    }

    /// Camera center in meters.
    pub fn center(&self) -> Point3<f64> {
        Point3::from(self.center.coords * self.scale)
    }

    /// Ground point directly below (or above) the camera center, in meters.
    pub fn ground_nadir(&self) -> Point2<f64> {
        Point2::new(self.center.x * self.scale, self.center.y * self.scale)
    }

    /// Homogeneous image of a world point given in meters.
    pub fn project_homogeneous(&self, x: &Point3<f64>) -> Vector3<f64> {
        let xs = x.coords / self.scale;
        self.p * xs.push(1.0)
    }

    pub fn project_world_to_image(&self, x: &Point3<f64>) -> Result<Point2<f64>> {
        dehomogenize(self.project_homogeneous(x))
    }

    /// Depth of a world point (meters) along the optical axis, in world units.
    pub fn depth(&self, x: &Point3<f64>) -> f64 {
        (self.r * (x.coords / self.scale) + self.t).z
    }

    /// World-frame direction of the back-projected ray through an image point.
    pub fn ray_direction(&self, x: &Point2<f64>) -> Vector3<f64> {
        self.r.transpose() * (self.k_inv * Vector3::new(x.x, x.y, 1.0))
    }

    /// Intersects the ray through `x` with the ground plane; result in meters.
    pub fn reproject_image_to_ground(&self, x: Point2<f64>) -> Result<Point2<f64>> {
        let d = self.ray_direction(&x);
        if d.z.abs() < HOMOGENEOUS_EPS * d.norm() {
            return Err(Error::Horizon);
        }
        let lambda = -self.center.z / d.z;
        if lambda <= 0.0 {
            return Err(Error::BehindCamera);
        }
        let g = self.center.coords + d * lambda;
        Ok(Point2::new(g.x * self.scale, g.y * self.scale))
    }

    /// Image of the ground direction `d` at infinity.
    pub fn vanishing_point_of_ground_direction(&self, d: &Vector2<f64>) -> VanishingPoint {
        VanishingPoint(self.p.column(0) * d.x + self.p.column(1) * d.y)
    }

    /// Vanishing point of the vertical direction `(0, 0, 1)`.
    pub fn vertical_vanishing_point(&self) -> VanishingPoint {
        VanishingPoint(self.p.column(2).into_owned())
    }

    /// Image line containing every ground-direction vanishing point.
    pub fn horizon_line(&self) -> Vector3<f64> {
        self.p.column(0).cross(&self.p.column(1))
    }
}

/// Dehomogenized `P (X, 1)` for a raw projection matrix and world point in its units.
pub fn project_with(p: &Matrix3x4<f64>, x: &Point3<f64>) -> Result<Point2<f64>> {
    dehomogenize(p * x.coords.push(1.0))
}

fn dehomogenize(h: Vector3<f64>) -> Result<Point2<f64>> {
    if h.z == 0.0 || h.z.abs() < HOMOGENEOUS_EPS * h.norm() {
        return Err(Error::AtInfinity);
    }
    Ok(Point2::new(h.x / h.z, h.y / h.z))
}

/// RQ decomposition `m = K R` with `K` upper triangular (positive diagonal) and `R` orthogonal.
fn rq3(m: &Matrix3<f64>) -> Option<(Matrix3<f64>, Matrix3<f64>)> {
    let flip = Matrix3::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0);
    let qr = (flip * m).transpose().qr();
    let q = qr.q();
    let r_upper = qr.r();
    let mut k = flip * r_upper.transpose() * flip;
    let mut r = flip * q.transpose();
    for i in 0..3 {
        if k[(i, i)] == 0.0 {
            return None;
        }
        if k[(i, i)] < 0.0 {
            k.column_mut(i).neg_mut();
            r.row_mut(i).neg_mut();
        }
    }
    Some((k, r))
}

/// Calibration file contents; exactly one camera source must be present.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p: Option<[[f64; 4]; 3]>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<[[f64; 3]; 3]>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vp_u: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vp_v: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallel_lines: Option<ParallelLinesFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_segment: Option<ScaleSegmentFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_height_m: Option<f64>,
    pub image_size: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParallelLinesFile {
    pub u: Vec<[[f64; 2]; 2]>,
    pub v: Vec<[[f64; 2]; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleSegmentFile {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub meters: f64,
}

impl CalibrationFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn scale_reference(&self) -> Result<Option<ScaleReference>> {
        match (&self.scale_segment, self.camera_height_m) {
            (Some(_), Some(_)) => Err(Error::InvalidCamera(
                "give either scale_segment or camera_height_m, not both".into(),
            )),
            (Some(s), None) => Ok(Some(ScaleReference::GroundSegment {
                a: Point2::new(s.a[0], s.a[1]),
                b: Point2::new(s.b[0], s.b[1]),
                meters: s.meters,
            })),
            (None, Some(h)) => Ok(Some(ScaleReference::CameraHeight(h))),
            (None, None) => Ok(None),
        }
    }

    pub fn build(&self) -> Result<CameraModel> {
        let size = ImageSize::new(self.image_size[0], self.image_size[1]);
        let has_krt = self.k.is_some() || self.r.is_some() || self.t.is_some();
        let has_vp = self.vp_u.is_some() || self.vp_v.is_some();
        let sources = [self.p.is_some(), has_krt, has_vp, self.parallel_lines.is_some()];
        if sources.iter().filter(|s| **s).count() != 1 {
            return Err(Error::InvalidCamera(
                "calibration must contain exactly one of P, K/R/t, vp_u/vp_v, parallel_lines".into(),
            ));
        }
        let scale_ref = self.scale_reference()?;
        let needs_scale = |scale_ref: Option<ScaleReference>| {
            scale_ref.ok_or_else(|| {
                Error::InvalidCamera("vanishing-point calibration needs scale_segment or camera_height_m".into())
            })
        };

        if let Some(p) = &self.p {
            let p = Matrix3x4::from_fn(|i, j| p[i][j]);
            let cam = CameraModel::from_projection(p, size)?;
            return match scale_ref {
                Some(s) => cam.with_scale_reference(s),
                None => Ok(cam),
            };
        }
        if has_krt {
            let (Some(k), Some(r), Some(t)) = (&self.k, &self.r, &self.t) else {
                return Err(Error::InvalidCamera("K, R and t must all be given".into()));
            };
            let cam = CameraModel::from_krt(
                Matrix3::from_fn(|i, j| k[i][j]),
                Matrix3::from_fn(|i, j| r[i][j]),
                Vector3::from(*t),
                size,
            )?;
            return match scale_ref {
                Some(s) => cam.with_scale_reference(s),
                None => Ok(cam),
            };
        }
        if has_vp {
            let (Some(u), Some(v)) = (self.vp_u, self.vp_v) else {
                return Err(Error::InvalidCamera("both vp_u and vp_v are required".into()));
            };
            return CameraModel::from_vanishing_points(Point2::from(u), Point2::from(v), size, needs_scale(scale_ref)?);
        }
        let lines = self.parallel_lines.as_ref().expect("checked above");
        let to_segments = |group: &[[[f64; 2]; 2]]| {
            group
                .iter()
                .map(|s| LineSegment::new(Point2::from(s[0]), Point2::from(s[1])))
                .collect::<Vec<_>>()
        };
        let set = LineSegmentSet {
            u: to_segments(&lines.u),
            v: to_segments(&lines.v),
        };
        if set.u.len() < 2 || set.v.len() < 2 {
            return Err(Error::Degenerate(
                "each parallel-line group needs at least two segments".into(),
            ));
        }
        CameraModel::from_parallel_lines(&set, size, needs_scale(scale_ref)?)
    }
}
