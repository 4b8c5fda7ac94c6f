//! Geometric primitives shared by every measurement model.
//!
//! World units are millimetres throughout. Planes are homogeneous 4-vectors
//! `[a, b, c, d]` describing `a x + b y + c z + d = 0`, stored with a unit
//! normal whose first nonzero component is positive, so two descriptions of the
//! same plane compare equal coefficient by coefficient.

use nalgebra as na;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = na::Point3<f64>;
pub type Vec3 = na::Vector3<f64>;
pub type Mat3 = na::Matrix3<f64>;
pub type Mat4 = na::Matrix4<f64>;
pub type Vec4 = na::Vector4<f64>;

/// Default maximum gap accepted by [`intersect_rays`] when a caller has no
/// better estimate of the measurement noise.
pub const DEFAULT_GAP_TOL: f64 = 0.05;

const PARALLEL_EPS: f64 = 1e-12;

/// A half-line `origin + t * dir` with `‖dir‖ = 1`.
///
/// Nothing in this crate relies on `t ≥ 0`; rays are treated as full lines
/// and the sign of `t` is reported where it matters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray3 {
    pub origin: Point3,
    dir: Vec3,
}

impl Ray3 {
    pub fn new(origin: Point3, dir: Vec3) -> Result<Self> {
        let n = dir.norm();
        if !(n > 0.0) || !n.is_finite() || !origin.coords.iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateInput("ray direction must be finite and nonzero"));
        }
        Ok(Ray3 {
            origin,
            dir: dir / n,
        })
    }

    /// The ray from `from` towards `to`.
    pub fn through(from: &Point3, to: &Point3) -> Result<Self> {
        Ray3::new(*from, to - from)
    }

    pub fn dir(&self) -> &Vec3 {
        &self.dir
    }

    pub fn at(&self, t: f64) -> Point3 {
        self.origin + self.dir * t
    }

    /// Shortest distance from `p` to the supporting line.
    pub fn distance_to(&self, p: &Point3) -> f64 {
        let w = p - self.origin;
        (w - self.dir * w.dot(&self.dir)).norm()
    }

    pub fn reversed(&self) -> Ray3 {
        Ray3 {
            origin: self.origin,
            dir: -self.dir,
        }
    }
}

/// An oriented plane `coeffs · [x, y, z, 1] = 0` with unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    coeffs: Vec4,
}

impl Plane {
    /// `a x + b y + c z + d = 0`, normalised.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Plane::from_coeffs(Vec4::new(a, b, c, d))
    }

    pub fn from_coeffs(coeffs: Vec4) -> Result<Self> {
        let n = coeffs.xyz().norm();
        if !(n > PARALLEL_EPS) || !coeffs.iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateInput("plane normal must be finite and nonzero"));
        }
        let mut c = coeffs / n;
        let first = c.xyz().iter().copied().find(|v| *v != 0.0).unwrap_or(1.0);
        if first < 0.0 {
            c = -c;
        }
        Ok(Plane { coeffs: c })
    }

    pub fn from_point_normal(point: &Point3, normal: &Vec3) -> Result<Self> {
        Plane::from_coeffs(Vec4::new(
            normal.x,
            normal.y,
            normal.z,
            -normal.dot(&point.coords),
        ))
    }

    /// The plane `z = height`.
    pub fn horizontal(height: f64) -> Plane {
        Plane {
            coeffs: Vec4::new(0.0, 0.0, 1.0, -height),
        }
    }

    pub fn coeffs(&self) -> &Vec4 {
        &self.coeffs
    }

    pub fn normal(&self) -> Vec3 {
        self.coeffs.xyz()
    }

    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.coeffs.xyz().dot(&p.coords) + self.coeffs.w
    }

    /// Orthogonal projection of `p` onto the plane.
    pub fn project(&self, p: &Point3) -> Point3 {
        p - self.normal() * self.signed_distance(p)
    }

    /// Mirror image of a point across the plane.
    pub fn reflect_point(&self, p: &Point3) -> Point3 {
        p - self.normal() * (2.0 * self.signed_distance(p))
    }

    /// Mirror image of a direction across the plane.
    pub fn reflect_vector(&self, v: &Vec3) -> Vec3 {
        let n = self.normal();
        v - n * (2.0 * v.dot(&n))
    }

    /// Point of the plane with the given world `(x, y)`; fails for planes
    /// containing the z direction.
    pub fn point_at_xy(&self, x: f64, y: f64) -> Result<Point3> {
        let c = self.coeffs;
        if c.z.abs() <= PARALLEL_EPS {
            return Err(Error::ParallelToPlane);
        }
        Ok(Point3::new(x, y, -(c.x * x + c.y * y + c.w) / c.z))
    }

    /// Largest componentwise difference between normalised coefficients.
    pub fn max_coeff_diff(&self, other: &Plane) -> f64 {
        (self.coeffs - other.coeffs).amax()
    }
}

/// A proper rigid motion `x ↦ R x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl RigidTransform {
    pub const ORTHO_TOL: f64 = 1e-9;

    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Mat3::identity()).norm();
        let det = rotation.determinant();
        if ortho > Self::ORTHO_TOL || (det - 1.0).abs() > Self::ORTHO_TOL {
            return Err(Error::pre(format!(
                "rotation is not proper orthonormal (‖RᵀR − I‖ = {ortho:.3e}, det = {det})"
            )));
        }
        Ok(RigidTransform {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        RigidTransform {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn translation(t: Vec3) -> Self {
        RigidTransform {
            rotation: Mat3::identity(),
            translation: t,
        }
    }

    /// Rotation about `axis` (any nonzero length) by `angle` radians.
    pub fn from_axis_angle(axis: &Vec3, angle: f64, translation: Vec3) -> Self {
        let r = na::Rotation3::from_axis_angle(&na::Unit::new_normalize(*axis), angle);
        RigidTransform {
            rotation: *r.matrix(),
            translation,
        }
    }

    /// The 4×4 homogeneous matrix.
    pub fn matrix(&self) -> Mat4 {
        let mut m = Mat4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Result of [`fit_line_3d`].
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub ray: Ray3,
    /// Root-mean-square perpendicular distance of the inputs to the line.
    pub rms: f64,
}

/// Total-least-squares line through `points`: centroid plus the dominant
/// principal direction, oriented from the first point towards the last.
pub fn fit_line_3d(points: &[Point3]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::pre("line fit needs at least 2 points"));
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vec3::zeros(), |acc, p| acc + p.coords) / n;
    let scale = points
        .iter()
        .map(|p| (p.coords - centroid).norm())
        .fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::DegenerateInput("all points identical"));
    }
    // Pad to at least three rows so the SVD yields three singular values.
    let rows = points.len().max(3);
    let centered = na::DMatrix::from_fn(rows, 3, |r, c| {
        points.get(r).map_or(0.0, |p| p.coords[c] - centroid[c])
    });
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let sv = &svd.singular_values;
    // nalgebra does not sort singular values for all code paths.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    if sv[order[0]] - sv[order[1]] <= 1e-12 * sv[order[0]] {
        return Err(Error::IllConditioned("no unique dominant line direction"));
    }
    let mut dir = Vec3::new(v_t[(order[0], 0)], v_t[(order[0], 1)], v_t[(order[0], 2)]);
    let span = points[points.len() - 1] - points[0];
    if dir.dot(&span) < 0.0 {
        dir = -dir;
    }
    let ray = Ray3::new(Point3::from(centroid), dir)?;
    let ss: f64 = points.iter().map(|p| ray.distance_to(p).powi(2)).sum();
    Ok(LineFit {
        ray,
        rms: (ss / n).sqrt(),
    })
}

/// Closest approach of two lines.
#[derive(Debug, Clone, Copy)]
pub struct RayIntersection {
    /// Midpoint of the common perpendicular.
    pub point: Point3,
    /// Length of the common perpendicular.
    pub gap: f64,
    /// Line parameters of the feet of the perpendicular on `a` and `b`.
    pub t_a: f64,
    pub t_b: f64,
}

/// Midpoint of the common perpendicular of two non-parallel lines. Fails with
/// [`Error::GapExceeded`] when the lines pass further apart than `gap_tol`.
pub fn intersect_rays(a: &Ray3, b: &Ray3, gap_tol: f64) -> Result<RayIntersection> {
    let hit = closest_approach(a, b)?;
    if hit.gap > gap_tol {
        return Err(Error::GapExceeded {
            gap: hit.gap,
            tol: gap_tol,
        });
    }
    Ok(hit)
}

/// [`intersect_rays`] without the gap check.
pub fn closest_approach(a: &Ray3, b: &Ray3) -> Result<RayIntersection> {
    let d1 = a.dir;
    let d2 = b.dir;
    if d1.cross(&d2).norm() <= PARALLEL_EPS {
        return Err(Error::ParallelRays);
    }
    let w0 = a.origin - b.origin;
    let bb = d1.dot(&d2);
    let d = d1.dot(&w0);
    let e = d2.dot(&w0);
    let denom = 1.0 - bb * bb;
    let t_a = (bb * e - d) / denom;
    let t_b = (e - bb * d) / denom;
    let pa = a.at(t_a);
    let pb = b.at(t_b);
    Ok(RayIntersection {
        point: na::center(&pa, &pb),
        gap: (pa - pb).norm(),
        t_a,
        t_b,
    })
}

/// Where a line crosses a plane.
#[derive(Debug, Clone, Copy)]
pub struct RayPlaneHit {
    pub point: Point3,
    /// Ray parameter; negative when the plane lies behind the ray origin.
    pub t: f64,
}

impl RayPlaneHit {
    pub fn is_behind(&self) -> bool {
        self.t < 0.0
    }
}

pub fn intersect_ray_plane(r: &Ray3, plane: &Plane) -> Result<RayPlaneHit> {
    let n = plane.normal();
    let denom = n.dot(&r.dir);
    if denom.abs() <= PARALLEL_EPS {
        return Err(Error::ParallelToPlane);
    }
    let t = -plane.signed_distance(&r.origin) / denom;
    let mut point = r.at(t);
    // One projection step removes the rounding left by the parametric form.
    point -= n * plane.signed_distance(&point);
    Ok(RayPlaneHit { point, t })
}

/// Image of a plane under a rigid motion: `π′ = P⁻ᵀ π`.
pub fn transform_plane(plane: &Plane, p: &RigidTransform) -> Plane {
    let n = p.rotation * plane.normal();
    let d = plane.coeffs.w - n.dot(&p.translation);
    Plane::from_coeffs(Vec4::new(n.x, n.y, n.z, d)).expect("rigid motion preserves a unit normal")
}

/// Point minimising the summed squared distance to all lines.
pub fn common_point_least_squares(rays: &[Ray3]) -> Result<Point3> {
    if rays.len() < 2 {
        return Err(Error::pre("common point needs at least 2 rays"));
    }
    let mut a = Mat3::zeros();
    let mut b = Vec3::zeros();
    for r in rays {
        let m = Mat3::identity() - r.dir * r.dir.transpose();
        a += m;
        b += m * r.origin.coords;
    }
    let eig = na::SymmetricEigen::new(a);
    let min = eig.eigenvalues.min();
    if min <= 1e-12 * rays.len() as f64 {
        return Err(Error::IllConditioned("rays are (nearly) parallel"));
    }
    // Solve in the eigenbasis; the matrix is symmetric positive definite.
    let q = eig.eigenvectors;
    let y = q.transpose() * b;
    let x = q * Vec3::new(
        y[0] / eig.eigenvalues[0],
        y[1] / eig.eigenvalues[1],
        y[2] / eig.eigenvalues[2],
    );
    Ok(Point3::from(x))
}

/// Mirror-law reflection of direction `d` about unit normal `n`.
pub fn reflect_direction(d: &Vec3, n: &Vec3) -> Vec3 {
    let r = d - n * (2.0 * d.dot(n));
    r / r.norm()
}

/// Angle between two vectors, robust near 0 and π.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}
