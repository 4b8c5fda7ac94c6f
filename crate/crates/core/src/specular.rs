//! Mirror-surface (weld pool) measurement by ray intersection.
//!
//! A laser projects a fan of dots from a projection centre `c`. Each incident
//! ray is calibrated by observing where it meets a diffuse plane moved through
//! several heights. After reflection off the pool, a beam splitter sends every
//! reflected ray to two imaging planes: `p2` (transmitted) and `p3`
//! (reflected). Mirroring `p3` across the splitter gives a virtual plane `p4`
//! on the straight continuation of the ray, so the two plane hits of a dot fix
//! its reflected ray. The surface point is the intersection of the incident
//! and reflected rays.
//!
//! The observation planes are located by replacing the pool with a flat
//! mirror at `z = 0`: every reflected ray then appears to start at the
//! virtual centre `c′ = (c_x, c_y, −c_z)`, which acts as a pinhole camera whose
//! image plane is `z = 0`. The homography from an imaging plane's metric
//! coordinates to the mirror-plane hits is decomposed with the intrinsics of
//! that virtual camera to recover the plane pose.

use serde::{Deserialize, Serialize};

use crate::diffuse::CameraDlt;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geom::{
    common_point_least_squares, fit_line_3d, intersect_ray_plane, intersect_rays, transform_plane,
    Mat3, Plane, Point3, Ray3, RigidTransform,
};
use crate::homography::{
    decompose_homography, estimate_homography, Homography, Intrinsics, PlanePose, Point2,
};

/// A ray with its laser dot id (`line × samples_per_line + sample`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexedRay {
    pub id: usize,
    pub ray: Ray3,
}

/// Observed positions of one laser dot on the calibration plane at
/// successive heights.
#[derive(Debug, Clone, PartialEq)]
pub struct RayStack {
    pub id: usize,
    pub points: Vec<Point3>,
}

/// Camera `c1` pixel of a laser dot on the calibration plane at `height`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackObservation {
    pub id: usize,
    pub height: f64,
    pub pixel: Point2,
}

/// A laser dot seen by both imaging cameras: `pix2` on `c2` (plane `p2`),
/// `pix3` on `c3` (plane `p3`, i.e. virtual plane `p4`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DotObservation {
    pub id: usize,
    pub pix2: Point2,
    pub pix3: Point2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncidentRayBundle {
    /// Sorted by id.
    pub rays: Vec<IndexedRay>,
    /// RMS perpendicular distance of each stack to its fitted line.
    pub residuals: Vec<f64>,
    /// Projection centre `c`.
    pub center: Point3,
}

impl IncidentRayBundle {
    pub fn get(&self, id: usize) -> Option<&Ray3> {
        self.rays
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(|k| &self.rays[k].ray)
    }

    /// Mirror image of `c` across `z = 0`.
    pub fn virtual_center(&self) -> Point3 {
        Point3::new(self.center.x, self.center.y, -self.center.z)
    }

    /// Intrinsics of the virtual camera, in millimetres.
    pub fn intrinsics(&self) -> Result<Intrinsics> {
        if !(self.center.z > 0.0) {
            return Err(Error::NonPhysical("projection centre must lie above z = 0"));
        }
        Intrinsics::new(self.center.z, self.center.x, self.center.y)
    }

    /// Where ray `id` crosses `z = 0`.
    pub fn hit_on_reference(&self, id: usize) -> Result<Point2> {
        let ray = self
            .get(id)
            .ok_or_else(|| Error::pre(format!("no incident ray with id {id}")))?;
        let hit = intersect_ray_plane(ray, &Plane::horizontal(0.0))?;
        Ok((hit.point.x, hit.point.y))
    }
}

/// Lifts `c1` pixels onto their calibration heights and groups them into
/// per-dot stacks ordered by height.
pub fn lift_stacks(camera: &CameraDlt, obs: &[StackObservation]) -> Result<Vec<RayStack>> {
    let mut sorted: Vec<&StackObservation> = obs.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id).then(a.height.total_cmp(&b.height)));
    let mut stacks: Vec<RayStack> = Vec::new();
    for o in sorted {
        let p = camera.lift_to_height(o.pixel, o.height)?;
        match stacks.last_mut() {
            Some(s) if s.id == o.id => s.points.push(p),
            _ => stacks.push(RayStack { id: o.id, points: vec![p] }),
        }
    }
    Ok(stacks)
}

/// Fits one line per stack and the least-squares common point of all lines.
pub fn calibrate_incident_rays(stacks: &[RayStack]) -> Result<IncidentRayBundle> {
    if stacks.len() < 2 {
        return Err(Error::pre("need at least two incident rays"));
    }
    let mut order: Vec<&RayStack> = stacks.iter().collect();
    order.sort_by_key(|s| s.id);
    if order.windows(2).any(|w| w[0].id == w[1].id) {
        return Err(Error::pre("incident ray ids must be unique"));
    }
    let mut rays = Vec::with_capacity(order.len());
    let mut residuals = Vec::with_capacity(order.len());
    for s in order {
        if s.points.len() < 2 {
            return Err(Error::pre(format!("ray {} is observed at fewer than 2 heights", s.id)));
        }
        if s.points.windows(2).any(|w| !(w[1].z > w[0].z)) {
            return Err(Error::pre(format!("ray {} heights must be strictly increasing", s.id)));
        }
        let fit = fit_line_3d(&s.points)?;
        // Orient from the laser (above) towards the surface.
        let ray = if fit.ray.dir().z > 0.0 { fit.ray.reversed() } else { fit.ray };
        rays.push(IndexedRay { id: s.id, ray });
        residuals.push(fit.rms);
    }
    let lines: Vec<Ray3> = rays.iter().map(|r| r.ray).collect();
    let center = common_point_least_squares(&lines).map_err(|e| match e {
        Error::IllConditioned(_) => Error::CenterIllConditioned,
        e => e,
    })?;
    Ok(IncidentRayBundle { rays, residuals, center })
}

/// A recovered imaging plane.
#[derive(Debug, Clone, Copy)]
pub struct ObservationPlane {
    pub plane: Plane,
    /// World `(X, Y)` on the plane to camera pixels.
    pub image_homography: Homography,
    /// Plane-local to world.
    pub pose: RigidTransform,
    pub ortho_residual: f64,
}

/// Locates an imaging plane from flat-mirror observations.
///
/// `points_p1[i]` is where incident ray `i` meets the mirror `z = 0`;
/// `pixels[i]` is the camera pixel of the same dot on the imaging plane, and
/// `board` maps plane-local metric coordinates to that camera's pixels.
pub fn solve_observation_plane(
    points_p1: &[Point2],
    pixels: &[Point2],
    board: &Homography,
    bundle: &IncidentRayBundle,
) -> Result<ObservationPlane> {
    if points_p1.len() != pixels.len() {
        return Err(Error::pre("mirror hits and pixels must be index-aligned"));
    }
    if points_p1.len() < 4 {
        return Err(Error::pre("plane solving needs at least 4 correspondences"));
    }
    let to_local = board.inverse();
    let local = pixels
        .iter()
        .map(|&p| to_local.apply(p))
        .collect::<Result<Vec<_>>>()?;
    let fit = estimate_homography(&local, points_p1)?;
    let k = bundle.intrinsics()?;
    let PlanePose { transform, ortho_residual } = decompose_homography(&fit.h, &k)?;
    // Virtual-camera frame to world: the virtual camera looks along +z from c′.
    let pose = RigidTransform::translation(bundle.virtual_center().coords).compose(&transform);
    let plane = transform_plane(&Plane::horizontal(0.0), &pose);
    let image_homography = world_xy_homography(&plane, &pose, board)?;
    Ok(ObservationPlane { plane, image_homography, pose, ortho_residual })
}

/// Homography from world `(X, Y)` on `plane` to pixels, given the plane's
/// local frame `pose` and the local-to-pixel map `board`.
fn world_xy_homography(plane: &Plane, pose: &RigidTransform, board: &Homography) -> Result<Homography> {
    let [a, b, c, d] = plane_coeffs(plane);
    if c.abs() < 1e-9 {
        return Err(Error::SingularGeometry);
    }
    // (X, Y, 1) -> (X, Y, Z, 1) on the plane -> local (x, y, 1).
    let lift = nalgebra::Matrix4x3::new(
        1.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, //
        -a / c, -b / c, -d / c, //
        0.0, 0.0, 1.0,
    );
    let inv = pose.inverse();
    let mut local = nalgebra::Matrix3x4::zeros();
    local.fixed_view_mut::<2, 3>(0, 0).copy_from(&inv.rotation.fixed_view::<2, 3>(0, 0));
    local[(0, 3)] = inv.translation.x;
    local[(1, 3)] = inv.translation.y;
    local[(2, 3)] = 1.0;
    let m: Mat3 = board.matrix() * (local * lift);
    Homography::new(m)
}

fn plane_coeffs(plane: &Plane) -> [f64; 4] {
    let c = plane.coeffs();
    [c.x, c.y, c.z, c.w]
}

/// World point on `plane` seen at `pixel` through `image_homography`.
pub fn lift_to_plane(pixel: Point2, plane: &Plane, image_homography: &Homography) -> Result<Point3> {
    let [a, b, c, d] = plane_coeffs(plane);
    if c.abs() < 1e-9 {
        return Err(Error::SingularGeometry);
    }
    let (x, y) = image_homography.inverse().apply(pixel)?;
    Ok(Point3::new(x, y, -(a * x + b * y + d) / c))
}

/// Both imaging planes.
#[derive(Debug, Clone, Copy)]
pub struct ObservationPlanes {
    pub p2: ObservationPlane,
    pub p4: ObservationPlane,
}

impl ObservationPlanes {
    pub fn new(p2: ObservationPlane, p4: ObservationPlane) -> Result<Self> {
        if p2.plane.max_coeff_diff(&p4.plane) < 1e-9 {
            return Err(Error::DegenerateInput("p2 and p4 coincide"));
        }
        Ok(ObservationPlanes { p2, p4 })
    }
}

/// Reflected ray through the lifted `p4` and `p2` points, oriented from `p4`
/// towards `p2`.
pub fn reconstruct_reflected_ray(pix2: Point2, pix3: Point2, planes: &ObservationPlanes) -> Result<Ray3> {
    let q2 = lift_to_plane(pix2, &planes.p2.plane, &planes.p2.image_homography)?;
    let q4 = lift_to_plane(pix3, &planes.p4.plane, &planes.p4.image_homography)?;
    if (q2 - q4).norm() <= 1e-9 {
        return Err(Error::CoincidentPoints);
    }
    Ray3::through(&q4, &q2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecularSurfacePoint {
    pub position: Point3,
    pub incident_index: usize,
    pub gap: f64,
}

/// A dot that produced no surface point.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedPoint {
    pub id: usize,
    /// Closest-approach gap when the rays are not parallel.
    pub gap: Option<f64>,
    pub reason: Error,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SurfaceReconstruction {
    pub points: Vec<SpecularSurfacePoint>,
    pub rejected: Vec<RejectedPoint>,
}

/// Intersects each reflected ray with the incident ray of the same id.
pub fn reconstruct_specular_surface(
    incident: &IncidentRayBundle,
    reflected: &[IndexedRay],
    gap_tol: f64,
    exec: Exec,
) -> Result<SurfaceReconstruction> {
    let rays = reflected
        .iter()
        .map(|r| {
            incident
                .get(r.id)
                .copied()
                .ok_or_else(|| Error::pre(format!("reflected ray {} has no incident ray", r.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let results = exec.map_range(reflected.len(), |k| {
        let r = &reflected[k];
        match intersect_rays(&rays[k], &r.ray, f64::INFINITY) {
            Ok(hit) if hit.gap <= gap_tol => Ok(SpecularSurfacePoint {
                position: hit.point,
                incident_index: r.id,
                gap: hit.gap,
            }),
            Ok(hit) => Err(RejectedPoint {
                id: r.id,
                gap: Some(hit.gap),
                reason: Error::GapExceeded { gap: hit.gap, tol: gap_tol },
            }),
            Err(e) => Err(RejectedPoint { id: r.id, gap: None, reason: e }),
        }
    });
    let mut out = SurfaceReconstruction::default();
    for r in results {
        match r {
            Ok(p) => out.points.push(p),
            Err(rej) => out.rejected.push(rej),
        }
    }
    Ok(out)
}

/// Everything needed to turn dot observations into surface points.
#[derive(Debug, Clone)]
pub struct SpecularCalibration {
    pub bundle: IncidentRayBundle,
    pub planes: ObservationPlanes,
}

impl SpecularCalibration {
    /// Full calibration: incident rays from the `c1` height stacks, then both
    /// imaging planes from a flat mirror placed at `z = 0`.
    ///
    /// `board2` and `board3` map metric coordinates on `p2` and `p3` to
    /// pixels of `c2` and `c3`.
    pub fn calibrate(
        c1: &CameraDlt,
        stacks: &[StackObservation],
        mirror_dots: &[DotObservation],
        board2: &Homography,
        board3: &Homography,
    ) -> Result<Self> {
        let bundle = calibrate_incident_rays(&lift_stacks(c1, stacks)?)?;
        let p1 = mirror_dots
            .iter()
            .map(|d| bundle.hit_on_reference(d.id))
            .collect::<Result<Vec<_>>>()?;
        let pix2: Vec<Point2> = mirror_dots.iter().map(|d| d.pix2).collect();
        let pix3: Vec<Point2> = mirror_dots.iter().map(|d| d.pix3).collect();
        let p2 = solve_observation_plane(&p1, &pix2, board2, &bundle)?;
        let p4 = solve_observation_plane(&p1, &pix3, board3, &bundle)?;
        Ok(SpecularCalibration { bundle, planes: ObservationPlanes::new(p2, p4)? })
    }

    pub fn reflected_rays(&self, dots: &[DotObservation], exec: Exec) -> Vec<Result<IndexedRay>> {
        exec.map_slice(dots, |d| {
            reconstruct_reflected_ray(d.pix2, d.pix3, &self.planes).map(|ray| IndexedRay { id: d.id, ray })
        })
    }

    /// Reconstructs the surface; dots whose reflected ray cannot be formed
    /// are reported as rejected.
    pub fn reconstruct(&self, dots: &[DotObservation], gap_tol: f64, exec: Exec) -> Result<SurfaceReconstruction> {
        let mut rays = Vec::with_capacity(dots.len());
        let mut failed = Vec::new();
        for (d, r) in dots.iter().zip(self.reflected_rays(dots, exec)) {
            match r {
                Ok(r) => rays.push(r),
                Err(e) => failed.push(RejectedPoint { id: d.id, gap: None, reason: e }),
            }
        }
        let mut out = reconstruct_specular_surface(&self.bundle, &rays, gap_tol, exec)?;
        out.rejected.extend(failed);
        out.rejected.sort_by_key(|r| r.id);
        Ok(out)
    }
}
