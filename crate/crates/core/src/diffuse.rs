//! Structured-light calibration and reconstruction for diffuse weldment
//! surfaces.
//!
//! The camera is modelled by a 3×4 projection matrix with `m₃₄ = 1`
//! (11 parameters, [`CameraDlt`]); the laser-line generator or projector only
//! by the two rows that determine its `y` coordinate (7 parameters,
//! [`ProjectorDlt`]). Both are fitted by linear least squares, and a
//! phase-tagged pixel is triangulated by solving the 3×3 system formed by the
//! two camera rows and the projector row.

use nalgebra as na;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geom::{Mat3, Point3, Vec3};
use crate::homography::{Homography, Point2};

type Mat34 = na::Matrix3x4<f64>;

/// `Z_c [x_c, y_c, 1]ᵀ = M [X, Y, Z, 1]ᵀ` with `M` row-major in `theta`
/// (`m₁₁ … m₁₄, m₂₁ … m₂₄, m₃₁ … m₃₃`) and `m₃₄ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraDlt {
    pub theta: [f64; 11],
}

/// `Z_p [·, y_p, 1]ᵀ = [m₂ ; m₃] [X, Y, Z, 1]ᵀ` with
/// `theta = (m₂₁ … m₂₄, m₃₁ … m₃₃)` and `m₃₄ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectorDlt {
    pub theta: [f64; 7],
}

/// A camera pixel tagged with the laser/projector coordinate (phase) of the
/// stripe it lies on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTaggedPixel {
    pub xc: f64,
    pub yc: f64,
    pub ylg: f64,
}

impl CameraDlt {
    /// Normalises an arbitrary projection matrix so `m₃₄ = 1`.
    pub fn from_matrix(m: &Mat34) -> Result<Self> {
        let s = m[(2, 3)];
        if s.abs() < 1e-12 * m.amax() {
            return Err(Error::DegenerateInput("m34 vanishes; world origin lies on the camera's principal plane"));
        }
        let m = m / s;
        let mut theta = [0.0; 11];
        for (k, v) in theta.iter_mut().enumerate() {
            *v = m[(k / 4, k % 4)];
        }
        let cam = CameraDlt { theta };
        if cam.matrix().fixed_view::<3, 3>(0, 0).determinant().abs() < 1e-300 {
            return Err(Error::DegenerateInput("left 3×3 block of the camera matrix is singular"));
        }
        Ok(cam)
    }

    pub fn matrix(&self) -> Mat34 {
        let t = &self.theta;
        Mat34::new(t[0], t[1], t[2], t[3], t[4], t[5], t[6], t[7], t[8], t[9], t[10], 1.0)
    }

    pub fn project(&self, p: &Point3) -> Result<Point2> {
        let v = self.matrix() * p.to_homogeneous();
        if v.z.abs() < 1e-14 {
            return Err(Error::PointAtInfinity);
        }
        Ok((v.x / v.z, v.y / v.z))
    }

    /// Homography from world `(X, Y)` on the plane `Z = height` to pixels.
    pub fn homography_at_height(&self, height: f64) -> Result<Homography> {
        let m = self.matrix();
        let h = Mat3::from_columns(&[
            m.column(0).into_owned(),
            m.column(1).into_owned(),
            m.column(2) * height + m.column(3),
        ]);
        Homography::new(h)
    }

    /// World point on `Z = height` seen at `pixel`.
    pub fn lift_to_height(&self, pixel: Point2, height: f64) -> Result<Point3> {
        let (x, y) = self.homography_at_height(height)?.inverse().apply(pixel)?;
        Ok(Point3::new(x, y, height))
    }
}

impl ProjectorDlt {
    pub fn from_matrix(m: &Mat34) -> Result<Self> {
        let s = m[(2, 3)];
        if s.abs() < 1e-12 * m.amax() {
            return Err(Error::DegenerateInput("m34 vanishes for the projector"));
        }
        let m = m / s;
        Ok(ProjectorDlt {
            theta: [
                m[(1, 0)],
                m[(1, 1)],
                m[(1, 2)],
                m[(1, 3)],
                m[(2, 0)],
                m[(2, 1)],
                m[(2, 2)],
            ],
        })
    }

    pub fn project_y(&self, p: &Point3) -> Result<f64> {
        let t = &self.theta;
        let num = t[0] * p.x + t[1] * p.y + t[2] * p.z + t[3];
        let den = t[4] * p.x + t[5] * p.y + t[6] * p.z + 1.0;
        if den.abs() < 1e-14 {
            return Err(Error::PointAtInfinity);
        }
        Ok(num / den)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CameraCalibration {
    pub camera: CameraDlt,
    /// Reprojection RMS over the calibration points (pixels).
    pub rms: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ProjectorCalibration {
    pub projector: ProjectorDlt,
    /// RMS of the `y_p` residual over the calibration points.
    pub rms: f64,
}

/// Linear least squares with rank check. Columns are scaled to unit norm
/// before factorising; the minimiser is that of the normal equations.
fn solve_least_squares(a: na::DMatrix<f64>, b: na::DVector<f64>) -> Result<na::DVector<f64>> {
    let n = a.ncols();
    let scales: Vec<f64> = (0..n)
        .map(|c| {
            let s = a.column(c).norm();
            if s > 0.0 { s } else { 1.0 }
        })
        .collect();
    let mut scaled = a;
    for (c, s) in scales.iter().enumerate() {
        scaled.column_mut(c).unscale_mut(*s);
    }
    let sv = scaled.singular_values();
    let smax = sv.max();
    let rank = sv.iter().filter(|s| **s > 1e-10 * smax).count();
    if rank < n {
        return Err(Error::RankDeficient { rank, needed: n });
    }
    let qr = scaled.qr();
    let qtb = qr.q().transpose() * b;
    let r = qr.r();
    let y = r
        .solve_upper_triangular(&qtb)
        .ok_or(Error::IllConditioned("triangular factor is singular"))?;
    let x = na::DVector::from_iterator(n, y.iter().zip(&scales).map(|(v, s)| v / s));
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::IllConditioned("least-squares solution is not finite"));
    }
    Ok(x)
}

/// Fits the 11-parameter camera model to world ↔ pixel pairs.
pub fn calibrate_camera_dlt(pairs: &[(Point3, Point2)]) -> Result<CameraCalibration> {
    if pairs.len() < 6 {
        return Err(Error::pre(format!(
            "camera DLT needs at least 6 points, got {}",
            pairs.len()
        )));
    }
    let mut a = na::DMatrix::<f64>::zeros(2 * pairs.len(), 11);
    let mut b = na::DVector::<f64>::zeros(2 * pairs.len());
    for (k, (w, (x, y))) in pairs.iter().enumerate() {
        let r = 2 * k;
        let row1 = [w.x, w.y, w.z, 1.0, 0.0, 0.0, 0.0, 0.0, -x * w.x, -x * w.y, -x * w.z];
        let row2 = [0.0, 0.0, 0.0, 0.0, w.x, w.y, w.z, 1.0, -y * w.x, -y * w.y, -y * w.z];
        for c in 0..11 {
            a[(r, c)] = row1[c];
            a[(r + 1, c)] = row2[c];
        }
        b[r] = *x;
        b[r + 1] = *y;
    }
    let sol = solve_least_squares(a, b)?;
    let mut theta = [0.0; 11];
    theta.copy_from_slice(sol.as_slice());
    let camera = CameraDlt { theta };
    let mut ss = 0.0;
    for (w, (x, y)) in pairs {
        let (px, py) = camera.project(w)?;
        ss += (px - x).powi(2) + (py - y).powi(2);
    }
    Ok(CameraCalibration {
        camera,
        rms: (ss / pairs.len() as f64).sqrt(),
    })
}

/// Fits the 7-parameter projector row model to world ↔ `y_p` pairs.
pub fn calibrate_projector_dlt(pairs: &[(Point3, f64)]) -> Result<ProjectorCalibration> {
    if pairs.len() < 7 {
        return Err(Error::pre(format!(
            "projector DLT needs at least 7 points, got {}",
            pairs.len()
        )));
    }
    let mut a = na::DMatrix::<f64>::zeros(pairs.len(), 7);
    let mut b = na::DVector::<f64>::zeros(pairs.len());
    for (k, (w, yp)) in pairs.iter().enumerate() {
        let row = [w.x, w.y, w.z, 1.0, -yp * w.x, -yp * w.y, -yp * w.z];
        for c in 0..7 {
            a[(k, c)] = row[c];
        }
        b[k] = *yp;
    }
    let sol = solve_least_squares(a, b)?;
    let mut theta = [0.0; 7];
    theta.copy_from_slice(sol.as_slice());
    let projector = ProjectorDlt { theta };
    let mut ss = 0.0;
    for (w, yp) in pairs {
        ss += (projector.project_y(w)? - yp).powi(2);
    }
    Ok(ProjectorCalibration {
        projector,
        rms: (ss / pairs.len() as f64).sqrt(),
    })
}

/// One laser-line sample observed on the calibration plane: its world
/// position on the plane, the camera pixel, and the phase of its line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    pub world_xy: Point2,
    pub pixel: Point2,
    pub phase: f64,
}

/// Heights of the two calibration plane positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPlaneConfig {
    pub z0: f64,
    pub z1: f64,
}

impl Default for TwoPlaneConfig {
    fn default() -> Self {
        TwoPlaneConfig { z0: 0.0, z1: 1.0 }
    }
}

/// Calibrated camera and projector for the diffuse system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffuseCalibration {
    pub camera: CameraDlt,
    pub projector: ProjectorDlt,
    pub residual_c: f64,
    pub residual_p: f64,
}

/// Calibrates camera and projector from the line endpoints and midpoints seen
/// on the reference plane at two heights. Point `i` of both sets must belong
/// to the same laser line.
pub fn two_plane_calibration(
    plane0: &[PlanePoint],
    plane1: &[PlanePoint],
    config: TwoPlaneConfig,
) -> Result<DiffuseCalibration> {
    if plane0.len() != plane1.len() {
        return Err(Error::LabelMismatch);
    }
    if plane0.iter().zip(plane1).any(|(a, b)| a.phase != b.phase) {
        return Err(Error::LabelMismatch);
    }
    let lifted = |pts: &[PlanePoint], z: f64| -> Vec<(Point3, PlanePoint)> {
        pts.iter()
            .map(|p| (Point3::new(p.world_xy.0, p.world_xy.1, z), *p))
            .collect()
    };
    let all: Vec<_> = lifted(plane0, config.z0)
        .into_iter()
        .chain(lifted(plane1, config.z1))
        .collect();
    let cam_pairs: Vec<_> = all.iter().map(|(w, p)| (*w, p.pixel)).collect();
    let proj_pairs: Vec<_> = all.iter().map(|(w, p)| (*w, p.phase)).collect();
    let cam = calibrate_camera_dlt(&cam_pairs)?;
    let proj = calibrate_projector_dlt(&proj_pairs)?;
    Ok(DiffuseCalibration {
        camera: cam.camera,
        projector: proj.projector,
        residual_c: cam.rms,
        residual_p: proj.rms,
    })
}

/// Triangulates a phase-tagged pixel against the camera and projector models.
///
/// Solves `A [X, Y, Z]ᵀ = [x_c − m₁₄, y_c − m₂₄, y_lg − m₂₄ᵖ]ᵀ` where the rows
/// of `A` are `m₁ − x_c m₃`, `m₂ − y_c m₃` (camera) and `m₂ᵖ − y_lg m₃ᵖ`
/// (projector), each restricted to the first three columns.
pub fn reconstruct_point(
    p: &PhaseTaggedPixel,
    cam: &CameraDlt,
    proj: &ProjectorDlt,
) -> Result<Point3> {
    let c = &cam.theta;
    let q = &proj.theta;
    let a = Mat3::new(
        c[0] - p.xc * c[8],
        c[1] - p.xc * c[9],
        c[2] - p.xc * c[10],
        c[4] - p.yc * c[8],
        c[5] - p.yc * c[9],
        c[6] - p.yc * c[10],
        q[0] - p.ylg * q[4],
        q[1] - p.ylg * q[5],
        q[2] - p.ylg * q[6],
    );
    let rhs = Vec3::new(p.xc - c[3], p.yc - c[7], p.ylg - q[3]);
    let row_norms: f64 = (0..3).map(|r| a.row(r).norm()).product();
    let det = a.determinant();
    if !(det.abs() > 1e-12 * row_norms) {
        return Err(Error::SingularGeometry);
    }
    let x = a.lu().solve(&rhs).ok_or(Error::SingularGeometry)?;
    Ok(Point3::from(x))
}

/// [`reconstruct_point`] over a batch; failures are kept per point.
pub fn reconstruct_batch(
    pixels: &[PhaseTaggedPixel],
    cam: &CameraDlt,
    proj: &ProjectorDlt,
    exec: Exec,
) -> Vec<Result<Point3>> {
    exec.map_slice(pixels, |p| reconstruct_point(p, cam, proj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::RigidTransform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Camera 250 mm above the origin, tilted 20° about x, f = 1800 px.
    fn synthetic_camera() -> CameraDlt {
        let k = na::Matrix3::new(1800.0, 0.0, 640.0, 0.0, 1800.0, 480.0, 0.0, 0.0, 1.0);
        let look = RigidTransform::from_axis_angle(&Vec3::x(), std::f64::consts::PI + 0.35, Vec3::zeros());
        let centre = Vec3::new(3.0, -90.0, 240.0);
        let t = -(look.rotation * centre);
        let mut rt = Mat34::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&look.rotation);
        rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        CameraDlt::from_matrix(&(k * rt)).unwrap()
    }

    /// Laser generator whose planes all contain the y direction.
    fn synthetic_projector() -> ProjectorDlt {
        let k = na::Matrix3::new(900.0, 0.0, 0.0, 0.0, 900.0, 0.0, 0.0, 0.0, 1.0);
        // Projector y axis along world x, z axis pointing down.
        let r = Mat3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0);
        let centre = Vec3::new(-40.0, 0.0, 200.0);
        let t = -(r * centre);
        let mut rt = Mat34::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        ProjectorDlt::from_matrix(&(k * rt)).unwrap()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-30.0..30.0),
                    rng.random_range(-30.0..30.0),
                    rng.random_range(-5.0..5.0),
                )
            })
            .collect()
    }

    #[test]
    fn camera_fixed_point_and_exact_reprojection() {
        let cam = synthetic_camera();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pairs: Vec<_> = random_points(&mut rng, 28)
            .into_iter()
            .map(|w| (w, cam.project(&w).unwrap()))
            .collect();
        let fit = calibrate_camera_dlt(&pairs).unwrap();
        assert!(fit.rms < 1e-9, "rms {}", fit.rms);
        for (a, b) in fit.camera.theta.iter().zip(&cam.theta) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn coplanar_camera_points_are_rank_deficient() {
        let cam = synthetic_camera();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pairs: Vec<_> = random_points(&mut rng, 20)
            .into_iter()
            .map(|mut w| {
                w.z = 0.0;
                (w, cam.project(&w).unwrap())
            })
            .collect();
        assert!(matches!(
            calibrate_camera_dlt(&pairs),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn noisy_camera_generalises() {
        let cam = synthetic_camera();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.2).unwrap();
        for _ in 0..20 {
            let pairs: Vec<_> = random_points(&mut rng, 28)
                .into_iter()
                .map(|w| {
                    let (x, y) = cam.project(&w).unwrap();
                    (w, (x + noise.sample(&mut rng), y + noise.sample(&mut rng)))
                })
                .collect();
            let fit = calibrate_camera_dlt(&pairs).unwrap();
            let held = random_points(&mut rng, 200);
            let ss: f64 = held
                .iter()
                .map(|w| {
                    let a = fit.camera.project(w).unwrap();
                    let b = cam.project(w).unwrap();
                    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
                })
                .sum();
            let rms = (ss / held.len() as f64).sqrt();
            assert!(rms <= 0.5, "held-out rms {rms}");
        }
    }

    #[test]
    fn projector_fixed_point_and_underdetermined() {
        let proj = synthetic_projector();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pairs: Vec<_> = random_points(&mut rng, 30)
            .into_iter()
            .map(|w| (w, proj.project_y(&w).unwrap()))
            .collect();
        let fit = calibrate_projector_dlt(&pairs).unwrap();
        assert!(fit.rms < 1e-10, "rms {}", fit.rms);
        assert!(matches!(
            calibrate_projector_dlt(&pairs[..6]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn reconstruction_round_trip() {
        let cam = synthetic_camera();
        let proj = synthetic_projector();
        let w = Point3::new(10.0, 20.0, 5.0);
        let (xc, yc) = cam.project(&w).unwrap();
        let ylg = proj.project_y(&w).unwrap();
        let p = reconstruct_point(&PhaseTaggedPixel { xc, yc, ylg }, &cam, &proj).unwrap();
        assert!((p - w).amax() < 1e-8);
        let (x2, y2) = cam.project(&p).unwrap();
        assert!((x2 - xc).abs() < 1e-8 && (y2 - yc).abs() < 1e-8);
        assert!((proj.project_y(&p).unwrap() - ylg).abs() < 1e-8);
    }

    #[test]
    fn camera_ray_inside_laser_plane_is_singular() {
        // Camera and projector share their optical centre, so every camera
        // ray lies in some laser plane.
        let cam = synthetic_camera();
        let m = cam.matrix();
        let proj = ProjectorDlt::from_matrix(&m).unwrap();
        let w = Point3::new(1.0, 2.0, 0.5);
        let (xc, yc) = cam.project(&w).unwrap();
        let ylg = proj.project_y(&w).unwrap();
        assert_eq!(
            reconstruct_point(&PhaseTaggedPixel { xc, yc, ylg }, &cam, &proj).unwrap_err(),
            Error::SingularGeometry
        );
    }

    #[test]
    fn two_plane_label_checks() {
        let cam = synthetic_camera();
        let proj = synthetic_projector();
        let make = |z: f64| -> Vec<PlanePoint> {
            let mut v = Vec::new();
            for line in 0..5 {
                let phase = -60.0 + 30.0 * line as f64;
                for s in 0..3 {
                    // Walk along the laser plane on the height z.
                    let y = -10.0 + 10.0 * s as f64;
                    // Solve project_y(x, y, z) = phase for x (linear).
                    let t = &proj.theta;
                    let x = (phase * (t[5] * y + t[6] * z + 1.0) - t[1] * y - t[2] * z - t[3])
                        / (t[0] - phase * t[4]);
                    let w = Point3::new(x, y, z);
                    v.push(PlanePoint {
                        world_xy: (x, y),
                        pixel: cam.project(&w).unwrap(),
                        phase,
                    });
                }
            }
            v
        };
        let p0 = make(0.0);
        let p1 = make(1.0);
        let cal = two_plane_calibration(&p0, &p1, TwoPlaneConfig::default()).unwrap();
        assert!(cal.residual_c < 1e-9 && cal.residual_p < 1e-9);

        let mut shuffled = p1.clone();
        shuffled.swap(0, 4);
        assert_eq!(
            two_plane_calibration(&p0, &shuffled, TwoPlaneConfig::default()).unwrap_err(),
            Error::LabelMismatch
        );
        let same = TwoPlaneConfig { z0: 0.0, z1: 0.0 };
        assert!(matches!(
            two_plane_calibration(&p0, &p0, same),
            Err(Error::RankDeficient { .. })
        ));
    }
}
