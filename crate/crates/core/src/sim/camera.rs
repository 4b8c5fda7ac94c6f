use nalgebra as na;
use serde::{Deserialize, Serialize};

use crate::diffuse::CameraDlt;
use crate::error::{Error, Result};
use crate::geom::{Mat3, Point3, Ray3, Vec3};
use crate::homography::{Homography, Point2};

/// Ideal pinhole camera. `rotation` maps world directions into the camera
/// frame (x right, y down, z forward); `f`, `cx`, `cy` are in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeCamera {
    pub center: Point3,
    pub rotation: Mat3,
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Serializable pose description used in scene files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub center: [f64; 3],
    pub target: [f64; 3],
    #[serde(default = "default_up")]
    pub up: [f64; 3],
    #[serde(default = "default_f")]
    pub f: f64,
    #[serde(default = "default_cx")]
    pub cx: f64,
    #[serde(default = "default_cy")]
    pub cy: f64,
}

fn default_up() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}
fn default_f() -> f64 {
    2000.0
}
fn default_cx() -> f64 {
    1024.0
}
fn default_cy() -> f64 {
    768.0
}

impl CameraConfig {
    pub fn looking_at(center: Point3, target: Point3, up: Vec3) -> Self {
        CameraConfig {
            center: center.into(),
            target: target.into(),
            up: up.into(),
            f: default_f(),
            cx: default_cx(),
            cy: default_cy(),
        }
    }

    pub fn build(&self) -> Result<PinholeCamera> {
        PinholeCamera::look_at(
            Point3::from(self.center),
            Point3::from(self.target),
            Vec3::from(self.up),
            self.f,
            self.cx,
            self.cy,
        )
    }
}

impl PinholeCamera {
    pub fn look_at(center: Point3, target: Point3, up: Vec3, f: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(f > 0.0) {
            return Err(Error::pre("focal length must be positive"));
        }
        let z = (target - center)
            .try_normalize(1e-12)
            .ok_or(Error::DegenerateInput("camera target coincides with its centre"))?;
        let x = z
            .cross(&up)
            .try_normalize(1e-9)
            .ok_or(Error::DegenerateInput("camera up vector parallel to the viewing axis"))?;
        let y = z.cross(&x);
        let rotation = Mat3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        Ok(PinholeCamera { center, rotation, f, cx, cy })
    }

    pub fn intrinsic_matrix(&self) -> Mat3 {
        Mat3::new(self.f, 0.0, self.cx, 0.0, self.f, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn project(&self, p: &Point3) -> Result<Point2> {
        let q = self.rotation * (p - self.center);
        if q.z <= 1e-12 {
            return Err(Error::NonPhysical("point behind the camera"));
        }
        Ok((self.f * q.x / q.z + self.cx, self.f * q.y / q.z + self.cy))
    }

    /// Viewing ray through a pixel, starting at the camera centre.
    pub fn pixel_ray(&self, pixel: Point2) -> Ray3 {
        let d = Vec3::new((pixel.0 - self.cx) / self.f, (pixel.1 - self.cy) / self.f, 1.0);
        Ray3::new(self.center, self.rotation.transpose() * d).expect("finite pixel")
    }

    /// `K [R | −R c]`.
    pub fn matrix(&self) -> na::Matrix3x4<f64> {
        let t = -(self.rotation * self.center.coords);
        let mut rt = na::Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        rt.set_column(3, &t);
        self.intrinsic_matrix() * rt
    }

    pub fn to_camera_dlt(&self) -> Result<CameraDlt> {
        CameraDlt::from_matrix(&self.matrix())
    }

    /// Homography from metric coordinates `(u, v)` of the plane point
    /// `origin + u e1 + v e2` to pixels.
    pub fn plane_homography(&self, frame: &PlaneFrame) -> Result<Homography> {
        let r = self.rotation;
        let m = Mat3::from_columns(&[r * frame.e1, r * frame.e2, r * (frame.origin - self.center)]);
        Homography::new(self.intrinsic_matrix() * m)
    }
}

/// An orthonormal in-plane coordinate frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFrame {
    pub origin: Point3,
    pub e1: Vec3,
    pub e2: Vec3,
}

impl PlaneFrame {
    /// Frame on the plane through `origin` with normal `normal`; `e1` is the
    /// projection of world x (or y when x is nearly normal).
    pub fn new(origin: Point3, normal: &Vec3) -> Result<Self> {
        let n = normal
            .try_normalize(1e-15)
            .ok_or(Error::DegenerateInput("plane normal must be nonzero"))?;
        let seed = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let e1 = (seed - n * seed.dot(&n)).normalize();
        let e2 = n.cross(&e1);
        Ok(PlaneFrame { origin, e1, e2 })
    }

    pub fn normal(&self) -> Vec3 {
        self.e1.cross(&self.e2)
    }

    pub fn to_world(&self, uv: Point2) -> Point3 {
        self.origin + self.e1 * uv.0 + self.e2 * uv.1
    }

    pub fn to_local(&self, p: &Point3) -> Point2 {
        let w = p - self.origin;
        (w.dot(&self.e1), w.dot(&self.e2))
    }
}
