use serde::{Deserialize, Serialize};

use super::camera::{CameraConfig, PinholeCamera, PlaneFrame};
use super::noise::pixel_noise;
use super::surface::Surface;
use crate::diffuse::CameraDlt;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geom::{intersect_ray_plane, reflect_direction, Plane, Point3, Ray3, Vec3};
use crate::homography::{Homography, Point2};
use crate::specular::{DotObservation, IndexedRay, StackObservation};

/// Laser dots aimed at a grid on `z = 0`: `lines` rows along y, spaced
/// `line_spacing` in x, each with `samples` dots spread over `line_length`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserFan {
    pub center: [f64; 3],
    #[serde(default)]
    pub aim_center: [f64; 2],
    pub lines: usize,
    pub samples: usize,
    pub line_spacing: f64,
    pub line_length: f64,
}

impl LaserFan {
    pub fn center(&self) -> Point3 {
        Point3::from(self.center)
    }

    pub fn len(&self) -> usize {
        self.lines * self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn aim_point(&self, id: usize) -> Point3 {
        let (i, j) = (id / self.samples, id % self.samples);
        let u = i as f64 - (self.lines as f64 - 1.0) / 2.0;
        let v = if self.samples > 1 {
            j as f64 / (self.samples as f64 - 1.0) - 0.5
        } else {
            0.0
        };
        Point3::new(
            self.aim_center[0] + u * self.line_spacing,
            self.aim_center[1] + v * self.line_length,
            0.0,
        )
    }

    pub fn rays(&self) -> Result<Vec<IndexedRay>> {
        (0..self.len())
            .map(|id| Ok(IndexedRay { id, ray: Ray3::through(&self.center(), &self.aim_point(id))? }))
            .collect()
    }
}

/// A planar optical element with a circular aperture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aperture {
    pub center: [f64; 3],
    pub normal: [f64; 3],
    pub radius: f64,
}

impl Aperture {
    pub fn plane(&self) -> Result<Plane> {
        Plane::from_point_normal(&Point3::from(self.center), &Vec3::from(self.normal))
    }

    pub fn frame(&self) -> Result<PlaneFrame> {
        PlaneFrame::new(Point3::from(self.center), &Vec3::from(self.normal))
    }

    /// Forward hit within the aperture.
    fn hit(&self, ray: &Ray3) -> Option<Point3> {
        let plane = self.plane().ok()?;
        let h = intersect_ray_plane(ray, &plane).ok()?;
        let inside = (h.point - Point3::from(self.center)).norm() <= self.radius;
        (h.t > 0.0 && inside).then_some(h.point)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecularScene {
    pub surface: Surface,
    pub laser: LaserFan,
    pub splitter: Aperture,
    pub p2: Aperture,
    pub p3: Aperture,
    pub c1: CameraConfig,
    pub c2: CameraConfig,
    pub c3: CameraConfig,
    #[serde(default = "default_heights")]
    pub heights: Vec<f64>,
}

fn default_heights() -> Vec<f64> {
    (-3..=3).map(f64::from).collect()
}

fn unit(v: [f64; 3]) -> Vec3 {
    Vec3::from(v).normalize()
}

/// Distances (mm) that define the canonical specular layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalLayout {
    /// Laser centre distance from the pool centre, at 45° incidence.
    pub laser_distance: f64,
    /// Splitter distance along the reflected axis.
    pub splitter_distance: f64,
    /// `p2` distance beyond the splitter along the transmitted axis.
    pub p2_standoff: f64,
    /// `p3` distance from the splitter along the folded axis.
    pub p3_standoff: f64,
    pub camera_distance: f64,
}

impl Default for CanonicalLayout {
    fn default() -> Self {
        CanonicalLayout {
            laser_distance: 20.0,
            splitter_distance: 60.0,
            p2_standoff: 160.0,
            p3_standoff: 40.0,
            camera_distance: 120.0,
        }
    }
}

impl Default for SpecularScene {
    fn default() -> Self {
        SpecularScene::canonical(&CanonicalLayout::default())
    }
}

impl SpecularScene {
    /// Spherical-cap pool under an oblique laser. The reflected axis `a`
    /// leaves the pool at 45°; the splitter folds the reflected branch onto
    /// +y, so the virtual `p4` lies `p3_standoff` beyond the splitter along
    /// `a`. Both imaging planes are tilted a few degrees off their axes, and
    /// `c2`, `c3` view them 30° off their normals.
    pub fn canonical(layout: &CanonicalLayout) -> Self {
        let a = unit([1.0, 0.0, 1.0]);
        let y = Vec3::y();
        let s0 = a * layout.splitter_distance;
        let splitter_n = (a - y).normalize();
        let n2 = (a + Vec3::new(0.0, 0.06, 0.0) + Vec3::new(-0.03, 0.0, 0.03)).normalize();
        let n3 = (y + Vec3::new(0.05, 0.0, -0.04)).normalize();
        let o2 = s0 + a * layout.p2_standoff;
        let o3 = s0 + y * layout.p3_standoff;
        let deg30 = 30f64.to_radians();
        let cam2 = o2 + (n2 * deg30.cos() + y * deg30.sin()) * layout.camera_distance;
        let cam3 = o3 + (n3 * deg30.cos() + a * deg30.sin()) * layout.camera_distance;
        let to_arr = |v: Vec3| -> [f64; 3] { v.into() };
        let l = layout.laser_distance / 2f64.sqrt();
        SpecularScene {
            surface: Surface::SphericalCap { radius: 10.0, depth: 1.0, center: [0.0, 0.0] },
            laser: LaserFan {
                center: [-l, 0.0, l],
                aim_center: [0.0, 0.0],
                lines: 5,
                samples: 31,
                line_spacing: 1.0,
                line_length: 6.0,
            },
            splitter: Aperture { center: to_arr(s0), normal: to_arr(splitter_n), radius: 80.0 },
            p2: Aperture { center: to_arr(o2), normal: to_arr(n2), radius: 300.0 },
            p3: Aperture { center: to_arr(o3), normal: to_arr(n3), radius: 300.0 },
            c1: CameraConfig::looking_at(Point3::new(5.0, -30.0, 100.0), Point3::origin(), Vec3::y()),
            c2: CameraConfig::looking_at(Point3::from(cam2), Point3::from(o2), Vec3::z()),
            c3: CameraConfig::looking_at(Point3::from(cam3), Point3::from(o3), Vec3::z()),
            heights: default_heights(),
        }
    }
}

/// Outcome of tracing one laser dot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayStatus {
    Ok,
    MissedSplitter,
    MissedPlane,
}

/// Ground truth for one successfully traced dot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecularHit {
    pub surface_point: Point3,
    pub normal: Vec3,
    pub reflected: Ray3,
    pub p2_point: Point3,
    pub p3_point: Point3,
    /// Mirror of the `p3` point across the splitter.
    pub p4_point: Point3,
    pub pix2: Point2,
    pub pix3: Point2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecularRecord {
    pub id: usize,
    pub status: RayStatus,
    pub incident: Ray3,
    pub hit: Option<SpecularHit>,
}

/// Cameras and exact plane-to-image maps of a scene.
#[derive(Debug, Clone, Copy)]
pub struct SpecularSensors {
    pub c1: PinholeCamera,
    pub c2: PinholeCamera,
    pub c3: PinholeCamera,
    pub frame2: PlaneFrame,
    pub frame3: PlaneFrame,
    /// Metric `p2` coordinates to `c2` pixels.
    pub board2: Homography,
    /// Metric `p3` coordinates to `c3` pixels.
    pub board3: Homography,
}

impl SpecularScene {
    pub fn validate(&self) -> Result<()> {
        self.surface.validate().map_err(Error::Precondition)?;
        if self.laser.is_empty() {
            return Err(Error::pre("laser fan has no dots"));
        }
        if self.heights.len() < 2 {
            return Err(Error::pre("need at least two calibration heights"));
        }
        Ok(())
    }

    pub fn sensors(&self) -> Result<SpecularSensors> {
        let c1 = self.c1.build()?;
        let c2 = self.c2.build()?;
        let c3 = self.c3.build()?;
        let frame2 = self.p2.frame()?;
        let frame3 = self.p3.frame()?;
        Ok(SpecularSensors {
            board2: c2.plane_homography(&frame2)?,
            board3: c3.plane_homography(&frame3)?,
            c1,
            c2,
            c3,
            frame2,
            frame3,
        })
    }

    /// The same scene with the pool replaced by a flat mirror at `z = 0`.
    pub fn with_flat_mirror(&self) -> Self {
        SpecularScene { surface: Surface::Flat { z: 0.0 }, ..self.clone() }
    }
}

fn trace(scene: &SpecularScene, sensors: &SpecularSensors, splitter: &Plane, incident: &Ray3) -> Result<SpecularHit, RayStatus> {
    let (_, p) = scene.surface.intersect(incident).ok_or(RayStatus::MissedPlane)?;
    if !scene.surface.is_mirror(p.x, p.y) {
        return Err(RayStatus::MissedPlane);
    }
    let normal = scene.surface.normal(p.x, p.y);
    let reflected = Ray3::new(p, reflect_direction(incident.dir(), &normal)).map_err(|_| RayStatus::MissedPlane)?;
    let s = scene.splitter.hit(&reflected).ok_or(RayStatus::MissedSplitter)?;
    let p2_point = scene.p2.hit(&reflected).ok_or(RayStatus::MissedPlane)?;
    let folded = Ray3::new(s, splitter.reflect_vector(reflected.dir())).map_err(|_| RayStatus::MissedPlane)?;
    let p3_point = scene.p3.hit(&folded).ok_or(RayStatus::MissedPlane)?;
    let pix2 = sensors.c2.project(&p2_point).map_err(|_| RayStatus::MissedPlane)?;
    let pix3 = sensors.c3.project(&p3_point).map_err(|_| RayStatus::MissedPlane)?;
    Ok(SpecularHit {
        surface_point: p,
        normal,
        reflected,
        p2_point,
        p3_point,
        p4_point: splitter.reflect_point(&p3_point),
        pix2,
        pix3,
    })
}

/// Traces every laser dot off the surface, through the splitter, onto both
/// imaging planes.
pub fn render_specular(scene: &SpecularScene, exec: Exec) -> Result<Vec<SpecularRecord>> {
    scene.validate()?;
    let sensors = scene.sensors()?;
    let splitter = scene.splitter.plane()?;
    let rays = scene.laser.rays()?;
    Ok(exec.map_slice(&rays, |r| match trace(scene, &sensors, &splitter, &r.ray) {
        Ok(hit) => SpecularRecord { id: r.id, status: RayStatus::Ok, incident: r.ray, hit: Some(hit) },
        Err(status) => SpecularRecord { id: r.id, status, incident: r.ray, hit: None },
    }))
}

/// Exact crossing of one incident ray with the calibration plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackPoint {
    pub id: usize,
    pub height: f64,
    pub point: Point3,
    /// Camera `c1` pixel.
    pub pixel: Point2,
}

/// Where each incident ray meets the diffuse plane `z = h` for every
/// configured height, ordered by ray id then height.
pub fn render_calibration_stacks(scene: &SpecularScene, exec: Exec) -> Result<Vec<StackPoint>> {
    scene.validate()?;
    let c1 = scene.c1.build()?;
    let rays = scene.laser.rays()?;
    let per_ray = exec.map_slice(&rays, |r| {
        scene
            .heights
            .iter()
            .map(|&h| {
                let hit = intersect_ray_plane(&r.ray, &Plane::horizontal(h))?;
                let mut point = hit.point;
                point.z = h;
                Ok(StackPoint { id: r.id, height: h, point, pixel: c1.project(&point)? })
            })
            .collect::<Result<Vec<_>>>()
    });
    Ok(per_ray.into_iter().collect::<Result<Vec<_>>>()?.concat())
}

/// Noise domains keep the pixel noise of different observation sets
/// independent under one seed.
const DOMAIN_STACKS: u64 = 1;
const DOMAIN_MIRROR_C2: u64 = 2;
const DOMAIN_MIRROR_C3: u64 = 3;
const DOMAIN_POOL_C2: u64 = 4;
const DOMAIN_POOL_C3: u64 = 5;

/// A complete specular experiment: calibration and measurement
/// observations (optionally noisy) with the matching ground truth.
#[derive(Debug, Clone)]
pub struct SpecularDataset {
    pub c1: CameraDlt,
    pub board2: Homography,
    pub board3: Homography,
    pub stacks: Vec<StackObservation>,
    pub mirror: Vec<DotObservation>,
    pub pool: Vec<DotObservation>,
    pub records: Vec<SpecularRecord>,
}

impl SpecularDataset {
    pub fn generate(scene: &SpecularScene, sigma: f64, seed: u64, exec: Exec) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::pre("noise sigma must be finite and non-negative"));
        }
        let sensors = scene.sensors()?;
        let jitter = |p: Point2, domain: u64, k: usize| {
            let (dx, dy) = pixel_noise(sigma, seed, domain, k as u64);
            (p.0 + dx, p.1 + dy)
        };
        let stacks = render_calibration_stacks(scene, exec)?
            .iter()
            .enumerate()
            .map(|(k, s)| StackObservation { id: s.id, height: s.height, pixel: jitter(s.pixel, DOMAIN_STACKS, k) })
            .collect();
        let dots = |records: &[SpecularRecord], d2: u64, d3: u64| -> Vec<DotObservation> {
            records
                .iter()
                .filter_map(|r| r.hit.map(|h| (r.id, h)))
                .enumerate()
                .map(|(k, (id, h))| DotObservation { id, pix2: jitter(h.pix2, d2, k), pix3: jitter(h.pix3, d3, k) })
                .collect()
        };
        let mirror_records = render_specular(&scene.with_flat_mirror(), exec)?;
        let records = render_specular(scene, exec)?;
        Ok(SpecularDataset {
            c1: sensors.c1.to_camera_dlt()?,
            board2: sensors.board2,
            board3: sensors.board3,
            stacks,
            mirror: dots(&mirror_records, DOMAIN_MIRROR_C2, DOMAIN_MIRROR_C3),
            pool: dots(&records, DOMAIN_POOL_C2, DOMAIN_POOL_C3),
            records,
        })
    }

    /// Ground-truth surface point of each traced dot.
    pub fn truth(&self) -> Vec<(usize, Point3)> {
        self.records
            .iter()
            .filter_map(|r| r.hit.map(|h| (r.id, h.surface_point)))
            .collect()
    }
}
