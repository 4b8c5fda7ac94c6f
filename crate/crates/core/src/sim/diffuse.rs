use nalgebra as na;
use serde::{Deserialize, Serialize};

use super::camera::CameraConfig;
use super::surface::Surface;
use crate::diffuse::{PlanePoint, ProjectorDlt};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geom::{Point3, Ray3};
use crate::homography::Point2;

/// A laser generator emitting `lines` parallel planes. Every plane contains
/// the world x direction and the emitter centre; plane `i` meets `z = 0`
/// along `y = first_y + i · spacing`, and its projector coordinate (phase)
/// is `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserLines {
    pub center: [f64; 3],
    pub lines: usize,
    pub first_y: f64,
    pub spacing: f64,
    /// Extent of each stripe in x, at `z = 0`.
    pub x_range: [f64; 2],
    /// Sample count along each stripe, before breakline points are added.
    pub samples: usize,
}

impl LaserLines {
    pub fn center(&self) -> Point3 {
        Point3::from(self.center)
    }

    /// `y` where plane `phase` meets height `z`.
    pub fn y_at(&self, phase: f64, z: f64) -> f64 {
        let y0 = self.first_y + phase * self.spacing;
        let l = self.center();
        y0 + (l.y - y0) * z / l.z
    }

    /// Projector rows 2–3: `y_p = (m₂·X) / (m₃·X)` is the fractional line
    /// index of the plane through `X`.
    pub fn projector(&self) -> Result<ProjectorDlt> {
        let l = self.center();
        if !(l.z > 0.0) || !(self.spacing > 0.0) {
            return Err(Error::pre("laser centre must lie above z = 0 and line spacing must be positive"));
        }
        // y_hit = L_y + (Y − L_y) L_z / (L_z − Z) and y_p = (y_hit − first_y) / spacing.
        let s = self.spacing;
        let a = l.y - self.first_y;
        let m = na::Matrix3x4::new(
            0.0, 0.0, 0.0, 0.0, //
            0.0, l.z / s, -a / s, (a * l.z - l.y * l.z) / s, //
            0.0, 0.0, -1.0, l.z,
        );
        ProjectorDlt::from_matrix(&m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffuseScene {
    pub surface: Surface,
    pub camera: CameraConfig,
    pub laser: LaserLines,
    /// Heights of the two calibration plane positions.
    #[serde(default = "default_plane_heights")]
    pub plane_heights: [f64; 2],
}

fn default_plane_heights() -> [f64; 2] {
    [0.0, 1.0]
}

impl Default for DiffuseScene {
    /// Trapezoid groove along y, five laser stripes across it.
    fn default() -> Self {
        DiffuseScene {
            surface: Surface::Trapezoid { top_width: 10.0, bottom_width: 4.0, depth: 3.0, center_x: 0.0 },
            camera: CameraConfig::looking_at(Point3::new(40.0, 60.0, 160.0), Point3::origin(), nalgebra::Vector3::z()),
            laser: LaserLines {
                center: [0.0, -50.0, 120.0],
                lines: 5,
                first_y: -4.0,
                spacing: 2.0,
                x_range: [-10.0, 10.0],
                samples: 81,
            },
            plane_heights: default_plane_heights(),
        }
    }
}

/// One rendered stripe point with its exact world position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripeSample {
    pub world: Point3,
    pub pixel: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stripe {
    pub line: usize,
    pub phase: f64,
    /// Ordered by world x.
    pub samples: Vec<StripeSample>,
}

impl DiffuseScene {
    pub fn validate(&self) -> Result<()> {
        self.surface.validate().map_err(Error::Precondition)?;
        if self.laser.lines == 0 || self.laser.samples < 2 {
            return Err(Error::pre("laser needs at least one line and two samples per line"));
        }
        if !(self.laser.x_range[1] > self.laser.x_range[0]) {
            return Err(Error::pre("laser x_range must be increasing"));
        }
        self.laser.projector().map(|_| ())
    }
}

/// Laser stripes on the surface as seen by the camera.
pub fn render_diffuse(scene: &DiffuseScene, exec: Exec) -> Result<Vec<Stripe>> {
    scene.validate()?;
    let cam = scene.camera.build()?;
    let laser = &scene.laser;
    let stripes = exec.map_range(laser.lines, |i| -> Result<Stripe> {
        let phase = i as f64;
        let world = stripe_points(&scene.surface, laser, i)?;
        let samples = world
            .into_iter()
            .map(|w| Ok(StripeSample { world: w, pixel: cam.project(&w)? }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Stripe { line: i, phase, samples })
    });
    stripes.into_iter().collect()
}

/// World points of stripe `line`: the laser plane sampled at evenly spaced
/// aim points plus its exact crossings with the surface's breaklines,
/// ordered by x.
pub fn stripe_points(surface: &Surface, laser: &LaserLines, line: usize) -> Result<Vec<Point3>> {
    let l = laser.center();
    let [x0, x1] = laser.x_range;
    let n = laser.samples;
    let phase = line as f64;
    let mut world: Vec<Point3> = Vec::with_capacity(n + 4);
    for k in 0..n {
        let x = x0 + (x1 - x0) * k as f64 / (n - 1) as f64;
        let aim = Point3::new(x, laser.y_at(phase, 0.0), 0.0);
        if let Some((_, p)) = surface.intersect(&Ray3::through(&l, &aim)?) {
            world.push(p);
        }
    }
    for (bx, bz) in surface.breaklines() {
        // Keep breakline points inside the swept x extent of the stripe.
        let x_on_ref = l.x + (bx - l.x) * l.z / (l.z - bz);
        if x_on_ref >= x0 && x_on_ref <= x1 {
            world.push(Point3::new(bx, laser.y_at(phase, bz), bz));
        }
    }
    if world.is_empty() {
        return Err(Error::NoIntersection);
    }
    world.sort_by(|a, b| a.x.total_cmp(&b.x));
    world.dedup_by(|a, b| (a.x - b.x).abs() < 1e-12);
    Ok(world)
}

/// Endpoints and midpoint of every stripe on the flat plane `z = height`.
pub fn two_plane_points(scene: &DiffuseScene, height: f64) -> Result<Vec<PlanePoint>> {
    scene.validate()?;
    let cam = scene.camera.build()?;
    let laser = &scene.laser;
    let [x0, x1] = laser.x_range;
    let mut out = Vec::with_capacity(laser.lines * 3);
    for i in 0..laser.lines {
        let phase = i as f64;
        let y = laser.y_at(phase, height);
        for x in [x0, 0.5 * (x0 + x1), x1] {
            let w = Point3::new(x, y, height);
            out.push(PlanePoint { world_xy: (x, y), pixel: cam.project(&w)?, phase });
        }
    }
    Ok(out)
}
