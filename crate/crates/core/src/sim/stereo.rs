use serde::{Deserialize, Serialize};

use super::diffuse::{stripe_points, LaserLines};
use super::surface::Surface;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geom::{Mat3, Point3, Vec3};
use crate::stereo::{Polyline, RectifiedStereoRig};

/// Rectified rig looking straight down on laser stripes. The rig frame has
/// its origin at the left camera, x along world y (the baseline), y along
/// world x and z pointing down, so image rows run across the stripes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereoScene {
    pub surface: Surface,
    pub laser: LaserLines,
    pub rig: RectifiedStereoRig,
    /// World position of the left camera.
    pub left_center: [f64; 3],
}

impl Default for StereoScene {
    fn default() -> Self {
        StereoScene {
            surface: Surface::VGroove { opening: 1.2, depth: 3.0, center_x: 0.0 },
            laser: LaserLines {
                center: [0.0, -50.0, 120.0],
                lines: 5,
                first_y: -4.0,
                spacing: 2.0,
                x_range: [-8.0, 8.0],
                samples: 41,
            },
            rig: RectifiedStereoRig { f: 2400.0, b: 40.0, cx: 1024.0, cy: 768.0 },
            left_center: [0.0, -20.0, 200.0],
        }
    }
}

impl StereoScene {
    fn world_to_rig(&self) -> (Mat3, Point3) {
        let r = Mat3::from_rows(&[Vec3::y().transpose(), Vec3::x().transpose(), (-Vec3::z()).transpose()]);
        (r, Point3::from(self.left_center))
    }

    pub fn to_rig_frame(&self, p: &Point3) -> Point3 {
        let (r, c) = self.world_to_rig();
        Point3::from(r * (p - c))
    }

    pub fn to_world(&self, p: &Point3) -> Point3 {
        let (r, c) = self.world_to_rig();
        c + r.transpose() * p.coords
    }
}

/// Stripes as seen by both cameras, with their exact rig-frame geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoRender {
    pub left: Vec<Polyline>,
    pub right: Vec<Polyline>,
    /// Rig-frame vertices of each stripe; straight between vertices on
    /// piecewise-planar surfaces.
    pub truth: Vec<Vec<Point3>>,
}

pub fn render_stereo(scene: &StereoScene, exec: Exec) -> Result<StereoRender> {
    scene.surface.validate().map_err(Error::Precondition)?;
    let per_line = exec.map_range(scene.laser.lines, |i| -> Result<(Polyline, Polyline, Vec<Point3>)> {
        let pts: Vec<Point3> = stripe_points(&scene.surface, &scene.laser, i)?
            .iter()
            .map(|p| scene.to_rig_frame(p))
            .collect();
        let mut left = Vec::with_capacity(pts.len());
        let mut right = Vec::with_capacity(pts.len());
        for p in &pts {
            let (l, r) = scene.rig.project(p)?;
            left.push(l);
            right.push(r);
        }
        Ok((left, right, pts))
    });
    let mut out = StereoRender { left: Vec::new(), right: Vec::new(), truth: Vec::new() };
    for r in per_line {
        let (l, rr, t) = r?;
        out.left.push(l);
        out.right.push(rr);
        out.truth.push(t);
    }
    Ok(out)
}
