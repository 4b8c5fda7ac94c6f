//! Active stereo: triangulation by ray intersection for a general camera pair,
//! depth from disparity for a rectified pair, and order-based matching of
//! laser stripes between the two views.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geom::{closest_approach, Mat3, Point3, Ray3, RayIntersection, Vec3};
use crate::homography::Point2;

/// Pinhole camera whose image plane sits at `z = focal` in its own frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoCamera {
    pub center: Point3,
    /// World to camera rotation.
    pub rotation: Mat3,
    pub focal: f64,
    pub principal: Point2,
}

impl StereoCamera {
    /// Axis-aligned camera at `center`.
    pub fn aligned(center: Point3, focal: f64, principal: Point2) -> Self {
        StereoCamera { center, rotation: Mat3::identity(), focal, principal }
    }

    /// Ray `O + t (p − O)` through the image point `p` on the plane `z = f`.
    pub fn pixel_ray(&self, pixel: Point2) -> Result<Ray3> {
        let d = Vec3::new(pixel.0 - self.principal.0, pixel.1 - self.principal.1, self.focal);
        Ray3::new(self.center, self.rotation.transpose() * d)
    }

    pub fn project(&self, p: &Point3) -> Result<Point2> {
        let q = self.rotation * (p - self.center);
        if q.z <= 0.0 {
            return Err(Error::NonPhysical("point behind the camera"));
        }
        Ok((self.focal * q.x / q.z + self.principal.0, self.focal * q.y / q.z + self.principal.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoRig {
    pub right: StereoCamera,
    pub left: StereoCamera,
}

impl StereoRig {
    pub fn new(right: StereoCamera, left: StereoCamera) -> Result<Self> {
        if !(right.focal > 0.0 && left.focal > 0.0) {
            return Err(Error::pre("focal lengths must be positive"));
        }
        let rig = StereoRig { right, left };
        if !(rig.baseline() > 0.0) {
            return Err(Error::pre("camera centres must differ"));
        }
        Ok(rig)
    }

    pub fn baseline(&self) -> f64 {
        (self.right.center - self.left.center).norm()
    }
}

/// Row-aligned pair sharing focal length `f` (px) and principal point; the
/// left camera sits at the origin, the right one at `(b, 0, 0)`, both looking
/// along +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectifiedStereoRig {
    pub f: f64,
    pub b: f64,
    pub cx: f64,
    pub cy: f64,
}

impl RectifiedStereoRig {
    pub fn new(f: f64, b: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(f > 0.0 && b > 0.0) || !cx.is_finite() || !cy.is_finite() {
            return Err(Error::pre("rectified rig needs f > 0, b > 0 and a finite principal point"));
        }
        Ok(RectifiedStereoRig { f, b, cx, cy })
    }

    pub fn general(&self) -> StereoRig {
        let pp = (self.cx, self.cy);
        StereoRig {
            right: StereoCamera::aligned(Point3::new(self.b, 0.0, 0.0), self.f, pp),
            left: StereoCamera::aligned(Point3::origin(), self.f, pp),
        }
    }

    /// Left and right images of a point in the rig frame.
    pub fn project(&self, p: &Point3) -> Result<(Point2, Point2)> {
        let g = self.general();
        Ok((g.left.project(p)?, g.right.project(p)?))
    }

    /// Point at depth `z` seen at left-image column `x_l` and row `row`.
    pub fn back_project(&self, x_l: f64, row: f64, z: f64) -> Point3 {
        Point3::new((x_l - self.cx) * z / self.f, (row - self.cy) * z / self.f, z)
    }
}

/// Intersects the viewing rays of a right-image point `p` and a left-image
/// point `p_left`; the result carries the gap between the rays.
pub fn triangulate_ray_intersection(p: Point2, p_left: Point2, rig: &StereoRig, gap_tol: f64) -> Result<RayIntersection> {
    let r = rig.right.pixel_ray(p)?;
    let l = rig.left.pixel_ray(p_left)?;
    let hit = closest_approach(&r, &l)?;
    if hit.gap > gap_tol {
        return Err(Error::GapExceeded { gap: hit.gap, tol: gap_tol });
    }
    Ok(hit)
}

/// Depth from disparity, `Z = f b / (x_l − x_r)`.
pub fn triangulate_rectified(x_l: f64, x_r: f64, rig: &RectifiedStereoRig) -> Result<f64> {
    let d = x_l - x_r;
    if !(d > 0.0) {
        return Err(Error::NonPositiveDisparity(d));
    }
    Ok(rig.f * rig.b / d)
}

/// An extracted stripe: image points `(x, row)` with strictly increasing row.
pub type Polyline = Vec<Point2>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisparitySample {
    pub row: f64,
    pub x_left: f64,
    pub x_right: f64,
}

impl DisparitySample {
    pub fn disparity(&self) -> f64 {
        self.x_left - self.x_right
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineCorrespondence {
    pub left: usize,
    pub right: usize,
    pub samples: Vec<DisparitySample>,
}

fn check_polyline(p: &Polyline) -> Result<()> {
    if p.len() < 2 {
        return Err(Error::pre("stripe polylines need at least two points"));
    }
    if p.windows(2).any(|w| !(w[1].1 > w[0].1)) {
        return Err(Error::pre("stripe polyline rows must be strictly increasing"));
    }
    Ok(())
}

/// Column of the polyline at `row`, by linear interpolation.
fn x_at(p: &Polyline, row: f64) -> Option<f64> {
    if row < p[0].1 || row > p[p.len() - 1].1 {
        return None;
    }
    let k = p.partition_point(|q| q.1 < row);
    if k == 0 {
        return Some(p[0].0);
    }
    let (a, b) = (p[k - 1], p[k]);
    if b.1 == row {
        return Some(b.0);
    }
    let s = (row - a.1) / (b.1 - a.1);
    Some(a.0 + s * (b.0 - a.0))
}

fn row_span(p: &Polyline) -> (f64, f64) {
    (p[0].1, p[p.len() - 1].1)
}

fn order_at(lines: &[Polyline], row: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..lines.len()).collect();
    idx.sort_by(|&a, &b| {
        let xa = x_at(&lines[a], row).unwrap_or(f64::NAN);
        let xb = x_at(&lines[b], row).unwrap_or(f64::NAN);
        xa.total_cmp(&xb)
    });
    idx
}

/// Pairs stripes by their left-to-right order and samples the disparity at
/// every integer row both stripes of a pair cover.
pub fn match_lines_ordered(left: &[Polyline], right: &[Polyline]) -> Result<Vec<LineCorrespondence>> {
    if left.len() != right.len() {
        return Err(Error::CountMismatch { left: left.len(), right: right.len() });
    }
    if left.is_empty() {
        return Ok(Vec::new());
    }
    for p in left.iter().chain(right) {
        check_polyline(p)?;
    }
    let lo = left.iter().chain(right).map(|p| row_span(p).0).fold(f64::MIN, f64::max);
    let hi = left.iter().chain(right).map(|p| row_span(p).1).fold(f64::MAX, f64::min);
    if lo > hi {
        return Err(Error::pre("no image row is covered by every stripe"));
    }
    let reference = 0.5 * (lo + hi);
    let ol = order_at(left, reference);
    let or = order_at(right, reference);
    if ol != or {
        return Err(Error::OrderViolation);
    }
    let mut out = Vec::with_capacity(left.len());
    for &k in &ol {
        let (l, r) = (&left[k], &right[k]);
        let start = row_span(l).0.max(row_span(r).0).ceil() as i64;
        let end = row_span(l).1.min(row_span(r).1).floor() as i64;
        let mut samples = Vec::new();
        for row in start..=end {
            let row = row as f64;
            if let (Some(x_left), Some(x_right)) = (x_at(l, row), x_at(r, row)) {
                let s = DisparitySample { row, x_left, x_right };
                if !(s.disparity() > 0.0) {
                    return Err(Error::NonPositiveDisparity(s.disparity()));
                }
                samples.push(s);
            }
        }
        out.push(LineCorrespondence { left: k, right: k, samples });
    }
    // Neighbouring stripes must keep their order on every shared row.
    for side in [left, right] {
        for w in ol.windows(2) {
            let (a, b) = (&side[w[0]], &side[w[1]]);
            let start = row_span(a).0.max(row_span(b).0).ceil() as i64;
            let end = row_span(a).1.min(row_span(b).1).floor() as i64;
            for row in start..=end {
                let row = row as f64;
                if let (Some(xa), Some(xb)) = (x_at(a, row), x_at(b, row)) {
                    if xa > xb {
                        return Err(Error::OrderViolation);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Depth from disparity and pinhole back-projection for every matched
/// sample, in the left camera frame.
pub fn disparities_to_cloud(matches: &[LineCorrespondence], rig: &RectifiedStereoRig, exec: Exec) -> Result<Vec<Point3>> {
    let samples: Vec<DisparitySample> = matches.iter().flat_map(|m| m.samples.iter().copied()).collect();
    exec.map_slice(&samples, |s| {
        let z = triangulate_rectified(s.x_left, s.x_right, rig)?;
        Ok(rig.back_project(s.x_left, s.row, z))
    })
    .into_iter()
    .collect()
}
