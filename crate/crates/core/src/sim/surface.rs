use serde::{Deserialize, Serialize};

use crate::geom::{Point3, Ray3, Vec3};

/// Analytic weldment and weld-pool surfaces `z = h(x, y)`.
///
/// Groove variants run along the y axis, so their cross-section is a function
/// of x alone. Pool variants are dimples sunk into the plate `z = 0`; only the
/// part inside the rim is a mirror.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Surface {
    Flat {
        z: f64,
    },
    /// Symmetric V with full opening angle `opening` (radians).
    VGroove {
        opening: f64,
        depth: f64,
        #[serde(default)]
        center_x: f64,
    },
    Trapezoid {
        top_width: f64,
        bottom_width: f64,
        depth: f64,
        #[serde(default)]
        center_x: f64,
    },
    /// Trapezoid groove partly covered by a circular-arc bead whose chord of
    /// width `bead_width` lies at `z = bead_base`, centred `bead_offset` from
    /// the groove axis, rising `bead_height` above the chord.
    BeadOnGroove {
        top_width: f64,
        bottom_width: f64,
        depth: f64,
        bead_width: f64,
        bead_height: f64,
        bead_base: f64,
        #[serde(default)]
        bead_offset: f64,
    },
    /// Lower cap of a sphere of radius `radius`, `depth` deep at its centre.
    SphericalCap {
        radius: f64,
        depth: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// `z = curvature · (r² − rim²)` inside the rim.
    Paraboloid {
        curvature: f64,
        rim: f64,
        #[serde(default)]
        center: [f64; 2],
    },
}

impl Surface {
    pub fn validate(&self) -> Result<(), String> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("surface parameter `{name}` must be positive, got {v}"))
            }
        };
        match *self {
            Surface::Flat { z } => {
                if z.is_finite() {
                    Ok(())
                } else {
                    Err("surface parameter `z` must be finite".into())
                }
            }
            Surface::VGroove { opening, depth, .. } => {
                pos("depth", depth)?;
                if opening > 0.0 && opening < std::f64::consts::PI {
                    Ok(())
                } else {
                    Err(format!("surface parameter `opening` must be in (0, π), got {opening}"))
                }
            }
            Surface::Trapezoid { top_width, bottom_width, depth, .. } => {
                pos("depth", depth)?;
                pos("top_width", top_width)?;
                if bottom_width >= 0.0 && bottom_width < top_width {
                    Ok(())
                } else {
                    Err("surface parameter `bottom_width` must be in [0, top_width)".into())
                }
            }
            Surface::BeadOnGroove { top_width, bottom_width, depth, bead_width, bead_height, .. } => {
                pos("depth", depth)?;
                pos("top_width", top_width)?;
                pos("bead_width", bead_width)?;
                pos("bead_height", bead_height)?;
                if bottom_width >= 0.0 && bottom_width < top_width {
                    Ok(())
                } else {
                    Err("surface parameter `bottom_width` must be in [0, top_width)".into())
                }
            }
            Surface::SphericalCap { radius, depth, .. } => {
                pos("radius", radius)?;
                pos("depth", depth)?;
                if depth <= radius {
                    Ok(())
                } else {
                    Err("surface parameter `depth` must not exceed `radius`".into())
                }
            }
            Surface::Paraboloid { curvature, rim, .. } => {
                pos("curvature", curvature)?;
                pos("rim", rim)
            }
        }
    }

    /// Corner lines of piecewise-planar grooves as `(x, z)` pairs; the lines
    /// run parallel to the y axis.
    pub fn breaklines(&self) -> Vec<(f64, f64)> {
        match *self {
            Surface::VGroove { opening, depth, center_x } => {
                let w = depth * (opening / 2.0).tan();
                vec![(center_x - w, 0.0), (center_x, -depth), (center_x + w, 0.0)]
            }
            Surface::Trapezoid { top_width, bottom_width, depth, center_x } => vec![
                (center_x - top_width / 2.0, 0.0),
                (center_x - bottom_width / 2.0, -depth),
                (center_x + bottom_width / 2.0, -depth),
                (center_x + top_width / 2.0, 0.0),
            ],
            _ => Vec::new(),
        }
    }

    fn trapezoid_profile(x: f64, top: f64, bottom: f64, depth: f64) -> (f64, f64) {
        let ax = x.abs();
        let (ht, hb) = (top / 2.0, bottom / 2.0);
        if ax >= ht {
            (0.0, 0.0)
        } else if ax <= hb {
            (-depth, 0.0)
        } else {
            let slope = depth / (ht - hb);
            (-depth + (ax - hb) * slope, slope * x.signum())
        }
    }

    /// Height and gradient `(h, ∂h/∂x, ∂h/∂y)`.
    fn height_and_gradient(&self, x: f64, y: f64) -> (f64, f64, f64) {
        match *self {
            Surface::Flat { z } => (z, 0.0, 0.0),
            Surface::VGroove { opening, depth, center_x } => {
                let w = depth * (opening / 2.0).tan();
                let (h, g) = Self::trapezoid_profile(x - center_x, 2.0 * w, 0.0, depth);
                (h, g, 0.0)
            }
            Surface::Trapezoid { top_width, bottom_width, depth, center_x } => {
                let (h, g) = Self::trapezoid_profile(x - center_x, top_width, bottom_width, depth);
                (h, g, 0.0)
            }
            Surface::BeadOnGroove {
                top_width,
                bottom_width,
                depth,
                bead_width,
                bead_height,
                bead_base,
                bead_offset,
            } => {
                let (hg, gg) = Self::trapezoid_profile(x, top_width, bottom_width, depth);
                let c = bead_width / 2.0;
                let u = x - bead_offset;
                if u.abs() < c {
                    // Circle through (±c, 0) and (0, h).
                    let rad = (c * c + bead_height * bead_height) / (2.0 * bead_height);
                    let zc = bead_height - rad;
                    let s = (rad * rad - u * u).sqrt();
                    let hb = bead_base + zc + s;
                    if hb > hg {
                        return (hb, -u / s, 0.0);
                    }
                }
                (hg, gg, 0.0)
            }
            Surface::SphericalCap { radius, depth, center } => {
                let (dx, dy) = (x - center[0], y - center[1]);
                let r2 = dx * dx + dy * dy;
                let rim2 = radius * radius - (radius - depth).powi(2);
                if r2 >= rim2 {
                    (0.0, 0.0, 0.0)
                } else {
                    let s = (radius * radius - r2).sqrt();
                    ((radius - depth) - s, dx / s, dy / s)
                }
            }
            Surface::Paraboloid { curvature, rim, center } => {
                let (dx, dy) = (x - center[0], y - center[1]);
                let r2 = dx * dx + dy * dy;
                if r2 >= rim * rim {
                    (0.0, 0.0, 0.0)
                } else {
                    (curvature * (r2 - rim * rim), 2.0 * curvature * dx, 2.0 * curvature * dy)
                }
            }
        }
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        self.height_and_gradient(x, y).0
    }

    /// Upward unit normal.
    pub fn normal(&self, x: f64, y: f64) -> Vec3 {
        let (_, gx, gy) = self.height_and_gradient(x, y);
        Vec3::new(-gx, -gy, 1.0).normalize()
    }

    /// Whether `(x, y)` lies on the mirror part of a pool surface.
    pub fn is_mirror(&self, x: f64, y: f64) -> bool {
        match *self {
            Surface::SphericalCap { radius, depth, center } => {
                let r2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
                r2 < radius * radius - (radius - depth).powi(2)
            }
            Surface::Paraboloid { rim, center, .. } => {
                (x - center[0]).powi(2) + (y - center[1]).powi(2) < rim * rim
            }
            _ => true,
        }
    }

    fn height_bounds(&self) -> (f64, f64) {
        match *self {
            Surface::Flat { z } => (z, z),
            Surface::VGroove { depth, .. } | Surface::Trapezoid { depth, .. } => (-depth, 0.0),
            Surface::BeadOnGroove { depth, bead_base, bead_height, .. } => {
                (-depth, (bead_base + bead_height).max(0.0))
            }
            Surface::SphericalCap { depth, .. } => (-depth, 0.0),
            Surface::Paraboloid { curvature, rim, .. } => (-curvature * rim * rim, 0.0),
        }
    }

    /// First crossing of the ray with the surface, travelling along `+dir`
    /// from above. Returns the ray parameter and the point.
    pub fn intersect(&self, ray: &Ray3) -> Option<(f64, Point3)> {
        let d = ray.dir();
        let o = ray.origin;
        match *self {
            Surface::Flat { z } => {
                if d.z.abs() < 1e-15 {
                    return None;
                }
                let t = (z - o.z) / d.z;
                (t >= 0.0).then(|| {
                    let mut p = ray.at(t);
                    p.z = z;
                    (t, p)
                })
            }
            Surface::SphericalCap { radius, depth, center } => {
                // The flat plate is hit first unless the ray enters the rim.
                let (t0, p0) = Surface::Flat { z: 0.0 }.intersect(ray)?;
                let rim2 = radius * radius - (radius - depth).powi(2);
                if (p0.x - center[0]).powi(2) + (p0.y - center[1]).powi(2) >= rim2 {
                    return Some((t0, p0));
                }
                let c = Point3::new(center[0], center[1], radius - depth);
                let oc = o - c;
                let b = oc.dot(d);
                let cc = oc.norm_squared() - radius * radius;
                let disc = b * b - cc;
                if disc < 0.0 {
                    return None;
                }
                // Far root: the lower sheet of the sphere.
                let sq = disc.sqrt();
                let t = if b > 0.0 { cc / (-b - sq) } else { -b + sq };
                Some((t, ray.at(t)))
            }
            Surface::Paraboloid { curvature, rim, center } => {
                let (t0, p0) = Surface::Flat { z: 0.0 }.intersect(ray)?;
                if (p0.x - center[0]).powi(2) + (p0.y - center[1]).powi(2) >= rim * rim {
                    return Some((t0, p0));
                }
                // κ((ox+t dx)² + (oy+t dy)² − rim²) = oz + t dz
                let (ox, oy) = (o.x - center[0], o.y - center[1]);
                let a = curvature * (d.x * d.x + d.y * d.y);
                let b = 2.0 * curvature * (ox * d.x + oy * d.y) - d.z;
                let c = curvature * (ox * ox + oy * oy - rim * rim) - o.z;
                let t = if a.abs() < 1e-300 {
                    -c / b
                } else {
                    let disc = b * b - 4.0 * a * c;
                    if disc < 0.0 {
                        return None;
                    }
                    let sq = disc.sqrt();
                    let q = -0.5 * (b + b.signum() * sq);
                    let (r1, r2) = (q / a, c / q);
                    // Smallest root beyond the plate crossing.
                    let mut roots = [r1, r2];
                    roots.sort_by(|x, y| x.total_cmp(y));
                    *roots.iter().find(|r| **r >= t0 - 1e-9)?
                };
                Some((t, ray.at(t)))
            }
            _ => self.intersect_height_field(ray),
        }
    }

    fn intersect_height_field(&self, ray: &Ray3) -> Option<(f64, Point3)> {
        let d = ray.dir();
        if d.z >= 0.0 {
            return None;
        }
        let (lo, hi) = self.height_bounds();
        let o = ray.origin;
        let t_top = ((hi + 1.0 - o.z) / d.z).max(0.0);
        let t_bot = (lo - 1.0 - o.z) / d.z;
        if t_bot <= t_top {
            return None;
        }
        let g = |t: f64| {
            let p = ray.at(t);
            p.z - self.height(p.x, p.y)
        };
        let steps = 4096;
        let mut a = t_top;
        let mut ga = g(a);
        if ga <= 0.0 {
            return None;
        }
        for k in 1..=steps {
            let b = t_top + (t_bot - t_top) * k as f64 / steps as f64;
            let gb = g(b);
            if gb <= 0.0 {
                let (mut l, mut r) = (a, b);
                for _ in 0..200 {
                    let m = 0.5 * (l + r);
                    if m <= l || m >= r {
                        break;
                    }
                    if g(m) > 0.0 {
                        l = m;
                    } else {
                        r = m;
                    }
                }
                let t = if g(l).abs() <= g(r).abs() { l } else { r };
                let mut p = ray.at(t);
                p.z = self.height(p.x, p.y);
                return Some((t, p));
            }
            a = b;
            ga = gb;
        }
        let _ = ga;
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_geometry() {
        let s = Surface::SphericalCap { radius: 10.0, depth: 1.0, center: [0.0, 0.0] };
        assert!((s.height(0.0, 0.0) + 1.0).abs() < 1e-15);
        let rim = (100.0f64 - 81.0).sqrt();
        assert!(s.height(rim - 1e-9, 0.0).abs() < 1e-6);
        assert_eq!(s.normal(0.0, 0.0), Vec3::z());
        // Analytic normal points at the sphere centre.
        let (x, y) = (1.5, -2.0);
        let p = Point3::new(x, y, s.height(x, y));
        let to_c = (Point3::new(0.0, 0.0, 9.0) - p).normalize();
        assert!((s.normal(x, y) - to_c).amax() < 1e-14);
    }

    #[test]
    fn ray_hits_cap_exactly() {
        let s = Surface::SphericalCap { radius: 10.0, depth: 1.0, center: [0.0, 0.0] };
        let c = Point3::new(-20.0, 3.0, 20.0);
        for aim in [(0.0, 0.0), (1.0, 2.0), (-3.0, 0.5), (2.9, -2.9)] {
            let ray = Ray3::through(&c, &Point3::new(aim.0, aim.1, 0.0)).unwrap();
            let (_, p) = s.intersect(&ray).unwrap();
            assert!(ray.distance_to(&p) < 1e-12);
            assert!((p.z - s.height(p.x, p.y)).abs() < 1e-12);
        }
        // Past the rim the plate is hit.
        let ray = Ray3::through(&c, &Point3::new(8.0, 0.0, 0.0)).unwrap();
        let (_, p) = s.intersect(&ray).unwrap();
        assert!(!s.is_mirror(p.x, p.y));
    }

    #[test]
    fn ray_hits_groove_flank() {
        let s = Surface::VGroove { opening: std::f64::consts::FRAC_PI_2, depth: 3.0, center_x: 0.0 };
        let ray = Ray3::new(Point3::new(1.0, 0.0, 50.0), -Vec3::z()).unwrap();
        let (_, p) = s.intersect(&ray).unwrap();
        assert!((p.z + 2.0).abs() < 1e-12, "{p}");
        let ray = Ray3::through(&Point3::new(-30.0, 0.0, 40.0), &Point3::new(-1.0, 0.0, -2.0)).unwrap();
        let (_, p) = s.intersect(&ray).unwrap();
        assert!((p - Point3::new(-1.0, 0.0, -2.0)).amax() < 1e-12, "{p}");
    }

    #[test]
    fn paraboloid_hit() {
        let s = Surface::Paraboloid { curvature: 0.05, rim: 4.0, center: [0.0, 0.0] };
        let ray = Ray3::through(&Point3::new(-20.0, 0.0, 20.0), &Point3::new(1.0, 1.0, 0.0)).unwrap();
        let (_, p) = s.intersect(&ray).unwrap();
        assert!((p.z - s.height(p.x, p.y)).abs() < 1e-12);
        assert!(ray.distance_to(&p) < 1e-12);
    }
}
