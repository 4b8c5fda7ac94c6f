//! Plane-to-plane homographies: DLT estimation with isotropic normalisation,
//! application, and decomposition into a rigid pose for a known pinhole.

use nalgebra as na;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Mat3, RigidTransform, Vec3};

pub type Point2 = (f64, f64);

/// A nonsingular 3×3 projective map, scaled so `h₈ = 1` when possible and to
/// unit Frobenius norm otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography {
    m: Mat3,
}

impl Homography {
    pub fn new(m: Mat3) -> Result<Self> {
        let fro = m.norm();
        if !(fro > 0.0) || !m.iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateInput("homography must be finite and nonzero"));
        }
        let unit = m / fro;
        if unit.determinant().abs() <= 1e-14 {
            return Err(Error::DegenerateInput("homography is singular"));
        }
        let m = if unit[(2, 2)].abs() > 1e-12 {
            m / m[(2, 2)]
        } else {
            unit
        };
        Ok(Homography { m })
    }

    pub fn identity() -> Self {
        Homography { m: Mat3::identity() }
    }

    /// Row-major `[h₀ … h₈]`.
    pub fn from_row_slice(h: &[f64; 9]) -> Result<Self> {
        Homography::new(Mat3::from_row_slice(h))
    }

    pub fn to_row_array(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = self.m[(r, c)];
            }
        }
        out
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.m
    }

    pub fn inverse(&self) -> Self {
        let inv = self.m.try_inverse().expect("nonsingular by construction");
        Homography::new(inv).expect("inverse of a nonsingular map")
    }

    /// `(x′, y′)` with `x′ = (h₀x + h₁y + h₂)/(h₆x + h₇y + h₈)` and likewise
    /// for `y′`.
    pub fn apply(&self, p: Point2) -> Result<Point2> {
        let v = self.m * Vec3::new(p.0, p.1, 1.0);
        if v.z.abs() < 1e-14 {
            return Err(Error::PointAtInfinity);
        }
        Ok((v.x / v.z, v.y / v.z))
    }

    /// Largest entry difference after fixing scale and sign.
    pub fn max_diff(&self, other: &Homography) -> f64 {
        let a = self.m / self.m.norm();
        let b = other.m / other.m.norm();
        let sign = if a.dot(&b) < 0.0 { -1.0 } else { 1.0 };
        (a - b * sign).amax()
    }
}

/// Pinhole intrinsics with square pixels and no skew.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(f: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(f > 0.0) || !cx.is_finite() || !cy.is_finite() {
            return Err(Error::pre("intrinsics need f > 0 and a finite principal point"));
        }
        Ok(Intrinsics { f, cx, cy })
    }

    pub fn matrix(&self) -> Mat3 {
        Mat3::new(self.f, 0.0, self.cx, 0.0, self.f, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Mat3 {
        let fi = 1.0 / self.f;
        Mat3::new(fi, 0.0, -self.cx * fi, 0.0, fi, -self.cy * fi, 0.0, 0.0, 1.0)
    }
}

/// An estimated homography with its fit quality.
#[derive(Debug, Clone, Copy)]
pub struct HomographyFit {
    pub h: Homography,
    /// Smallest singular value of the normalised design matrix.
    pub algebraic_residual: f64,
    /// RMS distance between mapped sources and destinations.
    pub rms_transfer: f64,
}

/// Similarity moving the centroid to the origin and the mean distance to √2.
fn normalizer(pts: &[Point2]) -> Mat3 {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (cx, cy) = (sx / n, sy / n);
    let mean = pts
        .iter()
        .map(|p| ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let s = if mean > 0.0 { std::f64::consts::SQRT_2 / mean } else { 1.0 };
    Mat3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn dehomogenize(v: &Vec3) -> Result<Point2> {
    if v.z.abs() < 1e-300 || !v.iter().all(|x| x.is_finite()) {
        return Err(Error::PointAtInfinity);
    }
    Ok((v.x / v.z, v.y / v.z))
}

/// DLT estimate of `H` with `dst ~ H · src`, from at least four
/// correspondences given in homogeneous coordinates.
pub fn estimate_homography_homogeneous(src: &[Vec3], dst: &[Vec3]) -> Result<HomographyFit> {
    let s: Vec<Point2> = src.iter().map(dehomogenize).collect::<Result<_>>()?;
    let d: Vec<Point2> = dst.iter().map(dehomogenize).collect::<Result<_>>()?;
    estimate_homography(&s, &d)
}

/// DLT estimate of the homography mapping each `src[i]` onto `dst[i]`.
pub fn estimate_homography(src: &[Point2], dst: &[Point2]) -> Result<HomographyFit> {
    if src.len() != dst.len() {
        return Err(Error::pre("correspondence lists differ in length"));
    }
    if src.len() < 4 {
        return Err(Error::pre(format!(
            "homography needs at least 4 correspondences, got {}",
            src.len()
        )));
    }
    let ts = normalizer(src);
    let td = normalizer(dst);
    let rows = (2 * src.len()).max(9);
    let mut a = na::DMatrix::<f64>::zeros(rows, 9);
    for (k, (p, q)) in src.iter().zip(dst).enumerate() {
        let p = ts * Vec3::new(p.0, p.1, 1.0);
        let q = td * Vec3::new(q.0, q.1, 1.0);
        let (x, y) = (p.x, p.y);
        let (u, v) = (q.x, q.y);
        let r = 2 * k;
        a[(r, 0)] = x;
        a[(r, 1)] = y;
        a[(r, 2)] = 1.0;
        a[(r, 6)] = -u * x;
        a[(r, 7)] = -u * y;
        a[(r, 8)] = -u;
        a[(r + 1, 3)] = x;
        a[(r + 1, 4)] = y;
        a[(r + 1, 5)] = 1.0;
        a[(r + 1, 6)] = -v * x;
        a[(r + 1, 7)] = -v * y;
        a[(r + 1, 8)] = -v;
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let rank = order.iter().filter(|&&i| sv[i] > 1e-10 * sv[order[0]]).count();
    if rank < 8 {
        return Err(Error::RankDeficient { rank, needed: 8 });
    }
    let null = order[8];
    let hn = Mat3::from_fn(|r, c| v_t[(null, r * 3 + c)]);
    let td_inv = td.try_inverse().expect("similarity");
    let h = Homography::new(td_inv * hn * ts)?;
    let mut ss = 0.0;
    for (p, q) in src.iter().zip(dst) {
        let m = h.apply(*p)?;
        ss += (m.0 - q.0).powi(2) + (m.1 - q.1).powi(2);
    }
    Ok(HomographyFit {
        h,
        algebraic_residual: sv[null],
        rms_transfer: (ss / src.len() as f64).sqrt(),
    })
}

/// Rigid pose recovered from `H ~ K [r₁ r₂ t]`.
#[derive(Debug, Clone, Copy)]
pub struct PlanePose {
    /// Maps plane-local coordinates `(x, y, 0)` into the camera frame.
    pub transform: RigidTransform,
    /// Frobenius distance between the raw column estimate and the nearest
    /// rotation.
    pub ortho_residual: f64,
}

/// Decomposes a plane-to-image homography for a camera with intrinsics `k`.
///
/// `r₁`, `r₂` and `t` are all scaled by `1/‖K⁻¹h₁‖`, `r₃ = r₁ × r₂`, the sign
/// is chosen so the plane lies in front of the camera (`t_z > 0`), and the
/// raw rotation is projected onto SO(3).
pub fn decompose_homography(h: &Homography, k: &Intrinsics) -> Result<PlanePose> {
    let b = k.inverse_matrix() * h.matrix();
    let h1 = b.column(0).into_owned();
    let h2 = b.column(1).into_owned();
    let h3 = b.column(2).into_owned();
    let lambda = h1.norm();
    if lambda < 1e-12 {
        return Err(Error::NonPhysical("‖K⁻¹h₁‖ vanishes"));
    }
    let sign = if h3.z < 0.0 { -1.0 } else { 1.0 };
    let s = sign / lambda;
    let r1 = h1 * s;
    let r2 = h2 * s;
    let t = h3 * s;
    let r3 = r1.cross(&r2);
    let raw = Mat3::from_columns(&[r1, r2, r3]);
    let rotation = nearest_rotation(&raw);
    Ok(PlanePose {
        transform: RigidTransform {
            rotation,
            translation: t,
        },
        ortho_residual: (raw - rotation).norm(),
    })
}

/// Closest proper rotation in the Frobenius sense.
pub fn nearest_rotation(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        // Flip the axis of the smallest singular value.
        let mut flip = Mat3::identity();
        let imin = svd.singular_values.imin();
        flip[(imin, imin)] = -1.0;
        r = u * flip * v_t;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn grid() -> Vec<Point2> {
        let mut v = Vec::new();
        for i in 0..5 {
            for j in 0..4 {
                v.push((i as f64 * 7.0 - 14.0, j as f64 * 5.0 - 8.0));
            }
        }
        v
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> RigidTransform {
        let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let angle = rng.random_range(-0.6..0.6);
        let t = Vec3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(80.0..200.0));
        RigidTransform::from_axis_angle(&axis, angle, t)
    }

    fn forward_h(k: &Intrinsics, pose: &RigidTransform) -> Homography {
        let r = pose.rotation;
        let m = k.matrix() * Mat3::from_columns(&[r.column(0).into_owned(), r.column(1).into_owned(), pose.translation]);
        Homography::new(m).unwrap()
    }

    #[test]
    fn identity_from_four_points() {
        let src = vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        let fit = estimate_homography(&src, &src).unwrap();
        assert!(fit.h.max_diff(&Homography::identity()) < 1e-12);
        assert_abs_diff_eq!(fit.h.matrix()[(2, 2)], 1.0);
    }

    #[test]
    fn recovers_known_homography() {
        let truth = Homography::from_row_slice(&[1.2, 0.1, 30.0, -0.05, 0.9, -12.0, 1e-3, -2e-3, 1.0]).unwrap();
        let src = grid();
        let dst: Vec<_> = src.iter().map(|p| truth.apply(*p).unwrap()).collect();
        let fit = estimate_homography(&src, &dst).unwrap();
        assert!((fit.h.matrix() - truth.matrix()).amax() < 1e-9);
        assert!(fit.rms_transfer < 1e-9);
    }

    #[test]
    fn collinear_sources_are_rank_deficient() {
        let src: Vec<_> = (0..4).map(|i| (i as f64, 2.0 * i as f64)).collect();
        let dst = vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        assert!(matches!(
            estimate_homography(&src, &dst),
            Err(Error::RankDeficient { .. })
        ));
        assert!(matches!(
            estimate_homography(&src[..3], &dst[..3]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn apply_examples() {
        let h = Homography::identity();
        assert_eq!(h.apply((3.0, -4.0)).unwrap(), (3.0, -4.0));
        let s = Homography::new(Mat3::from_diagonal(&Vec3::new(2.0, 2.0, 1.0))).unwrap();
        assert_eq!(s.apply((1.0, 1.0)).unwrap(), (2.0, 2.0));
        let p = Homography::from_row_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(p.apply((-1.0, 0.0)).unwrap_err(), Error::PointAtInfinity);
    }

    #[test]
    fn decompose_identity_pose() {
        let k = Intrinsics::new(100.0, -30.0, 5.0).unwrap();
        let pose = RigidTransform::translation(Vec3::new(0.0, 0.0, 1.0));
        let d = decompose_homography(&forward_h(&k, &pose), &k).unwrap();
        assert_abs_diff_eq!(d.transform.rotation, Mat3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(d.transform.translation, Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn decompose_random_poses() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = Intrinsics::new(120.0, 10.0, -4.0).unwrap();
        for _ in 0..50 {
            let pose = random_pose(&mut rng);
            // Negative overall scale must be handled by the sign rule.
            let h = Homography::new(forward_h(&k, &pose).matrix() * -3.5).unwrap();
            let d = decompose_homography(&h, &k).unwrap();
            assert!((d.transform.rotation - pose.rotation).amax() < 1e-9);
            assert!((d.transform.translation - pose.translation).amax() < 1e-9);
            assert!(d.ortho_residual < 1e-9);
        }
    }

    #[test]
    fn noisy_decomposition_reports_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = Intrinsics::new(120.0, 0.0, 0.0).unwrap();
        let pose = random_pose(&mut rng);
        let h = forward_h(&k, &pose);
        // Relative perturbation: σ = 1e-6 of each entry.
        let normal = Normal::new(0.0, 1e-6).unwrap();
        let noisy = Homography::new(h.matrix().map(|v| v * (1.0 + normal.sample(&mut rng)))).unwrap();
        let d = decompose_homography(&noisy, &k).unwrap();
        assert!(d.ortho_residual < 1e-5);
        let r = d.transform.rotation;
        assert!((r.transpose() * r - Mat3::identity()).norm() < 1e-9);
        assert!((r.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn vanishing_first_column_is_nonphysical() {
        let k = Intrinsics::new(1.0, 0.0, 0.0).unwrap();
        // Nonsingular but with h1 tiny relative to the rest.
        let m = Mat3::new(1e-14, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        if let Ok(h) = Homography::new(m) {
            assert!(matches!(decompose_homography(&h, &k), Err(Error::NonPhysical(_))));
        }
    }

    proptest! {
        #[test]
        fn apply_inverse_round_trip(x in -50.0f64..50.0, y in -50.0f64..50.0) {
            let h = Homography::from_row_slice(&[0.9, 0.2, 3.0, -0.1, 1.1, -2.0, 2e-3, 1e-3, 1.0]).unwrap();
            let back = h.inverse().apply(h.apply((x, y)).unwrap()).unwrap();
            prop_assert!((back.0 - x).abs() < 1e-10 && (back.1 - y).abs() < 1e-10);
        }

        #[test]
        fn homogeneous_scaling_does_not_change_estimate(scales in proptest::collection::vec(0.1f64..10.0, 20)) {
            let truth = Homography::from_row_slice(&[1.0, -0.3, 4.0, 0.2, 0.8, 1.0, -1e-3, 2e-3, 1.0]).unwrap();
            let src = grid();
            let dst: Vec<_> = src.iter().map(|p| truth.apply(*p).unwrap()).collect();
            let sh: Vec<_> = src.iter().zip(&scales).map(|(p, s)| Vec3::new(p.0, p.1, 1.0) * *s).collect();
            let dh: Vec<_> = dst.iter().zip(scales.iter().rev()).map(|(p, s)| Vec3::new(p.0, p.1, 1.0) * -*s).collect();
            let a = estimate_homography(&src, &dst).unwrap();
            let b = estimate_homography_homogeneous(&sh, &dh).unwrap();
            prop_assert!(a.h.max_diff(&b.h) < 1e-9);
            prop_assert!(a.h.max_diff(&truth) < 1e-9);
        }
    }
}
