//! Weld-profile analytics on laser line profiles `(u, z)`: turning points and
//! bead features, bead-defect detectors, penetration state, seam tracking
//! point and initial welding point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub u: f64,
    pub z: f64,
}

impl ProfilePoint {
    pub fn new(u: f64, z: f64) -> Self {
        ProfilePoint { u, z }
    }
}

/// Samples across the weld, lateral position `u` strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserProfile {
    points: Vec<ProfilePoint>,
    pub frame: Option<u64>,
}

impl LaserProfile {
    pub fn new(points: Vec<ProfilePoint>, frame: Option<u64>) -> Result<Self> {
        if points.iter().any(|p| !p.u.is_finite() || !p.z.is_finite()) {
            return Err(Error::pre("profile samples must be finite"));
        }
        if points.windows(2).any(|w| !(w[1].u > w[0].u)) {
            return Err(Error::pre("profile u must be strictly increasing"));
        }
        Ok(LaserProfile { points, frame })
    }

    pub fn from_fn(u0: f64, u1: f64, n: usize, z: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::pre("need at least two samples"));
        }
        let pts = (0..n)
            .map(|k| {
                let u = u0 + (u1 - u0) * k as f64 / (n - 1) as f64;
                ProfilePoint::new(u, z(u))
            })
            .collect();
        LaserProfile::new(pts, None)
    }

    pub fn points(&self) -> &[ProfilePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn shifted(&self, du: f64) -> Self {
        LaserProfile {
            points: self.points.iter().map(|p| ProfilePoint::new(p.u + du, p.z)).collect(),
            frame: self.frame,
        }
    }
}

/// Line `n · (u, z) = c` with unit normal pointing to +z (or +u when
/// vertical). Signed distance is positive above the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line2 {
    pub normal: (f64, f64),
    pub c: f64,
}

impl Line2 {
    fn from_normal(nu: f64, nz: f64, c: f64) -> Self {
        let n = nu.hypot(nz);
        let (mut nu, mut nz, mut c) = (nu / n, nz / n, c / n);
        if nz < 0.0 || (nz == 0.0 && nu < 0.0) {
            nu = -nu;
            nz = -nz;
            c = -c;
        }
        Line2 { normal: (nu, nz), c }
    }

    pub fn signed_distance(&self, p: &ProfilePoint) -> f64 {
        self.normal.0 * p.u + self.normal.1 * p.z - self.c
    }

    /// Height of the line at `u`; `None` for vertical lines.
    pub fn z_at(&self, u: f64) -> Option<f64> {
        (self.normal.1.abs() > 1e-12).then(|| (self.c - self.normal.0 * u) / self.normal.1)
    }

    /// Angle of the line direction in `(−π/2, π/2]`.
    pub fn angle(&self) -> f64 {
        let a = (-self.normal.0).atan2(self.normal.1);
        if a <= -std::f64::consts::FRAC_PI_2 {
            a + std::f64::consts::PI
        } else {
            a
        }
    }

    pub fn intersect(&self, other: &Line2) -> Option<ProfilePoint> {
        let (a, b) = self.normal;
        let (c, d) = other.normal;
        let det = a * d - b * c;
        if det.abs() < 1e-15 {
            return None;
        }
        Some(ProfilePoint::new((self.c * d - b * other.c) / det, (a * other.c - self.c * c) / det))
    }
}

/// Total-least-squares line.
pub fn fit_line_2d(points: &[ProfilePoint]) -> Result<Line2> {
    if points.len() < 2 {
        return Err(Error::TooFewSamples { got: points.len(), needed: 2 });
    }
    let n = points.len() as f64;
    let mu = points.iter().map(|p| p.u).sum::<f64>() / n;
    let mz = points.iter().map(|p| p.z).sum::<f64>() / n;
    let (mut suu, mut suz, mut szz) = (0.0, 0.0, 0.0);
    for p in points {
        let (du, dz) = (p.u - mu, p.z - mz);
        suu += du * du;
        suz += du * dz;
        szz += dz * dz;
    }
    if suu + szz == 0.0 {
        return Err(Error::DegenerateInput("all points coincide"));
    }
    // Normal = eigenvector of the smaller eigenvalue of the scatter matrix.
    let m = nalgebra::Matrix2::new(suu, suz, suz, szz);
    let eig = nalgebra::SymmetricEigen::new(m);
    let k = if eig.eigenvalues[0] <= eig.eigenvalues[1] { 0 } else { 1 };
    let nv = eig.eigenvectors.column(k);
    Ok(Line2::from_normal(nv[0], nv[1], nv[0] * mu + nv[1] * mz))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Moving-average window (odd; 1 disables smoothing).
    pub smooth_window: usize,
    /// Minimum |Δ²z| / Δu, i.e. slope change per sample, for a candidate.
    pub prominence_tol: f64,
    /// Minimum height above the baseline for a sample to count as bead.
    pub bead_tol: f64,
    /// Fraction of samples at each end used for the baseline fit.
    pub baseline_fraction: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { smooth_window: 3, prominence_tol: 0.05, bead_tol: 0.05, baseline_fraction: 0.15 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileFeatures {
    /// Groove corners, left to right.
    pub p1: Option<ProfilePoint>,
    pub p2: Option<ProfilePoint>,
    pub p3: Option<ProfilePoint>,
    pub p4: Option<ProfilePoint>,
    /// Bead borders on the baseline and bead peak.
    pub b1: Option<ProfilePoint>,
    pub b2: Option<ProfilePoint>,
    pub b3: Option<ProfilePoint>,
    pub groove_width: Option<f64>,
    pub bead_width: Option<f64>,
    pub reinforcement_height: Option<f64>,
    pub baseline: Line2,
}

/// A run of samples whose second difference exceeds the tolerance with one
/// sign.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    start: usize,
    end: usize,
    index: usize,
}

/// Centred moving average; the window shrinks symmetrically at the ends.
/// Terms are paired around the centre so mirrored profiles smooth to
/// mirrored values bit for bit.
fn moving_average(z: &[f64], window: usize) -> Vec<f64> {
    let n = z.len();
    (0..n)
        .map(|i| {
            let half = (window / 2).min(i).min(n - 1 - i);
            let mut s = z[i];
            for k in 1..=half {
                s += z[i - k] + z[i + k];
            }
            s / (2 * half + 1) as f64
        })
        .collect()
}

/// Candidate runs of `|Δ²z| > tol·Δu`, each located at the sample nearest
/// its weighted centroid. Exact ties go to the sample closer to `centre`.
fn candidates(u: &[f64], zs: &[f64], tol: f64, centre: f64) -> Vec<Candidate> {
    let n = zs.len();
    let thresh = tol * (u[n - 1] - u[0]) / (n - 1) as f64;
    let d2: Vec<f64> = (0..n)
        .map(|i| if i == 0 || i + 1 == n { 0.0 } else { (zs[i + 1] + zs[i - 1]) - 2.0 * zs[i] })
        .collect();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if d2[i].abs() > thresh {
            let sign = d2[i].signum();
            let start = i;
            while i + 1 < n && d2[i].abs() > thresh && d2[i].signum() == sign {
                i += 1;
            }
            let end = i - 1;
            // |Σ w_k (k − j)| is proportional to the distance from j to the
            // centroid. Left and right moments are summed outward from j.
            let offset = |j: usize| -> f64 {
                let left: f64 = (start..j).rev().map(|k| d2[k].abs() * (j - k) as f64).sum();
                let right: f64 = (j + 1..=end).map(|k| d2[k].abs() * (k - j) as f64).sum();
                (left - right).abs()
            };
            let index = (start..=end)
                .min_by(|&a, &b| {
                    offset(a)
                        .total_cmp(&offset(b))
                        .then((a as f64 - centre).abs().total_cmp(&(b as f64 - centre).abs()))
                })
                .expect("non-empty run");
            out.push(Candidate { start, end, index });
        } else {
            i += 1;
        }
    }
    out
}

/// Baseline through the outer samples at both ends of the profile.
pub fn profile_baseline(p: &LaserProfile, fraction: f64) -> Result<Line2> {
    let n = p.len();
    let k = ((n as f64 * fraction).round() as usize).max(2).min(n / 2);
    let pts = p.points();
    let outer: Vec<ProfilePoint> = pts[..k].iter().chain(&pts[n - k..]).copied().collect();
    fit_line_2d(&outer)
}

/// Largest-magnitude signed distance from `baseline` over the samples with
/// `u` inside `span` (all samples when `None`); positive above the baseline.
pub fn reinforcement_height(p: &LaserProfile, baseline: &Line2, span: Option<(f64, f64)>) -> f64 {
    p.points()
        .iter()
        .filter(|q| span.is_none_or(|(a, b)| q.u >= a && q.u <= b))
        .map(|q| baseline.signed_distance(q))
        .fold(0.0, |acc: f64, d| if d.abs() > acc.abs() { d } else { acc })
}

pub fn extract_features(p: &LaserProfile, config: &FeatureConfig) -> Result<ProfileFeatures> {
    let n = p.len();
    if n < 9 {
        return Err(Error::TooFewSamples { got: n, needed: 9 });
    }
    let pts = p.points();
    let u: Vec<f64> = pts.iter().map(|q| q.u).collect();
    let z: Vec<f64> = pts.iter().map(|q| q.z).collect();
    let steps: Vec<f64> = u.windows(2).map(|w| w[1] - w[0]).collect();
    let (smin, smax) = steps.iter().fold((f64::MAX, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    if smax >= 3.0 * smin {
        return Err(Error::pre("profile spacing must be roughly uniform (max/min < 3)"));
    }
    let window = config.smooth_window.max(1) | 1;
    let zs = moving_average(&z, window);
    let zmin = zs.iter().copied().fold(f64::INFINITY, f64::min);
    let first_min = zs.iter().position(|&v| v == zmin).expect("non-empty");
    let last_min = zs.iter().rposition(|&v| v == zmin).expect("non-empty");
    let cands = candidates(&u, &zs, config.prominence_tol, 0.5 * (first_min + last_min) as f64);
    if cands.is_empty() {
        return Err(Error::NoFeatures);
    }
    let left: Vec<&Candidate> = cands.iter().filter(|c| c.start <= last_min).collect();
    let right: Vec<&Candidate> = cands.iter().filter(|c| c.end >= first_min).collect();
    let at = |c: &Candidate| pts[c.index];
    let p1 = left.first().map(|c| at(c));
    let p2 = left.get(1).map(|c| at(c));
    let p4 = right.last().map(|c| at(c));
    let p3 = right.len().checked_sub(2).map(|k| at(right[k]));

    let baseline = profile_baseline(p, config.baseline_fraction)?;
    let height: Vec<f64> = pts.iter().map(|q| baseline.signed_distance(q)).collect();
    // Longest run of samples above the baseline.
    let mut best: Option<(usize, usize)> = None;
    let mut k = 0;
    while k < n {
        if height[k] > config.bead_tol {
            let s = k;
            while k < n && height[k] > config.bead_tol {
                k += 1;
            }
            if best.is_none_or(|(a, b)| k - s > b - a + 1) {
                best = Some((s, k - 1));
            }
        } else {
            k += 1;
        }
    }
    let crossing = |i: usize, j: usize| -> ProfilePoint {
        // Zero of the height between samples i and j (linear).
        let (hi, hj) = (height[i], height[j]);
        let t = if hi == hj { 0.5 } else { hi / (hi - hj) };
        ProfilePoint::new(u[i] + t * (u[j] - u[i]), z[i] + t * (z[j] - z[i]))
    };
    let (b1, b2, b3) = match best {
        Some((s, e)) => {
            let b1 = if s > 0 { crossing(s - 1, s) } else { pts[s] };
            let b2 = if e + 1 < n { crossing(e, e + 1) } else { pts[e] };
            let peak = (s..=e).max_by(|&a, &b| height[a].total_cmp(&height[b])).expect("non-empty run");
            (Some(b1), Some(b2), Some(pts[peak]))
        }
        None => (None, None, None),
    };
    let groove_width = match (p1, p4) {
        (Some(a), Some(b)) => Some(b.u - a.u),
        _ => None,
    };
    let bead_width = match (b1, b2) {
        (Some(a), Some(b)) => Some((b.u - a.u).abs()),
        _ => None,
    };
    let reinforcement_height = b3.map(|b| baseline.signed_distance(&b));
    Ok(ProfileFeatures {
        p1,
        p2,
        p3,
        p4,
        b1,
        b2,
        b3,
        groove_width,
        bead_width,
        reinforcement_height,
        baseline,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub flagged: bool,
    pub magnitude: f64,
}

impl Detection {
    fn above(magnitude: f64, tol: f64) -> Self {
        Detection { flagged: magnitude > tol, magnitude }
    }
}

/// Shoulder-width asymmetry `|(p₂ − p₁) − (p₄ − p₃)|` of the groove
/// trapezoid.
pub fn detect_misalignment(f: &ProfileFeatures, asym_tol: f64) -> Result<Detection> {
    match (f.p1, f.p2, f.p3, f.p4) {
        (Some(p1), Some(p2), Some(p3), Some(p4)) => {
            Ok(Detection::above(((p2.u - p1.u) - (p4.u - p3.u)).abs(), asym_tol))
        }
        _ => Err(Error::MissingFeatures("all four turning points")),
    }
}

/// Undercut when the bead is strictly wider than the groove.
pub fn detect_undercut(f: &ProfileFeatures) -> Result<Detection> {
    match (f.bead_width, f.groove_width) {
        (Some(wb), Some(wg)) => Ok(undercut_rule(wb, wg)),
        _ => Err(Error::MissingFeatures("bead and groove widths")),
    }
}

pub fn undercut_rule(bead_width: f64, groove_width: f64) -> Detection {
    if bead_width > groove_width {
        Detection { flagged: true, magnitude: bead_width - groove_width }
    } else {
        Detection { flagged: false, magnitude: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoughConfig {
    pub angle_step_deg: f64,
    pub rho_step: f64,
}

impl Default for HoughConfig {
    fn default() -> Self {
        HoughConfig { angle_step_deg: 0.5, rho_step: 0.1 }
    }
}

/// Dominant straight line of a profile: Hough vote over `(θ, ρ)` with
/// `ρ = u cos θ + z sin θ`, then a least-squares refit on the peak's inliers.
pub fn dominant_line(p: &LaserProfile, config: &HoughConfig) -> Result<Line2> {
    let pts = p.points();
    let n = pts.len();
    if n < 3 {
        return Err(Error::TooFewSamples { got: n, needed: 3 });
    }
    let n_theta = (180.0 / config.angle_step_deg).round() as usize;
    let rmax = pts.iter().map(|q| q.u.hypot(q.z)).fold(0.0, f64::max);
    let n_rho_half = (rmax / config.rho_step).ceil() as i64 + 1;
    let n_rho = (2 * n_rho_half + 1) as usize;
    let mut acc = vec![0u32; n_theta * n_rho];
    let trig: Vec<(f64, f64)> = (0..n_theta)
        .map(|t| {
            let th = (t as f64 * config.angle_step_deg).to_radians();
            (th.cos(), th.sin())
        })
        .collect();
    for q in pts {
        for (t, (c, s)) in trig.iter().enumerate() {
            let r = ((q.u * c + q.z * s) / config.rho_step).round() as i64 + n_rho_half;
            acc[t * n_rho + r as usize] += 1;
        }
    }
    let (best, votes) = acc
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(k, v)| (k, *v))
        .expect("accumulator is non-empty");
    let needed = 3usize.max((0.2 * n as f64).ceil() as usize);
    if (votes as usize) < needed {
        return Err(Error::NoDominantLine);
    }
    let (t, r) = (best / n_rho, best % n_rho);
    let (c, s) = trig[t];
    let rho = (r as i64 - n_rho_half) as f64 * config.rho_step;
    let inliers: Vec<ProfilePoint> = pts
        .iter()
        .filter(|q| (q.u * c + q.z * s - rho).abs() <= config.rho_step)
        .copied()
        .collect();
    let line = fit_line_2d(&inliers)?;
    // One more pass with inliers of the refined line.
    let refined: Vec<ProfilePoint> = pts
        .iter()
        .filter(|q| line.signed_distance(q).abs() <= 0.5 * config.rho_step)
        .copied()
        .collect();
    if refined.len() >= 2 {
        fit_line_2d(&refined)
    } else {
        Ok(line)
    }
}

/// Spread of the dominant baselines of a window of profiles, measured as
/// their height difference at the middle of the common u range.
pub fn detect_displacement(profiles: &[LaserProfile], disp_tol: f64, config: &HoughConfig) -> Result<Detection> {
    if profiles.len() < 2 {
        return Err(Error::TooFewSamples { got: profiles.len(), needed: 2 });
    }
    let lines = profiles
        .iter()
        .map(|p| dominant_line(p, config))
        .collect::<Result<Vec<_>>>()?;
    let lo = profiles.iter().map(|p| p.points()[0].u).fold(f64::MIN, f64::max);
    let hi = profiles.iter().map(|p| p.points()[p.len() - 1].u).fold(f64::MAX, f64::min);
    let u_ref = 0.5 * (lo + hi);
    let zs = lines
        .iter()
        .map(|l| l.z_at(u_ref).ok_or(Error::NoDominantLine))
        .collect::<Result<Vec<_>>>()?;
    let (mn, mx) = zs.iter().fold((f64::MAX, f64::MIN), |(a, b), &z| (a.min(z), b.max(z)));
    Ok(Detection::above(mx - mn, disp_tol))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightMutation {
    pub detection: Detection,
    /// Indices `i` with `|h[i] − h[i−1]| > tol`.
    pub jumps: Vec<usize>,
}

pub fn detect_height_mutation(h: &[f64], jump_tol: f64) -> Result<HeightMutation> {
    if h.len() < 2 {
        return Err(Error::TooFewSamples { got: h.len(), needed: 2 });
    }
    let diffs: Vec<f64> = h.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let magnitude = diffs.iter().copied().fold(0.0, f64::max);
    let jumps = diffs
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > jump_tol)
        .map(|(i, _)| i + 1)
        .collect();
    Ok(HeightMutation { detection: Detection::above(magnitude, jump_tol), jumps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenetrationState {
    Lack,
    Complete,
    BurnThrough,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenetrationTolerances {
    pub tol_h: f64,
    pub tol_w: f64,
}

impl Default for PenetrationTolerances {
    fn default() -> Self {
        PenetrationTolerances { tol_h: 0.2, tol_w: 0.5 }
    }
}

/// Pool height/width against the reference of a complete-penetration pool.
pub fn classify_penetration(
    pool_h: f64,
    pool_w: f64,
    ref_h: f64,
    ref_w: f64,
    tol: &PenetrationTolerances,
) -> Result<PenetrationState> {
    if !(pool_w > 0.0 && ref_w > 0.0) {
        return Err(Error::pre("pool and reference widths must be positive"));
    }
    let height_normal = (pool_h - ref_h).abs() <= tol.tol_h;
    Ok(if height_normal && pool_w < ref_w - tol.tol_w {
        PenetrationState::Lack
    } else if height_normal && (pool_w - ref_w).abs() <= tol.tol_w {
        PenetrationState::Complete
    } else if pool_h < -tol.tol_h && pool_w > ref_w + tol.tol_w {
        PenetrationState::BurnThrough
    } else {
        PenetrationState::Unknown
    })
}

/// Single-pass seam tracking point: intersection of the least-squares lines
/// of the two flanks on either side of the lowest sample.
pub fn seam_point_single_pass(p: &LaserProfile) -> Result<ProfilePoint> {
    let pts = p.points();
    if pts.len() < 5 {
        return Err(Error::TooFewSamples { got: pts.len(), needed: 5 });
    }
    let valley = (0..pts.len()).min_by(|&a, &b| pts[a].z.total_cmp(&pts[b].z)).expect("non-empty");
    let left = &pts[..valley];
    let right = &pts[valley + 1..];
    if left.len() < 2 || right.len() < 2 {
        return Err(Error::NearParallelFlanks);
    }
    let a = fit_line_2d(left)?;
    let b = fit_line_2d(right)?;
    let mut d = (a.angle() - b.angle()).abs();
    d = d.min(std::f64::consts::PI - d);
    if d < 1e-3 {
        return Err(Error::NearParallelFlanks);
    }
    a.intersect(&b).ok_or(Error::NearParallelFlanks)
}

/// First index whose height differs from its predecessor by more than
/// `jump_tol`.
pub fn detect_initial_point(z: &[f64], jump_tol: f64) -> Result<usize> {
    if z.len() < 3 {
        return Err(Error::TooFewSamples { got: z.len(), needed: 3 });
    }
    (1..z.len()).find(|&i| (z[i] - z[i - 1]).abs() > jump_tol).ok_or(Error::NoJump)
}

/// Thresholds used by [`analyze_profiles`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectThresholds {
    pub asym_tol: f64,
    pub disp_tol: f64,
    pub jump_tol: f64,
    pub tol_h: f64,
    pub tol_w: f64,
    pub features: FeatureConfig,
    pub hough: HoughConfig,
}

impl Default for DefectThresholds {
    fn default() -> Self {
        DefectThresholds {
            asym_tol: 1.0,
            disp_tol: 0.5,
            jump_tol: 0.5,
            tol_h: 0.2,
            tol_w: 0.5,
            features: FeatureConfig::default(),
            hough: HoughConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DefectFlags {
    pub misalignment: bool,
    pub displacement: bool,
    pub height_mutation: bool,
    pub undercut: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DefectMagnitudes {
    pub misalignment: Option<f64>,
    pub displacement: Option<f64>,
    pub height_mutation: Option<f64>,
    pub undercut: Option<f64>,
}

/// Reference pool geometry for penetration classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolMeasurement {
    pub pool_h: f64,
    pub pool_w: f64,
    pub ref_h: f64,
    pub ref_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub flags: DefectFlags,
    pub magnitudes: DefectMagnitudes,
    pub penetration: PenetrationState,
    /// Frames at which the reinforcement height jumps.
    #[serde(default)]
    pub height_mutation_frames: Vec<u64>,
    pub thresholds: DefectThresholds,
}

fn keep(d: Detection) -> (bool, Option<f64>) {
    (d.flagged, d.flagged.then_some(d.magnitude))
}

/// Runs every detector over a frame sequence. Per-frame detectors use the
/// last frame; detectors whose features are missing stay unflagged.
pub fn analyze_profiles(
    profiles: &[LaserProfile],
    pool: Option<PoolMeasurement>,
    thresholds: &DefectThresholds,
) -> Result<(DefectReport, Vec<ProfileFeatures>)> {
    if profiles.is_empty() {
        return Err(Error::pre("no profiles to analyze"));
    }
    let features = profiles
        .iter()
        .map(|p| extract_features(p, &thresholds.features))
        .collect::<Result<Vec<_>>>()?;
    let last = features.last().expect("non-empty");
    let mut flags = DefectFlags::default();
    let mut mags = DefectMagnitudes::default();
    let mut height_mutation_frames = Vec::new();
    if let Ok(d) = detect_misalignment(last, thresholds.asym_tol) {
        (flags.misalignment, mags.misalignment) = keep(d);
    }
    if let Ok(d) = detect_undercut(last) {
        (flags.undercut, mags.undercut) = keep(d);
    }
    if profiles.len() >= 2 {
        let d = detect_displacement(profiles, thresholds.disp_tol, &thresholds.hough)?;
        (flags.displacement, mags.displacement) = keep(d);
        let hs: Vec<f64> = features.iter().map(|f| f.reinforcement_height.unwrap_or(0.0)).collect();
        let m = detect_height_mutation(&hs, thresholds.jump_tol)?;
        (flags.height_mutation, mags.height_mutation) = keep(m.detection);
        height_mutation_frames = m.jumps.iter().map(|&i| profiles[i].frame.unwrap_or(i as u64)).collect();
    }
    let penetration = match pool {
        Some(m) => classify_penetration(
            m.pool_h,
            m.pool_w,
            m.ref_h,
            m.ref_w,
            &PenetrationTolerances { tol_h: thresholds.tol_h, tol_w: thresholds.tol_w },
        )?,
        None => PenetrationState::Unknown,
    };
    Ok((
        DefectReport { flags, magnitudes: mags, penetration, height_mutation_frames, thresholds: *thresholds },
        features,
    ))
}
