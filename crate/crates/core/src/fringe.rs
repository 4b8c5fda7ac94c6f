//! Fringe-projection phase retrieval: sinusoidal pattern synthesis, phase
//! shifting (4-step and N-step least squares), Fourier-transform
//! profilometry, and spatial and temporal phase unwrapping.
//!
//! Images are row-major grids; `y` is the row index and the carrier runs
//! along `y` with `f` cycles per image height. Wrapped phases lie in
//! `(−π, π]`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, TAU};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;

/// Default modulation threshold below which pixels are masked.
pub const DEFAULT_MODULATION_EPS: f64 = 1e-3;

/// The four shifts `0, π/2, π, 3π/2`.
pub const FOUR_STEP_SHIFTS: [f64; 4] = [0.0, PI / 2.0, PI, 3.0 * PI / 2.0];

/// Equally spaced shifts `2π i / n`.
pub fn equal_shifts(n: usize) -> Vec<f64> {
    (0..n).map(|i| TAU * i as f64 / n as f64).collect()
}

/// Row-major image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub w: usize,
    pub h: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn new(w: usize, h: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != w * h {
            return Err(Error::pre(format!("grid data has {} values, expected {}×{}", data.len(), w, h)));
        }
        Ok(Grid { w, h, data })
    }

    pub fn from_fn(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(f(x, y));
            }
        }
        Grid { w, h, data }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.w + x]
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Grid {
        Grid { w: self.w, h: self.h, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FringePattern {
    pub image: Grid,
    /// Cycles per image height.
    pub f: f64,
    pub shift: f64,
    pub index: usize,
    pub count: usize,
}

/// Phase grid with validity mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMap {
    pub w: usize,
    pub h: usize,
    pub phase: Vec<f64>,
    pub mask: Vec<bool>,
    pub wrapped: bool,
    /// Fringe modulation per pixel; drives quality-guided unwrapping.
    pub modulation: Vec<f64>,
}

impl PhaseMap {
    /// A fully valid map with unit modulation.
    pub fn from_grid(grid: &Grid, wrapped: bool) -> Self {
        let n = grid.data.len();
        PhaseMap {
            w: grid.w,
            h: grid.h,
            phase: grid.data.clone(),
            mask: vec![true; n],
            wrapped,
            modulation: vec![1.0; n],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.phase[y * self.w + x]
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.w + x]
    }

    pub fn with_mask(mut self, mask: &[bool]) -> Result<Self> {
        if mask.len() != self.mask.len() {
            return Err(Error::pre("mask size does not match the phase map"));
        }
        for (m, &v) in self.mask.iter_mut().zip(mask) {
            *m &= v;
        }
        Ok(self)
    }
}

/// Maps any angle into `(−π, π]`.
pub fn wrap(phi: f64) -> f64 {
    let r = phi - TAU * (phi / TAU).round();
    if r <= -PI {
        r + TAU
    } else if r > PI {
        r - TAU
    } else {
        r
    }
}

fn atan2_wrapped(s: f64, c: f64) -> f64 {
    let v = s.atan2(c);
    if v <= -PI {
        v + TAU
    } else {
        v
    }
}

/// `I_i(x, y) = 1 + cos(2π f y / h + φ(x, y) + α_i)` on a `w × h` grid.
pub fn synthesize_patterns(
    w: usize,
    h: usize,
    f: f64,
    shifts: &[f64],
    phi: impl Fn(usize, usize) -> f64,
) -> Result<Vec<FringePattern>> {
    if shifts.is_empty() {
        return Err(Error::pre("need at least one pattern"));
    }
    if !(f > 0.0) || w == 0 || h == 0 {
        return Err(Error::pre("carrier frequency and image size must be positive"));
    }
    let total = Grid::from_fn(w, h, |x, y| TAU * f * y as f64 / h as f64 + phi(x, y));
    Ok(shifts
        .iter()
        .enumerate()
        .map(|(index, &shift)| FringePattern {
            image: total.map(|t| 1.0 + (t + shift).cos()),
            f,
            shift,
            index,
            count: shifts.len(),
        })
        .collect())
}

fn same_shape(images: &[&Grid]) -> Result<(usize, usize)> {
    let (w, h) = (images[0].w, images[0].h);
    if images.iter().any(|g| g.w != w || g.h != h) {
        return Err(Error::pre("all images must share one size"));
    }
    Ok((w, h))
}

fn per_pixel(w: usize, h: usize, exec: Exec, eps: f64, f: impl Fn(usize) -> (f64, f64) + Send + Sync) -> PhaseMap {
    let mut out = vec![(0.0, 0.0); w * h];
    exec.for_chunks_mut(&mut out, w.max(1), |start, chunk| {
        for (k, v) in chunk.iter_mut().enumerate() {
            *v = f(start + k);
        }
    });
    PhaseMap {
        w,
        h,
        phase: out.iter().map(|p| p.0).collect(),
        mask: out.iter().map(|p| p.1 >= eps).collect(),
        wrapped: true,
        modulation: out.into_iter().map(|p| p.1).collect(),
    }
}

/// Four-step phase shifting: `atan2(I₄ − I₂, I₁ − I₃)`. Pixels whose
/// modulation `√((I₄ − I₂)² + (I₁ − I₃)²)` is below `eps` are masked.
pub fn psp_wrapped_phase(images: [&Grid; 4], eps: f64, exec: Exec) -> Result<PhaseMap> {
    let (w, h) = same_shape(&images)?;
    let [i1, i2, i3, i4] = images;
    Ok(per_pixel(w, h, exec, eps, |k| {
        let s = i4.data[k] - i2.data[k];
        let c = i1.data[k] - i3.data[k];
        (atan2_wrapped(s, c), s.hypot(c))
    }))
}

/// Least-squares sinusoid fit `I_i = A + a cos α_i − b sin α_i` per pixel
/// with phase `atan2(b, a)`; modulation is reported as `2√(a² + b²)`, which
/// matches the four-step definition.
pub fn psp_wrapped_phase_n(images: &[&Grid], shifts: &[f64], eps: f64, exec: Exec) -> Result<PhaseMap> {
    if images.len() < 3 {
        return Err(Error::InsufficientSteps(images.len()));
    }
    if shifts.len() != images.len() {
        return Err(Error::pre("one shift per image is required"));
    }
    for (i, a) in shifts.iter().enumerate() {
        for b in &shifts[i + 1..] {
            if wrap(a - b).abs() < 1e-9 {
                return Err(Error::pre("shifts must be distinct modulo 2π"));
            }
        }
    }
    let (w, h) = same_shape(images)?;
    let rows: Vec<[f64; 3]> = shifts.iter().map(|&a| [1.0, a.cos(), -a.sin()]).collect();
    let mut ata = nalgebra::Matrix3::zeros();
    for r in &rows {
        let v = nalgebra::Vector3::from(*r);
        ata += v * v.transpose();
    }
    let inv = ata
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or(Error::IllConditioned("phase shifts do not determine a sinusoid"))?;
    // Rows 1 and 2 of (AᵀA)⁻¹Aᵀ give a and b as fixed weights per image.
    let wa: Vec<f64> = rows.iter().map(|r| inv[(1, 0)] * r[0] + inv[(1, 1)] * r[1] + inv[(1, 2)] * r[2]).collect();
    let wb: Vec<f64> = rows.iter().map(|r| inv[(2, 0)] * r[0] + inv[(2, 1)] * r[1] + inv[(2, 2)] * r[2]).collect();
    Ok(per_pixel(w, h, exec, eps, |k| {
        let (mut a, mut b) = (0.0, 0.0);
        for (i, img) in images.iter().enumerate() {
            a += wa[i] * img.data[k];
            b += wb[i] * img.data[k];
        }
        (atan2_wrapped(b, a), 2.0 * a.hypot(b))
    }))
}

/// Fourier-transform profilometry on a single image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FtpConfig {
    /// Carrier, cycles per image height.
    pub f: f64,
    /// Hann window half-width in frequency bins; `None` means `f / 2`.
    pub half_width: Option<f64>,
    pub eps: f64,
}

impl FtpConfig {
    pub fn new(f: f64) -> Self {
        FtpConfig { f, half_width: None, eps: DEFAULT_MODULATION_EPS }
    }
}

/// Per column: FFT along `y`, Hann band-pass centred on `+f`, inverse FFT,
/// phase of the complex result.
pub fn ftp_wrapped_phase(g: &Grid, config: &FtpConfig, exec: Exec) -> Result<PhaseMap> {
    let f = config.f;
    if !(f >= 2.0) {
        return Err(Error::CarrierTooLow(f));
    }
    let hw = config.half_width.unwrap_or(f / 2.0);
    let (w, h) = (g.w, g.h);
    if !(hw > 0.0) || f + hw > h as f64 / 2.0 {
        return Err(Error::pre("carrier band must fit below the Nyquist frequency"));
    }
    let window: Vec<f64> = (0..h)
        .map(|k| {
            let d = (k as f64 - f).abs();
            if k <= h / 2 && d < hw {
                0.5 * (1.0 + (PI * d / hw).cos())
            } else {
                0.0
            }
        })
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(h);
    let inv = planner.plan_fft_inverse(h);
    let columns = exec.map_range(w, |x| {
        let mut buf: Vec<Complex<f64>> = (0..h).map(|y| Complex::new(g.get(x, y), 0.0)).collect();
        fwd.process(&mut buf);
        for (v, wk) in buf.iter_mut().zip(&window) {
            *v *= *wk;
        }
        inv.process(&mut buf);
        buf
    });
    let scale = 1.0 / h as f64;
    let mut phase = vec![0.0; w * h];
    let mut modulation = vec![0.0; w * h];
    for (x, col) in columns.iter().enumerate() {
        for (y, v) in col.iter().enumerate() {
            let v = v * scale;
            phase[y * w + x] = atan2_wrapped(v.im, v.re);
            modulation[y * w + x] = 2.0 * v.norm();
        }
    }
    Ok(PhaseMap {
        w,
        h,
        mask: modulation.iter().map(|&m| m >= config.eps).collect(),
        phase,
        wrapped: true,
        modulation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnwrapMode {
    /// Row by row; each row's valid pixels must form one run overlapping the
    /// previous row's run.
    LinearRow,
    /// Highest-modulation-first flood fill over each 4-connected component.
    QualityGuided,
}

fn unwrap_to(reference: f64, wrapped: f64) -> f64 {
    wrapped + TAU * ((reference - wrapped) / TAU).round()
}

/// Removes 2π jumps. Every output value differs from its input by an integer
/// multiple of 2π.
pub fn unwrap_phase(map: &PhaseMap, mode: UnwrapMode) -> Result<PhaseMap> {
    let mut out = map.clone();
    out.wrapped = false;
    match mode {
        UnwrapMode::LinearRow => unwrap_linear_rows(map, &mut out.phase)?,
        UnwrapMode::QualityGuided => unwrap_quality(map, &mut out.phase),
    }
    Ok(out)
}

fn unwrap_linear_rows(map: &PhaseMap, out: &mut [f64]) -> Result<()> {
    let w = map.w;
    let mut prev: Option<(usize, usize, usize)> = None; // (row, first, last)
    let mut finished = false;
    for y in 0..map.h {
        let valid: Vec<usize> = (0..w).filter(|&x| map.is_valid(x, y)).collect();
        if valid.is_empty() {
            if prev.is_some() {
                finished = true;
            }
            continue;
        }
        if finished {
            return Err(Error::DisconnectedMask);
        }
        let (a, b) = (valid[0], valid[valid.len() - 1]);
        if b - a + 1 != valid.len() {
            return Err(Error::DisconnectedMask);
        }
        // Anchor: first column shared with the previous row, or the run start.
        let anchor = match prev {
            None => {
                out[y * w + a] = map.phase[y * w + a];
                a
            }
            Some((py, pa, pb)) => {
                let lo = a.max(pa);
                let hi = b.min(pb);
                if lo > hi {
                    return Err(Error::DisconnectedMask);
                }
                out[y * w + lo] = unwrap_to(out[py * w + lo], map.phase[y * w + lo]);
                lo
            }
        };
        for x in anchor + 1..=b {
            out[y * w + x] = unwrap_to(out[y * w + x - 1], map.phase[y * w + x]);
        }
        for x in (a..anchor).rev() {
            out[y * w + x] = unwrap_to(out[y * w + x + 1], map.phase[y * w + x]);
        }
        prev = Some((y, a, b));
    }
    Ok(())
}

#[derive(PartialEq)]
struct Candidate {
    quality: f64,
    index: usize,
    from: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.quality
            .total_cmp(&other.quality)
            .then_with(|| other.index.cmp(&self.index))
            .then_with(|| other.from.cmp(&self.from))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn unwrap_quality(map: &PhaseMap, out: &mut [f64]) {
    let (w, h) = (map.w, map.h);
    let n = w * h;
    let mut done = vec![false; n];
    // Seeds in order of decreasing quality, ties by index.
    let mut seeds: Vec<usize> = (0..n).filter(|&k| map.mask[k]).collect();
    seeds.sort_by(|&a, &b| map.modulation[b].total_cmp(&map.modulation[a]).then(a.cmp(&b)));
    let neighbours = |k: usize| {
        let (x, y) = (k % w, k / w);
        let mut v = [usize::MAX; 4];
        if x > 0 {
            v[0] = k - 1;
        }
        if x + 1 < w {
            v[1] = k + 1;
        }
        if y > 0 {
            v[2] = k - w;
        }
        if y + 1 < h {
            v[3] = k + w;
        }
        v
    };
    let mut heap = BinaryHeap::new();
    for seed in seeds {
        if done[seed] {
            continue;
        }
        done[seed] = true;
        out[seed] = map.phase[seed];
        let push = |heap: &mut BinaryHeap<Candidate>, done: &[bool], k: usize| {
            for nb in neighbours(k) {
                if nb != usize::MAX && map.mask[nb] && !done[nb] {
                    heap.push(Candidate { quality: map.modulation[nb], index: nb, from: k });
                }
            }
        };
        push(&mut heap, &done, seed);
        while let Some(c) = heap.pop() {
            if done[c.index] {
                continue;
            }
            done[c.index] = true;
            out[c.index] = unwrap_to(out[c.from], map.phase[c.index]);
            push(&mut heap, &done, c.index);
        }
    }
}

/// Two-frequency temporal unwrapping. The low-frequency map is taken as
/// absolute after shifting it into `[0, 2π)`; the fringe order of the
/// high-frequency map is `k = round((ratio · Φ_low − φ_high) / 2π)`.
pub fn temporal_unwrap(low: &PhaseMap, high: &PhaseMap, ratio: f64) -> Result<PhaseMap> {
    if low.w != high.w || low.h != high.h {
        return Err(Error::pre("phase maps must share one grid"));
    }
    if !(ratio > 0.0) {
        return Err(Error::pre("frequency ratio must be positive"));
    }
    let n = low.phase.len();
    let mut out = high.clone();
    out.wrapped = false;
    for k in 0..n {
        out.mask[k] = low.mask[k] && high.mask[k];
        if !out.mask[k] {
            continue;
        }
        let absolute_low = if low.wrapped { low.phase[k].rem_euclid(TAU) } else { low.phase[k] };
        let order = ((ratio * absolute_low - high.phase[k]) / TAU).round();
        out.phase[k] = high.phase[k] + TAU * order;
    }
    Ok(out)
}
