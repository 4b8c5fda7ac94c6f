//! Laser profiles across simulated weldments.

use rand_distr::{Distribution, Normal};

use crate::analytics::{LaserProfile, ProfilePoint};
use crate::error::{Error, Result};
use crate::sim::noise::rng_for;
use crate::sim::surface::Surface;

const PROFILE_NOISE_DOMAIN: u64 = 16;

/// Cross-section `z = h(u, y)` sampled at `n` evenly spaced `u` in `[u0, u1]`.
pub fn surface_profile(surface: &Surface, u0: f64, u1: f64, n: usize, y: f64) -> Result<LaserProfile> {
    surface.validate().map_err(Error::Precondition)?;
    LaserProfile::from_fn(u0, u1, n, |u| surface.height(u, y))
}

/// Heights along a scan line from `x0` to `x1` at fixed lateral `y`.
pub fn height_scan(surface: &Surface, x0: f64, x1: f64, n: usize, y: f64) -> Vec<f64> {
    (0..n)
        .map(|k| surface.height(x0 + (x1 - x0) * k as f64 / (n - 1).max(1) as f64, y))
        .collect()
}

/// Adds Gaussian height noise, seeded per frame and sample.
pub fn noisy_profile(p: &LaserProfile, sigma: f64, seed: u64) -> Result<LaserProfile> {
    if !(sigma >= 0.0) {
        return Err(Error::pre("sigma must be non-negative"));
    }
    if sigma == 0.0 {
        return Ok(p.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|_| Error::pre("invalid sigma"))?;
    let stream = p.frame.unwrap_or(0) << 32;
    let pts = p
        .points()
        .iter()
        .enumerate()
        .map(|(k, q)| {
            let mut rng = rng_for(seed, PROFILE_NOISE_DOMAIN, stream | k as u64);
            ProfilePoint::new(q.u, q.z + normal.sample(&mut rng))
        })
        .collect();
    LaserProfile::new(pts, p.frame)
}
