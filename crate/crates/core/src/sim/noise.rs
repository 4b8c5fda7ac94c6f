//! Seeded Gaussian noise keyed by observation index.
//!
//! Every sample is drawn from its own ChaCha8 stream (`seed_from_u64(seed)`,
//! stream = observation index), so results do not depend on evaluation order
//! or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::homography::Point2;

/// Identifier written into output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng(seed_from_u64(seed ^ domain·0x9E3779B97F4A7C15), stream = index)";

/// Seed for a named sub-experiment derived from a base seed.
pub fn domain_seed(seed: u64, domain: u64) -> u64 {
    seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn rng_for(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(domain_seed(seed, domain));
    rng.set_stream(index);
    rng
}

/// Zero-mean Gaussian perturbation of one pixel.
pub fn pixel_noise(sigma: f64, seed: u64, domain: u64, index: u64) -> Point2 {
    if sigma == 0.0 {
        return (0.0, 0.0);
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    let mut rng = rng_for(seed, domain, index);
    (normal.sample(&mut rng), normal.sample(&mut rng))
}

/// Adds independent zero-mean Gaussian noise of standard deviation `sigma`
/// to both coordinates of each pixel.
pub fn add_noise(pixels: &[Point2], sigma: f64, seed: u64) -> crate::Result<Vec<Point2>> {
    add_noise_in(pixels, sigma, seed, 0)
}

pub fn add_noise_in(pixels: &[Point2], sigma: f64, seed: u64, domain: u64) -> crate::Result<Vec<Point2>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(crate::error::Error::pre("noise sigma must be finite and non-negative"));
    }
    Ok(pixels
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (dx, dy) = pixel_noise(sigma, seed, domain, i as u64);
            (p.0 + dx, p.1 + dy)
        })
        .collect())
}
