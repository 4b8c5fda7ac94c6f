//! Synthetic scenes with exact ground truth: analytic surfaces, pinhole
//! cameras, laser dot and stripe projection, specular ray tracing through a
//! beam splitter, fringe patterns and seeded pixel noise.

pub mod camera;
pub mod diffuse;
pub mod noise;
pub mod profiles;
pub mod specular;
pub mod stereo;
pub mod surface;

pub use diffuse::{render_diffuse, two_plane_points, DiffuseScene};
pub use camera::{CameraConfig, PinholeCamera, PlaneFrame};
pub use noise::{add_noise, RNG_ALGORITHM};
pub use profiles::{height_scan, noisy_profile, surface_profile};
pub use specular::{render_calibration_stacks, render_specular, SpecularDataset, SpecularScene};
pub use stereo::{render_stereo, StereoScene};
pub use surface::Surface;
