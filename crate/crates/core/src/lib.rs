//! Calibration and 3D reconstruction for active visual sensing in robotic
//! welding, together with the weld-profile analytics built on top of it.
//!
//! The crate is organised around the measurement systems it calibrates:
//!
//! - [`geom`]: points, rays, planes and rigid transforms plus the small exact
//!   and least-squares primitives everything else is built from.
//! - [`homography`]: plane-to-plane homographies and their decomposition into
//!   a rigid pose for a known virtual camera.
//! - [`diffuse`]: DLT calibration of a camera and a laser/projector and
//!   per-pixel triangulation of diffuse weldment surfaces.
//! - [`specular`]: calibration of the mirror-surface (weld pool) system and
//!   ray-intersection reconstruction of the pool surface.
//! - [`stereo`]: ray-intersection and rectified triangulation, ordered line
//!   matching for multi-line active stereo.
//! - [`fringe`]: fringe synthesis, phase-shifting and Fourier-transform phase
//!   retrieval, spatial and temporal unwrapping.
//! - [`analytics`]: laser-profile features, bead defect detectors, penetration
//!   classification, seam and initial-point detection.
//! - [`sim`]: a geometric ray-tracing simulator that produces ground truth for
//!   all of the above.
//! - [`io`]: the file formats used by the command-line tool.
//!
//! Batch work goes through [`exec::Exec`], which runs on rayon when the
//! `parallel` feature is enabled (the default) and sequentially otherwise.

pub mod analytics;
pub mod diffuse;
pub mod error;
pub mod exec;
pub mod fringe;
pub mod geom;
pub mod homography;
pub mod io;
pub mod sim;
pub mod specular;
pub mod stereo;

pub use error::{Error, Result};
pub use exec::Exec;
pub use geom::{Plane, Point3, Ray3, RigidTransform, Vec3};
