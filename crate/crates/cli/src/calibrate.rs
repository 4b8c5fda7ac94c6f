use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Deserialize;
use serde_json::Value;
use weldsense::diffuse::{calibrate_camera_dlt, calibrate_projector_dlt, CameraDlt, DiffuseCalibration};
use weldsense::homography::Homography;
use weldsense::io::{self as wio, DiffuseCalibrationFile, SpecularCalibrationFile};
use weldsense::specular::SpecularCalibration;

use crate::config::parse;
use crate::obs::read_specular;
use crate::{CliError, CliResult, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CalibMode {
    Diffuse,
    Specular,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub mode: CalibMode,
    /// Observation CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Sensor metadata JSON with the `c1` camera and both board homographies
    /// (specular mode).
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// Calibration JSON to write.
    #[arg(long)]
    pub out: PathBuf,
}

/// Known specular instrument parameters.
#[derive(Debug, Deserialize)]
pub struct Sensors {
    pub c1: [f64; 11],
    pub board2: [f64; 9],
    pub board3: [f64; 9],
}

pub fn run(_ctx: &Context, args: CalibrateArgs) -> CliResult<()> {
    match args.mode {
        CalibMode::Diffuse => diffuse(&args),
        CalibMode::Specular => specular(&args),
    }
}

fn diffuse(args: &CalibrateArgs) -> CliResult<()> {
    let rows = wio::read_correspondences(wio::open(&args.input)?)?;
    // Measurement rows are not calibration points.
    let calib: Vec<_> = rows.iter().filter(|(k, _)| k.as_deref() != Some("measure")).map(|(_, r)| *r).collect();
    let cam_pairs: Vec<_> = calib.iter().map(|r| (r.world(), (r.xc, r.yc))).collect();
    let proj_pairs: Vec<_> = calib.iter().filter_map(|r| r.ylg.map(|y| (r.world(), y))).collect();
    let cam = calibrate_camera_dlt(&cam_pairs)?;
    let proj = calibrate_projector_dlt(&proj_pairs)?;
    let cal = DiffuseCalibration { camera: cam.camera, projector: proj.projector, residual_c: cam.rms, residual_p: proj.rms };
    wio::write_json(&args.out, &DiffuseCalibrationFile::from(&cal))?;
    println!("diffuse calibration from {} points", calib.len());
    println!("camera residual: {:e} px", cal.residual_c);
    println!("projector residual: {:e}", cal.residual_p);
    Ok(())
}

fn specular(args: &CalibrateArgs) -> CliResult<()> {
    let meta_path = args
        .metadata
        .as_ref()
        .ok_or_else(|| CliError::Usage("specular calibration needs --metadata with the sensor parameters".into()))?;
    let meta: Value = wio::read_json(meta_path)?;
    let sensors: Sensors = parse("sensors", meta.get("sensors").cloned().unwrap_or(meta))?;
    let obs = read_specular(wio::open(&args.input)?)?;
    let c1 = CameraDlt { theta: sensors.c1 };
    let board2 = Homography::from_row_slice(&sensors.board2)?;
    let board3 = Homography::from_row_slice(&sensors.board3)?;
    let cal = SpecularCalibration::calibrate(&c1, &obs.stacks, &obs.mirror, &board2, &board3)?;
    wio::write_json(&args.out, &SpecularCalibrationFile::from(&cal))?;
    let worst = cal.bundle.residuals.iter().copied().fold(0.0, f64::max);
    let c = cal.bundle.center;
    println!("specular calibration: {} incident rays", cal.bundle.rays.len());
    println!("projection centre: ({}, {}, {})", c.x, c.y, c.z);
    println!("calibration residual: {worst:e} mm (worst ray line fit)");
    println!(
        "plane orthogonality residuals: {:e}, {:e}",
        cal.planes.p2.ortho_residual, cal.planes.p4.ortho_residual
    );
    Ok(())
}
