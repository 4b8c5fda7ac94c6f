use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde_json::Value;
use weldsense::diffuse::{reconstruct_batch, DiffuseCalibration};
use weldsense::io::{self as wio, Cloud, DiffuseCalibrationFile, SpecularCalibrationFile};
use weldsense::specular::SpecularCalibration;
use weldsense::stereo::{disparities_to_cloud, match_lines_ordered, triangulate_ray_intersection, RectifiedStereoRig};
use weldsense::Point3;

use crate::config::parse;
use crate::obs::{read_specular, read_stereo};
use crate::{CliError, CliResult, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReconMode {
    Diffuse,
    Specular,
    StereoRay,
    StereoRectified,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long, value_enum)]
    pub mode: ReconMode,
    /// Calibration JSON (stereo: rig JSON or simulation metadata with a `rig`).
    #[arg(long)]
    pub calib: PathBuf,
    /// Observation CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Point cloud to write (ASCII PLY).
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth PLY to compare against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Per-point error CSV (needs --truth); defaults next to --out.
    #[arg(long)]
    pub errors: Option<PathBuf>,
}

/// Reconstructed point with the key used to find its ground truth.
struct Recon {
    key: usize,
    point: Point3,
}

pub fn run(ctx: &Context, args: ReconstructArgs) -> CliResult<()> {
    let truth = match &args.truth {
        Some(p) => Some(wio::read_ply(wio::open(p)?)?),
        None => None,
    };
    let (recon, cloud, rejected) = match args.mode {
        ReconMode::Diffuse => diffuse(ctx, &args)?,
        ReconMode::Specular => specular(ctx, &args)?,
        ReconMode::StereoRay | ReconMode::StereoRectified => stereo(ctx, &args)?,
    };
    wio::write_ply(wio::create(&args.out)?, &cloud)?;
    println!("reconstructed {} points ({} rejected)", recon.len(), rejected);
    if let Some(truth) = truth {
        let errors = compare(args.mode, &recon, &truth)?;
        let rms = (errors.iter().map(|e| e.1 * e.1).sum::<f64>() / errors.len().max(1) as f64).sqrt();
        let max = errors.iter().map(|e| e.1).fold(0.0, f64::max);
        println!("rms error: {rms:e} mm");
        println!("max error: {max:e} mm");
        let path = args.errors.clone().unwrap_or_else(|| sibling(&args.out, "errors.csv"));
        let mut w = csv::Writer::from_writer(wio::create(&path)?);
        w.write_record(["key", "error"]).map_err(wio::FormatError::from)?;
        for (k, e) in &errors {
            w.write_record([k.to_string(), format!("{e:?}")]).map_err(wio::FormatError::from)?;
        }
        w.flush().map_err(wio::FormatError::from)?;
    }
    Ok(())
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_{name}"))
}

fn diffuse(ctx: &Context, args: &ReconstructArgs) -> CliResult<(Vec<Recon>, Cloud, usize)> {
    let file: DiffuseCalibrationFile = wio::read_json(&args.calib)?;
    let cal = DiffuseCalibration::try_from(file)?;
    let rows = wio::read_correspondences(wio::open(&args.input)?)?;
    let tagged = rows.iter().any(|(k, _)| k.is_some());
    let pixels: Vec<_> = rows
        .iter()
        .filter(|(k, _)| !tagged || k.as_deref() == Some("measure"))
        .filter_map(|(_, r)| r.tagged_pixel())
        .collect();
    let results = reconstruct_batch(&pixels, &cal.camera, &cal.projector, ctx.exec);
    let mut recon = Vec::new();
    let mut rejected = 0;
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(point) => recon.push(Recon { key: k, point }),
            Err(_) => rejected += 1,
        }
    }
    if recon.is_empty() {
        return Err(CliError::Numeric(weldsense::Error::SingularGeometry));
    }
    let cloud = Cloud::new(recon.iter().map(|r| r.point).collect());
    Ok((recon, cloud, rejected))
}

fn specular(ctx: &Context, args: &ReconstructArgs) -> CliResult<(Vec<Recon>, Cloud, usize)> {
    let file: SpecularCalibrationFile = wio::read_json(&args.calib)?;
    let cal = SpecularCalibration::try_from(file)?;
    let obs = read_specular(wio::open(&args.input)?)?;
    let out = cal.reconstruct(&obs.pool, ctx.global.tol.gap, ctx.exec)?;
    for r in &out.rejected {
        eprintln!("rejected dot {}: {}", r.id, r.reason);
    }
    let recon: Vec<Recon> = out.points.iter().map(|p| Recon { key: p.incident_index, point: p.position }).collect();
    let cloud = Cloud::new(out.points.iter().map(|p| p.position).collect())
        .with_scalar("gap", out.points.iter().map(|p| p.gap).collect())?;
    Ok((recon, cloud, out.rejected.len()))
}

fn stereo(ctx: &Context, args: &ReconstructArgs) -> CliResult<(Vec<Recon>, Cloud, usize)> {
    let v: Value = wio::read_json(&args.calib)?;
    let rig: RectifiedStereoRig = parse("rig", v.get("rig").cloned().unwrap_or(v))?;
    let rig = RectifiedStereoRig::new(rig.f, rig.b, rig.cx, rig.cy)?;
    let obs = read_stereo(wio::open(&args.input)?)?;
    let ids: Vec<usize> = obs.left.keys().copied().collect();
    let left: Vec<_> = obs.left.into_values().collect();
    let right: Vec<_> = obs.right.into_values().collect();
    let matches = match_lines_ordered(&left, &right)?;
    let mut recon = Vec::new();
    let mut gaps = Vec::new();
    let mut rejected = 0;
    for m in &matches {
        let key = ids[m.left];
        match args.mode {
            ReconMode::StereoRectified => {
                for point in disparities_to_cloud(std::slice::from_ref(m), &rig, ctx.exec)? {
                    recon.push(Recon { key, point });
                }
            }
            _ => {
                let general = rig.general();
                let hits = ctx.exec.map_slice(&m.samples, |s| {
                    triangulate_ray_intersection((s.x_right, s.row), (s.x_left, s.row), &general, ctx.global.tol.gap)
                });
                for h in hits {
                    match h {
                        Ok(h) => {
                            recon.push(Recon { key, point: h.point });
                            gaps.push(h.gap);
                        }
                        Err(_) => rejected += 1,
                    }
                }
            }
        }
    }
    let mut cloud = Cloud::new(recon.iter().map(|r| r.point).collect())
        .with_scalar("line", recon.iter().map(|r| r.key as f64).collect())?;
    if args.mode == ReconMode::StereoRay {
        cloud = Cloud::new(cloud.points).with_scalar("gap", gaps)?;
    }
    Ok((recon, cloud, rejected))
}

fn distance_to_polyline(p: &Point3, line: &[Point3]) -> f64 {
    if line.len() == 1 {
        return (p - line[0]).norm();
    }
    line.windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            let t = ((p - w[0]).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            (p - (w[0] + d * t)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Per-point error against the ground truth: by row order (diffuse), by dot
/// id (specular) or by distance to the stripe's true polyline (stereo).
fn compare(mode: ReconMode, recon: &[Recon], truth: &Cloud) -> CliResult<Vec<(usize, f64)>> {
    let scalar = |name: &str| -> CliResult<&Vec<f64>> {
        match &truth.scalar {
            Some((n, v)) if n == name => Ok(v),
            _ => Err(CliError::Usage(format!("ground truth PLY needs a `{name}` property"))),
        }
    };
    match mode {
        ReconMode::Diffuse => recon
            .iter()
            .map(|r| {
                truth
                    .points
                    .get(r.key)
                    .map(|t| (r.key, (r.point - t).norm()))
                    .ok_or_else(|| CliError::Usage("ground truth has fewer points than the observations".into()))
            })
            .collect(),
        ReconMode::Specular => {
            let ids = scalar("id")?;
            let by_id: BTreeMap<usize, Point3> =
                ids.iter().zip(&truth.points).map(|(&id, p)| (id as usize, *p)).collect();
            recon
                .iter()
                .map(|r| {
                    by_id
                        .get(&r.key)
                        .map(|t| (r.key, (r.point - t).norm()))
                        .ok_or_else(|| CliError::Usage(format!("no ground truth for dot {}", r.key)))
                })
                .collect()
        }
        ReconMode::StereoRay | ReconMode::StereoRectified => {
            let lines = scalar("line")?;
            let mut by_line: BTreeMap<usize, Vec<Point3>> = BTreeMap::new();
            for (&l, p) in lines.iter().zip(&truth.points) {
                by_line.entry(l as usize).or_default().push(*p);
            }
            recon
                .iter()
                .enumerate()
                .map(|(k, r)| {
                    by_line
                        .get(&r.key)
                        .map(|poly| (k, distance_to_polyline(&r.point, poly)))
                        .ok_or_else(|| CliError::Usage(format!("no ground truth for line {}", r.key)))
                })
                .collect()
        }
    }
}
