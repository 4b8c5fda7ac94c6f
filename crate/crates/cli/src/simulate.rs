use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use weldsense::analytics::LaserProfile;
use weldsense::fringe::{equal_shifts, synthesize_patterns, wrap, Grid};
use weldsense::io::{self as wio, Cloud, CorrespondenceRow};
use weldsense::sim::noise::pixel_noise;
use weldsense::sim::{
    noisy_profile, render_diffuse, render_stereo, surface_profile, two_plane_points, DiffuseScene, SpecularDataset,
    SpecularScene, StereoScene, Surface, RNG_ALGORITHM,
};
use weldsense::Point3;

use crate::config::{merge, parse, user_config};
use crate::obs::{write_specular, write_stereo, SpecularObservations};
use crate::{CliError, CliResult, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    Specular,
    Diffuse,
    Stereo,
    Profiles,
    Fringe,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scene kind; defaults to the `mode` key of the config file.
    #[arg(long, value_enum)]
    pub mode: Option<SimMode>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Pixel noise standard deviation (height noise in mm for profiles,
    /// normalised intensity for fringes).
    #[arg(long)]
    pub sigma: Option<f64>,
}

/// A stream of laser profiles across a weldment. On a bead-on-groove
/// surface the bead height of frame `k` is raised by `ramp · k`, plus
/// `step` from `step_frame` on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileStream {
    pub surface: Surface,
    pub u_range: [f64; 2],
    pub samples: usize,
    pub frames: usize,
    pub ramp: f64,
    pub step_frame: Option<usize>,
    pub step: f64,
}

impl Default for ProfileStream {
    fn default() -> Self {
        ProfileStream {
            surface: Surface::BeadOnGroove {
                top_width: 6.0,
                bottom_width: 2.0,
                depth: 2.0,
                bead_width: 8.0,
                bead_height: 1.0,
                bead_base: 0.0,
                bead_offset: 0.0,
            },
            u_range: [-15.0, 15.0],
            samples: 301,
            frames: 20,
            ramp: 0.0,
            step_frame: None,
            step: 0.0,
        }
    }
}

/// Phase-shifted fringe images of a Gaussian phase bump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FringeScene {
    pub w: usize,
    pub h: usize,
    /// Carrier, cycles per image height.
    pub f: f64,
    pub steps: usize,
    pub bump_amplitude: f64,
    /// Bump standard deviation as a fraction of the image width.
    pub bump_width: f64,
    /// PGM bit depth, 8 or 16.
    pub bits: u8,
}

impl Default for FringeScene {
    fn default() -> Self {
        FringeScene { w: 128, h: 128, f: 16.0, steps: 4, bump_amplitude: 1.0, bump_width: 0.25, bits: 16 }
    }
}

fn default_scene(mode: SimMode) -> Value {
    let scene = match mode {
        SimMode::Specular => serde_json::to_value(SpecularScene::default()),
        SimMode::Diffuse => serde_json::to_value(DiffuseScene::default()),
        SimMode::Stereo => serde_json::to_value(StereoScene::default()),
        SimMode::Profiles => serde_json::to_value(ProfileStream::default()),
        SimMode::Fringe => serde_json::to_value(FringeScene::default()),
    };
    scene.expect("default scenes serialize")
}

pub fn run(ctx: &Context, args: SimulateArgs) -> CliResult<()> {
    let seed = ctx
        .global
        .seed
        .ok_or_else(|| CliError::Usage("simulate requires --seed".into()))?;
    let user = user_config(ctx)?;
    let mode = match (args.mode, user.get("mode")) {
        (Some(m), _) => m,
        (None, Some(m)) => parse("mode", m.clone())?,
        (None, None) => return Err(CliError::Usage("no --mode given and the config has no mode".into())),
    };
    let mut cfg = json!({ "sigma": 0.0, "scene": default_scene(mode) });
    merge(&mut cfg, &user);
    if let Some(s) = args.sigma {
        cfg["sigma"] = json!(s);
    }
    let sigma: f64 = parse("sigma", cfg["sigma"].clone())?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(CliError::Usage(format!("sigma must be finite and non-negative, got {sigma}")));
    }
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", args.out.display())))?;
    let scene_value = cfg["scene"].clone();
    let extra = match mode {
        SimMode::Specular => specular(ctx, &args.out, parse("scene", scene_value.clone())?, sigma, seed)?,
        SimMode::Diffuse => diffuse(ctx, &args.out, parse("scene", scene_value.clone())?, sigma, seed)?,
        SimMode::Stereo => stereo(ctx, &args.out, parse("scene", scene_value.clone())?, sigma, seed)?,
        SimMode::Profiles => profiles(&args.out, parse("scene", scene_value.clone())?, sigma, seed)?,
        SimMode::Fringe => fringe(&args.out, parse("scene", scene_value.clone())?, sigma, seed)?,
    };
    let mut meta = json!({
        "mode": mode,
        "seed": seed,
        "sigma": sigma,
        "rng": RNG_ALGORITHM,
        "scene": scene_value,
    });
    merge(&mut meta, &extra);
    wio::write_json(&args.out.join("metadata.json"), &meta)?;
    println!("simulated {:?} scene into {}", mode, args.out.display());
    if let Some(files) = meta.get("files") {
        println!("files: {files}");
    }
    Ok(())
}

fn specular(ctx: &Context, out: &Path, scene: SpecularScene, sigma: f64, seed: u64) -> CliResult<Value> {
    scene.validate()?;
    let data = SpecularDataset::generate(&scene, sigma, seed, ctx.exec)?;
    let obs = SpecularObservations { stacks: data.stacks.clone(), mirror: data.mirror.clone(), pool: data.pool.clone() };
    write_specular(wio::create(&out.join("observations.csv"))?, &obs)?;
    let truth = data.truth();
    let cloud = Cloud::new(truth.iter().map(|t| t.1).collect())
        .with_scalar("id", truth.iter().map(|t| t.0 as f64).collect())?;
    wio::write_ply(wio::create(&out.join("ground_truth.ply"))?, &cloud)?;
    let rays: Vec<Value> = data
        .records
        .iter()
        .filter_map(|r| {
            r.hit.map(|h| {
                json!({
                    "id": r.id,
                    "incident": { "origin": r.incident.origin, "dir": r.incident.dir() },
                    "reflected": { "origin": h.surface_point, "dir": h.reflected },
                })
            })
        })
        .collect();
    let missed = data.records.iter().filter(|r| r.hit.is_none()).count();
    println!(
        "{} stack points, {} mirror dots, {} pool dots ({} rays missed)",
        data.stacks.len(),
        data.mirror.len(),
        data.pool.len(),
        missed
    );
    Ok(json!({
        "files": ["observations.csv", "ground_truth.ply", "metadata.json"],
        "sensors": {
            "c1": data.c1.theta,
            "board2": data.board2.to_row_array(),
            "board3": data.board3.to_row_array(),
        },
        "truth_rays": rays,
    }))
}

const DIFFUSE_DOMAIN: u64 = 8;

fn diffuse(ctx: &Context, out: &Path, scene: DiffuseScene, sigma: f64, seed: u64) -> CliResult<Value> {
    scene.validate()?;
    let mut rows: Vec<(Option<&str>, CorrespondenceRow)> = Vec::new();
    for (kind, z) in [("plane0", scene.plane_heights[0]), ("plane1", scene.plane_heights[1])] {
        for p in two_plane_points(&scene, z)? {
            rows.push((
                Some(kind),
                CorrespondenceRow { xw: p.world_xy.0, yw: p.world_xy.1, zw: z, xc: p.pixel.0, yc: p.pixel.1, ylg: Some(p.phase) },
            ));
        }
    }
    let stripes = render_diffuse(&scene, ctx.exec)?;
    let mut truth = Vec::new();
    let mut lines = Vec::new();
    for s in &stripes {
        for q in &s.samples {
            rows.push((
                Some("measure"),
                CorrespondenceRow { xw: q.world.x, yw: q.world.y, zw: q.world.z, xc: q.pixel.0, yc: q.pixel.1, ylg: Some(s.phase) },
            ));
            truth.push(q.world);
            lines.push(s.line as f64);
        }
    }
    for (k, (_, r)) in rows.iter_mut().enumerate() {
        let (dx, dy) = pixel_noise(sigma, seed, DIFFUSE_DOMAIN, k as u64);
        r.xc += dx;
        r.yc += dy;
    }
    wio::write_correspondences(wio::create(&out.join("observations.csv"))?, &rows)?;
    wio::write_ply(wio::create(&out.join("ground_truth.ply"))?, &Cloud::new(truth).with_scalar("line", lines)?)?;
    println!("{} correspondence rows over {} stripes", rows.len(), stripes.len());
    Ok(json!({ "files": ["observations.csv", "ground_truth.ply", "metadata.json"] }))
}

const STEREO_DOMAIN: u64 = 9;

fn stereo(ctx: &Context, out: &Path, scene: StereoScene, sigma: f64, seed: u64) -> CliResult<Value> {
    let mut render = render_stereo(&scene, ctx.exec)?;
    let mut k = 0u64;
    for line in render.left.iter_mut().chain(render.right.iter_mut()) {
        for p in line.iter_mut() {
            p.0 += pixel_noise(sigma, seed, STEREO_DOMAIN, k).0;
            k += 1;
        }
    }
    write_stereo(wio::create(&out.join("observations.csv"))?, &render.left, &render.right)?;
    let pts: Vec<Point3> = render.truth.iter().flatten().copied().collect();
    let ids: Vec<f64> = render.truth.iter().enumerate().flat_map(|(i, l)| vec![i as f64; l.len()]).collect();
    wio::write_ply(wio::create(&out.join("ground_truth.ply"))?, &Cloud::new(pts).with_scalar("line", ids)?)?;
    println!("{} stripes per camera", render.left.len());
    Ok(json!({ "files": ["observations.csv", "ground_truth.ply", "metadata.json"], "rig": scene.rig, "frame": "rig" }))
}

fn profiles(out: &Path, stream: ProfileStream, sigma: f64, seed: u64) -> CliResult<Value> {
    if stream.frames == 0 {
        return Err(CliError::Usage("profile stream needs at least one frame".into()));
    }
    let mut all: Vec<LaserProfile> = Vec::with_capacity(stream.frames);
    let mut heights = Vec::with_capacity(stream.frames);
    for k in 0..stream.frames {
        let mut surface = stream.surface;
        let mut h = None;
        if let Surface::BeadOnGroove { bead_height, .. } = &mut surface {
            *bead_height += stream.ramp * k as f64;
            if stream.step_frame.is_some_and(|s| k >= s) {
                *bead_height += stream.step;
            }
            h = Some(*bead_height);
        }
        heights.push(h);
        let mut p = surface_profile(&surface, stream.u_range[0], stream.u_range[1], stream.samples, 0.0)?;
        p.frame = Some(k as u64);
        all.push(noisy_profile(&p, sigma, seed)?);
    }
    wio::write_profiles(wio::create(&out.join("observations.csv"))?, &all)?;
    let pts: Vec<Point3> = all
        .iter()
        .flat_map(|p| {
            let f = p.frame.unwrap_or(0) as f64;
            p.points().iter().map(move |q| Point3::new(q.u, f, q.z))
        })
        .collect();
    wio::write_ply(wio::create(&out.join("ground_truth.ply"))?, &Cloud::new(pts))?;
    println!("{} profiles of {} samples", all.len(), stream.samples);
    Ok(json!({ "files": ["observations.csv", "ground_truth.ply", "metadata.json"], "bead_heights": heights }))
}

const FRINGE_DOMAIN: u64 = 10;

fn fringe(out: &Path, scene: FringeScene, sigma: f64, seed: u64) -> CliResult<Value> {
    let maxval: u16 = match scene.bits {
        8 => 255,
        16 => 65535,
        b => return Err(CliError::Usage(format!("fringe bits must be 8 or 16, got {b}"))),
    };
    if scene.steps == 0 || scene.w == 0 || scene.h == 0 {
        return Err(CliError::Usage("fringe scene needs positive size and step count".into()));
    }
    let (w, h) = (scene.w, scene.h);
    let s = scene.bump_width * w as f64;
    let bump = |x: usize, y: usize| {
        let (dx, dy) = (x as f64 - 0.5 * w as f64, y as f64 - 0.5 * h as f64);
        scene.bump_amplitude * (-(dx * dx + dy * dy) / (2.0 * s * s)).exp()
    };
    let shifts = equal_shifts(scene.steps);
    let patterns = synthesize_patterns(w, h, scene.f, &shifts, bump)?;
    let mut files = Vec::new();
    for p in &patterns {
        let name = format!("pattern_{}.pgm", p.index);
        let mut k = 0u64;
        // Intensities span [0, 2]; mid-grey at 1.
        let img: Grid = p.image.map(|v| {
            let n = pixel_noise(sigma, seed, FRINGE_DOMAIN + p.index as u64, k).0;
            k += 1;
            (v + n) * 0.5 * maxval as f64
        });
        wio::write_pgm(wio::create(&out.join(&name))?, &img, maxval)?;
        files.push(name);
    }
    let truth = Grid::from_fn(w, h, |x, y| wrap(std::f64::consts::TAU * scene.f * y as f64 / h as f64 + bump(x, y)));
    wio::write_f32_grid(&out.join("ground_truth.f32"), w, h, &truth.data, true)?;
    files.push("ground_truth.f32".into());
    files.push("ground_truth.f32.json".into());
    files.push("metadata.json".into());
    println!("{} fringe patterns of {w}×{h}", patterns.len());
    Ok(json!({ "files": files, "shifts": shifts }))
}
