use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use weldsense::analytics::{analyze_profiles, DefectThresholds, PoolMeasurement, ProfileFeatures, ProfilePoint};
use weldsense::io::{self as wio, FormatError};

use crate::config::{merge, parse, user_config};
use crate::{CliError, CliResult, Context};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Profile CSV (`u,z` or `frame,u,z`).
    #[arg(long)]
    pub input: PathBuf,
    /// Defect report JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-frame feature CSV.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Overlay CSV of feature points and baselines for plotting.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    /// Pool height, pool width, reference height, reference width (mm).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub pool: Option<Vec<f64>>,
}

fn opt(p: Option<ProfilePoint>) -> [String; 2] {
    match p {
        Some(p) => [format!("{:?}", p.u), format!("{:?}", p.z)],
        None => [String::new(), String::new()],
    }
}

fn optf(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

pub fn run(ctx: &Context, args: AnalyzeArgs) -> CliResult<()> {
    let tol = ctx.global.tol;
    let mut base = serde_json::to_value(DefectThresholds {
        asym_tol: tol.asym,
        disp_tol: tol.disp,
        jump_tol: tol.jump,
        tol_h: tol.h,
        tol_w: tol.w,
        ..DefectThresholds::default()
    })
    .expect("thresholds serialize");
    let user = user_config(ctx)?;
    if let Some(t) = user.get("thresholds") {
        merge(&mut base, t);
    }
    let thresholds: DefectThresholds = parse("thresholds", base)?;
    if args.pool.as_ref().is_some_and(|v| v.len() != 4) {
        return Err(CliError::Usage("--pool takes four comma-separated values".into()));
    }
    let pool = args.pool.as_ref().map(|v| PoolMeasurement { pool_h: v[0], pool_w: v[1], ref_h: v[2], ref_w: v[3] });
    let profiles = wio::read_profiles(wio::open(&args.input)?)?;
    if profiles.is_empty() {
        return Err(CliError::Usage(format!("{}: no profile rows", args.input.display())));
    }
    let (report, features) = analyze_profiles(&profiles, pool, &thresholds)?;
    wio::write_json(&args.out, &report)?;
    let frame = |k: usize| profiles[k].frame.unwrap_or(k as u64);
    if let Some(path) = &args.features {
        let mut w = csv::Writer::from_writer(wio::create(path)?);
        let header = [
            "frame", "p1_u", "p1_z", "p2_u", "p2_z", "p3_u", "p3_z", "p4_u", "p4_z", "b1_u", "b1_z", "b2_u", "b2_z", "b3_u",
            "b3_z", "groove_width", "bead_width", "reinforcement_height",
        ];
        w.write_record(header).map_err(FormatError::from)?;
        for (k, f) in features.iter().enumerate() {
            let mut rec = vec![frame(k).to_string()];
            for p in [f.p1, f.p2, f.p3, f.p4, f.b1, f.b2, f.b3] {
                rec.extend(opt(p));
            }
            rec.extend([optf(f.groove_width), optf(f.bead_width), optf(f.reinforcement_height)]);
            w.write_record(&rec).map_err(FormatError::from)?;
        }
        w.flush().map_err(FormatError::from)?;
    }
    if let Some(path) = &args.overlay {
        write_overlay(path, &profiles, &features, frame)?;
    }
    let flags = &report.flags;
    println!("{} frames analysed", profiles.len());
    for (name, flag, mag) in [
        ("misalignment", flags.misalignment, report.magnitudes.misalignment),
        ("displacement", flags.displacement, report.magnitudes.displacement),
        ("height_mutation", flags.height_mutation, report.magnitudes.height_mutation),
        ("undercut", flags.undercut, report.magnitudes.undercut),
    ] {
        match mag {
            Some(m) if flag => println!("{name}: FLAGGED ({m:.4} mm)"),
            _ => println!("{name}: ok"),
        }
    }
    if !report.height_mutation_frames.is_empty() {
        println!("height jumps at frames {:?}", report.height_mutation_frames);
    }
    println!("penetration: {}", json!(report.penetration).as_str().unwrap_or("unknown"));
    Ok(())
}

fn write_overlay(
    path: &std::path::Path,
    profiles: &[weldsense::analytics::LaserProfile],
    features: &[ProfileFeatures],
    frame: impl Fn(usize) -> u64,
) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(wio::create(path)?);
    w.write_record(["frame", "label", "u", "z"]).map_err(FormatError::from)?;
    for (k, f) in features.iter().enumerate() {
        let pts = profiles[k].points();
        let fr = frame(k).to_string();
        for (label, p) in [("p1", f.p1), ("p2", f.p2), ("p3", f.p3), ("p4", f.p4), ("b1", f.b1), ("b2", f.b2), ("b3", f.b3)] {
            if let Some(p) = p {
                w.write_record([fr.clone(), label.into(), format!("{:?}", p.u), format!("{:?}", p.z)])
                    .map_err(FormatError::from)?;
            }
        }
        for u in [pts[0].u, pts[pts.len() - 1].u] {
            if let Some(z) = f.baseline.z_at(u) {
                w.write_record([fr.clone(), "baseline".into(), format!("{u:?}"), format!("{z:?}")])
                    .map_err(FormatError::from)?;
            }
        }
    }
    w.flush().map_err(FormatError::from)?;
    Ok(())
}
