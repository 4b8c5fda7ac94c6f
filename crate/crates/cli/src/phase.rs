use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use weldsense::fringe::{
    equal_shifts, ftp_wrapped_phase, psp_wrapped_phase, psp_wrapped_phase_n, unwrap_phase, wrap, FtpConfig, Grid,
    PhaseMap, UnwrapMode,
};
use weldsense::io::{self as wio};

use crate::{CliError, CliResult, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Psp4,
    #[value(name = "pspN", alias = "pspn")]
    PspN,
    Ftp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Unwrap {
    None,
    LinearRow,
    QualityGuided,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Input images (PGM, or float32 grids with a JSON sidecar).
    #[arg(long, num_args = 1.., required = true)]
    pub images: Vec<PathBuf>,
    /// Phase shifts in radians for pspN; equally spaced by default.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub shifts: Option<Vec<f64>>,
    /// FTP carrier, cycles per image height.
    #[arg(long)]
    pub freq: Option<f64>,
    /// FTP band half-width in cycles (default half the carrier).
    #[arg(long)]
    pub half_width: Option<f64>,
    #[arg(long, value_enum, default_value_t = Unwrap::None)]
    pub unwrap: Unwrap,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Wrapped ground-truth phase (float32 grid) to compare against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

fn load(path: &Path) -> CliResult<Grid> {
    if path.extension().is_some_and(|e| e == "f32") {
        let (meta, data) = wio::read_f32_grid(path)?;
        return Ok(Grid::new(meta.w, meta.h, data)?);
    }
    Ok(wio::read_pgm(wio::open(path)?)?)
}

pub fn run(ctx: &Context, args: PhaseArgs) -> CliResult<()> {
    let images = args.images.iter().map(|p| load(p)).collect::<CliResult<Vec<_>>>()?;
    let refs: Vec<&Grid> = images.iter().collect();
    let eps = ctx.global.tol.modulation;
    let map = match args.method {
        Method::Psp4 => {
            let four: [&Grid; 4] = refs
                .as_slice()
                .try_into()
                .map_err(|_| CliError::Usage(format!("psp4 needs exactly 4 images, got {}", refs.len())))?;
            psp_wrapped_phase(four, eps, ctx.exec)?
        }
        Method::PspN => {
            let shifts = args.shifts.clone().unwrap_or_else(|| equal_shifts(refs.len()));
            if shifts.len() != refs.len() {
                return Err(CliError::Usage(format!("{} shifts for {} images", shifts.len(), refs.len())));
            }
            psp_wrapped_phase_n(&refs, &shifts, eps, ctx.exec)?
        }
        Method::Ftp => {
            if refs.len() != 1 {
                return Err(CliError::Usage(format!("ftp takes a single image, got {}", refs.len())));
            }
            let f = args.freq.ok_or_else(|| CliError::Usage("ftp needs --freq".into()))?;
            let mut config = FtpConfig::new(f);
            config.half_width = args.half_width;
            config.eps = eps;
            ftp_wrapped_phase(refs[0], &config, ctx.exec)?
        }
    };
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", args.out.display())))?;
    wio::write_phase_map(&args.out.join("phase.f32"), &map)?;
    wio::write_mask(&args.out.join("mask.pgm"), &map)?;
    let valid = map.mask.iter().filter(|&&m| m).count();
    println!("wrapped phase: {}×{}, {} valid pixels", map.w, map.h, valid);
    if let Some(path) = &args.truth {
        let (meta, truth) = wio::read_f32_grid(path)?;
        if (meta.w, meta.h) != (map.w, map.h) {
            return Err(CliError::Usage("ground truth size differs from the images".into()));
        }
        let rows = interior_rows(&args, map.h);
        let err = max_wrapped_error(&map, &truth, rows);
        println!("max wrapped-phase error: {err:e} rad (rows {}..{})", rows.0, rows.1);
    }
    let mode = match args.unwrap {
        Unwrap::None => None,
        Unwrap::LinearRow => Some(UnwrapMode::LinearRow),
        Unwrap::QualityGuided => Some(UnwrapMode::QualityGuided),
    };
    if let Some(mode) = mode {
        let un = unwrap_phase(&map, mode)?;
        wio::write_phase_map(&args.out.join("unwrapped.f32"), &un)?;
        println!("unwrapped phase written");
    }
    Ok(())
}

/// FTP is judged on the inner 80% of rows; PSP on all rows.
fn interior_rows(args: &PhaseArgs, h: usize) -> (usize, usize) {
    match args.method {
        Method::Ftp => (h / 10, h - h / 10),
        _ => (0, h),
    }
}

fn max_wrapped_error(map: &PhaseMap, truth: &[f64], rows: (usize, usize)) -> f64 {
    let mut worst = 0.0f64;
    for y in rows.0..rows.1 {
        for x in 0..map.w {
            let k = y * map.w + x;
            if map.mask[k] && truth[k].is_finite() {
                worst = worst.max(wrap(map.phase[k] - truth[k]).abs());
            }
        }
    }
    worst
}
