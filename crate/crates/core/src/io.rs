//! File formats: ASCII PLY clouds, correspondence and profile CSV,
//! calibration and rig JSON, PGM images and float32 grids with a JSON
//! sidecar.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{LaserProfile, ProfilePoint};
use crate::diffuse::{CameraDlt, DiffuseCalibration, PhaseTaggedPixel, ProjectorDlt};
use crate::fringe::{Grid, PhaseMap};
use crate::geom::{Plane, Point3, Ray3, RigidTransform};
use crate::homography::Homography;
use crate::specular::{IncidentRayBundle, IndexedRay, ObservationPlane, ObservationPlanes, SpecularCalibration};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Stream(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;

fn invalid(msg: impl Into<String>) -> FormatError {
    FormatError::Invalid(msg.into())
}

pub fn create(path: &Path) -> FormatResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| FormatError::Io { path: path.to_owned(), source })
}

pub fn open(path: &Path) -> FormatResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| FormatError::Io { path: path.to_owned(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> FormatResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> FormatResult<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

/// Point cloud with an optional per-vertex scalar, written as ASCII PLY.
#[derive(Debug, Clone, PartialEq)]
pub struct Cloud {
    pub points: Vec<Point3>,
    /// Name and values of an extra float property.
    pub scalar: Option<(String, Vec<f64>)>,
}

impl Cloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Cloud { points, scalar: None }
    }

    pub fn with_scalar(mut self, name: &str, values: Vec<f64>) -> FormatResult<Self> {
        if values.len() != self.points.len() {
            return Err(invalid("scalar count differs from point count"));
        }
        self.scalar = Some((name.to_owned(), values));
        Ok(self)
    }
}

pub fn write_ply(mut w: impl Write, cloud: &Cloud) -> FormatResult<()> {
    writeln!(w, "ply\nformat ascii 1.0\nelement vertex {}", cloud.points.len())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z")?;
    if let Some((name, _)) = &cloud.scalar {
        writeln!(w, "property double {name}")?;
    }
    writeln!(w, "end_header")?;
    for (k, p) in cloud.points.iter().enumerate() {
        write!(w, "{:?} {:?} {:?}", p.x, p.y, p.z)?;
        if let Some((_, v)) = &cloud.scalar {
            write!(w, " {:?}", v[k])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads ASCII PLY vertices; `x y z` plus at most one extra scalar property.
pub fn read_ply(r: impl Read) -> FormatResult<Cloud> {
    let mut lines = BufReader::new(r).lines();
    let mut next = || -> FormatResult<String> {
        lines.next().ok_or_else(|| invalid("unexpected end of PLY"))?.map_err(FormatError::from)
    };
    if next()?.trim() != "ply" {
        return Err(invalid("missing PLY magic"));
    }
    let mut count = None;
    let mut props = Vec::new();
    loop {
        let line = next()?;
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["format", "ascii", _] => {}
            ["format", ..] => return Err(invalid("only ASCII PLY is supported")),
            ["element", "vertex", n] => count = Some(n.parse::<usize>().map_err(|_| invalid("bad vertex count"))?),
            ["element", ..] => return Err(invalid("only vertex elements are supported")),
            ["property", _, name] => props.push(name.to_string()),
            ["comment", ..] | [] => {}
            ["end_header"] => break,
            _ => return Err(invalid(format!("unexpected PLY header line: {line}"))),
        }
    }
    let count = count.ok_or_else(|| invalid("PLY has no vertex element"))?;
    if props.len() < 3 || props[..3] != ["x", "y", "z"] || props.len() > 4 {
        return Err(invalid("PLY vertices must be x y z [scalar]"));
    }
    let mut points = Vec::with_capacity(count);
    let mut scalar = Vec::new();
    for _ in 0..count {
        let line = next()?;
        let v = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| invalid(format!("bad PLY value {s}"))))
            .collect::<FormatResult<Vec<_>>>()?;
        if v.len() != props.len() {
            return Err(invalid("PLY vertex has the wrong number of values"));
        }
        points.push(Point3::new(v[0], v[1], v[2]));
        if v.len() == 4 {
            scalar.push(v[3]);
        }
    }
    let scalar = (props.len() == 4).then(|| (props[3].clone(), scalar));
    Ok(Cloud { points, scalar })
}

/// Correspondence row `Xw,Yw,Zw,xc,yc,ylg`; `ylg` is empty on camera-only
/// rows and `kind` is an optional free-form tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceRow {
    #[serde(rename = "Xw")]
    pub xw: f64,
    #[serde(rename = "Yw")]
    pub yw: f64,
    #[serde(rename = "Zw")]
    pub zw: f64,
    pub xc: f64,
    pub yc: f64,
    pub ylg: Option<f64>,
}

impl CorrespondenceRow {
    pub fn world(&self) -> Point3 {
        Point3::new(self.xw, self.yw, self.zw)
    }

    pub fn tagged_pixel(&self) -> Option<PhaseTaggedPixel> {
        self.ylg.map(|ylg| PhaseTaggedPixel { xc: self.xc, yc: self.yc, ylg })
    }
}

#[derive(Debug, Deserialize)]
struct TaggedCorrespondence {
    #[serde(default)]
    kind: Option<String>,
    #[serde(rename = "Xw")]
    xw: f64,
    #[serde(rename = "Yw")]
    yw: f64,
    #[serde(rename = "Zw")]
    zw: f64,
    xc: f64,
    yc: f64,
    #[serde(default)]
    ylg: Option<f64>,
}

pub fn write_correspondences(w: impl Write, rows: &[(Option<&str>, CorrespondenceRow)]) -> FormatResult<()> {
    let tagged = rows.iter().any(|(k, _)| k.is_some());
    let mut out = csv::Writer::from_writer(w);
    if tagged {
        out.write_record(["kind", "Xw", "Yw", "Zw", "xc", "yc", "ylg"])?;
    } else {
        out.write_record(["Xw", "Yw", "Zw", "xc", "yc", "ylg"])?;
    }
    for (kind, r) in rows {
        let mut rec: Vec<String> = Vec::with_capacity(7);
        if tagged {
            rec.push(kind.unwrap_or("").to_owned());
        }
        for v in [r.xw, r.yw, r.zw, r.xc, r.yc] {
            rec.push(format!("{v:?}"));
        }
        rec.push(r.ylg.map(|v| format!("{v:?}")).unwrap_or_default());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_correspondences(r: impl Read) -> FormatResult<Vec<(Option<String>, CorrespondenceRow)>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rd.headers()?.clone();
    for h in ["Xw", "Yw", "Zw", "xc", "yc"] {
        if !headers.iter().any(|x| x == h) {
            return Err(invalid(format!("correspondence CSV lacks column {h}")));
        }
    }
    let mut out = Vec::new();
    for rec in rd.deserialize::<TaggedCorrespondence>() {
        let t = rec?;
        let row = CorrespondenceRow { xw: t.xw, yw: t.yw, zw: t.zw, xc: t.xc, yc: t.yc, ylg: t.ylg };
        out.push((t.kind.filter(|k| !k.is_empty()), row));
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct ProfileRow {
    #[serde(default)]
    frame: Option<u64>,
    u: f64,
    z: f64,
}

/// Profiles from `u,z` rows, or `frame,u,z` rows grouped by frame in
/// ascending frame order.
pub fn read_profiles(r: impl Read) -> FormatResult<Vec<LaserProfile>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut frames: BTreeMap<Option<u64>, Vec<ProfilePoint>> = BTreeMap::new();
    for rec in rd.deserialize::<ProfileRow>() {
        let row = rec?;
        frames.entry(row.frame).or_default().push(ProfilePoint::new(row.u, row.z));
    }
    frames
        .into_iter()
        .map(|(frame, pts)| LaserProfile::new(pts, frame).map_err(|e| invalid(format!("frame {frame:?}: {e}"))))
        .collect()
}

pub fn write_profiles(w: impl Write, profiles: &[LaserProfile]) -> FormatResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["frame", "u", "z"])?;
    for (k, p) in profiles.iter().enumerate() {
        let frame = p.frame.unwrap_or(k as u64).to_string();
        for q in p.points() {
            out.write_record([frame.clone(), format!("{:?}", q.u), format!("{:?}", q.z)])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Diffuse calibration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffuseCalibrationFile {
    pub theta_c: Vec<f64>,
    pub theta_p: Vec<f64>,
    pub residual_c: f64,
    pub residual_p: f64,
}

impl From<&DiffuseCalibration> for DiffuseCalibrationFile {
    fn from(c: &DiffuseCalibration) -> Self {
        DiffuseCalibrationFile {
            theta_c: c.camera.theta.to_vec(),
            theta_p: c.projector.theta.to_vec(),
            residual_c: c.residual_c,
            residual_p: c.residual_p,
        }
    }
}

impl TryFrom<DiffuseCalibrationFile> for DiffuseCalibration {
    type Error = FormatError;

    fn try_from(f: DiffuseCalibrationFile) -> FormatResult<Self> {
        let theta_c: [f64; 11] = f.theta_c.try_into().map_err(|_| invalid("theta_c must have 11 values"))?;
        let theta_p: [f64; 7] = f.theta_p.try_into().map_err(|_| invalid("theta_p must have 7 values"))?;
        Ok(DiffuseCalibration {
            camera: CameraDlt { theta: theta_c },
            projector: ProjectorDlt { theta: theta_p },
            residual_c: f.residual_c,
            residual_p: f.residual_p,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayEntry {
    pub id: usize,
    pub origin: [f64; 3],
    pub dir: [f64; 3],
}

/// Specular calibration file. `Hp` and `Hpp` map world `(X, Y)` on `p2` and
/// `p4` to camera pixels, row-major. The pose and residual fields are
/// optional extras.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecularCalibrationFile {
    pub incident_rays: Vec<RayEntry>,
    pub c: [f64; 3],
    pub f: f64,
    pub pi2: [f64; 4],
    pub pi4: [f64; 4],
    #[serde(rename = "Hp")]
    pub hp: [f64; 9],
    #[serde(rename = "Hpp")]
    pub hpp: [f64; 9],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose2: Option<RigidTransform>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose4: Option<RigidTransform>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ray_residuals: Vec<f64>,
    #[serde(default)]
    pub ortho_residual2: f64,
    #[serde(default)]
    pub ortho_residual4: f64,
}

fn coeffs4(p: &Plane) -> [f64; 4] {
    let c = p.coeffs();
    [c.x, c.y, c.z, c.w]
}

impl From<&SpecularCalibration> for SpecularCalibrationFile {
    fn from(s: &SpecularCalibration) -> Self {
        let c = s.bundle.center;
        SpecularCalibrationFile {
            incident_rays: s
                .bundle
                .rays
                .iter()
                .map(|r| RayEntry {
                    id: r.id,
                    origin: [r.ray.origin.x, r.ray.origin.y, r.ray.origin.z],
                    dir: [r.ray.dir().x, r.ray.dir().y, r.ray.dir().z],
                })
                .collect(),
            c: [c.x, c.y, c.z],
            f: c.z,
            pi2: coeffs4(&s.planes.p2.plane),
            pi4: coeffs4(&s.planes.p4.plane),
            hp: s.planes.p2.image_homography.to_row_array(),
            hpp: s.planes.p4.image_homography.to_row_array(),
            pose2: Some(s.planes.p2.pose),
            pose4: Some(s.planes.p4.pose),
            ray_residuals: s.bundle.residuals.clone(),
            ortho_residual2: s.planes.p2.ortho_residual,
            ortho_residual4: s.planes.p4.ortho_residual,
        }
    }
}

impl TryFrom<SpecularCalibrationFile> for SpecularCalibration {
    type Error = crate::Error;

    fn try_from(f: SpecularCalibrationFile) -> crate::Result<Self> {
        let mut rays = f
            .incident_rays
            .iter()
            .map(|e| {
                Ray3::new(Point3::from(e.origin), e.dir.into()).map(|ray| IndexedRay { id: e.id, ray })
            })
            .collect::<crate::Result<Vec<_>>>()?;
        rays.sort_by_key(|r| r.id);
        let residuals = if f.ray_residuals.len() == rays.len() { f.ray_residuals } else { vec![0.0; rays.len()] };
        let bundle = IncidentRayBundle { rays, residuals, center: Point3::from(f.c) };
        let plane = |pi: [f64; 4], h: [f64; 9], pose: Option<RigidTransform>, ortho: f64| -> crate::Result<ObservationPlane> {
            Ok(ObservationPlane {
                plane: Plane::new(pi[0], pi[1], pi[2], pi[3])?,
                image_homography: Homography::from_row_slice(&h)?,
                pose: pose.unwrap_or_else(RigidTransform::identity),
                ortho_residual: ortho,
            })
        };
        let planes = ObservationPlanes::new(
            plane(f.pi2, f.hp, f.pose2, f.ortho_residual2)?,
            plane(f.pi4, f.hpp, f.pose4, f.ortho_residual4)?,
        )?;
        Ok(SpecularCalibration { bundle, planes })
    }
}

/// Greyscale image from PGM (binary `P5` or ASCII `P2`, 8 or 16 bit).
pub fn read_pgm(r: impl Read) -> FormatResult<Grid> {
    let mut bytes = Vec::new();
    BufReader::new(r).read_to_end(&mut bytes)?;
    let mut pos = 0;
    let mut token = || -> FormatResult<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(invalid("truncated PGM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let num = |s: String| s.parse::<usize>().map_err(|_| invalid(format!("bad PGM number {s}")));
    let w = num(token()?)?;
    let h = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(invalid("PGM maxval must be in 1..=65535"));
    }
    let n = w * h;
    let data: Vec<f64> = match magic.as_str() {
        "P5" => {
            let body = &bytes[pos + 1..];
            if maxval < 256 {
                if body.len() < n {
                    return Err(invalid("truncated PGM data"));
                }
                body[..n].iter().map(|&b| b as f64).collect()
            } else {
                if body.len() < 2 * n {
                    return Err(invalid("truncated PGM data"));
                }
                body[..2 * n].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64).collect()
            }
        }
        "P2" => (0..n).map(|_| token().and_then(num).map(|v| v as f64)).collect::<FormatResult<_>>()?,
        _ => return Err(invalid(format!("unsupported PGM magic {magic}"))),
    };
    Ok(Grid { w, h, data })
}

/// Binary PGM; values are rounded and clamped to `0..=maxval`, 16-bit when
/// `maxval > 255`.
pub fn write_pgm(mut w: impl Write, grid: &Grid, maxval: u16) -> FormatResult<()> {
    if maxval == 0 {
        return Err(invalid("PGM maxval must be positive"));
    }
    write!(w, "P5\n{} {}\n{}\n", grid.w, grid.h, maxval)?;
    let clamp = |v: f64| v.round().clamp(0.0, maxval as f64) as u16;
    if maxval < 256 {
        let buf: Vec<u8> = grid.data.iter().map(|&v| clamp(v) as u8).collect();
        w.write_all(&buf)?;
    } else {
        let buf: Vec<u8> = grid.data.iter().flat_map(|&v| clamp(v).to_be_bytes()).collect();
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub w: usize,
    pub h: usize,
    pub wrapped: bool,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes little-endian float32 values to `path` and `{w, h, wrapped}` to
/// `path` + `.json`.
pub fn write_f32_grid(path: &Path, w: usize, h: usize, data: &[f64], wrapped: bool) -> FormatResult<()> {
    if data.len() != w * h {
        return Err(invalid("grid size does not match dimensions"));
    }
    let mut out = create(path)?;
    let buf: Vec<u8> = data.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    out.write_all(&buf)?;
    out.flush()?;
    write_json(&sidecar_path(path), &GridSidecar { w, h, wrapped })
}

pub fn read_f32_grid(path: &Path) -> FormatResult<(GridSidecar, Vec<f64>)> {
    let meta: GridSidecar = read_json(&sidecar_path(path))?;
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() != 4 * meta.w * meta.h {
        return Err(invalid("float grid size does not match its sidecar"));
    }
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
    Ok((meta, data))
}

/// Phase map as a float32 grid; invalid pixels are written as NaN.
pub fn write_phase_map(path: &Path, map: &PhaseMap) -> FormatResult<()> {
    let data: Vec<f64> = map.phase.iter().zip(&map.mask).map(|(&p, &m)| if m { p } else { f64::NAN }).collect();
    write_f32_grid(path, map.w, map.h, &data, map.wrapped)
}

/// Validity mask as an 8-bit PGM (255 valid, 0 invalid).
pub fn write_mask(path: &Path, map: &PhaseMap) -> FormatResult<()> {
    let grid = Grid { w: map.w, h: map.h, data: map.mask.iter().map(|&m| if m { 255.0 } else { 0.0 }).collect() };
    write_pgm(create(path)?, &grid, 255)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ply_round_trip() {
        let cloud = Cloud::new(vec![Point3::new(0.1, -2.0, 1e-17), Point3::new(3.0, 4.0, 5.5)])
            .with_scalar("gap", vec![1e-9, 0.25])
            .unwrap();
        let mut buf = Vec::new();
        write_ply(&mut buf, &cloud).unwrap();
        assert!(String::from_utf8_lossy(&buf).contains("property double gap"));
        assert_eq!(read_ply(&buf[..]).unwrap(), cloud);
        let plain = Cloud::new(vec![Point3::new(1.0, 2.0, 3.0)]);
        let mut buf = Vec::new();
        write_ply(&mut buf, &plain).unwrap();
        assert_eq!(read_ply(&buf[..]).unwrap(), plain);
    }

    #[test]
    fn correspondences_round_trip() {
        let a = CorrespondenceRow { xw: 1.0, yw: 2.0, zw: 0.0, xc: 100.5, yc: 200.25, ylg: Some(3.0) };
        let b = CorrespondenceRow { ylg: None, ..a };
        let mut buf = Vec::new();
        write_correspondences(&mut buf, &[(None, a), (None, b)]).unwrap();
        assert!(buf.starts_with(b"Xw,Yw,Zw,xc,yc,ylg\n"));
        let back = read_correspondences(&buf[..]).unwrap();
        assert_eq!(back, vec![(None, a), (None, b)]);
        let mut buf = Vec::new();
        write_correspondences(&mut buf, &[(Some("plane0"), a)]).unwrap();
        assert_eq!(read_correspondences(&buf[..]).unwrap()[0].0.as_deref(), Some("plane0"));
        assert!(read_correspondences(&b"Xw,Yw\n1,2\n"[..]).is_err());
        assert!(read_correspondences(&b"Xw,Yw,Zw,xc,yc,ylg\n1,2,x,4,5,\n"[..]).is_err());
    }

    #[test]
    fn profiles_grouped_by_frame() {
        let csv = "frame,u,z\n1,0,0\n0,0,1\n0,1,2\n1,1,3\n";
        let p = read_profiles(csv.as_bytes()).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].frame, Some(0));
        assert_eq!(p[1].points()[1].z, 3.0);
        let single = read_profiles("u,z\n0,0\n1,1\n".as_bytes()).unwrap();
        assert_eq!(single.len(), 1);
        assert!(read_profiles("u,z\n1,0\n0,1\n".as_bytes()).is_err());
        let mut buf = Vec::new();
        write_profiles(&mut buf, &p).unwrap();
        assert_eq!(read_profiles(&buf[..]).unwrap(), p);
    }

    #[test]
    fn diffuse_calibration_bit_exact() {
        let cal = DiffuseCalibration {
            camera: CameraDlt { theta: std::array::from_fn(|i| (i as f64 + 0.1).sqrt() * 1e3 / 7.0) },
            projector: ProjectorDlt { theta: std::array::from_fn(|i| -(i as f64).exp() / 3.0) },
            residual_c: 1.234e-13,
            residual_p: 0.1 + 0.2,
        };
        let s = serde_json::to_string(&DiffuseCalibrationFile::from(&cal)).unwrap();
        let back: DiffuseCalibration = serde_json::from_str::<DiffuseCalibrationFile>(&s).unwrap().try_into().unwrap();
        assert_eq!(back, cal);
        let bad = DiffuseCalibrationFile { theta_c: vec![1.0; 10], ..DiffuseCalibrationFile::from(&cal) };
        assert!(DiffuseCalibration::try_from(bad).is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let g = Grid::from_fn(5, 3, |x, y| (x * 40 + y) as f64);
        for maxval in [255u16, 4095] {
            let mut buf = Vec::new();
            write_pgm(&mut buf, &g, maxval).unwrap();
            assert_eq!(read_pgm(&buf[..]).unwrap(), g);
        }
        let ascii = "P2\n# comment\n2 2\n65535\n0 1\n65535 7\n";
        assert_eq!(read_pgm(ascii.as_bytes()).unwrap().data, vec![0.0, 1.0, 65535.0, 7.0]);
        assert!(read_pgm(&b"P6\n1 1\n255\n\0"[..]).is_err());
    }

    #[test]
    fn f32_grid_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("phase.f32");
        let data = vec![0.5, -1.25, 3.0, f64::NAN];
        write_f32_grid(&path, 2, 2, &data, true).unwrap();
        let (meta, back) = read_f32_grid(&path).unwrap();
        assert_eq!(meta, GridSidecar { w: 2, h: 2, wrapped: true });
        assert_eq!(&back[..3], &data[..3]);
        assert!(back[3].is_nan());
    }
}
