//! Observation files written by `simulate` and read by `calibrate` and
//! `reconstruct`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use weldsense::io::FormatError;
use weldsense::specular::{DotObservation, StackObservation};
use weldsense::stereo::Polyline;

/// One row of a specular observation file. `stack` rows carry a `c1` pixel
/// at a calibration height; `mirror` and `pool` rows carry the `c2` pixel
/// in `x, y` and the `c3` pixel in `x3, y3`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpecularRow {
    record: String,
    id: usize,
    height: Option<f64>,
    x: f64,
    y: f64,
    x3: Option<f64>,
    y3: Option<f64>,
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct SpecularObservations {
    pub stacks: Vec<StackObservation>,
    pub mirror: Vec<DotObservation>,
    pub pool: Vec<DotObservation>,
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_specular(w: impl Write, o: &SpecularObservations) -> Result<(), FormatError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["record", "id", "height", "x", "y", "x3", "y3"])?;
    for s in &o.stacks {
        out.write_record([
            "stack".into(),
            s.id.to_string(),
            num(s.height),
            num(s.pixel.0),
            num(s.pixel.1),
            String::new(),
            String::new(),
        ])?;
    }
    for (kind, dots) in [("mirror", &o.mirror), ("pool", &o.pool)] {
        for d in dots {
            out.write_record([
                kind.into(),
                d.id.to_string(),
                String::new(),
                num(d.pix2.0),
                num(d.pix2.1),
                num(d.pix3.0),
                num(d.pix3.1),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_specular(r: impl Read) -> Result<SpecularObservations, FormatError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut o = SpecularObservations::default();
    for (line, rec) in rd.deserialize::<SpecularRow>().enumerate() {
        let row = rec?;
        let missing = |what: &str| FormatError::Invalid(format!("row {}: {} record needs {what}", line + 2, row.record));
        match row.record.as_str() {
            "stack" => o.stacks.push(StackObservation {
                id: row.id,
                height: row.height.ok_or_else(|| missing("height"))?,
                pixel: (row.x, row.y),
            }),
            "mirror" | "pool" => {
                let dot = DotObservation {
                    id: row.id,
                    pix2: (row.x, row.y),
                    pix3: (row.x3.ok_or_else(|| missing("x3"))?, row.y3.ok_or_else(|| missing("y3"))?),
                };
                if row.record == "mirror" {
                    o.mirror.push(dot);
                } else {
                    o.pool.push(dot);
                }
            }
            other => return Err(FormatError::Invalid(format!("row {}: unknown record kind {other}", line + 2))),
        }
    }
    Ok(o)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StereoRow {
    side: String,
    line: usize,
    x: f64,
    y: f64,
}

/// Left and right stripe polylines keyed by line id.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct StereoObservations {
    pub left: BTreeMap<usize, Polyline>,
    pub right: BTreeMap<usize, Polyline>,
}

pub fn write_stereo(w: impl Write, left: &[Polyline], right: &[Polyline]) -> Result<(), FormatError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["side", "line", "x", "y"])?;
    for (side, lines) in [("left", left), ("right", right)] {
        for (k, l) in lines.iter().enumerate() {
            for p in l {
                out.write_record([side.into(), k.to_string(), num(p.0), num(p.1)])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_stereo(r: impl Read) -> Result<StereoObservations, FormatError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut o = StereoObservations::default();
    for rec in rd.deserialize::<StereoRow>() {
        let row = rec?;
        let map = match row.side.as_str() {
            "left" => &mut o.left,
            "right" => &mut o.right,
            other => return Err(FormatError::Invalid(format!("unknown stereo side {other}"))),
        };
        map.entry(row.line).or_default().push((row.x, row.y));
    }
    Ok(o)
}
