//! CSV formats: event streams, bounding boxes, velocity logs and wiper
//! sweep times.
//!
//! Event lines are `t,x,y,p` or `t,x,y,p,cls,snow,truth` with `p` in {0,1}
//! (1 = positive), `cls` the two-bit class code, `snow` in {0,1} and `truth`
//! in {0,1} or empty when unknown. A leading header line is optional on
//! input and always written on output.

use std::io::{Read, Write};

use snowdwell_core::detector::EtaSchedule;
use snowdwell_core::eval::BBox;
use snowdwell_core::model::{eta_from_tau, ModelError};
use snowdwell_core::{CameraGeometry, Event, EventClass, LabeledStream, MotionParams, Polarity};

pub const EVENT_HEADER: [&str; 7] = ["t", "x", "y", "p", "cls", "snow", "truth"];
pub const BOX_HEADER: [&str; 5] = ["t", "x0", "y0", "x1", "y1"];

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn malformed(line: u64, reason: impl Into<String>) -> CsvError {
    CsvError::Malformed {
        line,
        reason: reason.into(),
    }
}

fn reader<R: Read>(src: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(src)
}

/// Data records with their 1-based line numbers. A first record whose first
/// field is not a number is taken as a header and skipped.
fn records<R: Read>(src: R) -> impl Iterator<Item = Result<(u64, csv::StringRecord), CsvError>> {
    let mut first = true;
    reader(src).into_records().filter_map(move |r| {
        let r = match r {
            Ok(r) => r,
            Err(e) => return Some(Err(e.into())),
        };
        let line = r.position().map_or(0, |p| p.line());
        let header = first && r.get(0).is_some_and(|f| f.parse::<f64>().is_err());
        first = false;
        if header || (r.len() == 1 && r[0].is_empty()) {
            None
        } else {
            Some(Ok((line, r)))
        }
    })
}

fn field<T: std::str::FromStr>(
    r: &csv::StringRecord,
    i: usize,
    name: &str,
    line: u64,
) -> Result<T, CsvError> {
    let s = &r[i];
    s.parse()
        .map_err(|_| malformed(line, format!("bad {name} {s:?}")))
}

fn flag(r: &csv::StringRecord, i: usize, name: &str, line: u64) -> Result<bool, CsvError> {
    match &r[i] {
        "0" => Ok(false),
        "1" => Ok(true),
        s => Err(malformed(
            line,
            format!("bad {name} {s:?}, expected 0 or 1"),
        )),
    }
}

pub fn parse_event(r: &csv::StringRecord, line: u64) -> Result<Event, CsvError> {
    if r.len() != 4 && r.len() != 7 {
        return Err(malformed(
            line,
            format!("expected 4 or 7 fields, found {}", r.len()),
        ));
    }
    let polarity = if flag(r, 3, "polarity", line)? {
        Polarity::Positive
    } else {
        Polarity::Negative
    };
    let mut e = Event::new(
        field(r, 0, "timestamp", line)?,
        field(r, 1, "x", line)?,
        field(r, 2, "y", line)?,
        polarity,
    );
    if r.len() == 7 {
        let code: u8 = field(r, 4, "class", line)?;
        e.class = EventClass::from_code(code)
            .ok_or_else(|| malformed(line, format!("bad class {code}")))?;
        e.snow = flag(r, 5, "snow", line)?;
        e.truth = if r[6].is_empty() {
            None
        } else {
            Some(flag(r, 6, "truth", line)?)
        };
    }
    Ok(e)
}

/// Reads events into a stream with the given geometry. Rejects timestamp
/// regressions and pixels outside the sensor.
pub fn read_csv<R: Read>(src: R, geometry: CameraGeometry) -> Result<LabeledStream, CsvError> {
    let mut events = Vec::new();
    let mut prev = 0u64;
    for rec in records(src) {
        let (line, r) = rec?;
        let e = parse_event(&r, line)?;
        if e.t < prev {
            return Err(malformed(
                line,
                format!("timestamp regression: {} after {prev}", e.t),
            ));
        }
        if e.x >= geometry.width_px || e.y >= geometry.height_px {
            return Err(malformed(
                line,
                format!(
                    "pixel ({}, {}) outside the {}x{} sensor",
                    e.x, e.y, geometry.width_px, geometry.height_px
                ),
            ));
        }
        prev = e.t;
        events.push(e);
    }
    let mut stream = LabeledStream::new(geometry, events);
    stream.relink(true);
    Ok(stream)
}

pub fn write_csv<W: Write>(stream: &LabeledStream, dst: W) -> Result<(), CsvError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(dst);
    w.write_record(EVENT_HEADER)?;
    for e in &stream.events {
        w.serialize((
            e.t,
            e.x,
            e.y,
            u8::from(e.polarity.is_positive()),
            e.class.code(),
            u8::from(e.snow),
            e.truth.map(u8::from),
        ))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Boxes as `t,x0,y0,x1,y1`; degenerate boxes are rejected.
pub fn read_boxes<R: Read>(src: R) -> Result<Vec<BBox>, CsvError> {
    let mut out = Vec::new();
    for rec in records(src) {
        let (line, r) = rec?;
        if r.len() != 5 {
            return Err(malformed(
                line,
                format!("expected 5 fields, found {}", r.len()),
            ));
        }
        let c = |i, n| field::<f64>(&r, i, n, line);
        let b = BBox::new(
            field(&r, 0, "timestamp", line)?,
            c(1, "x0")?,
            c(2, "y0")?,
            c(3, "x1")?,
            c(4, "y1")?,
        )
        .ok_or_else(|| malformed(line, "need x0 < x1 and y0 < y1"))?;
        out.push(b);
    }
    Ok(out)
}

pub fn write_boxes<W: Write>(boxes: &[BBox], dst: W) -> Result<(), CsvError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(dst);
    w.write_record(BOX_HEADER)?;
    for b in boxes {
        w.serialize((b.t, b.x0, b.y0, b.x1, b.y1))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Velocity log `t,V` (µs, mm/s) with nondecreasing times.
pub fn read_velocity<R: Read>(src: R) -> Result<Vec<(u64, f64)>, CsvError> {
    let mut out: Vec<(u64, f64)> = Vec::new();
    for rec in records(src) {
        let (line, r) = rec?;
        if r.len() != 2 {
            return Err(malformed(
                line,
                format!("expected 2 fields, found {}", r.len()),
            ));
        }
        let t: u64 = field(&r, 0, "timestamp", line)?;
        let v: f64 = field(&r, 1, "velocity", line)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(malformed(
                line,
                format!("velocity must be positive, found {v}"),
            ));
        }
        if out.last().is_some_and(|&(p, _)| t < p) {
            return Err(malformed(line, "timestamps must be nondecreasing"));
        }
        out.push((t, v));
    }
    if out.is_empty() {
        return Err(malformed(0, "velocity file holds no samples"));
    }
    Ok(out)
}

/// Piecewise-constant η from a velocity log: `η(t) = τθ/V(t)`. The first
/// sample also covers times before it.
pub fn eta_schedule(
    samples: &[(u64, f64)],
    tau: f64,
    theta_mm: f64,
) -> Result<EtaSchedule, ModelError> {
    let mut steps = Vec::with_capacity(samples.len());
    for (i, &(t, v)) in samples.iter().enumerate() {
        let eta = eta_from_tau(tau, theta_mm, &MotionParams::new(v))?;
        steps.push((if i == 0 { 0 } else { t }, eta));
    }
    Ok(EtaSchedule::Piecewise(steps))
}

/// One timestamp per line.
pub fn read_times<R: Read>(src: R) -> Result<Vec<u64>, CsvError> {
    let mut out = Vec::new();
    for rec in records(src) {
        let (line, r) = rec?;
        out.push(field(&r, 0, "timestamp", line)?);
    }
    Ok(out)
}

/// Rows of numbers under a header.
pub fn write_table<W: Write>(
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
    dst: W,
) -> Result<(), CsvError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(dst);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
