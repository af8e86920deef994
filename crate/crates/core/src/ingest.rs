//! Text formats for event recordings and ground-truth tables.
//!
//! Event CSV is one event per line, `t_us,x,y,p`, with `#` comment lines.
//! The parenthesised format keeps the `( x, y, p, t_us )` field order. In
//! both, polarity `1` is ON and either `0` or `-1` is OFF.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Polarity, RecordingMeta, SensorGeometry};

pub const CSV_HEADER: &str = "# t_us,x,y,p";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Paren,
}

impl EventFormat {
    /// Guesses the format from a file extension; anything but `.txt`/`.paren` is CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt") | Some("paren") => EventFormat::Paren,
            _ => EventFormat::Csv,
        }
    }
}

impl std::str::FromStr for EventFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(EventFormat::Csv),
            "paren" => Ok(EventFormat::Paren),
            other => Err(Error::Config(format!("unknown event format `{other}`"))),
        }
    }
}

fn parse_polarity(field: &str, line: usize) -> Result<Polarity> {
    match field {
        "1" | "+1" => Ok(Polarity::On),
        "0" | "-1" => Ok(Polarity::Off),
        other => Err(Error::Parse {
            line,
            message: format!("bad polarity `{other}`"),
        }),
    }
}

fn parse_field<T: std::str::FromStr>(field: &str, name: &str, line: usize) -> Result<T> {
    field.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {name} `{field}`"),
    })
}

fn checked_event(
    t_us: u64,
    x: u32,
    y: u32,
    polarity: Polarity,
    geometry: SensorGeometry,
) -> Result<Event> {
    if !geometry.contains(x, y) {
        return Err(Error::OutOfBounds {
            x,
            y,
            width: geometry.width,
            height: geometry.height,
        });
    }
    Ok(Event::new(t_us, x as u16, y as u16, polarity))
}

fn for_each_record<R: BufRead>(
    mut reader: R,
    mut f: impl FnMut(&str, usize) -> Result<()>,
) -> Result<()> {
    let mut buf = String::new();
    let mut line_no = 0usize;
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            return Ok(());
        }
        line_no += 1;
        let line = buf.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        f(line, line_no)?;
    }
}

pub fn parse_csv_events<R: BufRead>(reader: R, geometry: SensorGeometry) -> Result<EventStream> {
    let mut events = Vec::new();
    for_each_record(reader, |line, line_no| {
        let mut fields = line.split(',').map(str::trim);
        let (Some(t), Some(x), Some(y), Some(p), None) = (
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
        ) else {
            return Err(Error::Parse {
                line: line_no,
                message: "expected 4 fields `t_us,x,y,p`".into(),
            });
        };
        let t_us = parse_field(t, "timestamp", line_no)?;
        let x = parse_field(x, "x", line_no)?;
        let y = parse_field(y, "y", line_no)?;
        let polarity = parse_polarity(p, line_no)?;
        events.push(checked_event(t_us, x, y, polarity, geometry)?);
        Ok(())
    })?;
    EventStream::build(events, geometry, RecordingMeta::default())
}

pub fn parse_paren_events<R: BufRead>(reader: R, geometry: SensorGeometry) -> Result<EventStream> {
    let mut events = Vec::new();
    for_each_record(reader, |line, line_no| {
        let inner = line
            .strip_prefix('(')
            .and_then(|rest| rest.strip_suffix(')'))
            .ok_or_else(|| Error::Parse {
                line: line_no,
                message: "expected `( x, y, p, t_us )`".into(),
            })?;
        let fields: Vec<&str> = inner.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let x = parse_field(fields[0], "x", line_no)?;
        let y = parse_field(fields[1], "y", line_no)?;
        let polarity = parse_polarity(fields[2], line_no)?;
        let t_us = parse_field(fields[3], "timestamp", line_no)?;
        events.push(checked_event(t_us, x, y, polarity, geometry)?);
        Ok(())
    })?;
    EventStream::build(events, geometry, RecordingMeta::default())
}

pub fn parse_events<R: BufRead>(
    reader: R,
    format: EventFormat,
    geometry: SensorGeometry,
) -> Result<EventStream> {
    match format {
        EventFormat::Csv => parse_csv_events(reader, geometry),
        EventFormat::Paren => parse_paren_events(reader, geometry),
    }
}

pub fn read_events_file(
    path: &std::path::Path,
    format: EventFormat,
    geometry: SensorGeometry,
) -> Result<EventStream> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let stream = parse_events(std::io::BufReader::new(file), format, geometry)?;
    let meta = RecordingMeta {
        source_path: Some(path.display().to_string()),
        ..stream.meta().clone()
    };
    Ok(stream.with_meta(meta))
}

fn polarity_code(p: Polarity) -> u8 {
    match p {
        Polarity::On => 1,
        Polarity::Off => 0,
    }
}

pub fn write_csv_events<W: Write>(stream: &EventStream, writer: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "{CSV_HEADER}")?;
    for ev in stream.events() {
        writeln!(w, "{},{},{},{}", ev.t_us, ev.x, ev.y, polarity_code(ev.polarity))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_events_string(stream: &EventStream) -> String {
    let mut out = Vec::new();
    write_csv_events(stream, &mut out).expect("writing to a Vec cannot fail");
    String::from_utf8(out).expect("ascii output")
}

pub fn write_paren_events<W: Write>(stream: &EventStream, writer: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    for ev in stream.events() {
        writeln!(
            w,
            "( {}, {}, {}, {} )",
            ev.x,
            ev.y,
            polarity_code(ev.polarity),
            ev.t_us
        )?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the subject table: demographics plus smartwatch heart rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub subject_id: String,
    pub age_band: String,
    pub gender: String,
    pub skin_tone: String,
    pub actual_hr_resting: Option<f64>,
    pub actual_hr_elevated: Option<f64>,
}

pub const BPM_RANGE: (f64, f64) = (30.0, 250.0);

pub(crate) fn check_bpm(field: &str, value: f64) -> Result<f64> {
    if !(BPM_RANGE.0..=BPM_RANGE.1).contains(&value) {
        return Err(Error::Range {
            field: field.to_string(),
            value,
        });
    }
    Ok(value)
}

/// Column lookup over a CSV header, tolerant of extra columns and ordering.
pub(crate) struct Columns {
    names: Vec<String>,
}

impl Columns {
    pub(crate) fn new(headers: &csv::StringRecord) -> Self {
        Self {
            names: headers.iter().map(|h| h.trim().to_ascii_lowercase()).collect(),
        }
    }

    pub(crate) fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub(crate) fn require(&self, name: &str) -> Result<usize> {
        self.index(name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    }
}

pub(crate) fn csv_reader<R: std::io::Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(reader)
}

pub(crate) fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        message: err.to_string(),
    }
}

pub(crate) fn optional_bpm(field: &str, raw: &str, line: usize) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() || raw == "-" {
        return Ok(None);
    }
    let value: f64 = raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {field} `{raw}`"),
    })?;
    check_bpm(field, value).map(Some)
}

/// Parses `subject_id,age,gender,skin_tone,resting_hr,elevated_hr`.
/// Empty cells (or `-`) mean the subject declined that measurement.
pub fn parse_ground_truth<R: std::io::Read>(reader: R) -> Result<Vec<GroundTruthRecord>> {
    let mut rdr = csv_reader(reader);
    let cols = Columns::new(rdr.headers().map_err(csv_error)?);
    let id = cols.require("subject_id")?;
    let age = cols.require("age")?;
    let gender = cols.require("gender")?;
    let skin = cols.require("skin_tone")?;
    let resting = cols.require("resting_hr")?;
    let elevated = cols.require("elevated_hr")?;

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let get = |i: usize| record.get(i).unwrap_or("").to_string();
        out.push(GroundTruthRecord {
            subject_id: get(id),
            age_band: get(age),
            gender: get(gender),
            skin_tone: get(skin),
            actual_hr_resting: optional_bpm("resting_hr", &get(resting), line)?,
            actual_hr_elevated: optional_bpm("elevated_hr", &get(elevated), line)?,
        });
    }
    Ok(out)
}
