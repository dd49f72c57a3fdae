//! AIS CSV ingestion.
//!
//! Files use a fixed header:
//!
//! ```text
//! SHIP_ID,SHIPTYPE,SPEED,LON,LAT,COURSE,HEADING,TIMESTAMP,DEPARTURE_PORT_NAME,REPORTED_DRAUGHT,ARRIVAL_TIME,ARRIVAL_PORT
//! ```
//!
//! Query (unlabeled) files carry the same header and leave the last two
//! columns empty. Fields are comma separated and never quoted. A malformed
//! row is reported as a [`RowError`] and parsing continues; only a bad header
//! aborts the whole file.

use std::fmt;
use std::io::{self, Read, Write};

use chrono::{DateTime, NaiveDateTime};
use thiserror::Error;

use crate::geo::{normalize_lon, GeoPoint};

pub const HEADER: [&str; 12] = [
    "SHIP_ID",
    "SHIPTYPE",
    "SPEED",
    "LON",
    "LAT",
    "COURSE",
    "HEADING",
    "TIMESTAMP",
    "DEPARTURE_PORT_NAME",
    "REPORTED_DRAUGHT",
    "ARRIVAL_TIME",
    "ARRIVAL_PORT",
];

/// AIS code for "heading not available".
pub const HEADING_UNAVAILABLE: f64 = 511.0;

const ISO_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// UTC instant at second resolution, stored as epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn epoch_seconds(self) -> i64 {
        self.0
    }

    pub fn plus_seconds(self, secs: i64) -> Timestamp {
        Timestamp(self.0 + secs)
    }
}

impl fmt::Display for Timestamp {
    /// `YYYY-MM-DDTHH:MM:SS`, no zone suffix. Falls back to the raw epoch
    /// value outside chrono's representable range.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match DateTime::from_timestamp(self.0, 0) {
            Some(dt) => write!(f, "{}", dt.naive_utc().format(ISO_FORMAT)),
            None => write!(f, "{}", self.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unrecognized timestamp {0:?}: expected YYYY-MM-DDTHH:MM:SS or epoch seconds")]
pub struct TimestampError(pub String);

/// Parses `YYYY-MM-DDTHH:MM:SS` (UTC) or an integer epoch-seconds literal.
pub fn parse_timestamp(text: &str) -> Result<Timestamp, TimestampError> {
    let t = text.trim();
    let is_integer = {
        let digits = t.strip_prefix('-').unwrap_or(t);
        !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
    };
    if is_integer {
        return t
            .parse::<i64>()
            .map(Timestamp)
            .map_err(|_| TimestampError(text.to_string()));
    }
    NaiveDateTime::parse_from_str(t, ISO_FORMAT)
        .map(|dt| Timestamp(dt.and_utc().timestamp()))
        .map_err(|_| TimestampError(text.to_string()))
}

/// Canonical port token: trimmed and upper-cased.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortName(String);

impl PortName {
    /// Returns `None` for blank names.
    pub fn new(raw: &str) -> Option<Self> {
        let t = raw.trim();
        if t.is_empty() {
            None
        } else {
            Some(Self(t.to_uppercase()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PortName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One parsed AIS message.
#[derive(Debug, Clone, PartialEq)]
pub struct AisRecord {
    pub ship_id: String,
    pub ship_type: i32,
    pub speed_knots: f64,
    pub lon_deg: f64,
    pub lat_deg: f64,
    pub course_deg: Option<f64>,
    pub heading_deg: Option<f64>,
    pub timestamp: Timestamp,
    pub departure_port: PortName,
    pub draught: Option<f64>,
    pub arrival_time: Option<Timestamp>,
    pub arrival_port: Option<PortName>,
}

impl AisRecord {
    pub fn position(&self) -> GeoPoint {
        // Coordinates are range-checked at parse time.
        GeoPoint::new(self.lat_deg, self.lon_deg).expect("validated AIS coordinates")
    }

    pub fn is_labeled(&self) -> bool {
        self.arrival_time.is_some() && self.arrival_port.is_some()
    }
}

/// A data row that could not be turned into an [`AisRecord`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct RowError {
    /// 1-based line number in the file (the header is line 1).
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing header")]
    MissingHeader,
    #[error("unexpected header {found:?}, expected {}", HEADER.join(","))]
    BadHeader { found: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Default)]
pub struct ParsedAis {
    pub records: Vec<AisRecord>,
    pub errors: Vec<RowError>,
}

/// Parses an AIS CSV stream. With `labeled` set, every row must carry
/// `ARRIVAL_TIME` and `ARRIVAL_PORT`; without it those columns are ignored.
pub fn parse_ais_csv<R: Read>(input: R, labeled: bool) -> Result<ParsedAis, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .quoting(false)
        .trim(csv::Trim::None)
        .from_reader(input);

    let mut rows = reader.records();
    let header = loop {
        match rows.next() {
            None => return Err(IngestError::MissingHeader),
            Some(row) => {
                let row = row?;
                if is_blank(&row) {
                    continue;
                }
                break row;
            }
        }
    };
    let header_ok = header.len() == HEADER.len()
        && header.iter().zip(HEADER).all(|(got, want)| {
            got.trim()
                .trim_start_matches('\u{feff}')
                .eq_ignore_ascii_case(want)
        });
    if !header_ok {
        return Err(IngestError::BadHeader {
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut parsed = ParsedAis::default();
    for row in rows {
        let row = row?;
        if is_blank(&row) {
            continue;
        }
        let line = row.position().map_or(0, |p| p.line() as usize);
        match parse_row(&row, labeled) {
            Ok(rec) => parsed.records.push(rec),
            Err(reason) => parsed.errors.push(RowError { line, reason }),
        }
    }
    Ok(parsed)
}

fn is_blank(row: &csv::StringRecord) -> bool {
    row.iter().all(|f| f.trim().is_empty())
}

fn parse_row(row: &csv::StringRecord, labeled: bool) -> Result<AisRecord, String> {
    if row.len() != HEADER.len() {
        return Err(format!(
            "expected {} fields, found {}",
            HEADER.len(),
            row.len()
        ));
    }
    let field = |i: usize| row[i].trim();

    let ship_id = field(0);
    if ship_id.is_empty() {
        return Err("empty ship id".into());
    }
    let ship_type = field(1)
        .parse::<i32>()
        .map_err(|_| format!("invalid ship type {:?}", field(1)))?;
    let speed_knots = number(field(2), "speed")?;
    if speed_knots < 0.0 {
        return Err(format!("negative speed {speed_knots}"));
    }
    let lon_deg = number(field(3), "longitude")?;
    let lat_deg = number(field(4), "latitude")?;
    if !(-90.0..=90.0).contains(&lat_deg) {
        return Err("latitude out of range".into());
    }
    let course_deg = optional_number(field(5), "course")?;
    if let Some(c) = course_deg {
        if !(0.0..360.0).contains(&c) {
            return Err(format!("course out of range: {c}"));
        }
    }
    let heading_deg = match optional_number(field(6), "heading")? {
        Some(h) if h == HEADING_UNAVAILABLE => None,
        Some(h) if !(0.0..360.0).contains(&h) => {
            return Err(format!("heading out of range: {h}"));
        }
        other => other,
    };
    let timestamp = parse_timestamp(field(7)).map_err(|e| e.to_string())?;
    let departure_port = PortName::new(field(8)).ok_or("empty departure port")?;
    let draught = optional_number(field(9), "draught")?;
    if let Some(d) = draught {
        if d < 0.0 {
            return Err(format!("negative draught {d}"));
        }
    }

    let (arrival_time, arrival_port) = if labeled {
        let at = field(10);
        if at.is_empty() {
            return Err("missing arrival time".into());
        }
        let at = parse_timestamp(at).map_err(|e| e.to_string())?;
        if at < timestamp {
            return Err("arrival time precedes timestamp".into());
        }
        let port = PortName::new(field(11)).ok_or("missing arrival port")?;
        (Some(at), Some(port))
    } else {
        (None, None)
    };

    Ok(AisRecord {
        ship_id: ship_id.to_string(),
        ship_type,
        speed_knots,
        lon_deg: normalize_lon(lon_deg),
        lat_deg,
        course_deg,
        heading_deg,
        timestamp,
        departure_port,
        draught,
        arrival_time,
        arrival_port,
    })
}

fn number(text: &str, what: &str) -> Result<f64, String> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("invalid {what} {text:?}")),
    }
}

fn optional_number(text: &str, what: &str) -> Result<Option<f64>, String> {
    if text.is_empty() {
        Ok(None)
    } else {
        number(text, what).map(Some)
    }
}

/// Writes records in the ingest schema. Arrival columns are emitted only
/// when `labeled` is set; a missing heading is written as `511`.
pub fn write_ais_csv<W: Write>(
    out: &mut W,
    records: &[AisRecord],
    labeled: bool,
) -> io::Result<()> {
    writeln!(out, "{}", HEADER.join(","))?;
    for r in records {
        write!(
            out,
            "{},{},{},{},{},",
            r.ship_id, r.ship_type, r.speed_knots, r.lon_deg, r.lat_deg
        )?;
        if let Some(c) = r.course_deg {
            write!(out, "{c}")?;
        }
        match r.heading_deg {
            Some(h) => write!(out, ",{h}")?,
            None => write!(out, ",{HEADING_UNAVAILABLE}")?,
        }
        write!(out, ",{},{},", r.timestamp, r.departure_port)?;
        if let Some(d) = r.draught {
            write!(out, "{d}")?;
        }
        match (labeled, r.arrival_time, &r.arrival_port) {
            (true, Some(t), Some(p)) => writeln!(out, ",{t},{p}")?,
            _ => writeln!(out, ",,")?,
        }
    }
    Ok(())
}
