//! Prediction output: `route_key,seq,predicted_port,predicted_arrival,raw_port`.

use std::io::{self, Write};

use berthcast_core::ingest::{parse_timestamp, Timestamp};

pub const HEADER: &str = "route_key,seq,predicted_port,predicted_arrival,raw_port";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRow {
    pub route_key: String,
    /// Position of the point within its route.
    pub seq: usize,
    pub predicted_port: String,
    pub predicted_arrival: Timestamp,
    pub raw_port: String,
}

pub fn write_predictions<W: Write + ?Sized>(out: &mut W, rows: &[PredictionRow]) -> io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.route_key, r.seq, r.predicted_port, r.predicted_arrival, r.raw_port
        )?;
    }
    Ok(())
}

pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err("missing prediction header".into());
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(format!("line {}: expected 5 fields", i + 2));
            }
            Ok(PredictionRow {
                route_key: f[0].to_string(),
                seq: f[1]
                    .parse()
                    .map_err(|_| format!("line {}: bad seq", i + 2))?,
                predicted_port: f[2].to_string(),
                predicted_arrival: parse_timestamp(f[3])
                    .map_err(|e| format!("line {}: {e}", i + 2))?,
                raw_port: f[4].to_string(),
            })
        })
        .collect()
}
