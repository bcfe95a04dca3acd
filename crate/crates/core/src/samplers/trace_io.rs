use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::DMatrix;

use super::chain::{Event, Trace};
use crate::error::{Error, Result};

/// Writes `step,event,theta_1..theta_d`.
pub fn write_trace_csv<W: Write>(trace: &Trace, mut w: W) -> Result<()> {
    let mut header = String::from("step,event");
    for j in 1..=trace.dim() {
        header.push_str(&format!(",theta_{j}"));
    }
    writeln!(w, "{header}")?;
    for k in 0..trace.len() {
        let mut line = format!("{},{}", trace.steps[k], trace.events[k].code());
        for v in trace.samples.row(k).iter() {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`]. Chain id and seed are not
/// stored in the CSV and come back as zero; the acceptance rate is
/// recomputed from the recorded events.
pub fn read_trace_csv<R: Read>(reader: R) -> Result<Trace> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty trace file".into()))??;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "step" || cols[1] != "event" {
        return Err(Error::Parse(format!("unexpected trace header `{header}`")));
    }
    let d = cols.len() - 2;
    let mut steps = Vec::new();
    let mut events = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != d + 2 {
            return Err(Error::Parse(format!("trace line {}: expected {} fields", i + 2, d + 2)));
        }
        steps.push(f[0].parse().map_err(|_| Error::Parse(format!("trace line {}: bad step", i + 2)))?);
        events.push(Event::from_code(f[1]).ok_or_else(|| Error::Parse(format!("trace line {}: bad event", i + 2)))?);
        for v in &f[2..] {
            rows.push(v.parse::<f64>().map_err(|_| Error::Parse(format!("trace line {}: bad value", i + 2)))?);
        }
    }
    let accepted = events.iter().filter(|e| **e == Event::Accepted).count();
    let moves = events.iter().filter(|e| **e != Event::LazyHold).count();
    Ok(Trace {
        chain_id: 0,
        seed: 0,
        samples: DMatrix::from_row_slice(steps.len(), d, &rows),
        steps,
        events,
        acceptance_rate: if moves == 0 { 0.0 } else { accepted as f64 / moves as f64 },
    })
}

/// Flat `key=value` sidecar.
pub fn write_metadata<W: Write>(entries: &[(&str, String)], mut w: W) -> Result<()> {
    for (k, v) in entries {
        writeln!(w, "{k}={v}")?;
    }
    Ok(())
}
