//! Trace CSV and summary JSON writers.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::experiment::runner::RoundTrace;

pub const TRACE_HEADER: [&str; 11] = [
    "round",
    "loss_bob",
    "loss_eve",
    "shift_vs_bob",
    "shift_vs_wstar",
    "bob_update_norm",
    "eve_update_norm",
    "tamper_bound",
    "tamper_pass",
    "alpha",
    "secret_scalars",
];

pub fn write_trace<W: Write>(writer: W, traces: &[RoundTrace]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    // Written explicitly so an empty trace still carries the header.
    w.write_record(TRACE_HEADER)?;
    for t in traces {
        w.write_record(&[
            t.round.to_string(),
            t.loss_bob.to_string(),
            t.loss_eve.to_string(),
            t.shift_vs_bob.to_string(),
            t.shift_vs_wstar.to_string(),
            t.bob_update_norm.to_string(),
            t.eve_update_norm.to_string(),
            t.tamper_bound.to_string(),
            t.tamper_pass.map(|p| p.to_string()).unwrap_or_default(),
            t.alpha.to_string(),
            t.secret_scalars.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, traces: &[RoundTrace]) -> Result<()> {
    write_trace(std::fs::File::create(path)?, traces)
}

pub fn read_trace<R: std::io::Read>(reader: R) -> Result<Vec<RoundTrace>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().map(|row| Ok(row?)).collect()
}

pub fn write_json_file<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}
