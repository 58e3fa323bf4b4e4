use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const TRACE_SCHEMA: &str = "trace-v1";

/// One row per (replication, round, agent).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub schema: String,
    pub replication: usize,
    pub t: u64,
    pub env: usize,
    pub window: usize,
    pub agent: usize,
    /// explore, gs, exploit, forced or idle.
    pub phase: String,
    /// explore, gs-convergence, violation or optimal (market-wide).
    pub round_class: String,
    pub proposed_arm: Option<usize>,
    pub matched_arm: Option<usize>,
    pub reward: f64,
    pub regret: f64,
    pub signed_regret: f64,
    pub explore_count: u64,
    pub board_flag: bool,
    pub cd_flag: bool,
    pub lambda_min: f64,
    pub lambda_floor: f64,
    pub violations: usize,
    pub is_forced: bool,
    pub cusum_plus: f64,
    pub cusum_minus: f64,
    pub restart: bool,
    pub tau_hat: u64,
}

pub fn write_trace<W: Write>(w: W, rows: &[TraceRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_trace(std::io::BufWriter::new(f), rows)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for r in rdr.deserialize() {
        rows.push(r?);
    }
    Ok(rows)
}
