use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use super::config::ConfigError;
use super::run::RunMetrics;

pub const CSV_HEADER: &str = "structure,scheme,n,threads_u,threads_rs,threads_rl,rtx_size,dist,seed,dur_s,\
upd_ops_s,rtx_ops_s,lkp_ops_s,reach_nodes,avg_list_len,avg_chain_c,avg_compact_trav,retained_items";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

impl FromStr for Format {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(ConfigError::Unknown { what: "format", value: s.into() }),
        }
    }
}

/// One output row: config echo plus metrics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub structure: String,
    pub scheme: String,
    pub n: usize,
    pub threads_u: usize,
    pub threads_rs: usize,
    pub threads_rl: usize,
    pub rtx_size: u64,
    pub dist: String,
    pub seed: u64,
    pub dur_s: f64,
    pub upd_ops_s: f64,
    pub rtx_ops_s: f64,
    pub lkp_ops_s: f64,
    pub reach_nodes: usize,
    pub avg_list_len: f64,
    pub avg_chain_c: f64,
    pub avg_compact_trav: f64,
    pub retained_items: usize,
}

impl From<&RunMetrics> for Record {
    fn from(m: &RunMetrics) -> Self {
        let c = &m.config;
        Record {
            structure: c.structure.to_string(),
            scheme: c.scheme.to_string(),
            n: c.n,
            // mixed workers do updates too
            threads_u: c.update_threads + c.mixed_threads,
            threads_rs: c.small_rtx_threads,
            threads_rl: c.large_rtx_threads,
            rtx_size: c.rtx_size,
            dist: c.dist.to_string(),
            seed: c.seed.wrapping_add(m.run as u64),
            dur_s: m.measured_s,
            upd_ops_s: m.upd_ops_s,
            rtx_ops_s: m.rtx_ops_s,
            lkp_ops_s: m.lkp_ops_s,
            reach_nodes: m.reach_nodes,
            avg_list_len: m.avg_list_len,
            avg_chain_c: m.avg_chain_c,
            avg_compact_trav: m.avg_compact_trav,
            retained_items: m.retained_items,
        }
    }
}

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn write_to<W: Write>(runs: &[RunMetrics], format: Format, w: W) -> Result<(), EmitError> {
    let records: Vec<Record> = runs.iter().map(Record::from).collect();
    match format {
        Format::Csv => {
            let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
            out.write_record(CSV_HEADER.split(','))?;
            for r in &records {
                out.serialize(r)?;
            }
            out.flush().map_err(csv::Error::from)?;
        }
        Format::Json => {
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, &records)?;
            writeln!(w).map_err(serde_json::Error::io)?;
        }
    }
    Ok(())
}

/// Writes to `path`, or to stdout when it is `None`.
pub fn write_results(runs: &[RunMetrics], format: Format, path: Option<&Path>) -> Result<(), EmitError> {
    match path {
        None => write_to(runs, format, io::stdout().lock()),
        Some(p) => {
            let io_err = |source| EmitError::Io { path: p.to_path_buf(), source };
            let f = File::create(p).map_err(io_err)?;
            let mut w = BufWriter::new(f);
            write_to(runs, format, &mut w)?;
            w.flush().map_err(io_err)
        }
    }
}
