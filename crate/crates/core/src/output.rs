//! Run artifacts: the per-step CSV, the TOML summary and the scenario echo.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioFile;
use crate::error::{Error, Result};
use crate::sim::{violation_intervals, Comparison, SimConfig, SimRecord, SimRun, SimSummary};

/// Bumped whenever the record columns change.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub fn write_records<W: Write>(out: W, records: &[SimRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: std::io::Read>(input: R) -> Result<Vec<SimRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub csv_schema: u32,
    pub safety_bound: f64,
    #[serde(flatten)]
    pub summary: SimSummary,
    pub violation_intervals: Vec<[f64; 2]>,
}

impl SummaryFile {
    pub fn new(cfg: &SimConfig, run: &SimRun) -> Self {
        Self {
            csv_schema: CSV_SCHEMA_VERSION,
            safety_bound: cfg.safety_bound(),
            summary: run.summary,
            violation_intervals: violation_intervals(&run.records)
                .into_iter()
                .map(|(a, b)| [a, b])
                .collect(),
        }
    }
}

fn to_toml<T: Serialize>(v: &T) -> Result<String> {
    toml::to_string(v).map_err(|e| Error::Config(format!("cannot serialize: {e}")))
}

pub fn summary_toml(cfg: &SimConfig, run: &SimRun) -> Result<String> {
    to_toml(&SummaryFile::new(cfg, run))
}

pub fn comparison_toml(cmp: &Comparison) -> Result<String> {
    to_toml(cmp)
}

/// Writes `records.csv`, `summary.toml` and `scenario.toml` under `dir`.
pub fn write_run(dir: &Path, cfg: &SimConfig, run: &SimRun) -> Result<()> {
    write_run_prefixed(dir, "", cfg, run)
}

/// As [`write_run`], with every file name prefixed by `prefix`.
pub fn write_run_prefixed(dir: &Path, prefix: &str, cfg: &SimConfig, run: &SimRun) -> Result<()> {
    fs::create_dir_all(dir)?;
    let csv = fs::File::create(dir.join(format!("{prefix}records.csv")))?;
    write_records(std::io::BufWriter::new(csv), &run.records)?;
    fs::write(dir.join(format!("{prefix}summary.toml")), summary_toml(cfg, run)?)?;
    let echo = ScenarioFile::from_sim_config(cfg).to_toml_string();
    fs::write(dir.join(format!("{prefix}scenario.toml")), echo)?;
    Ok(())
}
