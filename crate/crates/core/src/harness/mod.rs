//! Experiment driver: scenario configs, study pipelines, sweeps and output
//! files.

pub mod config;
pub mod studies;
pub mod sweep;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::Result;

pub use config::{ScenarioConfig, Study};
pub use studies::{run_study, StudyOutput};
pub use sweep::{run_sweep, SweepPoint, SweepResult};

/// File name of the per-run metric table.
pub const METRICS_FILE: &str = "metrics.csv";
/// File name of the per-run JSON record.
pub const RECORD_FILE: &str = "record.json";

/// Wall-clock data; the only non-reproducible part of a record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub created_unix: u64,
    pub wall_time_s: f64,
    pub version: &'static str,
}

impl Metadata {
    fn now(wall_time_s: f64) -> Self {
        Self {
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            wall_time_s,
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub metadata: Metadata,
    pub study: Study,
    pub axes: BTreeMap<String, f64>,
    pub config: ScenarioConfig,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub summary: BTreeMap<String, f64>,
    pub flags: Vec<String>,
    pub manifest: Vec<ManifestEntry>,
    #[serde(skip)]
    pub files: Vec<(String, Vec<u8>)>,
}

impl RunRecord {
    pub fn metrics_csv(&self) -> String {
        studies::to_csv(&self.columns, &self.rows)
    }

    /// Every CSV output of the run, metric table first.
    pub fn csv_bodies(&self) -> Vec<String> {
        self.files
            .iter()
            .filter(|(name, _)| name.ends_with(".csv"))
            .map(|(_, b)| String::from_utf8_lossy(b).into_owned())
            .collect()
    }

    pub fn converged(&self) -> bool {
        self.flags.is_empty()
    }

    /// Writes the files and then the JSON record into `dir`.
    pub fn write(&mut self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.manifest.clear();
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
            self.manifest.push(ManifestEntry {
                path: name.clone(),
                bytes: bytes.len() as u64,
            });
        }
        let json = serde_json::to_string_pretty(self).map_err(|e| crate::error::Error::Format {
            format: "json",
            reason: e.to_string(),
        })?;
        std::fs::write(dir.join(RECORD_FILE), json + "\n")?;
        Ok(())
    }
}

/// Runs one study point; writes outputs when `out` is given.
pub fn run_scenario(config: &ScenarioConfig, out: Option<&Path>) -> Result<RunRecord> {
    run_point(config, BTreeMap::new(), out)
}

pub(crate) fn run_point(
    config: &ScenarioConfig,
    axes: BTreeMap<String, f64>,
    out: Option<&Path>,
) -> Result<RunRecord> {
    let start = Instant::now();
    let study = config.study()?;
    let output = run_study(config)?;
    let mut files = vec![(
        METRICS_FILE.to_string(),
        studies::to_csv(&output.columns, &output.rows).into_bytes(),
    )];
    files.extend(output.artifacts);
    let mut record = RunRecord {
        metadata: Metadata::now(start.elapsed().as_secs_f64()),
        study,
        axes,
        config: config.clone(),
        columns: output.columns,
        rows: output.rows,
        summary: output.summary,
        flags: output.flags,
        manifest: Vec::new(),
        files,
    };
    if let Some(dir) = out {
        record.write(dir)?;
    }
    Ok(record)
}
