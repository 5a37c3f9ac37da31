//! Cartesian parameter sweeps on a sized worker pool with an
//! order-independent merge.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::dyson::{scaling_fit, ScalingFit};
use crate::error::{Error, Result};
use crate::harness::config::{ScenarioConfig, Study};
use crate::harness::studies::format_value;
use crate::harness::{run_point, Metadata, RunRecord};

pub const AGGREGATE_CSV: &str = "aggregate.csv";
pub const AGGREGATE_JSON: &str = "aggregate.json";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub axes: BTreeMap<String, f64>,
    pub outcome: std::result::Result<RunRecord, String>,
}

impl SweepPoint {
    pub fn csv_bodies(&self) -> Vec<String> {
        self.outcome
            .as_ref()
            .map(RunRecord::csv_bodies)
            .unwrap_or_default()
    }

    pub fn status(&self) -> &'static str {
        match &self.outcome {
            Ok(r) if r.converged() => "ok",
            Ok(_) => "flagged",
            Err(_) => "failed",
        }
    }
}

/// Power-law fit of one summary key against N within a group of points that
/// share every other axis value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupFit {
    pub key: String,
    pub group: BTreeMap<String, f64>,
    pub n_atoms: Vec<f64>,
    pub fit: ScalingFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub study: Study,
    pub points: Vec<SweepPoint>,
    pub fits: Vec<GroupFit>,
    pub partial: bool,
    pub aggregate_csv: String,
    pub aggregate_json: String,
}

impl SweepResult {
    /// True when every point ran and raised no convergence flag.
    pub fn converged(&self) -> bool {
        self.points.iter().all(|p| p.status() == "ok")
    }
}

/// Summary keys fitted against N for each study.
pub fn fit_keys(study: Study) -> &'static [&'static str] {
    match study {
        Study::SpinClassical => &["fluctuation_ratio"],
        Study::Wigner => &["averaged_w_int_sup"],
        Study::DysonScaling => &[
            "exact_chi_prime_amplitude",
            "first_order_amplitude",
            "second_order_amplitude",
        ],
        Study::Cat | Study::Fock | Study::Convergence => &[],
    }
}

#[derive(Serialize)]
struct PointJson<'a> {
    index: usize,
    axes: &'a BTreeMap<String, f64>,
    status: &'static str,
    error: Option<&'a str>,
    flags: Vec<String>,
    summary: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct AggregateJson<'a> {
    metadata: Metadata,
    study: Study,
    config: &'a ScenarioConfig,
    partial: bool,
    points: Vec<PointJson<'a>>,
    fits: &'a [GroupFit],
}

/// Evaluates every sweep point on a pool of `workers` threads (0 = all
/// cores). Points land in `out/point_NNNN`, aggregates in `out`.
pub fn run_sweep(
    config: &ScenarioConfig,
    out: Option<&Path>,
    workers: usize,
) -> Result<SweepResult> {
    let start = Instant::now();
    config.validate()?;
    let config = &config.canonical();
    let study = config.study()?;
    let points = config.sweep_points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config {
            field: "workers".into(),
            reason: e.to_string(),
        })?;
    let single = config.sweep.values().all(Vec::is_empty);
    let results: Vec<SweepPoint> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(index, axes)| {
                let axes: BTreeMap<String, f64> = axes.iter().cloned().collect();
                let dir = out.map(|o| {
                    if single {
                        o.to_path_buf()
                    } else {
                        o.join(format!("point_{index:04}"))
                    }
                });
                let outcome = axes
                    .iter()
                    .try_fold(config.clone(), |c, (k, v)| c.with_axis(k, *v))
                    .and_then(|c| run_point(&c, axes.clone(), dir.as_deref()))
                    .map_err(|e| e.to_string());
                SweepPoint {
                    index,
                    axes,
                    outcome,
                }
            })
            .collect()
    });
    let fits = group_fits(study, &results);
    let partial = results.iter().any(|p| p.outcome.is_err());
    let aggregate_csv = aggregate_csv(&results);
    let doc = AggregateJson {
        metadata: Metadata::now(start.elapsed().as_secs_f64()),
        study,
        config,
        partial,
        points: results
            .iter()
            .map(|p| PointJson {
                index: p.index,
                axes: &p.axes,
                status: p.status(),
                error: p.outcome.as_ref().err().map(String::as_str),
                flags: p
                    .outcome
                    .as_ref()
                    .map(|r| r.flags.clone())
                    .unwrap_or_default(),
                summary: p
                    .outcome
                    .as_ref()
                    .map(|r| r.summary.clone())
                    .unwrap_or_default(),
            })
            .collect(),
        fits: &fits,
    };
    let aggregate_json = serde_json::to_string_pretty(&doc).map_err(|e| Error::Format {
        format: "json",
        reason: e.to_string(),
    })? + "\n";
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(AGGREGATE_CSV), &aggregate_csv)?;
        std::fs::write(dir.join(AGGREGATE_JSON), &aggregate_json)?;
    }
    Ok(SweepResult {
        study,
        points: results,
        fits,
        partial,
        aggregate_csv,
        aggregate_json,
    })
}

fn aggregate_csv(points: &[SweepPoint]) -> String {
    let axes: BTreeSet<&String> = points.iter().flat_map(|p| p.axes.keys()).collect();
    let keys: BTreeSet<&String> = points
        .iter()
        .filter_map(|p| p.outcome.as_ref().ok())
        .flat_map(|r| r.summary.keys())
        .collect();
    let mut header: Vec<String> = vec!["point".into()];
    header.extend(axes.iter().map(|a| a.to_string()));
    header.push("status".into());
    header.extend(keys.iter().map(|k| k.to_string()));
    let mut out = header.join(",") + "\n";
    for p in points {
        let mut cells = vec![p.index.to_string()];
        cells.extend(
            axes.iter()
                .map(|a| p.axes.get(*a).map_or(String::new(), |v| format_value(*v))),
        );
        cells.push(p.status().to_string());
        for k in &keys {
            let v = p
                .outcome
                .as_ref()
                .ok()
                .and_then(|r| r.summary.get(*k))
                .copied()
                .unwrap_or(f64::NAN);
            cells.push(format_value(v));
        }
        out += &(cells.join(",") + "\n");
    }
    out
}

fn group_fits(study: Study, points: &[SweepPoint]) -> Vec<GroupFit> {
    let mut groups: BTreeMap<Vec<(String, u64)>, (BTreeMap<String, f64>, Vec<&SweepPoint>)> =
        BTreeMap::new();
    for p in points.iter().filter(|p| p.axes.contains_key("n_atoms")) {
        let others: BTreeMap<String, f64> = p
            .axes
            .iter()
            .filter(|(k, _)| *k != "n_atoms")
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        let key = others
            .iter()
            .map(|(k, v)| (k.clone(), v.to_bits()))
            .collect();
        groups
            .entry(key)
            .or_insert_with(|| (others, Vec::new()))
            .1
            .push(p);
    }
    let mut fits = Vec::new();
    for (_, (group, members)) in groups {
        for key in fit_keys(study) {
            let pts: Vec<(f64, f64)> = members
                .iter()
                .filter_map(|p| {
                    let v = *p.outcome.as_ref().ok()?.summary.get(*key)?;
                    (v.is_finite() && v > 0.0).then(|| (p.axes["n_atoms"], v))
                })
                .collect();
            if let Ok(fit) = scaling_fit(&pts) {
                fits.push(GroupFit {
                    key: key.to_string(),
                    group: group.clone(),
                    n_atoms: pts.iter().map(|p| p.0).collect(),
                    fit,
                });
            }
        }
    }
    fits
}
