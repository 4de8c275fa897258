//! Report files written after a run, and re-aggregation of an existing
//! `metrics.csv`.
//!
//! `metrics.csv`, `summary.json`, `rankings.csv`, `wisdom.csv`,
//! `calibration.csv` and `failures.csv` depend only on the configuration
//! and inputs. Wall-clock times go to `timing.csv` alone.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::runner::{CalibrationSummary, ExperimentOutcome, FailureRecord, TimingRecord, WisdomRecord};
use crate::error::{Error, Result};
use crate::evaluate::{competition_ranks, MetricsRecord};
use crate::stats::{mean, median};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: String,
    pub level: f64,
    pub alpha: f64,
    pub n_catchments: usize,
    pub cp_mean: f64,
    pub cp_median: f64,
    pub aw_mean: f64,
    pub aw_median: f64,
    pub ais_mean: f64,
    pub ais_median: f64,
    /// Mean competition rank of the scheme's AIS across catchments.
    pub average_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRecord {
    pub catchment: String,
    pub level: f64,
    pub scheme: String,
    pub ais: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub catchments: Vec<String>,
    pub rows: Vec<SummaryRow>,
}

fn order_of_appearance<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    for s in items {
        if !seen.iter().any(|x| x == s) {
            seen.push(s.to_string());
        }
    }
    seen
}

/// Key for grouping by level without comparing floats for equality.
fn alpha_key(alpha: f64) -> u64 {
    alpha.to_bits()
}

/// Ranks schemes within every (catchment, level) by AIS.
pub fn rankings(metrics: &[MetricsRecord]) -> Vec<RankRecord> {
    let mut groups: BTreeMap<(String, u64), Vec<&MetricsRecord>> = BTreeMap::new();
    let catchments = order_of_appearance(metrics.iter().map(|m| m.catchment.as_str()));
    for m in metrics {
        groups
            .entry((m.catchment.clone(), alpha_key(m.alpha)))
            .or_default()
            .push(m);
    }
    let mut out = Vec::new();
    for c in &catchments {
        let mut levels: Vec<f64> = Vec::new();
        for m in metrics.iter().filter(|m| &m.catchment == c) {
            if !levels.iter().any(|a| alpha_key(*a) == alpha_key(m.alpha)) {
                levels.push(m.alpha);
            }
        }
        for alpha in levels {
            let rows = &groups[&(c.clone(), alpha_key(alpha))];
            let ranks = competition_ranks(&rows.iter().map(|r| r.ais).collect::<Vec<_>>());
            for (r, rank) in rows.iter().zip(ranks) {
                out.push(RankRecord {
                    catchment: c.clone(),
                    level: r.level,
                    scheme: r.scheme.clone(),
                    ais: r.ais,
                    rank,
                });
            }
        }
    }
    out
}

/// Mean and median CP, AW and AIS per scheme and level, plus mean rank.
pub fn summarize(metrics: &[MetricsRecord]) -> Summary {
    let ranks = rankings(metrics);
    let schemes = order_of_appearance(metrics.iter().map(|m| m.scheme.as_str()));
    let mut alphas: Vec<f64> = Vec::new();
    for m in metrics {
        if !alphas.iter().any(|a| alpha_key(*a) == alpha_key(m.alpha)) {
            alphas.push(m.alpha);
        }
    }
    let mut rows = Vec::new();
    for s in &schemes {
        for &alpha in &alphas {
            let recs: Vec<&MetricsRecord> = metrics
                .iter()
                .filter(|m| &m.scheme == s && alpha_key(m.alpha) == alpha_key(alpha))
                .collect();
            if recs.is_empty() {
                continue;
            }
            let col = |f: fn(&MetricsRecord) -> f64| recs.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (cp, aw, ais) = (col(|r| r.cp), col(|r| r.aw), col(|r| r.ais));
            let rank: Vec<f64> = ranks
                .iter()
                .filter(|r| &r.scheme == s && alpha_key(r.level) == alpha_key(recs[0].level))
                .map(|r| r.rank as f64)
                .collect();
            rows.push(SummaryRow {
                scheme: s.clone(),
                level: recs[0].level,
                alpha,
                n_catchments: recs.len(),
                cp_mean: mean(&cp),
                cp_median: median(&cp),
                aw_mean: mean(&aw),
                aw_median: median(&aw),
                ais_mean: mean(&ais),
                ais_median: median(&ais),
                average_rank: mean(&rank),
            });
        }
    }
    Summary {
        catchments: order_of_appearance(metrics.iter().map(|m| m.catchment.as_str())),
        rows,
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(!rows.is_empty())
        .from_path(path)?;
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let rows = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<MetricsRecord>, _>>()?;
    Ok(rows)
}

const METRICS_HEADER: &[&str] = &[
    "catchment",
    "scheme",
    "level",
    "alpha",
    "cp",
    "aw",
    "ais",
    "crossings",
    "n_test",
];

fn write_summary(metrics: &[MetricsRecord], dir: &Path) -> Result<()> {
    let summary = summarize(metrics);
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary)?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    write_csv(
        &dir.join("rankings.csv"),
        &rankings(metrics),
        &["catchment", "level", "scheme", "ais", "rank"],
    )
}

/// Writes every report file of a finished run into `dir`.
pub fn emit_reports(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let metrics = outcome.metrics();
    if metrics.is_empty() {
        return Err(Error::invalid("no metrics to report"));
    }
    write_csv(&dir.join("metrics.csv"), &metrics, METRICS_HEADER)?;
    write_summary(&metrics, dir)?;
    let wisdom: Vec<WisdomRecord> = outcome.results.iter().flat_map(|r| r.wisdom.iter().cloned()).collect();
    write_csv(
        &dir.join("wisdom.csv"),
        &wisdom,
        &[
            "catchment",
            "scheme",
            "level",
            "alpha",
            "ais_out",
            "aais_in",
            "rd",
            "ri_min",
            "ri_q25",
            "ri_median",
            "ri_q75",
            "ri_max",
            "ri_undefined",
        ],
    )?;
    let calibration: Vec<CalibrationSummary> = outcome.results.iter().filter_map(|r| r.calibration.clone()).collect();
    write_csv(
        &dir.join("calibration.csv"),
        &calibration,
        &["catchment", "psrf", "converged", "attempts", "acceptance_rate"],
    )?;
    write_csv(
        &dir.join("failures.csv"),
        &outcome.failures,
        &["catchment", "stage", "message"],
    )?;
    write_timing(outcome, dir)
}

fn write_timing(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    let mut rows: Vec<TimingRecord> = outcome.results.iter().flat_map(|r| r.timing.iter().cloned()).collect();
    let schemes = order_of_appearance(rows.iter().map(|r| r.scheme.as_str()));
    let totals: Vec<TimingRecord> = schemes
        .iter()
        .map(|s| TimingRecord {
            catchment: "TOTAL".to_string(),
            scheme: s.clone(),
            seconds: rows.iter().filter(|r| &r.scheme == s).map(|r| r.seconds).sum(),
        })
        .collect();
    rows.extend(totals);
    write_csv(&dir.join("timing.csv"), &rows, &["catchment", "scheme", "seconds"])
}

/// Rebuilds `summary.json` and `rankings.csv` in `dir` from a metrics file.
pub fn reaggregate(metrics_csv: &Path, dir: &Path) -> Result<Summary> {
    let metrics = read_metrics_csv(metrics_csv)?;
    if metrics.is_empty() {
        return Err(Error::invalid(format!("{} holds no rows", metrics_csv.display())));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_summary(&metrics, dir)?;
    Ok(summarize(&metrics))
}

/// Failures written by a previous run.
pub fn read_failures(path: &Path) -> Result<Vec<FailureRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}
