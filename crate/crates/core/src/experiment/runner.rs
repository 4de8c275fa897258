use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{id_hash, mix_seed, ExperimentConfig};
use crate::calibrate::{calibrate_catchment, write_chain_dump, CalibrationData};
use crate::ensemble::{run_scheme, CatchmentInputs, SchemeId, SchemeOutput};
use crate::error::{Error, Result};
use crate::evaluate::{score_prediction, wisdom_metrics, MetricsRecord};
use crate::stats::{empirical_quantile, median};
use crate::timeseries::{
    aggregate_daily_to_monthly, full_year_span, partition, read_daily_csv, validate_series, MonthlySeries,
    PeriodPartition,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub catchment: String,
    pub psrf: f64,
    pub converged: bool,
    pub attempts: usize,
    pub acceptance_rate: f64,
}

/// Distribution of per-sister relative improvements and the relative
/// difference for one catchment, scheme and level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WisdomRecord {
    pub catchment: String,
    pub scheme: String,
    pub level: f64,
    pub alpha: f64,
    pub ais_out: f64,
    pub aais_in: f64,
    pub rd: f64,
    pub ri_min: f64,
    pub ri_q25: f64,
    pub ri_median: f64,
    pub ri_q75: f64,
    pub ri_max: f64,
    /// Sisters with a zero interval score, excluded from the RI columns.
    pub ri_undefined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub catchment: String,
    pub scheme: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub catchment: String,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatchmentResult {
    pub id: String,
    pub metrics: Vec<MetricsRecord>,
    pub wisdom: Vec<WisdomRecord>,
    pub timing: Vec<TimingRecord>,
    pub calibration: Option<CalibrationSummary>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutcome {
    /// Successful catchments in id order.
    pub results: Vec<CatchmentResult>,
    pub failures: Vec<FailureRecord>,
}

impl ExperimentOutcome {
    pub fn metrics(&self) -> Vec<MetricsRecord> {
        self.results.iter().flat_map(|r| r.metrics.iter().cloned()).collect()
    }
}

/// Reads a daily catchment file and aggregates its whole calendar years.
pub fn load_catchment(path: &Path) -> Result<MonthlySeries> {
    let daily = read_daily_csv(path)?;
    let span = full_year_span(&daily)?;
    let series = aggregate_daily_to_monthly(&daily, span)?;
    let report = validate_series(&series);
    if !report.accepted {
        return Err(Error::invalid(format!("monthly series rejected: {report:?}")));
    }
    Ok(series)
}

/// `(id, path)` for every catchment of the experiment, sorted by id.
pub fn discover_catchments(config: &ExperimentConfig) -> Result<Vec<(String, PathBuf)>> {
    let mut out: Vec<(String, PathBuf)> = if config.catchments.is_empty() {
        let dir = &config.input_dir;
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut found = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.extension().is_some_and(|e| e == "csv") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    found.push((stem.to_string(), path.clone()));
                }
            }
        }
        found
    } else {
        config
            .catchments
            .iter()
            .map(|id| (id.clone(), config.input_dir.join(format!("{id}.csv"))))
            .collect()
    };
    out.sort();
    out.dedup_by(|a, b| a.0 == b.0);
    Ok(out)
}

fn fail(id: &str, stage: impl Into<String>, e: Error) -> FailureRecord {
    FailureRecord {
        catchment: id.to_string(),
        stage: stage.into(),
        message: e.to_string(),
    }
}

fn ri_distribution(ri: &[Option<f64>]) -> (Vec<f64>, usize) {
    let mut defined: Vec<f64> = ri.iter().flatten().copied().collect();
    defined.sort_by(f64::total_cmp);
    let undefined = ri.len() - defined.len();
    (defined, undefined)
}

/// Partition implied by the configured period lengths; `testing = auto`
/// takes every remaining month.
pub fn series_partition(series: &MonthlySeries, config: &ExperimentConfig) -> Result<PeriodPartition> {
    let needed = config.warmup + config.calibration + config.training;
    let n_total = match config.testing {
        Some(n3) => needed + n3,
        None => series.len(),
    };
    if n_total > series.len() {
        return Err(Error::invalid(format!(
            "series has {} months, partition needs {n_total}",
            series.len()
        )));
    }
    partition(n_total, config.warmup, config.calibration, config.training)
}

/// Runs one scheme on one catchment with the same seeds the batch runner
/// would use. Returns the output and the testing-period observations.
pub fn run_single_scheme(
    id: &str,
    series: &MonthlySeries,
    config: &ExperimentConfig,
    scheme: SchemeId,
) -> Result<(SchemeOutput, Vec<f64>)> {
    let part = series_partition(series, config)?;
    let n_total = part.n_total();
    let inputs = CatchmentInputs {
        precipitation: &series.precipitation[..n_total],
        potential_evaporation: &series.potential_evaporation[..n_total],
        streamflow: &series.streamflow[..n_total],
        partition: &part,
    };
    let seed = mix_seed(config.seed, id_hash(id));
    let calibration = if scheme.is_ensemble() {
        let data = CalibrationData {
            precipitation: inputs.precipitation,
            potential_evaporation: inputs.potential_evaporation,
            streamflow: inputs.streamflow,
            partition: &part,
        };
        Some(calibrate_catchment(&data, &config.chain_config(mix_seed(seed, 1))?)?)
    } else {
        None
    };
    let settings = config.ensemble_settings(mix_seed(seed, 2));
    let out = run_scheme(scheme, &inputs, calibration.as_ref().map(|c| &c.sample), &settings)?;
    Ok((out, inputs.observed_test().to_vec()))
}

/// Runs every configured scheme on one catchment and scores it.
pub fn run_catchment(
    id: &str,
    series: &MonthlySeries,
    config: &ExperimentConfig,
) -> std::result::Result<CatchmentResult, FailureRecord> {
    let part = series_partition(series, config).map_err(|e| fail(id, "partition", e))?;
    let n_total = part.n_total();
    let precip = &series.precipitation[..n_total];
    let pet = &series.potential_evaporation[..n_total];
    let flow = &series.streamflow[..n_total];
    let seed = mix_seed(config.seed, id_hash(id));

    let calibration = if config.schemes.iter().any(|s| s.is_ensemble()) {
        let chain_cfg = config
            .chain_config(mix_seed(seed, 1))
            .map_err(|e| fail(id, "calibrate", e))?;
        let data = CalibrationData {
            precipitation: precip,
            potential_evaporation: pet,
            streamflow: flow,
            partition: &part,
        };
        let cal = calibrate_catchment(&data, &chain_cfg).map_err(|e| fail(id, "calibrate", e))?;
        if !cal.converged {
            log::warn!(
                "{id}: chains did not converge after {} attempts (best PSRF {:.3})",
                cal.attempts,
                cal.psrf
            );
        }
        if config.chain_dump {
            let dir = config.output_dir.join("chains");
            std::fs::create_dir_all(&dir).map_err(|e| fail(id, "chain dump", Error::io(&dir, e)))?;
            write_chain_dump(&dir.join(format!("{id}.csv")), &cal.chains).map_err(|e| fail(id, "chain dump", e))?;
        }
        Some(cal)
    } else {
        None
    };

    let inputs = CatchmentInputs {
        precipitation: precip,
        potential_evaporation: pet,
        streamflow: flow,
        partition: &part,
    };
    let settings = config.ensemble_settings(mix_seed(seed, 2));
    let obs = inputs.observed_test();
    let mut result = CatchmentResult {
        id: id.to_string(),
        metrics: Vec::new(),
        wisdom: Vec::new(),
        timing: Vec::new(),
        calibration: calibration.as_ref().map(|c| CalibrationSummary {
            catchment: id.to_string(),
            psrf: c.psrf,
            converged: c.converged,
            attempts: c.attempts,
            acceptance_rate: crate::stats::mean(
                &c.chains
                    .chains
                    .iter()
                    .map(|ch| ch.acceptance_rate())
                    .collect::<Vec<_>>(),
            ),
        }),
    };
    for &scheme in &config.schemes {
        let stage = format!("scheme {scheme}");
        let out = run_scheme(scheme, &inputs, calibration.as_ref().map(|c| &c.sample), &settings)
            .map_err(|e| fail(id, &stage, e))?;
        let name = scheme.to_string();
        result.metrics.extend(
            score_prediction(id, &name, &out.prediction, obs, &config.alphas).map_err(|e| fail(id, &stage, e))?,
        );
        if let Some(aux) = &out.auxiliary {
            for &alpha in &config.alphas {
                let w = wisdom_metrics(aux, &out.prediction, obs, alpha).map_err(|e| fail(id, &stage, e))?;
                let (ri, undefined) = ri_distribution(&w.ri_out_in);
                let q = |p: f64| {
                    if ri.is_empty() {
                        f64::NAN
                    } else {
                        empirical_quantile(&ri, p)
                    }
                };
                result.wisdom.push(WisdomRecord {
                    catchment: id.to_string(),
                    scheme: name.clone(),
                    level: 1.0 - alpha,
                    alpha,
                    ais_out: w.ais_out,
                    aais_in: w.aais_in,
                    rd: w.rd,
                    ri_min: q(0.0),
                    ri_q25: q(0.25),
                    ri_median: if ri.is_empty() { f64::NAN } else { median(&ri) },
                    ri_q75: q(0.75),
                    ri_max: q(1.0),
                    ri_undefined: undefined,
                });
            }
        }
        result.timing.push(TimingRecord {
            catchment: id.to_string(),
            scheme: name,
            seconds: out.elapsed.as_secs_f64(),
        });
    }
    Ok(result)
}

/// Loads and processes every catchment on a pool of `config.workers`
/// threads. Results are ordered by catchment id whatever the schedule.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let catchments = discover_catchments(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<std::result::Result<CatchmentResult, FailureRecord>> = pool.install(|| {
        catchments
            .par_iter()
            .map(|(id, path)| {
                log::info!("{id}: start");
                let series = load_catchment(path).map_err(|e| fail(id, "ingest", e))?;
                let r = run_catchment(id, &series, config);
                match &r {
                    Ok(_) => log::info!("{id}: done"),
                    Err(f) => log::warn!("{id}: failed during {}: {}", f.stage, f.message),
                }
                r
            })
            .collect()
    });
    let mut outcome = ExperimentOutcome::default();
    for r in outcomes {
        match r {
            Ok(res) => outcome.results.push(res),
            Err(f) => outcome.failures.push(f),
        }
    }
    Ok(outcome)
}
