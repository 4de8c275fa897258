//! Synthetic catchments with known model parameters.
//!
//! Daily precipitation is a seasonal wet/dry process with gamma-distributed
//! wet-day depths; daily potential evaporation is a seasonal sinusoid with
//! mild multiplicative noise. The true monthly streamflow is the model output
//! on the monthly totals. Observed monthly flow adds Gaussian noise with
//! standard deviation `noise_relative * flow + noise_floor`, floored at zero,
//! and is spread uniformly over the days of its month.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gr2m::{self, Gr2mParams, Gr2mState};
use crate::timeseries::{aggregate_daily_to_monthly, write_daily_csv, DailyRecord, MonthlySeries, YearMonth, YearSpan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub id: String,
    pub theta1: f64,
    pub theta2: f64,
    pub start_year: i32,
    /// Whole calendar years only, so a multiple of 12.
    pub months: usize,
    pub seed: u64,
    /// Mean daily precipitation, mm/day.
    pub precip_mean: f64,
    /// Relative amplitude of the seasonal precipitation cycle, in [0, 1).
    pub precip_seasonality: f64,
    pub wet_day_probability: f64,
    /// Gamma shape of wet-day depths.
    pub rain_shape: f64,
    /// Mean daily potential evaporation, mm/day.
    pub pet_mean: f64,
    pub pet_seasonality: f64,
    pub noise_relative: f64,
    /// Additive part of the noise standard deviation, mm/month.
    pub noise_floor: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            id: "synthetic".to_string(),
            theta1: 400.0,
            theta2: 0.9,
            start_year: 1950,
            months: 600,
            seed: 0,
            precip_mean: 2.6,
            precip_seasonality: 0.5,
            wet_day_probability: 0.45,
            rain_shape: 0.8,
            pet_mean: 2.2,
            pet_seasonality: 0.6,
            noise_relative: 0.05,
            noise_floor: 0.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.id.is_empty() || self.id.contains(['/', '\\']) {
            problems.push(format!("invalid catchment id '{}'", self.id));
        }
        if !(self.theta1 > 0.0 && self.theta2 > 0.0) {
            problems.push("theta1 and theta2 must be positive".to_string());
        }
        if self.months == 0 || !self.months.is_multiple_of(12) {
            problems.push(format!("months must be a positive multiple of 12, got {}", self.months));
        }
        if !(self.precip_mean > 0.0 && self.pet_mean > 0.0 && self.rain_shape > 0.0) {
            problems.push("precipitation, evaporation and rain shape must be positive".to_string());
        }
        if !(0.0..1.0).contains(&self.precip_seasonality) || !(0.0..1.0).contains(&self.pet_seasonality) {
            problems.push("seasonal amplitudes must lie in [0, 1)".to_string());
        }
        if !(self.wet_day_probability > 0.0 && self.wet_day_probability <= 1.0) {
            problems.push("wet_day_probability must lie in (0, 1]".to_string());
        }
        if !(self.noise_relative >= 0.0 && self.noise_floor >= 0.0) {
            problems.push("noise scales must be non-negative".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn params(&self) -> Gr2mParams {
        Gr2mParams {
            theta1: self.theta1,
            theta2: self.theta2,
        }
    }
}

/// Contents of the `<id>.truth.json` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub spec: SyntheticSpec,
    /// Model output on the monthly forcing, before noise.
    pub monthly_truth_flow: Vec<f64>,
    /// Noisy monthly flow as written (before daily disaggregation).
    pub monthly_observed_flow: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCatchment {
    pub daily: Vec<DailyRecord>,
    /// Monthly totals of the written daily record.
    pub monthly: MonthlySeries,
    pub truth: TruthSidecar,
}

/// Generates a catchment in memory.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCatchment> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let years = spec.months / 12;
    let span = YearSpan::new(spec.start_year, spec.start_year + years as i32 - 1)?;
    let first = NaiveDate::from_ymd_opt(spec.start_year, 1, 1).ok_or_else(|| Error::invalid("bad start year"))?;
    let last = NaiveDate::from_ymd_opt(span.last, 12, 31).ok_or_else(|| Error::invalid("bad end year"))?;

    let wet_depth = Gamma::new(
        spec.rain_shape,
        spec.precip_mean / (spec.wet_day_probability * spec.rain_shape),
    )
    .map_err(|e| Error::invalid(e.to_string()))?;
    let mut daily = Vec::with_capacity((last - first).num_days() as usize + 1);
    for date in first.iter_days().take_while(|d| *d <= last) {
        let phase = 2.0 * PI * (date.ordinal0() as f64) / 365.25;
        // wet winters, high evaporative demand in summer
        let season_p = 1.0 + spec.precip_seasonality * phase.cos();
        let season_e = 1.0 - spec.pet_seasonality * phase.cos();
        let p = if rng.random::<f64>() < spec.wet_day_probability {
            season_p * wet_depth.sample(&mut rng)
        } else {
            0.0
        };
        let e = spec.pet_mean * season_e * (1.0 + 0.1 * (rng.random::<f64>() - 0.5));
        daily.push(DailyRecord {
            date,
            precipitation: Some(p),
            potential_evaporation: Some(e),
            streamflow: Some(0.0),
        });
    }

    let forcing = aggregate_daily_to_monthly(&daily, span)?;
    let params = spec.params();
    let truth = gr2m::run(
        &params,
        &forcing.precipitation,
        &forcing.potential_evaporation,
        Gr2mState::initial(&params),
    )?;
    let observed: Vec<f64> = truth
        .iter()
        .map(|&q| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (q + (spec.noise_relative * q + spec.noise_floor) * z).max(0.0)
        })
        .collect();

    let origin = YearMonth::new(spec.start_year, 1);
    let mut cursor = 0;
    for (m, q) in observed.iter().enumerate() {
        let days = origin.plus(m).days() as usize;
        for rec in &mut daily[cursor..cursor + days] {
            rec.streamflow = Some(q / days as f64);
        }
        cursor += days;
    }
    let monthly = aggregate_daily_to_monthly(&daily, span)?;
    Ok(SyntheticCatchment {
        daily,
        monthly,
        truth: TruthSidecar {
            spec: spec.clone(),
            monthly_truth_flow: truth,
            monthly_observed_flow: observed,
        },
    })
}

/// Writes `<dir>/<id>.csv` and `<dir>/<id>.truth.json`; returns the CSV path.
pub fn generate_synthetic(spec: &SyntheticSpec, dir: &Path) -> Result<PathBuf> {
    let catchment = generate(spec)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join(format!("{}.csv", spec.id));
    write_daily_csv(&csv, &catchment.daily)?;
    let json = truth_path(dir, &spec.id);
    let text = serde_json::to_string_pretty(&catchment.truth)?;
    std::fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
    Ok(csv)
}

pub fn truth_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.truth.json"))
}

pub fn read_truth(path: &Path) -> Result<TruthSidecar> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// `count` catchments `<prefix>_000`, `<prefix>_001`, ... sharing `base`
/// except for their seeds, which are derived from `base.seed`.
pub fn batch_specs(base: &SyntheticSpec, prefix: &str, count: usize) -> Vec<SyntheticSpec> {
    (0..count)
        .map(|i| SyntheticSpec {
            id: format!("{prefix}_{i:03}"),
            seed: super::mix_seed(base.seed, i as u64),
            ..base.clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::read_daily_csv;

    fn short(seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            months: 120,
            seed,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn zero_noise_reproduces_model_output() {
        let spec = SyntheticSpec {
            noise_relative: 0.0,
            ..short(1)
        };
        let c = generate(&spec).unwrap();
        for (obs, truth) in c.monthly.streamflow.iter().zip(&c.truth.monthly_truth_flow) {
            assert!((obs - truth).abs() <= 1e-12 * truth.max(1.0));
        }
        assert_eq!(c.truth.monthly_observed_flow, c.truth.monthly_truth_flow);
    }

    #[test]
    fn files_are_deterministic_and_readable() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        let pa = generate_synthetic(&short(5), &a).unwrap();
        let pb = generate_synthetic(&short(5), &b).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
        assert_eq!(
            std::fs::read(truth_path(&a, "synthetic")).unwrap(),
            std::fs::read(truth_path(&b, "synthetic")).unwrap()
        );
        let daily = read_daily_csv(&pa).unwrap();
        let monthly = aggregate_daily_to_monthly(&daily, YearSpan::new(1950, 1959).unwrap()).unwrap();
        assert_eq!(monthly, generate(&short(5)).unwrap().monthly);
        let truth = read_truth(&truth_path(&a, "synthetic")).unwrap();
        assert_eq!(truth.spec, short(5));
        assert_eq!(truth.monthly_truth_flow.len(), 120);
    }

    #[test]
    fn noise_ratio_matches_requested_level() {
        let spec = SyntheticSpec {
            noise_relative: 0.2,
            seed: 3,
            ..SyntheticSpec::default()
        };
        let c = generate(&spec).unwrap();
        let ratios: Vec<f64> = c
            .truth
            .monthly_truth_flow
            .iter()
            .zip(&c.truth.monthly_observed_flow)
            .filter(|(t, _)| **t > 0.0)
            .map(|(t, o)| (o - t) / t)
            .collect();
        let n = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / n;
        let sd = (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd - 0.2).abs() <= 0.02, "sd ratio {sd}");
        assert!(ratios.len() >= 590);
    }

    #[test]
    fn forcing_is_plausible() {
        let c = generate(&SyntheticSpec::default()).unwrap();
        let p = &c.monthly.precipitation;
        let mean_p = p.iter().sum::<f64>() / p.len() as f64;
        assert!((60.0..100.0).contains(&mean_p), "{mean_p}");
        assert!(c.monthly.streamflow.iter().all(|q| *q >= 0.0));
        assert!(c.truth.monthly_truth_flow.iter().sum::<f64>() > 0.0);
    }

    #[test]
    fn spec_validation() {
        assert!(SyntheticSpec {
            months: 100,
            ..short(0)
        }
        .validate()
        .is_err());
        assert!(SyntheticSpec {
            theta1: 0.0,
            ..short(0)
        }
        .validate()
        .is_err());
        assert!(SyntheticSpec {
            id: "a/b".into(),
            ..short(0)
        }
        .validate()
        .is_err());
        let batch = batch_specs(&short(0), "c", 3);
        assert_eq!(batch[2].id, "c_002");
        assert_ne!(batch[0].seed, batch[1].seed);
    }
}
