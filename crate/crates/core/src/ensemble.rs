//! Sister predictions, error models and simple quantile averaging.
//!
//! Errors are defined as `e_t = u_t - y_t` (sister prediction minus
//! observation). Subtracting an error quantile from the sister prediction
//! therefore flips its probability label: the auxiliary process quantile at
//! `p` is `u_t - q_e(1 - p)`. The probability set must be symmetric so the
//! flipped labels are again members of the set.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::calibrate::PosteriorSample;
use crate::error::{Error, Result};
use crate::gr2m::{self, Gr2mState};
use crate::regress::{self, LinearFit, QuantileFit, RegressionDataset};
use crate::stats::mean;
use crate::timeseries::PeriodPartition;

pub const DEFAULT_PROBABILITIES: [f64; 10] = [0.005, 0.0125, 0.025, 0.05, 0.10, 0.90, 0.95, 0.975, 0.9875, 0.995];

/// How the error model is trained from the sisters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// One model per sister, each on that sister's training errors.
    PerSister,
    /// One model on the pooled errors of all sisters.
    Pooled,
    /// One model on the errors of a single randomly chosen sister.
    RandomSister,
}

impl Variant {
    pub fn number(self) -> u8 {
        match self {
            Variant::PerSister => 1,
            Variant::Pooled => 2,
            Variant::RandomSister => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorModelKind {
    Linear,
    Quantile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub variant: Variant,
    pub error_model: ErrorModelKind,
    pub probabilities: Vec<f64>,
    pub m: usize,
    pub seed: u64,
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("number of sisters m must be at least 1"));
        }
        check_probability_set(&self.probabilities)
    }
}

/// Probabilities strictly inside (0, 1), strictly increasing and symmetric
/// in pairs `(p, 1 - p)`.
pub fn check_probability_set(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::invalid("probability set is empty"));
    }
    if let Some(p) = probs.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(Error::invalid(format!("probability {p} outside (0, 1)")));
    }
    if probs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("probabilities must be strictly increasing"));
    }
    let n = probs.len();
    for i in 0..n {
        if (probs[i] + probs[n - 1 - i] - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "probability set is not symmetric: {} has no partner {}",
                probs[i],
                1.0 - probs[i]
            )));
        }
    }
    Ok(())
}

/// Sister predictions over the training and testing periods, and their
/// training-period errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SisterEnsemble {
    predictions: Vec<Vec<f64>>,
    errors: Vec<Vec<f64>>,
    n_train: usize,
}

impl SisterEnsemble {
    /// `predictions[i]` covers training then testing months; `observed_train`
    /// holds the observations over the training months.
    pub fn from_predictions(predictions: Vec<Vec<f64>>, observed_train: &[f64]) -> Result<Self> {
        let n_train = observed_train.len();
        if predictions.is_empty() {
            return Err(Error::invalid("ensemble needs at least one sister"));
        }
        let len = predictions[0].len();
        if len <= n_train || predictions.iter().any(|s| s.len() != len) {
            return Err(Error::invalid(
                "sister series must share a length longer than the training period",
            ));
        }
        if predictions
            .iter()
            .flatten()
            .chain(observed_train)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("sister predictions"));
        }
        let errors = predictions
            .iter()
            .map(|s| s[..n_train].iter().zip(observed_train).map(|(u, y)| u - y).collect())
            .collect();
        Ok(SisterEnsemble {
            predictions,
            errors,
            n_train,
        })
    }

    pub fn m(&self) -> usize {
        self.predictions.len()
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_test(&self) -> usize {
        self.predictions[0].len() - self.n_train
    }

    /// Full series (training then testing) of sister `i`.
    pub fn prediction(&self, i: usize) -> &[f64] {
        &self.predictions[i]
    }

    pub fn training_prediction(&self, i: usize) -> &[f64] {
        &self.predictions[i][..self.n_train]
    }

    pub fn testing_prediction(&self, i: usize) -> &[f64] {
        &self.predictions[i][self.n_train..]
    }

    pub fn errors(&self, i: usize) -> &[f64] {
        &self.errors[i]
    }

    /// Number of training errors over all sisters.
    pub fn total_errors(&self) -> usize {
        self.errors.iter().map(Vec::len).sum()
    }

    fn dataset(&self, sisters: &[usize]) -> Result<RegressionDataset> {
        let x: Vec<f64> = sisters
            .iter()
            .flat_map(|&i| self.training_prediction(i).iter().copied())
            .collect();
        let y: Vec<f64> = sisters.iter().flat_map(|&i| self.errors(i).iter().copied()).collect();
        RegressionDataset::with_intercept(&[&x], &y)
    }
}

/// Runs the hydrological model under every retained parameter pair and
/// keeps the training and testing months.
pub fn generate_sisters(
    sample: &PosteriorSample,
    precipitation: &[f64],
    potential_evaporation: &[f64],
    streamflow: &[f64],
    partition: &PeriodPartition,
) -> Result<SisterEnsemble> {
    if sample.is_empty() {
        return Err(Error::invalid("posterior sample is empty"));
    }
    if streamflow.len() < partition.n_total() {
        return Err(Error::invalid("streamflow shorter than the partition"));
    }
    let skip = partition.n_cal();
    let predictions = sample
        .params
        .par_iter()
        .enumerate()
        .map(|(i, params)| {
            gr2m::simulate(
                params,
                precipitation,
                potential_evaporation,
                partition,
                Gr2mState::initial(params),
            )
            .map(|mut q| {
                q.drain(..skip);
                q
            })
            .map_err(|e| Error::Sister {
                sister: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SisterEnsemble::from_predictions(predictions, &streamflow[partition.training.clone()])
}

#[derive(Debug, Clone, PartialEq)]
pub enum ErrorModel {
    Linear(LinearFit),
    Quantile(QuantileFit),
}

impl ErrorModel {
    fn fit(kind: ErrorModelKind, data: &RegressionDataset, probs: &[f64]) -> Result<Self> {
        match kind {
            ErrorModelKind::Linear => regress::fit_ols(data).map(ErrorModel::Linear),
            ErrorModelKind::Quantile => {
                let fits = probs
                    .par_iter()
                    .map(|&p| regress::fit_quantile(data, p).map(|s| (p, s)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ErrorModel::Quantile(QuantileFit { fits }))
            }
        }
    }

    /// Predicted `p` quantile for predictor row `x` (intercept first).
    pub fn predict(&self, x: &[f64], p: f64) -> Result<f64> {
        match self {
            ErrorModel::Linear(fit) => regress::predict_ols_quantile(fit, x, p),
            ErrorModel::Quantile(fit) => fit
                .get(p)
                .map(|s| regress_dot(x, &s.coefficients))
                .ok_or_else(|| Error::invalid(format!("no quantile model trained for p = {p}"))),
        }
    }
}

fn regress_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedErrorModels {
    pub variant: Variant,
    /// One model per sister for the per-sister variant, otherwise one.
    pub models: Vec<ErrorModel>,
    /// Sister whose errors were used by the random-sister variant.
    pub selected_sister: Option<usize>,
    /// Rows in each training dataset.
    pub training_rows: usize,
}

impl TrainedErrorModels {
    fn for_sister(&self, i: usize) -> &ErrorModel {
        match self.variant {
            Variant::PerSister => &self.models[i],
            _ => &self.models[0],
        }
    }
}

/// Index of the sister used by the random-sister variant.
pub fn select_sister(m: usize, seed: u64) -> usize {
    ChaCha8Rng::seed_from_u64(seed).random_range(0..m)
}

/// Regresses training errors on the sister predictions (with intercept).
pub fn train_error_model(ensemble: &SisterEnsemble, config: &SchemeConfig) -> Result<TrainedErrorModels> {
    config.validate()?;
    let probs = &config.probabilities;
    let kind = config.error_model;
    let m = ensemble.m();
    let (models, selected_sister, training_rows) = match config.variant {
        Variant::PerSister => {
            let models = (0..m)
                .into_par_iter()
                .map(|i| {
                    ensemble
                        .dataset(&[i])
                        .and_then(|d| ErrorModel::fit(kind, &d, probs))
                        .map_err(|e| Error::Sister {
                            sister: i,
                            source: Box::new(e),
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            (models, None, ensemble.n_train())
        }
        Variant::Pooled => {
            let all: Vec<usize> = (0..m).collect();
            let data = ensemble.dataset(&all)?;
            (vec![ErrorModel::fit(kind, &data, probs)?], None, data.n_rows())
        }
        Variant::RandomSister => {
            let i = select_sister(m, config.seed);
            let model = ensemble
                .dataset(&[i])
                .and_then(|d| ErrorModel::fit(kind, &d, probs))
                .map_err(|e| Error::Sister {
                    sister: i,
                    source: Box::new(e),
                })?;
            (vec![model], Some(i), ensemble.n_train())
        }
    };
    Ok(TrainedErrorModels {
        variant: config.variant,
        models,
        selected_sister,
        training_rows,
    })
}

/// Per-sister, per-probability series over the testing months, indexed
/// `[sister][probability][month]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSeries {
    pub probabilities: Vec<f64>,
    pub values: Vec<Vec<Vec<f64>>>,
}

impl QuantileSeries {
    pub fn m(&self) -> usize {
        self.values.len()
    }

    /// Number of (sister, probability) series.
    pub fn series_count(&self) -> usize {
        self.values.iter().map(Vec::len).sum()
    }
}

/// Error quantiles predicted from each sister's testing-period predictions.
pub type ErrorQuantiles = QuantileSeries;

/// Process quantiles implied by each sister.
pub type AuxiliaryQuantiles = QuantileSeries;

pub fn predict_error_quantiles(
    models: &TrainedErrorModels,
    ensemble: &SisterEnsemble,
    probs: &[f64],
) -> Result<ErrorQuantiles> {
    if models.variant == Variant::PerSister && models.models.len() != ensemble.m() {
        return Err(Error::invalid("per-sister models do not match the ensemble size"));
    }
    let values = (0..ensemble.m())
        .into_par_iter()
        .map(|i| {
            let model = models.for_sister(i);
            probs
                .iter()
                .map(|&p| {
                    ensemble
                        .testing_prediction(i)
                        .iter()
                        .map(|&u| model.predict(&[1.0, u], p))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantileSeries {
        probabilities: probs.to_vec(),
        values,
    })
}

/// `aux[i][p][t] = u_i(t) - errq[i][1 - p][t]`.
pub fn to_auxiliary(ensemble: &SisterEnsemble, error_quantiles: &ErrorQuantiles) -> Result<AuxiliaryQuantiles> {
    let probs = &error_quantiles.probabilities;
    check_probability_set(probs)?;
    if error_quantiles.m() != ensemble.m() {
        return Err(Error::invalid(
            "error quantiles and ensemble disagree on the number of sisters",
        ));
    }
    let np = probs.len();
    let values = error_quantiles
        .values
        .iter()
        .enumerate()
        .map(|(i, per_p)| {
            let u = ensemble.testing_prediction(i);
            (0..np)
                .map(|j| {
                    let flipped = &per_p[np - 1 - j];
                    if flipped.len() != u.len() {
                        return Err(Error::invalid(
                            "error quantile series length differs from testing period",
                        ));
                    }
                    Ok(u.iter().zip(flipped).map(|(u, q)| u - q).collect())
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantileSeries {
        probabilities: probs.clone(),
        values,
    })
}

/// Delivered predictive quantiles, indexed `[probability][month]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedPrediction {
    pub probabilities: Vec<f64>,
    pub quantiles: Vec<Vec<f64>>,
}

impl CombinedPrediction {
    pub fn n_test(&self) -> usize {
        self.quantiles.first().map_or(0, Vec::len)
    }

    pub fn quantile(&self, p: f64) -> Option<&[f64]> {
        self.probabilities
            .iter()
            .position(|q| (q - p).abs() < 1e-12)
            .map(|j| self.quantiles[j].as_slice())
    }

    /// Lower and upper bounds of the central `1 - alpha` interval.
    pub fn interval(&self, alpha: f64) -> Option<(&[f64], &[f64])> {
        Some((self.quantile(alpha / 2.0)?, self.quantile(1.0 - alpha / 2.0)?))
    }

    /// Replaces negative quantiles by zero.
    pub fn clamp_nonnegative(&mut self) {
        self.quantiles.iter_mut().flatten().for_each(|v| *v = v.max(0.0));
    }
}

/// Mean across sisters for every probability and month.
pub fn combine(aux: &AuxiliaryQuantiles) -> Result<CombinedPrediction> {
    let m = aux.m();
    if m == 0 {
        return Err(Error::invalid("cannot combine an empty set of sisters"));
    }
    let np = aux.probabilities.len();
    let n = aux.values[0].first().map_or(0, Vec::len);
    if aux
        .values
        .iter()
        .any(|s| s.len() != np || s.iter().any(|q| q.len() != n))
    {
        return Err(Error::invalid("auxiliary quantile series are ragged"));
    }
    let mut column = Vec::with_capacity(m);
    let quantiles = (0..np)
        .map(|j| {
            (0..n)
                .map(|t| {
                    column.clear();
                    column.extend(aux.values.iter().map(|s| s[j][t]));
                    mean(&column)
                })
                .collect()
        })
        .collect();
    Ok(CombinedPrediction {
        probabilities: aux.probabilities.clone(),
        quantiles,
    })
}

/// Regresses streamflow on `[1, P_t, E_t]` over the months before testing
/// and predicts the testing months.
pub fn run_basic_scheme(
    kind: ErrorModelKind,
    precipitation: &[f64],
    potential_evaporation: &[f64],
    streamflow: &[f64],
    partition: &PeriodPartition,
    probs: &[f64],
    include_warmup: bool,
) -> Result<CombinedPrediction> {
    check_probability_set(probs)?;
    let n = partition.n_total();
    if precipitation.len() < n || potential_evaporation.len() < n || streamflow.len() < n {
        return Err(Error::invalid("catchment series shorter than the partition"));
    }
    let start = if include_warmup { 0 } else { partition.warmup.end };
    let train = start..partition.training.end;
    let data = RegressionDataset::with_intercept(
        &[&precipitation[train.clone()], &potential_evaporation[train.clone()]],
        &streamflow[train],
    )?;
    let model = ErrorModel::fit(kind, &data, probs)?;
    let quantiles = probs
        .iter()
        .map(|&p| {
            partition
                .testing
                .clone()
                .map(|t| model.predict(&[1.0, precipitation[t], potential_evaporation[t]], p))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CombinedPrediction {
        probabilities: probs.to_vec(),
        quantiles,
    })
}

/// The eight compared schemes: two basic regressions on the forcing, and
/// six ensemble schemes (1-3 linear, 4-6 quantile error model).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    BasicLinear,
    BasicQuantile,
    Ensemble(u8),
}

impl SchemeId {
    pub const ALL: [SchemeId; 8] = [
        SchemeId::BasicLinear,
        SchemeId::BasicQuantile,
        SchemeId::Ensemble(1),
        SchemeId::Ensemble(2),
        SchemeId::Ensemble(3),
        SchemeId::Ensemble(4),
        SchemeId::Ensemble(5),
        SchemeId::Ensemble(6),
    ];

    pub fn ensemble(n: u8) -> Result<Self> {
        if (1..=6).contains(&n) {
            Ok(SchemeId::Ensemble(n))
        } else {
            Err(Error::invalid(format!(
                "unknown scheme {n}; ensemble schemes are 1 to 6"
            )))
        }
    }

    pub fn is_ensemble(self) -> bool {
        matches!(self, SchemeId::Ensemble(_))
    }

    pub fn error_model(self) -> ErrorModelKind {
        match self {
            SchemeId::BasicLinear => ErrorModelKind::Linear,
            SchemeId::BasicQuantile => ErrorModelKind::Quantile,
            SchemeId::Ensemble(n) if n <= 3 => ErrorModelKind::Linear,
            SchemeId::Ensemble(_) => ErrorModelKind::Quantile,
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            SchemeId::Ensemble(1 | 4) => Some(Variant::PerSister),
            SchemeId::Ensemble(2 | 5) => Some(Variant::Pooled),
            SchemeId::Ensemble(3 | 6) => Some(Variant::RandomSister),
            _ => None,
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeId::BasicLinear => f.write_str("basic-linear"),
            SchemeId::BasicQuantile => f.write_str("basic-quantile"),
            SchemeId::Ensemble(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "basic-linear" => Ok(SchemeId::BasicLinear),
            "basic-quantile" => Ok(SchemeId::BasicQuantile),
            other => match other.parse::<u8>() {
                Ok(n) => SchemeId::ensemble(n),
                Err(_) => Err(Error::invalid(format!(
                    "unknown scheme '{other}'; expected basic-linear, basic-quantile or 1-6"
                ))),
            },
        }
    }
}

/// Settings shared by all schemes of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSettings {
    pub probabilities: Vec<f64>,
    pub m: usize,
    pub seed: u64,
    pub basic_includes_warmup: bool,
    pub clamp_nonnegative: bool,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        EnsembleSettings {
            probabilities: DEFAULT_PROBABILITIES.to_vec(),
            m: 600,
            seed: 0,
            basic_includes_warmup: true,
            clamp_nonnegative: false,
        }
    }
}

impl EnsembleSettings {
    pub fn scheme_config(&self, variant: Variant, error_model: ErrorModelKind) -> SchemeConfig {
        SchemeConfig {
            variant,
            error_model,
            probabilities: self.probabilities.clone(),
            m: self.m,
            seed: self.seed,
        }
    }
}

/// Monthly series of one catchment with its period partition.
#[derive(Debug, Clone, Copy)]
pub struct CatchmentInputs<'a> {
    pub precipitation: &'a [f64],
    pub potential_evaporation: &'a [f64],
    pub streamflow: &'a [f64],
    pub partition: &'a PeriodPartition,
}

impl CatchmentInputs<'_> {
    pub fn observed_test(&self) -> &[f64] {
        &self.streamflow[self.partition.testing.clone()]
    }
}

#[derive(Debug, Clone)]
pub struct SchemeOutput {
    pub scheme: SchemeId,
    pub prediction: CombinedPrediction,
    /// Per-sister process quantiles (ensemble schemes only).
    pub auxiliary: Option<AuxiliaryQuantiles>,
    pub training_rows: usize,
    pub selected_sister: Option<usize>,
    pub elapsed: Duration,
}

/// Runs one scheme end to end. Ensemble schemes need the posterior sample,
/// which is thinned to `settings.m` pairs when it is larger.
pub fn run_scheme(
    scheme: SchemeId,
    inputs: &CatchmentInputs<'_>,
    sample: Option<&PosteriorSample>,
    settings: &EnsembleSettings,
) -> Result<SchemeOutput> {
    let start = Instant::now();
    let kind = scheme.error_model();
    let mut output = match scheme.variant() {
        None => {
            let prediction = run_basic_scheme(
                kind,
                inputs.precipitation,
                inputs.potential_evaporation,
                inputs.streamflow,
                inputs.partition,
                &settings.probabilities,
                settings.basic_includes_warmup,
            )?;
            let training_rows = if settings.basic_includes_warmup {
                inputs.partition.training.end
            } else {
                inputs.partition.training.end - inputs.partition.warmup.end
            };
            SchemeOutput {
                scheme,
                prediction,
                auxiliary: None,
                training_rows,
                selected_sister: None,
                elapsed: Duration::ZERO,
            }
        }
        Some(variant) => {
            let sample = sample.ok_or_else(|| Error::invalid(format!("scheme {scheme} needs a posterior sample")))?;
            let config = settings.scheme_config(variant, kind);
            config.validate()?;
            let thinned;
            let sample = if sample.len() == config.m {
                sample
            } else {
                thinned = sample.thin_to(config.m)?;
                &thinned
            };
            let sisters = generate_sisters(
                sample,
                inputs.precipitation,
                inputs.potential_evaporation,
                inputs.streamflow,
                inputs.partition,
            )?;
            let models = train_error_model(&sisters, &config)?;
            let errq = predict_error_quantiles(&models, &sisters, &config.probabilities)?;
            let aux = to_auxiliary(&sisters, &errq)?;
            let prediction = combine(&aux)?;
            SchemeOutput {
                scheme,
                prediction,
                auxiliary: Some(aux),
                training_rows: models.training_rows,
                selected_sister: models.selected_sister,
                elapsed: Duration::ZERO,
            }
        }
    };
    if settings.clamp_nonnegative {
        output.prediction.clamp_nonnegative();
    }
    output.elapsed = start.elapsed();
    Ok(output)
}
