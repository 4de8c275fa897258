//! Interval verification: coverage, width, interval score, relative
//! improvement, wisdom-of-the-crowd statistics and scheme rankings.

use serde::{Deserialize, Serialize};

use crate::ensemble::{AuxiliaryQuantiles, CombinedPrediction};
use crate::error::{Error, Result};
use crate::stats::mean;

/// Significance levels of the 99, 97.5, 95, 90 and 80% central intervals.
pub const DEFAULT_ALPHAS: [f64; 5] = [0.01, 0.025, 0.05, 0.10, 0.20];

/// Central `1 - alpha` interval over the testing months. Lower may exceed
/// upper when independently fitted quantiles cross.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalPrediction {
    pub alpha: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl IntervalPrediction {
    pub fn new(alpha: f64, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_alpha(alpha)?;
        if lower.len() != upper.len() {
            return Err(Error::invalid("interval bounds differ in length"));
        }
        if lower.iter().chain(&upper).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("interval bounds"));
        }
        Ok(IntervalPrediction { alpha, lower, upper })
    }

    /// Takes the `alpha / 2` and `1 - alpha / 2` quantiles.
    pub fn from_combined(pred: &CombinedPrediction, alpha: f64) -> Result<Self> {
        let (lo, hi) = pred.interval(alpha).ok_or_else(|| {
            Error::invalid(format!(
                "probability set lacks {} or {} needed for alpha = {alpha}",
                alpha / 2.0,
                1.0 - alpha / 2.0
            ))
        })?;
        IntervalPrediction::new(alpha, lo.to_vec(), hi.to_vec())
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Months where the lower bound exceeds the upper bound.
    pub fn crossings(&self) -> usize {
        self.lower.iter().zip(&self.upper).filter(|(l, u)| l > u).count()
    }

    fn check_obs(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.len() {
            return Err(Error::invalid(format!(
                "{} observations for an interval of length {}",
                obs.len(),
                self.len()
            )));
        }
        if self.is_empty() {
            return Err(Error::invalid("empty interval prediction"));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Fraction of observations inside the closed interval.
pub fn coverage_probability(pred: &IntervalPrediction, obs: &[f64]) -> Result<f64> {
    pred.check_obs(obs)?;
    let inside = (0..obs.len())
        .filter(|&t| pred.lower[t] <= obs[t] && obs[t] <= pred.upper[t])
        .count();
    Ok(inside as f64 / obs.len() as f64)
}

/// Mean of `upper - lower`; negative where bounds cross.
pub fn average_width(pred: &IntervalPrediction) -> f64 {
    let widths: Vec<f64> = pred.lower.iter().zip(&pred.upper).map(|(l, u)| u - l).collect();
    mean(&widths)
}

/// Interval score of one interval: width plus `2 / alpha` times the
/// distance by which `y` falls outside.
pub fn interval_score(lower: f64, upper: f64, y: f64, alpha: f64) -> f64 {
    let mut s = upper - lower;
    if y < lower {
        s += 2.0 / alpha * (lower - y);
    }
    if y > upper {
        s += 2.0 / alpha * (y - upper);
    }
    s
}

pub fn average_interval_score(pred: &IntervalPrediction, obs: &[f64]) -> Result<f64> {
    pred.check_obs(obs)?;
    let scores: Vec<f64> = (0..obs.len())
        .map(|t| interval_score(pred.lower[t], pred.upper[t], obs[t], pred.alpha))
        .collect();
    Ok(mean(&scores))
}

/// `(benchmark - candidate) / benchmark`.
pub fn relative_improvement(candidate: f64, benchmark: f64) -> Result<f64> {
    if benchmark == 0.0 {
        return Err(Error::DegenerateBenchmark);
    }
    Ok((benchmark - candidate) / benchmark)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WisdomMetrics {
    pub alpha: f64,
    /// Interval score of the combined prediction.
    pub ais_out: f64,
    /// Interval score of each sister's auxiliary interval.
    pub ais_in: Vec<f64>,
    /// Relative improvement of the combination over each sister; `None`
    /// where that sister's score is zero.
    pub ri_out_in: Vec<Option<f64>>,
    /// Mean of `ais_in`.
    pub aais_in: f64,
    /// `(aais_in - ais_out) / aais_in`.
    pub rd: f64,
}

impl WisdomMetrics {
    /// Sisters whose relative improvement is undefined.
    pub fn undefined(&self) -> Vec<usize> {
        self.ri_out_in
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_none())
            .map(|(i, _)| i)
            .collect()
    }
}

/// Compares the combined interval with the auxiliary interval of every sister.
pub fn wisdom_metrics(
    aux: &AuxiliaryQuantiles,
    combined: &CombinedPrediction,
    obs: &[f64],
    alpha: f64,
) -> Result<WisdomMetrics> {
    if aux.m() == 0 {
        return Err(Error::invalid("no sisters to compare against"));
    }
    let out = IntervalPrediction::from_combined(combined, alpha)?;
    let ais_out = average_interval_score(&out, obs)?;
    let lo = position(&aux.probabilities, alpha / 2.0)?;
    let hi = position(&aux.probabilities, 1.0 - alpha / 2.0)?;
    let ais_in = aux
        .values
        .iter()
        .map(|s| {
            let pred = IntervalPrediction::new(alpha, s[lo].clone(), s[hi].clone())?;
            average_interval_score(&pred, obs)
        })
        .collect::<Result<Vec<f64>>>()?;
    let ri_out_in = ais_in.iter().map(|&a| relative_improvement(ais_out, a).ok()).collect();
    let aais_in = mean(&ais_in);
    let rd = if aais_in == ais_out {
        0.0
    } else {
        relative_improvement(ais_out, aais_in)?
    };
    Ok(WisdomMetrics {
        alpha,
        ais_out,
        ais_in,
        ri_out_in,
        aais_in,
        rd,
    })
}

fn position(probs: &[f64], p: f64) -> Result<usize> {
    probs
        .iter()
        .position(|q| (q - p).abs() < 1e-12)
        .ok_or_else(|| Error::invalid(format!("probability {p} not in the prediction set")))
}

/// Competition ranks (1 = smallest value, ties share the smaller rank).
pub fn competition_ranks(values: &[f64]) -> Vec<usize> {
    values
        .iter()
        .map(|v| 1 + values.iter().filter(|w| w.total_cmp(v).is_lt()).count())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rankings {
    /// `ranks[c][s]` for catchment `c` and scheme `s`.
    pub ranks: Vec<Vec<usize>>,
    /// Mean rank of each scheme across catchments.
    pub average: Vec<f64>,
}

/// Ranks schemes (columns) within every catchment (row) by AIS.
pub fn rank_schemes(ais: &[Vec<f64>]) -> Result<Rankings> {
    let n_schemes = ais.first().map_or(0, Vec::len);
    if n_schemes == 0 || ais.iter().any(|r| r.len() != n_schemes) {
        return Err(Error::invalid("AIS table must be rectangular with at least one scheme"));
    }
    let ranks: Vec<Vec<usize>> = ais.iter().map(|r| competition_ranks(r)).collect();
    let average = (0..n_schemes)
        .map(|s| mean(&ranks.iter().map(|r| r[s] as f64).collect::<Vec<_>>()))
        .collect();
    Ok(Rankings { ranks, average })
}

/// Pairs `(j, t)` where the quantile at probability index `j` exceeds the
/// one at `j + 1`.
pub fn count_quantile_crossings(pred: &CombinedPrediction) -> usize {
    pred.quantiles
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).filter(|(a, b)| a > b).count())
        .sum()
}

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub catchment: String,
    pub scheme: String,
    /// Nominal coverage `1 - alpha`.
    pub level: f64,
    pub alpha: f64,
    pub cp: f64,
    pub aw: f64,
    pub ais: f64,
    pub crossings: usize,
    pub n_test: usize,
}

/// Scores a delivered prediction at every level.
pub fn score_prediction(
    catchment: &str,
    scheme: &str,
    pred: &CombinedPrediction,
    obs: &[f64],
    alphas: &[f64],
) -> Result<Vec<MetricsRecord>> {
    alphas
        .iter()
        .map(|&alpha| {
            let interval = IntervalPrediction::from_combined(pred, alpha)?;
            Ok(MetricsRecord {
                catchment: catchment.to_string(),
                scheme: scheme.to_string(),
                level: 1.0 - alpha,
                alpha,
                cp: coverage_probability(&interval, obs)?,
                aw: average_width(&interval),
                ais: average_interval_score(&interval, obs)?,
                crossings: interval.crossings(),
                n_test: obs.len(),
            })
        })
        .collect()
}
