//! Bayesian calibration of GR2M on the calibration period.
//!
//! The posterior of `(theta1, theta2)` under flat priors on a bounded box and
//! the likelihood `L ∝ SSE^(-|T1|/2)` is simulated by several DRAM chains.
//! Runs are repeated with fresh seeds until the multivariate PSRF drops below
//! the threshold (or the restart budget is spent), after which `k` draws per
//! chain are retained as the sister parameter sets.

mod psrf;
mod sampler;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use psrf::psrf;
pub use sampler::{run_chains, Chain, ChainSet, ParameterBox, SamplerSettings, ADAPT_INTERVAL, ADAPT_START, DR_SCALE};

use crate::error::{Error, Result};
use crate::gr2m::{self, Gr2mParams, Gr2mState};
use crate::timeseries::PeriodPartition;

/// Leading fraction of each chain dropped before computing the PSRF.
pub const PSRF_DISCARD_FRACTION: f64 = 0.5;

/// Which `k` draws of each chain become sister parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Retention {
    /// Last `k` draws (converged posterior sample).
    BayesianTail,
    /// First `k` draws, before convergence (informal calibration).
    InformalHead,
}

impl Retention {
    /// 0-based index range of the retained draws in a chain of length `n`.
    pub fn indices(self, n: usize, k: usize) -> std::ops::Range<usize> {
        let k = k.min(n);
        match self {
            Retention::BayesianTail => n - k..n,
            Retention::InformalHead => 0..k,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Retention::BayesianTail => "bayesian-tail",
            Retention::InformalHead => "informal-head",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub n_chains: usize,
    pub n_iterations: usize,
    pub retain_per_chain: usize,
    pub psrf_threshold: f64,
    pub max_restarts: usize,
    pub seed: u64,
    pub bounds: ParameterBox,
    pub retention: Retention,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_chains: 3,
            n_iterations: 2000,
            retain_per_chain: 200,
            psrf_threshold: 1.10,
            max_restarts: 10,
            seed: 0,
            bounds: default_bounds(),
            retention: Retention::BayesianTail,
        }
    }
}

/// `theta1` in [1, 3000] mm, `theta2` in [0.2, 5].
pub fn default_bounds() -> ParameterBox {
    ParameterBox::new(vec![1.0, 0.2], vec![3000.0, 5.0]).expect("static bounds")
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_chains < 2 {
            problems.push(format!("n_chains must be >= 2 (got {})", self.n_chains));
        }
        if self.retain_per_chain == 0 || self.retain_per_chain > self.n_iterations {
            problems.push(format!(
                "retain_per_chain must be in 1..={} (got {})",
                self.n_iterations, self.retain_per_chain
            ));
        }
        if !(self.psrf_threshold > 1.0) {
            problems.push(format!("psrf_threshold must be > 1 (got {})", self.psrf_threshold));
        }
        if self.bounds.dim() != 2 {
            problems.push("parameter box must be two-dimensional".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Retained parameter pairs that define the sister models.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    pub params: Vec<Gr2mParams>,
    pub retention: Retention,
}

impl PosteriorSample {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Keeps `m` pairs at evenly spaced positions `floor(j * len / m)`.
    pub fn thin_to(&self, m: usize) -> Result<PosteriorSample> {
        let n = self.len();
        if m == 0 || m > n {
            return Err(Error::invalid(format!(
                "cannot take {m} sister parameter sets from a sample of {n}"
            )));
        }
        let params = (0..m).map(|j| self.params[j * n / m]).collect();
        Ok(PosteriorSample {
            params,
            retention: self.retention,
        })
    }
}

/// `-(n / 2) ln(SSE)` with `n` the number of observations.
pub fn log_likelihood(obs: &[f64], pred: &[f64]) -> Result<f64> {
    if obs.len() != pred.len() || obs.is_empty() {
        return Err(Error::invalid(format!(
            "observation / prediction lengths {} and {} must match and be positive",
            obs.len(),
            pred.len()
        )));
    }
    if pred.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("predictions"));
    }
    let sse: f64 = obs.iter().zip(pred).map(|(y, u)| (y - u) * (y - u)).sum();
    if sse == 0.0 {
        return Err(Error::DegeneratePerfectFit);
    }
    Ok(-0.5 * obs.len() as f64 * sse.ln())
}

/// Forcing and observations needed to calibrate one catchment. Slices cover
/// at least warm-up plus calibration months.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationData<'a> {
    pub precipitation: &'a [f64],
    pub potential_evaporation: &'a [f64],
    pub streamflow: &'a [f64],
    pub partition: &'a PeriodPartition,
}

impl CalibrationData<'_> {
    /// Log posterior (up to a constant) of a parameter pair inside the box.
    pub fn log_posterior(&self, params: &Gr2mParams) -> f64 {
        let part = self.partition;
        let pred = match gr2m::simulate_until(
            params,
            self.precipitation,
            self.potential_evaporation,
            part,
            part.calibration.end,
            Gr2mState::initial(params),
        ) {
            Ok(p) => p,
            Err(_) => return f64::NEG_INFINITY,
        };
        log_likelihood(&self.streamflow[part.calibration.clone()], &pred).unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub chains: ChainSet,
    pub sample: PosteriorSample,
    pub psrf: f64,
    pub converged: bool,
    /// Number of chain runs performed (1 + restarts).
    pub attempts: usize,
}

fn attempt_seed(seed: u64, attempt: usize) -> u64 {
    // splitmix64 step so neighbouring seeds give unrelated streams
    let mut z = seed.wrapping_add((attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs the chains, restarting with new seeds and new dispersed starting
/// points until the PSRF falls below the threshold. When the restart budget
/// is exhausted the run with the smallest PSRF is returned with
/// `converged = false`.
pub fn calibrate_catchment(data: &CalibrationData<'_>, config: &ChainConfig) -> Result<Calibration> {
    config.validate()?;
    let part = data.partition;
    if data.precipitation.len() < part.calibration.end
        || data.potential_evaporation.len() < part.calibration.end
        || data.streamflow.len() < part.calibration.end
    {
        return Err(Error::invalid("calibration data shorter than warm-up + calibration"));
    }
    let objective = |x: &[f64]| {
        data.log_posterior(&Gr2mParams {
            theta1: x[0],
            theta2: x[1],
        })
    };

    let mut best: Option<(ChainSet, f64)> = None;
    let mut last_err = None;
    let mut attempts = 0;
    for attempt in 0..=config.max_restarts {
        attempts += 1;
        let settings = SamplerSettings {
            n_chains: config.n_chains,
            n_iterations: config.n_iterations,
            bounds: config.bounds.clone(),
            seed: attempt_seed(config.seed, attempt),
            initial: None,
        };
        let chains = run_chains(objective, &settings)?;
        let r = match psrf(&chains.draws(), PSRF_DISCARD_FRACTION) {
            Ok(r) => r,
            Err(e) => {
                log::debug!("attempt {attempt}: {e}");
                last_err = Some(e);
                f64::INFINITY
            }
        };
        log::debug!("calibration attempt {attempt}: psrf = {r:.4}");
        if best.as_ref().is_none_or(|(_, b)| r < *b) {
            best = Some((chains, r));
        }
        if r < config.psrf_threshold {
            break;
        }
    }
    let (chains, r) = best.expect("at least one attempt");
    if !r.is_finite() {
        if let Some(e) = last_err {
            log::warn!("no calibration attempt produced a finite PSRF: {e}");
        }
    }
    let sample = retain(&chains, config.retain_per_chain, config.retention);
    Ok(Calibration {
        converged: r < config.psrf_threshold,
        chains,
        sample,
        psrf: r,
        attempts,
    })
}

/// Takes `k` draws from each chain according to `retention`, chain by chain.
pub fn retain(chains: &ChainSet, k: usize, retention: Retention) -> PosteriorSample {
    let params = chains
        .chains
        .iter()
        .flat_map(|c| {
            c.points[retention.indices(c.len(), k)].iter().map(|p| Gr2mParams {
                theta1: p[0],
                theta2: p[1],
            })
        })
        .collect();
    PosteriorSample { params, retention }
}

/// Writes `chain,iteration,theta1,theta2,logL,accepted` rows.
pub fn write_chain_dump(path: &Path, chains: &ChainSet) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "chain,iteration,theta1,theta2,logL,accepted").map_err(io)?;
    for (j, c) in chains.chains.iter().enumerate() {
        for (i, p) in c.points.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                j,
                i + 1,
                p[0],
                p[1],
                c.log_density[i],
                c.accepted[i] as u8
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}
