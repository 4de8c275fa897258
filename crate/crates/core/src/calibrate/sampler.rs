//! Adaptive Metropolis with one delayed-rejection stage (DRAM, Haario et al. 2006).
//!
//! Each chain starts with a diagonal Gaussian proposal whose standard
//! deviations are 1/20 of the box widths. After a non-adaptive burn of
//! [`ADAPT_START`] iterations the proposal covariance is replaced every
//! [`ADAPT_INTERVAL`] iterations by `2.4^2 / d` times the empirical
//! covariance of the latest half of the chain (plus a small ridge). A
//! rejected first proposal triggers a second try with the proposal shrunk by
//! [`DR_SCALE`], accepted with the delayed-rejection probability that keeps
//! the target invariant. Points outside the box have zero prior density and
//! are always rejected.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const ADAPT_START: usize = 200;
pub const ADAPT_INTERVAL: usize = 50;
pub const DR_SCALE: f64 = 0.2;
const INITIAL_SD_FRACTION: f64 = 1.0 / 20.0;
const START_ATTEMPTS: usize = 100;

/// Axis-aligned bounds `[lower, upper]` per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParameterBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid("box bounds must be non-empty and equally long"));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u))
        {
            return Err(Error::invalid("box bounds must be finite with lower < upper"));
        }
        Ok(ParameterBox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn widths(&self) -> Vec<f64> {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).collect()
    }

    fn sample_uniform(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + (u - l) * rng.random::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSettings {
    pub n_chains: usize,
    pub n_iterations: usize,
    pub bounds: ParameterBox,
    pub seed: u64,
    /// Explicit starting points, one per chain. Drawn uniformly in the box
    /// when absent.
    pub initial: Option<Vec<Vec<f64>>>,
}

/// One simulated chain. `points[0]` is the starting value.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub points: Vec<Vec<f64>>,
    pub log_density: Vec<f64>,
    pub accepted: Vec<bool>,
    pub evaluations: usize,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn initial(&self) -> &[f64] {
        &self.points[0]
    }

    /// Fraction of transitions that moved the chain.
    pub fn acceptance_rate(&self) -> f64 {
        let transitions = self.len().saturating_sub(1);
        if transitions == 0 {
            return 0.0;
        }
        self.accepted.iter().filter(|&&a| a).count() as f64 / transitions as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSet {
    pub chains: Vec<Chain>,
}

impl ChainSet {
    pub fn draws(&self) -> Vec<Vec<Vec<f64>>> {
        self.chains.iter().map(|c| c.points.clone()).collect()
    }
}

/// Runs `settings.n_chains` independent DRAM chains against a log-density.
/// `log_density` must return `-inf` (or NaN) where the target is zero; box
/// membership is checked before it is called.
pub fn run_chains<F>(log_density: F, settings: &SamplerSettings) -> Result<ChainSet>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if settings.n_chains == 0 || settings.n_iterations == 0 {
        return Err(Error::invalid("need at least one chain and one iteration"));
    }
    if let Some(init) = &settings.initial {
        if init.len() != settings.n_chains || init.iter().any(|x| x.len() != settings.bounds.dim()) {
            return Err(Error::invalid("initial points do not match chain count / dimension"));
        }
    }
    let results: Vec<Option<Chain>> = (0..settings.n_chains)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(j as u64 + 1);
            run_one(&log_density, settings, j, &mut rng)
        })
        .collect();
    if results.iter().all(Option::is_none) {
        return Err(Error::InfeasibleStart);
    }
    let chains = results
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or(Error::InfeasibleStart)?;
    Ok(ChainSet { chains })
}

fn eval<F: Fn(&[f64]) -> f64>(f: &F, bounds: &ParameterBox, x: &[f64], count: &mut usize) -> f64 {
    if !bounds.contains(x) {
        return f64::NEG_INFINITY;
    }
    *count += 1;
    let v = f(x);
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

fn run_one<F: Fn(&[f64]) -> f64>(
    f: &F,
    settings: &SamplerSettings,
    chain_index: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Chain> {
    let bounds = &settings.bounds;
    let d = bounds.dim();
    let mut evaluations = 0;

    let (mut x, mut lp) = match &settings.initial {
        Some(init) => {
            let x = init[chain_index].clone();
            let lp = eval(f, bounds, &x, &mut evaluations);
            (x, lp)
        }
        None => {
            let mut found = None;
            for _ in 0..START_ATTEMPTS {
                let x = bounds.sample_uniform(rng);
                let lp = eval(f, bounds, &x, &mut evaluations);
                if lp.is_finite() {
                    found = Some((x, lp));
                    break;
                }
            }
            found?
        }
    };
    if !lp.is_finite() {
        return None;
    }

    let widths = bounds.widths();
    let ridge = DMatrix::from_diagonal(&DVector::from_iterator(d, widths.iter().map(|w| (w * 1e-6).powi(2))));
    let initial_cov = DMatrix::from_diagonal(&DVector::from_iterator(
        d,
        widths.iter().map(|w| (w * INITIAL_SD_FRACTION).powi(2)),
    ));
    let mut chol = initial_cov.clone().cholesky().expect("diagonal covariance").l();
    let mut precision = initial_cov.try_inverse().expect("diagonal covariance");
    let adapt_scale = 2.4 * 2.4 / d as f64;

    let mut moves = 0usize;

    let n = settings.n_iterations;
    let mut points = Vec::with_capacity(n);
    let mut log_density = Vec::with_capacity(n);
    let mut accepted = Vec::with_capacity(n);
    points.push(x.clone());
    log_density.push(lp);
    accepted.push(false);

    for it in 1..n {
        let xv = DVector::from_column_slice(&x);
        let z1 = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let y1v = &xv + &chol * &z1;
        let y1: Vec<f64> = y1v.iter().copied().collect();
        let lp1 = eval(f, bounds, &y1, &mut evaluations);
        let log_a1 = (lp1 - lp).min(0.0);

        let mut moved = false;
        if rng.random::<f64>().ln() < log_a1 {
            x = y1;
            lp = lp1;
            moved = true;
        } else {
            let z2 = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let y2v = &xv + (&chol * &z2) * DR_SCALE;
            let y2: Vec<f64> = y2v.iter().copied().collect();
            let lp2 = eval(f, bounds, &y2, &mut evaluations);
            if lp2.is_finite() {
                // alpha_1(y2, y1): first-stage acceptance from y2 towards y1
                let a1_rev = (lp1 - lp2).min(0.0).exp();
                let a1_fwd = log_a1.exp();
                if a1_rev < 1.0 && a1_fwd < 1.0 {
                    let q = |from: &DVector<f64>, to: &DVector<f64>| {
                        let diff = to - from;
                        -0.5 * (diff.transpose() * &precision * &diff)[(0, 0)]
                    };
                    let log_num = lp2 + q(&y2v, &y1v) + (-a1_rev).ln_1p();
                    let log_den = lp + q(&xv, &y1v) + (-a1_fwd).ln_1p();
                    let log_a2 = (log_num - log_den).min(0.0);
                    if rng.random::<f64>().ln() < log_a2 {
                        x = y2;
                        lp = lp2;
                        moved = true;
                    }
                }
            }
        }
        if moved {
            moves += 1;
        }
        points.push(x.clone());
        log_density.push(lp);
        accepted.push(moved);

        if it >= ADAPT_START && it % ADAPT_INTERVAL == 0 && moves > 2 * d + 2 {
            // The window drops the first half of the history so the transient
            // from a dispersed start stops inflating the proposal.
            let cov = window_covariance(&points[points.len() / 2..]);
            let candidate = (cov + &ridge) * adapt_scale;
            if let Some(c) = candidate.clone().cholesky() {
                if let Some(p) = candidate.try_inverse() {
                    chol = c.l();
                    precision = p;
                }
            }
        }
    }
    Some(Chain {
        points,
        log_density,
        accepted,
        evaluations,
    })
}

fn window_covariance(points: &[Vec<f64>]) -> DMatrix<f64> {
    let d = points[0].len();
    let n = points.len();
    let mut mean = DVector::<f64>::zeros(d);
    for p in points {
        mean += DVector::from_column_slice(p);
    }
    mean /= n as f64;
    let mut scatter = DMatrix::<f64>::zeros(d, d);
    for p in points {
        let diff = DVector::from_column_slice(p) - &mean;
        scatter += &diff * diff.transpose();
    }
    scatter / (n.max(2) - 1) as f64
}
