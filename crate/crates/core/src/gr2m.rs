//! GR2M monthly water-balance model (Mouelhi et al., 2006).
//!
//! One monthly step runs five sub-steps in a fixed order:
//!
//! 1. Rainfall fills the production store: with `phi = tanh(P / X1)`,
//!    `S1 = (S + X1 phi) / (1 + phi S / X1)`; the excess `P1 = P + S - S1`
//!    bypasses the store.
//! 2. Evaporation drains the production store: with `psi = tanh(E / X1)`,
//!    `S2 = S1 (1 - psi) / (1 + psi (1 - S1 / X1))`; actual evaporation is
//!    `S1 - S2`.
//! 3. Percolation leaves the store by a cubic law:
//!    `S' = S2 / (1 + (S2 / X1)^3)^(1/3)`, `P2 = S2 - S'`.
//! 4. The routing store receives `P3 = P1 + P2`, `R1 = R + P3`, and the
//!    groundwater exchange scales it: `R2 = X2 R1`.
//! 5. Outflow from the 60 mm routing store: `Q = R2^2 / (R2 + 60)`,
//!    `R' = R2 - Q`.
//!
//! X1 (`theta1`) is the production-store capacity in mm and X2 (`theta2`) the
//! dimensionless exchange coefficient (above 1 the catchment gains water from
//! its neighbours, below 1 it loses water).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::PeriodPartition;

/// Fixed routing-store capacity (mm).
pub const ROUTING_CAPACITY: f64 = 60.0;

/// Initial routing-store level at the start of warm-up (mm).
pub const INITIAL_ROUTING_STORE: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gr2mParams {
    /// Production-store capacity (mm).
    pub theta1: f64,
    /// Groundwater exchange coefficient.
    pub theta2: f64,
}

impl Gr2mParams {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        if !(theta1.is_finite() && theta1 > 0.0) {
            return Err(Error::invalid(format!("theta1 must be > 0, got {theta1}")));
        }
        if !(theta2.is_finite() && theta2 > 0.0) {
            return Err(Error::invalid(format!("theta2 must be > 0, got {theta2}")));
        }
        Ok(Gr2mParams { theta1, theta2 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gr2mState {
    /// Production (soil-moisture) store, `0 <= S <= theta1`.
    pub soil_store: f64,
    /// Routing store, `R >= 0`.
    pub routing_store: f64,
}

impl Gr2mState {
    pub const EMPTY: Gr2mState = Gr2mState {
        soil_store: 0.0,
        routing_store: 0.0,
    };

    /// Half-full production store and a 30 mm routing store.
    pub fn initial(params: &Gr2mParams) -> Self {
        Gr2mState {
            soil_store: 0.5 * params.theta1,
            routing_store: INITIAL_ROUTING_STORE,
        }
    }
}

/// Internal fluxes of one step (mm/month), exposed for water-budget checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepFluxes {
    pub rainfall_excess: f64,
    pub actual_evaporation: f64,
    pub percolation: f64,
    pub routing_inflow: f64,
    /// `R2 - R1`, positive when water is imported.
    pub exchange: f64,
    pub streamflow: f64,
}

/// One monthly step. Returns the new state and streamflow `Q`.
pub fn step(state: Gr2mState, params: &Gr2mParams, precip: f64, pet: f64) -> Result<(Gr2mState, f64)> {
    step_with_fluxes(state, params, precip, pet).map(|(s, f)| (s, f.streamflow))
}

/// As [`step`], also returning the intermediate fluxes.
pub fn step_with_fluxes(
    state: Gr2mState,
    params: &Gr2mParams,
    precip: f64,
    pet: f64,
) -> Result<(Gr2mState, StepFluxes)> {
    if !precip.is_finite() || !pet.is_finite() {
        return Err(Error::NonFinite("GR2M forcing"));
    }
    if !state.soil_store.is_finite() || !state.routing_store.is_finite() {
        return Err(Error::NonFinite("GR2M state"));
    }
    if precip < 0.0 || pet < 0.0 {
        return Err(Error::invalid(format!(
            "negative GR2M forcing (P = {precip}, E = {pet})"
        )));
    }
    let x1 = params.theta1;
    let x2 = params.theta2;
    let s = state.soil_store;

    let phi = (precip / x1).tanh();
    let s1 = ((s + x1 * phi) / (1.0 + phi * s / x1)).min(x1);
    let p1 = precip + s - s1;

    let psi = (pet / x1).tanh();
    let s2 = (s1 * (1.0 - psi) / (1.0 + psi * (1.0 - s1 / x1))).max(0.0);
    let actual_evaporation = s1 - s2;

    let s_new = s2 / (1.0 + (s2 / x1).powi(3)).cbrt();
    let p2 = s2 - s_new;

    let p3 = p1 + p2;
    let r1 = state.routing_store + p3;
    let r2 = x2 * r1;
    let q = r2 * r2 / (r2 + ROUTING_CAPACITY);
    let r_new = (r2 - q).max(0.0);

    Ok((
        Gr2mState {
            soil_store: s_new,
            routing_store: r_new,
        },
        StepFluxes {
            rainfall_excess: p1,
            actual_evaporation,
            percolation: p2,
            routing_inflow: p3,
            exchange: r2 - r1,
            streamflow: q,
        },
    ))
}

/// Runs the model over `precip[..n]` and `pet[..n]` from `init`, returning
/// one streamflow value per month.
pub fn run(params: &Gr2mParams, precip: &[f64], pet: &[f64], init: Gr2mState) -> Result<Vec<f64>> {
    if precip.len() != pet.len() {
        return Err(Error::invalid(format!(
            "forcing lengths differ: {} vs {}",
            precip.len(),
            pet.len()
        )));
    }
    let mut state = init;
    let mut out = Vec::with_capacity(precip.len());
    for (&p, &e) in precip.iter().zip(pet) {
        let (next, q) = step(state, params, p, e)?;
        state = next;
        out.push(q);
    }
    Ok(out)
}

/// Simulates from the start of warm-up to the end of `partition` and returns
/// the predictions after warm-up (length `n1 + n2 + n3`).
pub fn simulate(
    params: &Gr2mParams,
    precip: &[f64],
    pet: &[f64],
    partition: &PeriodPartition,
    init: Gr2mState,
) -> Result<Vec<f64>> {
    simulate_until(params, precip, pet, partition, partition.n_total(), init)
}

/// Like [`simulate`] but stops at month index `end` (exclusive), so
/// calibration can skip the later periods.
pub fn simulate_until(
    params: &Gr2mParams,
    precip: &[f64],
    pet: &[f64],
    partition: &PeriodPartition,
    end: usize,
    init: Gr2mState,
) -> Result<Vec<f64>> {
    let n_total = partition.n_total();
    if end > precip.len() || end > pet.len() {
        return Err(Error::invalid(format!(
            "simulation needs {end} months but forcing has {} / {}",
            precip.len(),
            pet.len()
        )));
    }
    if end > n_total || end < partition.warmup.end {
        return Err(Error::invalid(format!("simulation end {end} outside partition")));
    }
    let mut q = run(params, &precip[..end], &pet[..end], init)?;
    q.drain(..partition.warmup.end);
    Ok(q)
}
