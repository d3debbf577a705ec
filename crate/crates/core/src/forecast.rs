//! Moment-closure forecasts of Hawkes intensities and expected dollar flows.
//!
//! Inside a planning horizon the stochastic intensities are replaced by their
//! conditional means,
//!
//! ```text
//! λ̂_R' = −θ_R (λ̂_R − λ0_R) + κ_R λ̂_R + ζ ΔP(t)²
//! λ̂_M' = −θ_M (λ̂_M − λ0_M) + κ_M λ̂_M
//! ```
//!
//! integrated with RK4 on a uniform grid that starts at the roll time (t = 0).

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::hawkes::{HawkesParams, PegFeedback};
use crate::ode::{rk4_step, step_count};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanIntensityPath {
    pub dt: f64,
    pub grid: Vec<f64>,
    pub lambda_r: Vec<f64>,
    pub lambda_m: Vec<f64>,
}

impl MeanIntensityPath {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowForecast {
    pub dt: f64,
    pub grid: Vec<f64>,
    /// Expected net redemption flow, dollars/hour.
    pub q_hat: Vec<f64>,
    /// Expected outstanding supply, dollars.
    pub s_out_hat: Vec<f64>,
}

/// Integrate the mean-intensity ODEs over `[0, horizon]`.
///
/// `peg_plan` is evaluated at RK4 stage times (relative to the roll start).
#[allow(clippy::too_many_arguments)]
pub fn propagate_moments(
    init_r: f64,
    init_m: f64,
    params_r: &HawkesParams,
    params_m: &HawkesParams,
    feedback: PegFeedback,
    peg_plan: impl Fn(f64) -> f64,
    horizon: f64,
    dt: f64,
) -> Result<MeanIntensityPath> {
    ensure(init_r >= 0.0 && init_m >= 0.0, || {
        format!("initial intensities must be >= 0, got ({init_r}, {init_m})")
    })?;
    let n = step_count(horizon, dt).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "horizon {horizon} must be a positive multiple of dt {dt}"
        ))
    })?;

    let rhs = |t: f64, y: &[f64; 2]| -> [f64; 2] {
        let dp = peg_plan(t);
        [
            -params_r.theta * (y[0] - params_r.lambda0)
                + params_r.kappa * y[0]
                + feedback.intensity(dp),
            -params_m.theta * (y[1] - params_m.lambda0) + params_m.kappa * y[1],
        ]
    };

    let mut grid = Vec::with_capacity(n + 1);
    let mut lambda_r = Vec::with_capacity(n + 1);
    let mut lambda_m = Vec::with_capacity(n + 1);
    let mut y = [init_r, init_m];
    grid.push(0.0);
    lambda_r.push(y[0]);
    lambda_m.push(y[1]);
    for k in 0..n {
        let t = k as f64 * dt;
        y = rk4_step(t, &y, dt, rhs);
        let t_next = (k + 1) as f64 * dt;
        if !(y[0].is_finite() && y[1].is_finite()) || y[0] < 0.0 || y[1] < 0.0 {
            return Err(Error::Forecast {
                time: t_next,
                reason: format!("mean intensities left [0, inf): ({}, {})", y[0], y[1]),
            });
        }
        grid.push(t_next);
        lambda_r.push(y[0]);
        lambda_m.push(y[1]);
    }
    Ok(MeanIntensityPath {
        dt,
        grid,
        lambda_r,
        lambda_m,
    })
}

/// Expected net flow Q̂ = z̄_R λ̂_R − z̄_M λ̂_M and supply Ŝ' = −Q̂ from `s_out0`.
pub fn expected_net_flow(
    path: &MeanIntensityPath,
    mark_mean_r: f64,
    mark_mean_m: f64,
    s_out0: f64,
) -> Result<FlowForecast> {
    ensure(!path.is_empty(), || "empty intensity path".to_string())?;
    let q_hat: Vec<f64> = path
        .lambda_r
        .iter()
        .zip(&path.lambda_m)
        .map(|(r, m)| mark_mean_r * r - mark_mean_m * m)
        .collect();
    let mut s_out_hat = Vec::with_capacity(q_hat.len());
    let mut s = s_out0;
    for (i, t) in path.grid.iter().enumerate() {
        if i > 0 {
            s -= 0.5 * path.dt * (q_hat[i - 1] + q_hat[i]);
        }
        if !(s > 0.0) {
            return Err(Error::Forecast {
                time: *t,
                reason: "expected supply exhausted".to_string(),
            });
        }
        s_out_hat.push(s);
    }
    Ok(FlowForecast {
        dt: path.dt,
        grid: path.grid.clone(),
        q_hat,
        s_out_hat,
    })
}
