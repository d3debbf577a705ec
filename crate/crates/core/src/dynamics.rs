//! True reserve dynamics driven by realized events and applied controls.

use serde::{Deserialize, Serialize};

use crate::control::ControlAction;
use crate::error::{ensure, Error, Result};
use crate::hawkes::{EventKind, MarkedEvent};

/// Cash, bills, peg deviation and supply at time `t` (hours).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReserveState {
    pub r_liq: f64,
    pub r_bill: f64,
    pub delta_p: f64,
    pub s_out: f64,
    pub t: f64,
}

impl ReserveState {
    pub fn validate(&self) -> Result<()> {
        ensure(self.r_liq >= 0.0 && self.r_bill >= 0.0, || {
            format!("reserves must be >= 0, got ({}, {})", self.r_liq, self.r_bill)
        })?;
        ensure(self.s_out > 0.0, || format!("supply must be > 0, got {}", self.s_out))?;
        ensure((-1.0..=1.0).contains(&self.delta_p), || {
            format!("peg deviation must lie in [-1, 1], got {}", self.delta_p)
        })
    }

    /// Complete depeg; the state no longer evolves.
    pub fn is_depegged(&self) -> bool {
        self.delta_p >= 1.0
    }

    pub fn total_reserves(&self) -> f64 {
        self.r_liq + self.r_bill
    }

    /// Reserves minus supply; zero when the balance-sheet identity holds.
    pub fn balance_drift(&self) -> f64 {
        self.total_reserves() - self.s_out
    }
}

/// Interest and discount rates, all per hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEnvironment {
    pub r_cash: f64,
    pub r_bill: f64,
    pub rho: f64,
}

impl RateEnvironment {
    pub fn from_per_window(r_cash: f64, r_bill: f64, rho: f64, window_hours: f64) -> Self {
        Self {
            r_cash: r_cash / window_hours,
            r_bill: r_bill / window_hours,
            rho: rho / window_hours,
        }
    }
}

/// Sensitivity of the peg to unmet redemptions (`eta`) and to fees (`gamma`, per hour).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PegParams {
    pub eta: f64,
    pub gamma: f64,
}

impl PegParams {
    pub fn new(eta: f64, gamma: f64) -> Result<Self> {
        ensure(eta > 0.0 && gamma > 0.0, || {
            format!("eta and gamma must be > 0, got ({eta}, {gamma})")
        })?;
        Ok(Self { eta, gamma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub state: ReserveState,
    /// Redemption dollars that cash could not cover.
    pub shortfall: f64,
    pub redemptions: f64,
    pub mints: f64,
    pub interest: f64,
    /// Reallocation rate actually executed after feasibility clipping.
    pub omega_applied: f64,
    pub clipped: bool,
    /// The state was already depegged and stayed frozen.
    pub frozen: bool,
}

/// Advance the true state by one substep of length `dt`.
///
/// Order within the step: interest accrues, the reallocation executes
/// (clipped to available balances), then the net event flow hits cash.
/// Redemptions that cash cannot cover are recorded as shortfall and push the
/// peg by `eta * shortfall / s_out`.
pub fn step_state(
    state: &ReserveState,
    events: &[MarkedEvent],
    control: ControlAction,
    rates: &RateEnvironment,
    peg: &PegParams,
    dt: f64,
) -> Result<StepOutcome> {
    ensure(dt > 0.0, || format!("step must be > 0, got {dt}"))?;
    if state.is_depegged() {
        return Ok(StepOutcome {
            state: ReserveState {
                t: state.t + dt,
                ..*state
            },
            shortfall: 0.0,
            redemptions: 0.0,
            mints: 0.0,
            interest: 0.0,
            omega_applied: 0.0,
            clipped: false,
            frozen: true,
        });
    }

    let (mut redemptions, mut mints) = (0.0, 0.0);
    for e in events {
        match e.kind {
            EventKind::Redemption => redemptions += e.size,
            EventKind::Mint => mints += e.size,
        }
    }

    let cash = state.r_liq * (1.0 + rates.r_cash * dt);
    let bills = state.r_bill * (1.0 + rates.r_bill * dt);
    let interest = (cash - state.r_liq) + (bills - state.r_bill);

    let requested = control.omega;
    let omega = if requested > 0.0 {
        requested.min(cash / dt)
    } else {
        requested.max(-bills / dt)
    };
    let clipped = omega != requested;

    let cash_after = cash - omega * dt + mints - redemptions;
    let shortfall = (-cash_after).max(0.0);
    let r_liq = cash_after.max(0.0);
    let r_bill = (bills + omega * dt).max(0.0);

    let delta_p = (state.delta_p + peg.eta * shortfall / state.s_out - peg.gamma * control.delta * dt)
        .clamp(-1.0, 1.0);
    let s_out = state.s_out + mints - redemptions;
    let t = state.t + dt;

    if ![r_liq, r_bill, delta_p, s_out].iter().all(|v| v.is_finite()) {
        return Err(Error::Dynamics { time: t });
    }
    if s_out <= 0.0 {
        return Err(Error::SupplyExhausted { time: t });
    }
    Ok(StepOutcome {
        state: ReserveState {
            r_liq,
            r_bill,
            delta_p,
            s_out,
            t,
        },
        shortfall,
        redemptions,
        mints,
        interest,
        omega_applied: omega,
        clipped,
        frozen: false,
    })
}

/// Peg drift of the planning surrogate (per hour): cash is spread over the
/// settlement window and compared with the expected flow `q`.
pub fn peg_drift_rate(q: f64, r_liq: f64, s_out: f64, delta: f64, peg: &PegParams, window: f64) -> f64 {
    peg.eta * (q - r_liq / window).max(0.0) / s_out - peg.gamma * delta
}
