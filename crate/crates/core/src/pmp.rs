//! Forward–backward sweep for one receding-horizon roll.
//!
//! The planning surrogate replaces the stochastic flows with the
//! moment-closure forecast:
//!
//! ```text
//! R_liq'  = r_cash R_liq − Q̂ − ω
//! R_bill' = r_bill R_bill + ω
//! ΔP'     = η [Q̂ − R_liq/Δ]_+ / Ŝ − γ δ
//! ```
//!
//! with current-value costates integrated backward from zero terminal values:
//!
//! ```text
//! p_liq'  = (ρ − r_cash) p_liq + η 1{shortfall} p_ΔP / Ŝ
//! p_bill' = (ρ − r_bill) p_bill + r_bill
//! p_ΔP'   = ρ p_ΔP − 2 c_peg ΔP
//! ```
//!
//! Controls are piecewise constant per settlement window and updated with the
//! closed-form window laws from [`crate::control`]. The shortfall indicator in
//! the costate forcing is a logistic of width `1e-4 · Ŝ / Δ` ($/h).

use serde::{Deserialize, Serialize};
use tracing::debug;

use crate::control::{window_fee, window_reallocation, ControlAction, ControlLimits};
use crate::dynamics::{RateEnvironment, PegParams, ReserveState};
use crate::error::{ensure, Error, Result};
use crate::forecast::{expected_net_flow, propagate_moments, FlowForecast};
use crate::hawkes::{HawkesParams, PegFeedback};
use crate::ode::{lerp_uniform, rk4_step, step_count};

/// Relative width of the smoothed shortfall indicator.
pub const INDICATOR_WIDTH: f64 = 1e-4;

/// Consecutive growing control changes that count as divergence.
const DIVERGENCE_STREAK: usize = 5;

/// Stage-cost coefficients.
///
/// `c_peg` and `c_fee` are dollars per hour per squared unit, `lambda_omega`
/// is dollars per dollar reallocated and `rho_omega` is the quadratic impact
/// coefficient in hours per dollar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTerms {
    pub c_peg: f64,
    pub c_fee: f64,
    pub lambda_omega: f64,
    pub rho_omega: f64,
}

impl CostTerms {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.c_peg > 0.0 && self.c_fee > 0.0 && self.lambda_omega >= 0.0 && self.rho_omega >= 0.0,
            || format!("invalid cost terms {self:?}"),
        )
    }
}

/// Stage cost split into its components (all $/h, carry enters with a minus sign).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageCostBreakdown {
    pub carry: f64,
    pub peg: f64,
    pub fee: f64,
    pub trading: f64,
}

impl StageCostBreakdown {
    pub fn total(&self) -> f64 {
        self.peg + self.fee + self.trading - self.carry
    }
}

pub fn stage_cost_breakdown(
    state: &ReserveState,
    control: &ControlAction,
    rates: &RateEnvironment,
    costs: &CostTerms,
) -> StageCostBreakdown {
    StageCostBreakdown {
        carry: rates.r_bill * state.r_bill,
        peg: costs.c_peg * state.delta_p * state.delta_p,
        fee: costs.c_fee * control.delta * control.delta,
        trading: costs.lambda_omega * control.omega.abs()
            + 0.5 * costs.rho_omega * control.omega * control.omega,
    }
}

/// Instantaneous cost c_peg ΔP² + c_fee δ² + λ_ω|ω| + ½ρ_ω ω² − r_bill R_bill, in $/h.
pub fn stage_cost(
    state: &ReserveState,
    control: &ControlAction,
    rates: &RateEnvironment,
    costs: &CostTerms,
) -> f64 {
    stage_cost_breakdown(state, control, rates, costs).total()
}

/// Surrogate state sampled on the planning grid (time relative to the roll).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogatePath {
    pub dt: f64,
    pub grid: Vec<f64>,
    pub r_liq: Vec<f64>,
    pub r_bill: Vec<f64>,
    pub delta_p: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostateTerminal {
    pub p_liq: f64,
    pub p_bill: f64,
    pub p_dp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostateTrajectory {
    pub dt: f64,
    pub grid: Vec<f64>,
    pub p_liq: Vec<f64>,
    pub p_bill: Vec<f64>,
    pub p_dp: Vec<f64>,
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Smoothed indicator of `q > r_liq / window`.
pub fn shortfall_indicator(q: f64, r_liq: f64, s_out: f64, window: f64) -> f64 {
    let width = INDICATOR_WIDTH * s_out / window;
    logistic((q - r_liq / window) / width)
}

/// Backward RK4 sweep of the three costates from `terminal` at the horizon end.
///
/// `state_path` and `forecast` must share one grid with spacing `dt`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_costates(
    state_path: &SurrogatePath,
    forecast: &FlowForecast,
    rates: &RateEnvironment,
    costs: &CostTerms,
    peg: &PegParams,
    window: f64,
    terminal: CostateTerminal,
    dt: f64,
) -> Result<CostateTrajectory> {
    let n = state_path.grid.len();
    ensure(n >= 2 && forecast.grid.len() == n && dt > 0.0, || {
        format!(
            "state path ({n} points) and forecast ({} points) must share a grid",
            forecast.grid.len()
        )
    })?;
    let horizon = (n - 1) as f64 * dt;
    let rhs = |t: f64, p: &[f64; 3]| -> [f64; 3] {
        let q = lerp_uniform(&forecast.q_hat, dt, t);
        let s = lerp_uniform(&forecast.s_out_hat, dt, t);
        let r = lerp_uniform(&state_path.r_liq, dt, t);
        let dp = lerp_uniform(&state_path.delta_p, dt, t);
        let ind = shortfall_indicator(q, r, s, window);
        [
            (rates.rho - rates.r_cash) * p[0] + peg.eta * ind * p[2] / s,
            (rates.rho - rates.r_bill) * p[1] + rates.r_bill,
            rates.rho * p[2] - 2.0 * costs.c_peg * dp,
        ]
    };
    let mut p_liq = vec![0.0; n];
    let mut p_bill = vec![0.0; n];
    let mut p_dp = vec![0.0; n];
    let mut p = [terminal.p_liq, terminal.p_bill, terminal.p_dp];
    p_liq[n - 1] = p[0];
    p_bill[n - 1] = p[1];
    p_dp[n - 1] = p[2];
    for k in (0..n - 1).rev() {
        let t = horizon - (n - 2 - k) as f64 * dt;
        p = rk4_step(t, &p, -dt, rhs);
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::Solver {
                iterations: 0,
                reason: format!("non-finite costate at t={:.3}h", k as f64 * dt),
                last_change: f64::NAN,
            });
        }
        p_liq[k] = p[0];
        p_bill[k] = p[1];
        p_dp[k] = p[2];
    }
    Ok(CostateTrajectory {
        dt,
        grid: state_path.grid.clone(),
        p_liq,
        p_bill,
        p_dp,
    })
}

fn window_indices(grid_len: usize, dt: f64, start: f64, end: f64) -> (usize, usize) {
    let i0 = (start / dt).round() as usize;
    let i1 = (end / dt).round() as usize;
    assert!(
        i0 < i1 && i1 < grid_len,
        "window [{start}, {end}] outside the costate grid"
    );
    (i0, i1)
}

fn trapezoid(values: &[f64], dt: f64, i0: usize, i1: usize) -> f64 {
    let inner: f64 = values[i0 + 1..i1].iter().sum();
    dt * (0.5 * (values[i0] + values[i1]) + inner)
}

/// Accumulated switching value ∫(p_bill − p_liq) dt over `[start, end]`.
pub fn switching_integral(costates: &CostateTrajectory, start: f64, end: f64) -> f64 {
    let (i0, i1) = window_indices(costates.grid.len(), costates.dt, start, end);
    let diff: Vec<f64> = costates.p_bill[i0..=i1]
        .iter()
        .zip(&costates.p_liq[i0..=i1])
        .map(|(b, l)| b - l)
        .collect();
    trapezoid(&diff, costates.dt, 0, i1 - i0)
}

/// Window average of the peg costate.
pub fn average_peg_costate(costates: &CostateTrajectory, start: f64, end: f64) -> f64 {
    let (i0, i1) = window_indices(costates.grid.len(), costates.dt, start, end);
    trapezoid(&costates.p_dp, costates.dt, i0, i1) / (end - start)
}

/// Everything fixed within one roll except the controls.
#[derive(Debug, Clone)]
pub struct Surrogate {
    pub initial: ReserveState,
    pub forecast: FlowForecast,
    pub rates: RateEnvironment,
    pub costs: CostTerms,
    pub peg: PegParams,
    pub limits: ControlLimits,
    pub window: f64,
    pub dt: f64,
}

impl Surrogate {
    pub fn steps_per_window(&self) -> usize {
        (self.window / self.dt).round() as usize
    }

    pub fn window_count(&self) -> usize {
        (self.forecast.grid.len() - 1) / self.steps_per_window()
    }

    /// Forward RK4 of the surrogate state under window-constant controls.
    pub fn forward(&self, controls: &[ControlAction]) -> SurrogatePath {
        let n = self.forecast.grid.len();
        let per = self.steps_per_window();
        assert_eq!(controls.len() * per + 1, n, "controls must tile the horizon");
        let dt = self.dt;
        let (rates, peg, window) = (self.rates, self.peg, self.window);
        let q = &self.forecast.q_hat;
        let s = &self.forecast.s_out_hat;

        let mut r_liq = Vec::with_capacity(n);
        let mut r_bill = Vec::with_capacity(n);
        let mut delta_p = Vec::with_capacity(n);
        let mut y = [self.initial.r_liq, self.initial.r_bill, self.initial.delta_p];
        r_liq.push(y[0]);
        r_bill.push(y[1]);
        delta_p.push(y[2]);
        for k in 0..n - 1 {
            let u = controls[k / per];
            let t = k as f64 * dt;
            y = rk4_step(t, &y, dt, |t, y| {
                let qt = lerp_uniform(q, dt, t);
                let st = lerp_uniform(s, dt, t);
                [
                    rates.r_cash * y[0] - qt - u.omega,
                    rates.r_bill * y[1] + u.omega,
                    peg.eta * (qt - y[0] / window).max(0.0) / st - peg.gamma * u.delta,
                ]
            });
            y[2] = y[2].clamp(-1.0, 1.0);
            r_liq.push(y[0]);
            r_bill.push(y[1]);
            delta_p.push(y[2]);
        }
        SurrogatePath {
            dt,
            grid: self.forecast.grid.clone(),
            r_liq,
            r_bill,
            delta_p,
        }
    }

    pub fn costates(&self, path: &SurrogatePath) -> Result<CostateTrajectory> {
        integrate_costates(
            path,
            &self.forecast,
            &self.rates,
            &self.costs,
            &self.peg,
            self.window,
            CostateTerminal::default(),
            self.dt,
        )
    }

    /// Discounted surrogate cost ∫ e^{−ρt} ℓ dt (left-point rule on the grid).
    pub fn objective(&self, path: &SurrogatePath, controls: &[ControlAction]) -> f64 {
        let per = self.steps_per_window();
        (0..path.grid.len() - 1)
            .map(|k| {
                let x = ReserveState {
                    r_liq: path.r_liq[k],
                    r_bill: path.r_bill[k],
                    delta_p: path.delta_p[k],
                    s_out: self.forecast.s_out_hat[k],
                    t: path.grid[k],
                };
                (-self.rates.rho * path.grid[k]).exp()
                    * stage_cost(&x, &controls[k / per], &self.rates, &self.costs)
                    * self.dt
            })
            .sum()
    }

    /// Window-law controls given costates, with the per-window diagnostics.
    pub fn window_targets(&self, costates: &CostateTrajectory) -> Result<Vec<WindowDecision>> {
        (0..self.window_count())
            .map(|j| {
                let start = j as f64 * self.window;
                let end = start + self.window;
                let s_j = switching_integral(costates, start, end);
                let p_dp_avg = average_peg_costate(costates, start, end);
                let omega = window_reallocation(s_j, self.window, &self.costs, self.limits.omega_max)?;
                let delta = window_fee(p_dp_avg, self.peg.gamma, self.costs.c_fee, self.limits.delta_max);
                Ok(WindowDecision {
                    start,
                    end,
                    action: ControlAction::new(omega, delta),
                    s_j,
                    p_dp_avg,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowDecision {
    pub start: f64,
    pub end: f64,
    pub action: ControlAction,
    pub s_j: f64,
    pub p_dp_avg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollPlan {
    /// Planned windows (times relative to the roll start); they tile the horizon.
    pub windows: Vec<WindowDecision>,
    pub state_path: Option<SurrogatePath>,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    /// Expected supply runs out inside the first window; the plan liquidates bills.
    pub exhaustion_expected: bool,
}

impl RollPlan {
    /// Control applied until the next roll.
    pub fn first_action(&self) -> ControlAction {
        self.windows[0].action
    }

    pub fn controls(&self) -> Vec<ControlAction> {
        self.windows.iter().map(|w| w.action).collect()
    }
}

/// Sweep settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub horizon_windows: usize,
    pub window_hours: f64,
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            horizon_windows: 9,
            window_hours: 8.0,
            dt: 0.1,
            tol: 1e-6,
            max_iter: 50,
            damping: 0.5,
        }
    }
}

/// Measured information at the roll time.
#[derive(Debug, Clone, Copy)]
pub struct RollInputs {
    pub measured: ReserveState,
    pub intensity_r: f64,
    pub intensity_m: f64,
    pub params_r: HawkesParams,
    pub params_m: HawkesParams,
    pub feedback: PegFeedback,
    pub rates: RateEnvironment,
    pub costs: CostTerms,
    pub peg: PegParams,
    pub limits: ControlLimits,
}

fn forecast_for(inputs: &RollInputs, peg_plan: &[f64], horizon: f64, dt: f64) -> Result<FlowForecast> {
    let path = propagate_moments(
        inputs.intensity_r,
        inputs.intensity_m,
        &inputs.params_r,
        &inputs.params_m,
        inputs.feedback,
        |t| lerp_uniform(peg_plan, dt, t),
        horizon,
        dt,
    )?;
    expected_net_flow(
        &path,
        inputs.params_r.mark_mean,
        inputs.params_m.mark_mean,
        inputs.measured.s_out,
    )
}

fn control_change(a: &[ControlAction], b: &[ControlAction], limits: &ControlLimits) -> f64 {
    let w_scale = limits.omega_max.max(f64::MIN_POSITIVE);
    let d_scale = if limits.delta_max > 0.0 { limits.delta_max } else { 1.0 };
    a.iter()
        .zip(b)
        .map(|(x, y)| ((x.omega - y.omega).abs() / w_scale).max((x.delta - y.delta).abs() / d_scale))
        .fold(0.0, f64::max)
}

/// Solve one receding-horizon roll with a damped forward–backward sweep.
///
/// Each sweep forecasts flows with the previous peg path, runs the surrogate
/// forward, integrates costates backward, and moves every window's control
/// toward its window-law target by the damping factor. A move is accepted
/// only if the surrogate objective does not increase; otherwise the step is
/// halved. The sweep stops once the largest control change (relative to the
/// control bounds) falls below `tol`.
///
/// `warm_start` seeds the controls (typically the previous plan shifted by a window).
pub fn solve_mpc_roll(
    inputs: &RollInputs,
    config: &SweepConfig,
    warm_start: Option<&[ControlAction]>,
) -> Result<RollPlan> {
    inputs.costs.validate()?;
    ensure(config.tol > 0.0 && config.max_iter >= 1, || {
        "sweep needs tol > 0 and max_iter >= 1".to_string()
    })?;
    ensure(config.damping > 0.0 && config.damping <= 1.0, || {
        format!("damping must lie in (0, 1], got {}", config.damping)
    })?;
    let dt = config.dt;
    let window = config.window_hours;
    let per = step_count(window, dt).ok_or_else(|| {
        Error::InvalidArgument(format!("window {window}h is not a multiple of dt {dt}"))
    })?;

    let liquidate = || RollPlan {
        windows: vec![WindowDecision {
            start: 0.0,
            end: window,
            action: ControlAction::new(-inputs.limits.omega_max, 0.0),
            s_j: f64::NAN,
            p_dp_avg: f64::NAN,
        }],
        state_path: None,
        converged: true,
        iterations: 0,
        objective: f64::NAN,
        exhaustion_expected: true,
    };
    // Whole windows that fit before the forecast supply runs out.
    let fitting = |time: f64| ((time - dt) / window).floor().max(0.0) as usize;

    let mut n_windows = config.horizon_windows.max(1);
    let full = vec![inputs.measured.delta_p; n_windows * per + 1];
    if let Err(Error::Forecast { time, .. }) =
        forecast_for(inputs, &full, n_windows as f64 * window, dt)
    {
        n_windows = n_windows.min(fitting(time));
        if n_windows == 0 {
            debug!(t = inputs.measured.t, "supply exhaustion expected within the first window");
            return Ok(liquidate());
        }
    }

    let mut controls: Vec<ControlAction> = (0..n_windows)
        .map(|j| {
            let a = warm_start.and_then(|w| w.get(j).or(w.last())).copied().unwrap_or_default();
            ControlAction::new(
                a.omega.clamp(-inputs.limits.omega_max, inputs.limits.omega_max),
                a.delta.clamp(-inputs.limits.delta_max, inputs.limits.delta_max),
            )
        })
        .collect();
    let mut peg_plan = vec![inputs.measured.delta_p; n_windows * per + 1];

    let mut converged = false;
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    let mut growth = 0;
    let mut decisions = Vec::new();
    let mut objective = f64::NAN;
    let mut path = None;

    while iterations < config.max_iter {
        iterations += 1;
        let horizon = n_windows as f64 * window;
        let forecast = match forecast_for(inputs, &peg_plan, horizon, dt) {
            Ok(f) => f,
            // A higher planned peg path raised expected redemptions enough to
            // exhaust supply: shorten the horizon and keep sweeping.
            Err(Error::Forecast { time, .. }) if fitting(time) < n_windows => {
                n_windows = fitting(time);
                if n_windows == 0 {
                    return Ok(liquidate());
                }
                controls.truncate(n_windows);
                peg_plan.truncate(n_windows * per + 1);
                last_change = f64::INFINITY;
                growth = 0;
                continue;
            }
            Err(e) => return Err(e),
        };
        let sur = Surrogate {
            initial: inputs.measured,
            forecast,
            rates: inputs.rates,
            costs: inputs.costs,
            peg: inputs.peg,
            limits: inputs.limits,
            window,
            dt,
        };
        let current_path = sur.forward(&controls);
        let current_obj = sur.objective(&current_path, &controls);
        let costates = sur.costates(&current_path)?;
        decisions = sur.window_targets(&costates)?;

        let mut step = config.damping;
        let mut accepted = None;
        loop {
            let candidate: Vec<ControlAction> = controls
                .iter()
                .zip(&decisions)
                .map(|(c, d)| {
                    ControlAction::new(
                        c.omega + step * (d.action.omega - c.omega),
                        c.delta + step * (d.action.delta - c.delta),
                    )
                })
                .collect();
            if control_change(&controls, &candidate, &inputs.limits) < config.tol {
                break;
            }
            let cand_path = sur.forward(&candidate);
            let cand_obj = sur.objective(&cand_path, &candidate);
            if cand_obj <= current_obj + 1e-12 * current_obj.abs() {
                accepted = Some((candidate, cand_path, cand_obj));
                break;
            }
            step *= 0.5;
        }

        let Some((candidate, cand_path, cand_obj)) = accepted else {
            // Every descending step is below tolerance: stationary.
            objective = current_obj;
            peg_plan.clone_from(&current_path.delta_p);
            path = Some(current_path);
            converged = true;
            break;
        };

        let change = control_change(&controls, &candidate, &inputs.limits);
        controls = candidate;
        objective = cand_obj;
        peg_plan.clone_from(&cand_path.delta_p);
        path = Some(cand_path);

        growth = if change > last_change { growth + 1 } else { 0 };
        last_change = change;
        if growth >= DIVERGENCE_STREAK {
            return Err(Error::Solver {
                iterations,
                reason: "control updates kept growing".to_string(),
                last_change: change,
            });
        }
        if change < config.tol {
            converged = true;
            break;
        }
    }

    let windows: Vec<WindowDecision> = decisions
        .iter()
        .zip(&controls)
        .map(|(d, c)| WindowDecision { action: *c, ..*d })
        .collect();
    debug!(
        t = inputs.measured.t,
        iterations,
        converged,
        s_j = ?windows.iter().map(|w| w.s_j).collect::<Vec<_>>(),
        "mpc roll"
    );
    Ok(RollPlan {
        windows,
        state_path: path,
        converged,
        iterations,
        objective,
        exhaustion_expected: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rates() -> RateEnvironment {
        RateEnvironment::from_per_window(0.0, 4.93e-5, 7.31e-5, 8.0)
    }

    fn costs() -> CostTerms {
        CostTerms {
            c_peg: 1.5e8,
            c_fee: 6e8,
            lambda_omega: 1e-4,
            rho_omega: 1e-15,
        }
    }

    fn flat_forecast(q: f64, s: f64, n: usize, dt: f64) -> FlowForecast {
        FlowForecast {
            dt,
            grid: (0..n).map(|k| k as f64 * dt).collect(),
            q_hat: vec![q; n],
            s_out_hat: vec![s; n],
        }
    }

    #[test]
    fn stage_cost_examples() {
        let r = rates();
        let st = ReserveState {
            r_liq: 1e9,
            r_bill: 9e9,
            delta_p: 0.0,
            s_out: 1e10,
            t: 0.0,
        };
        let c = stage_cost(&st, &ControlAction::hold(), &r, &costs());
        assert_relative_eq!(c, -r.r_bill * 9e9, max_relative = 1e-15);

        let st2 = ReserveState {
            r_bill: 0.0,
            delta_p: 0.001,
            ..st
        };
        let only_peg = CostTerms {
            c_fee: 1.0,
            lambda_omega: 0.0,
            rho_omega: 0.0,
            ..costs()
        };
        assert_relative_eq!(stage_cost(&st2, &ControlAction::hold(), &r, &only_peg), 150.0, max_relative = 1e-12);

        let a = stage_cost(&st2, &ControlAction::new(3e7, 0.002), &r, &costs());
        let b = stage_cost(&st2, &ControlAction::new(-3e7, 0.002), &r, &costs());
        assert_eq!(a, b);
    }

    fn calm_path(n: usize, dt: f64, r_liq: f64, dp: f64) -> SurrogatePath {
        SurrogatePath {
            dt,
            grid: (0..n).map(|k| k as f64 * dt).collect(),
            r_liq: vec![r_liq; n],
            r_bill: vec![9e9; n],
            delta_p: vec![dp; n],
        }
    }

    #[test]
    fn bill_costate_closed_form_in_window_units() {
        // One "hour" = one window here, so the per-window rates apply directly.
        let r = RateEnvironment {
            r_cash: 0.0,
            r_bill: 4.93e-5,
            rho: 7.31e-5,
        };
        let dt = 0.1;
        let n = 91;
        let path = calm_path(n, dt, 1e9, 0.0);
        let fc = flat_forecast(1e6, 1e10, n, dt);
        let peg = PegParams::new(10.0, 5.0).unwrap();
        let p = integrate_costates(&path, &fc, &r, &costs(), &peg, 1.0, CostateTerminal::default(), dt).unwrap();
        let a = r.rho - r.r_bill;
        let exact = r.r_bill / a * ((-a * 9.0).exp() - 1.0);
        assert_relative_eq!(p.p_bill[0], exact, max_relative = 1e-8);
        assert_relative_eq!(exact, -4.44e-4, max_relative = 2e-3);
        assert!(p.p_dp.iter().all(|&v| v == 0.0));
        assert!(p.p_liq.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn switching_integral_cases() {
        let traj = CostateTrajectory {
            dt: 0.5,
            grid: (0..17).map(|k| k as f64 * 0.5).collect(),
            p_liq: vec![0.0; 17],
            p_bill: vec![-2.0; 17],
            p_dp: vec![3.0; 17],
        };
        assert_relative_eq!(switching_integral(&traj, 0.0, 8.0), -16.0, max_relative = 1e-14);
        assert_relative_eq!(average_peg_costate(&traj, 0.0, 8.0), 3.0, max_relative = 1e-14);
        let same = CostateTrajectory {
            p_liq: vec![-2.0; 17],
            ..traj
        };
        assert_eq!(switching_integral(&same, 0.0, 4.0), 0.0);
    }

    fn inputs(lambda0: f64, measured_cash: f64) -> RollInputs {
        RollInputs {
            measured: ReserveState {
                r_liq: measured_cash,
                r_bill: 1e10 - measured_cash,
                delta_p: 0.0,
                s_out: 1e10,
                t: 0.0,
            },
            intensity_r: lambda0,
            intensity_m: lambda0,
            params_r: HawkesParams {
                lambda0,
                kappa: 0.8,
                theta: 2.0,
                mark_mean: 250_000.0,
            },
            params_m: HawkesParams {
                lambda0,
                kappa: 0.6,
                theta: 1.5,
                mark_mean: 300_000.0,
            },
            feedback: PegFeedback::new(100.0).unwrap(),
            rates: rates(),
            costs: costs(),
            peg: PegParams::new(10.0, 5.0).unwrap(),
            limits: ControlLimits {
                omega_max: 1.25e8,
                delta_max: 0.0,
            },
        }
    }

    #[test]
    fn zero_flow_roll_buys_bills() {
        // Small bound so the bills purchases never exhaust cash within the horizon.
        let mut inp = inputs(0.0, 5e9);
        inp.limits.omega_max = 1e7;
        let plan = solve_mpc_roll(&inp, &SweepConfig::default(), None).unwrap();
        assert_eq!(plan.windows.len(), 9);
        assert!(plan.converged);
        assert_relative_eq!(plan.first_action().omega, 1e7, max_relative = 1e-5);
        // Carry beats the dead zone in every window whose remaining horizon is long enough.
        assert!(plan.first_action().omega > 0.0);
        assert!(plan.windows.iter().all(|w| w.action.delta == 0.0));
        assert!(plan.windows.iter().all(|w| w.action.omega >= 0.0));
    }

    #[test]
    fn wide_dead_zone_means_no_trading() {
        let mut inp = inputs(0.0, 5e9);
        inp.costs.lambda_omega = 1.0;
        let plan = solve_mpc_roll(&inp, &SweepConfig::default(), None).unwrap();
        assert!(plan.converged);
        assert!(plan.windows.iter().all(|w| w.action.omega == 0.0));
    }

    #[test]
    fn exhaustion_inside_first_window_liquidates() {
        let mut inp = inputs(100.0, 1e6);
        inp.measured.s_out = 1e6;
        inp.measured.r_bill = 0.0;
        inp.intensity_m = 0.0;
        inp.params_m.lambda0 = 0.0;
        let plan = solve_mpc_roll(&inp, &SweepConfig::default(), None).unwrap();
        assert!(plan.exhaustion_expected);
        assert_eq!(plan.first_action().omega, -1.25e8);
    }
}
