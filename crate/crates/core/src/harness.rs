//! Experiment configuration, Monte Carlo orchestration and report files.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::control::{max_liquidity_policy, max_yield_policy, ControlAction, ControlLimits, PolicyKind};
use crate::dynamics::{step_state, PegParams, RateEnvironment, ReserveState};
use crate::error::{ensure, Error, Result};
use crate::hawkes::{simulate_stream_segment, EventSource, HawkesParams, IntensityPair, PegFeedback};
use crate::metrics::{
    responsiveness_days, total_revenue, undiscounted_revenue, RunRecord, SubstepCost, WindowLog,
};
use crate::pmp::{solve_mpc_roll, stage_cost_breakdown, CostTerms, RollInputs, SweepConfig};
use crate::scenario::{build_schedule, params_at, ScenarioId, ScenarioSchedule};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable read by the CLI for the worker count.
pub const WORKERS_ENV: &str = "PEGRESERVE_WORKERS";

const EVENT_DOMAIN: u64 = 1;
const SCENARIO_DOMAIN: u64 = 2;

/// Reference supply for the reallocation bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaMaxReference {
    /// Supply at each decision time.
    Current,
    /// Initial supply, fixed for the run.
    Initial,
}

/// Flat experiment configuration. Rates are per settlement window as quoted;
/// they are converted to per-hour internally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenarios: Vec<ScenarioId>,
    pub policies: Vec<PolicyKind>,
    pub replicas: usize,
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,

    pub lambda0_r: f64,
    pub kappa_r: f64,
    pub theta_r: f64,
    pub mark_mean_r: f64,
    pub lambda0_m: f64,
    pub kappa_m: f64,
    pub theta_m: f64,
    pub mark_mean_m: f64,
    pub zeta: f64,

    pub eta: f64,
    pub gamma: f64,
    pub c_peg: f64,
    pub c_fee: f64,
    /// Dollars of cost per dollar reallocated.
    pub lambda_omega: f64,
    /// Quadratic impact as a multiple of 1/S_out.
    pub rho_omega_supply_fraction: f64,
    pub r_cash: f64,
    pub r_bill: f64,
    pub rho: f64,
    /// Reallocation bound as a fraction of supply per window.
    pub omega_max_supply_fraction: f64,
    pub omega_max_reference: OmegaMaxReference,
    pub delta_max: f64,

    pub initial_supply: f64,
    /// Cash share at start for the optimal and max-yield policies.
    pub initial_cash_fraction: f64,

    pub window_hours: f64,
    pub horizon_days: f64,
    pub substep_hours: f64,
    pub mpc_horizon_windows: usize,
    pub sweep_tol: f64,
    pub sweep_max_iter: usize,
    pub sweep_damping: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenarios: ScenarioId::ALL.to_vec(),
            policies: PolicyKind::ALL.to_vec(),
            replicas: 100,
            master_seed: 20240601,
            output_dir: None,
            lambda0_r: 100.0,
            kappa_r: 0.8,
            theta_r: 2.0,
            mark_mean_r: 250_000.0,
            lambda0_m: 80.0,
            kappa_m: 0.6,
            theta_m: 1.5,
            mark_mean_m: 300_000.0,
            zeta: 100.0,
            eta: 10.0,
            gamma: 5.0,
            c_peg: 1.5e8,
            c_fee: 6e8,
            lambda_omega: 1e-4,
            rho_omega_supply_fraction: 1e-5,
            r_cash: 0.0,
            r_bill: 4.93e-5,
            rho: 7.31e-5,
            omega_max_supply_fraction: 0.1,
            omega_max_reference: OmegaMaxReference::Initial,
            delta_max: 0.0,
            initial_supply: 1e10,
            initial_cash_fraction: 0.1,
            window_hours: 8.0,
            horizon_days: 92.0,
            substep_hours: 0.1,
            mpc_horizon_windows: 9,
            sweep_tol: 1e-6,
            sweep_max_iter: 50,
            sweep_damping: 0.5,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json_str(&text)
    }

    pub fn redemption_params(&self) -> Result<HawkesParams> {
        HawkesParams::new(self.lambda0_r, self.kappa_r, self.theta_r, self.mark_mean_r)
    }

    pub fn mint_params(&self) -> Result<HawkesParams> {
        HawkesParams::new(self.lambda0_m, self.kappa_m, self.theta_m, self.mark_mean_m)
    }

    pub fn rates(&self) -> RateEnvironment {
        RateEnvironment::from_per_window(self.r_cash, self.r_bill, self.rho, self.window_hours)
    }

    pub fn window_count(&self) -> usize {
        (self.horizon_days * 24.0 / self.window_hours).round() as usize
    }

    pub fn substeps_per_window(&self) -> usize {
        (self.window_hours / self.substep_hours).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Error::Config(m.to_string());
        if self.replicas == 0 {
            return Err(bad("replicas must be >= 1"));
        }
        if self.scenarios.is_empty() || self.policies.is_empty() {
            return Err(bad("at least one scenario and one policy are required"));
        }
        if !(self.window_hours > 0.0 && self.substep_hours > 0.0 && self.horizon_days > 0.0) {
            return Err(bad("window, substep and horizon must be > 0"));
        }
        let per = self.window_hours / self.substep_hours;
        if (per - per.round()).abs() > 1e-9 {
            return Err(bad("window must be a whole number of substeps"));
        }
        let nw = self.horizon_days * 24.0 / self.window_hours;
        if (nw - nw.round()).abs() > 1e-9 {
            return Err(bad("horizon must be a whole number of windows"));
        }
        if self.horizon_days > crate::scenario::HORIZON_DAYS {
            return Err(bad("horizon exceeds the 92-day scenario schedule"));
        }
        let r = self.redemption_params().map_err(|e| Error::Config(e.to_string()))?;
        let m = self.mint_params().map_err(|e| Error::Config(e.to_string()))?;
        for p in [r, m] {
            if p.kappa >= p.theta {
                return Err(bad("baseline Hawkes streams must be subcritical"));
            }
        }
        PegFeedback::new(self.zeta).map_err(|e| Error::Config(e.to_string()))?;
        PegParams::new(self.eta, self.gamma).map_err(|e| Error::Config(e.to_string()))?;
        if !(self.c_peg > 0.0 && self.c_fee > 0.0 && self.lambda_omega >= 0.0) {
            return Err(bad("cost coefficients must be positive"));
        }
        if !(self.rho_omega_supply_fraction > 0.0) {
            return Err(bad("rho_omega must be > 0"));
        }
        if !(self.rho > 0.0 && self.r_cash >= 0.0 && self.r_bill >= 0.0) {
            return Err(bad("rates must be nonnegative and the discount rate positive"));
        }
        if !(self.omega_max_supply_fraction > 0.0 && self.delta_max >= 0.0) {
            return Err(bad("control bounds must be nonnegative"));
        }
        if !(self.initial_supply > 0.0 && (0.0..=1.0).contains(&self.initial_cash_fraction)) {
            return Err(bad("initial supply must be > 0 and the cash fraction in [0, 1]"));
        }
        if self.mpc_horizon_windows == 0 || self.sweep_max_iter == 0 || !(self.sweep_tol > 0.0) {
            return Err(bad("sweep settings must be positive"));
        }
        if !(self.sweep_damping > 0.0 && self.sweep_damping <= 1.0) {
            return Err(bad("sweep damping must lie in (0, 1]"));
        }
        Ok(())
    }

    fn initial_state(&self, policy: PolicyKind) -> ReserveState {
        let cash = match policy {
            PolicyKind::MaxLiquidity => self.initial_supply,
            _ => self.initial_supply * self.initial_cash_fraction,
        };
        ReserveState {
            r_liq: cash,
            r_bill: self.initial_supply - cash,
            delta_p: 0.0,
            s_out: self.initial_supply,
            t: 0.0,
        }
    }

    fn omega_max(&self, s_out: f64) -> f64 {
        let reference = match self.omega_max_reference {
            OmegaMaxReference::Current => s_out,
            OmegaMaxReference::Initial => self.initial_supply,
        };
        self.omega_max_supply_fraction * reference / self.window_hours
    }
}

/// Child seed for `(domain, index)`, read at a fixed position of the master stream.
pub fn child_seed(master: u64, domain: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(domain);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}

/// Event seed shared by every scenario and policy of one replica.
pub fn event_seed(master: u64, replica: usize) -> u64 {
    child_seed(master, EVENT_DOMAIN, replica as u64)
}

/// Schedule for a replica; the shock multiplier is shared across policies.
pub fn replica_schedule(master: u64, scenario: ScenarioId, replica: usize) -> ScenarioSchedule {
    let seed = child_seed(master, SCENARIO_DOMAIN + scenario.index(), replica as u64);
    build_schedule(scenario, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn intensities_after_rebase(
    states: &mut IntensityPair,
    old: &(HawkesParams, HawkesParams),
    new: &(HawkesParams, HawkesParams),
) {
    if old.0.lambda0 != new.0.lambda0 {
        states.redemption.rebase(old.0.lambda0, new.0.lambda0);
    }
    if old.1.lambda0 != new.1.lambda0 {
        states.mint.rebase(old.1.lambda0, new.1.lambda0);
    }
}

/// Simulate one (scenario, policy, replica) cell over the configured horizon.
pub fn run_replica(
    config: &ExperimentConfig,
    scenario: ScenarioId,
    policy: PolicyKind,
    replica: usize,
) -> Result<RunRecord> {
    let base_r = config.redemption_params()?;
    let base_m = config.mint_params()?;
    let feedback = PegFeedback::new(config.zeta)?;
    let peg = PegParams::new(config.eta, config.gamma)?;
    let rates = config.rates();
    let seed = event_seed(config.master_seed, replica);
    let schedule = replica_schedule(config.master_seed, scenario, replica);
    let source = EventSource::new(seed);
    let window = config.window_hours;
    let dt = config.substep_hours;
    let per = config.substeps_per_window();
    let n_windows = config.window_count();
    let sweep = SweepConfig {
        horizon_windows: config.mpc_horizon_windows,
        window_hours: window,
        dt,
        tol: config.sweep_tol,
        max_iter: config.sweep_max_iter,
        damping: config.sweep_damping,
    };

    let mut state = config.initial_state(policy);
    let mut params = params_at(&schedule, 0.0, &base_r, &base_m)?;
    let mut intensities = IntensityPair::at_baseline(&params.0, &params.1, 0.0);
    let mut warm: Option<Vec<ControlAction>> = None;
    let mut substeps: Vec<SubstepCost> = Vec::with_capacity(n_windows * per);
    let mut windows = Vec::with_capacity(n_windows);
    let mut depeg_time = None;
    let mut exhausted_time = None;
    let mut max_err: f64 = 0.0;
    let mut nonconverged = 0;

    for j in 0..n_windows {
        let t_j = j as f64 * window;
        let stopped = depeg_time.is_some() || exhausted_time.is_some();
        if !stopped {
            let next_params = params_at(&schedule, t_j / 24.0, &base_r, &base_m)?;
            intensities_after_rebase(&mut intensities, &params, &next_params);
            params = next_params;
        }
        let omega_max = config.omega_max(state.s_out);
        let costs = CostTerms {
            c_peg: config.c_peg,
            c_fee: config.c_fee,
            lambda_omega: config.lambda_omega,
            rho_omega: config.rho_omega_supply_fraction / state.s_out,
        };
        let limits = ControlLimits {
            omega_max,
            delta_max: config.delta_max,
        };
        let lambda_r = intensities.redemption.current + feedback.intensity(state.delta_p);
        let lambda_m = intensities.mint.current;

        let (action, iterations, converged) = if stopped {
            (ControlAction::hold(), 0, true)
        } else {
            match policy {
                PolicyKind::OptimalWindow => {
                    let inputs = RollInputs {
                        measured: ReserveState { t: t_j, ..state },
                        intensity_r: intensities.redemption.current,
                        intensity_m: intensities.mint.current,
                        params_r: params.0,
                        params_m: params.1,
                        feedback,
                        rates,
                        costs,
                        peg,
                        limits,
                    };
                    let plan = solve_mpc_roll(&inputs, &sweep, warm.as_deref()).map_err(|e| match e {
                        Error::Solver { iterations, reason, last_change } => Error::Solver {
                            iterations,
                            reason: format!("{reason} (roll at t={t_j}h)"),
                            last_change,
                        },
                        other => other,
                    })?;
                    if !plan.converged {
                        nonconverged += 1;
                    }
                    let mut next = plan.controls();
                    if next.len() > 1 {
                        next.remove(0);
                    }
                    warm = Some(next);
                    (plan.first_action(), plan.iterations, plan.converged)
                }
                PolicyKind::MaxYield => {
                    let outflow = params.0.mark_mean * intensities.redemption.current * window;
                    (max_yield_policy(&state, outflow, omega_max, window), 0, true)
                }
                PolicyKind::MaxLiquidity => (max_liquidity_policy(), 0, true),
            }
        };

        let mut log = WindowLog {
            index: j,
            time: t_j,
            state: ReserveState { t: t_j, ..state },
            action,
            omega_max,
            lambda_r,
            lambda_m,
            stage_cost: 0.0,
            shortfall: 0.0,
            bought_bills: 0.0,
            sold_bills: 0.0,
            solver_iterations: iterations,
            solver_converged: converged,
        };

        if !stopped {
            for s in 0..per {
                let t = t_j + s as f64 * dt;
                let next_params = params_at(&schedule, t / 24.0, &base_r, &base_m)?;
                intensities_after_rebase(&mut intensities, &params, &next_params);
                params = next_params;

                let dp = state.delta_p;
                let seg = simulate_stream_segment(
                    &params.0,
                    &params.1,
                    feedback,
                    |_| dp,
                    t,
                    t + dt,
                    intensities,
                    &source,
                    (j * per + s) as u64,
                )?;
                intensities = seg.states;

                let out = match step_state(&state, &seg.events, action, &rates, &peg, dt) {
                    Ok(out) => out,
                    Err(Error::SupplyExhausted { time }) => {
                        exhausted_time = Some(time);
                        break;
                    }
                    Err(e) => return Err(e),
                };
                let applied = ControlAction::new(out.omega_applied, action.delta);
                let cost = stage_cost_breakdown(&state, &applied, &rates, &costs);
                substeps.push(SubstepCost { t, dt, cost });
                log.stage_cost += (-rates.rho * t).exp() * cost.total() * dt;
                log.shortfall += out.shortfall;
                log.bought_bills += out.omega_applied.max(0.0) * dt;
                log.sold_bills += (-out.omega_applied).max(0.0) * dt;

                let before = state.total_reserves();
                let expected = before + out.interest + out.mints - out.redemptions + out.shortfall;
                let after = out.state.total_reserves();
                let scale = before.abs().max(expected.abs()).max(1.0);
                max_err = max_err.max((after - expected).abs() / scale);

                state = out.state;
                if state.is_depegged() {
                    depeg_time = Some(state.t);
                    break;
                }
            }
        }
        windows.push(log);
    }

    let stop = depeg_time.or(exhausted_time);
    let revenue = total_revenue(&substeps, rates.rho, stop);
    let revenue_undiscounted = undiscounted_revenue(&substeps, stop);
    Ok(RunRecord {
        scenario,
        policy,
        replica,
        seed,
        chi: schedule.chi,
        windows,
        revenue,
        revenue_undiscounted,
        depegged: depeg_time.is_some(),
        depeg_time,
        exhausted_time,
        max_conservation_error: max_err,
        nonconverged_rolls: nonconverged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaFailure {
    pub scenario: ScenarioId,
    pub policy: PolicyKind,
    pub replica: usize,
    pub seed: u64,
    pub error: String,
}

/// Aggregates for one (scenario, policy) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub scenario: ScenarioId,
    pub policy: PolicyKind,
    pub replicas: usize,
    pub completed: usize,
    pub failed: usize,
    pub mean_revenue: f64,
    pub mean_revenue_undiscounted: f64,
    pub depeg_frequency: f64,
    pub mean_responsiveness_days: Option<f64>,
    pub responsive_replicas: usize,
    pub supply_exhausted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub cells: Vec<CellSummary>,
    pub records: Vec<RunRecord>,
    pub failures: Vec<ReplicaFailure>,
}

impl ExperimentReport {
    pub fn records_for(&self, scenario: ScenarioId, policy: PolicyKind) -> impl Iterator<Item = &RunRecord> {
        self.records
            .iter()
            .filter(move |r| r.scenario == scenario && r.policy == policy)
    }

    pub fn cell(&self, scenario: ScenarioId, policy: PolicyKind) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.scenario == scenario && c.policy == policy)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Aggregate completed records of one cell; `records` must be in replica order.
pub fn summarize_cell(
    scenario: ScenarioId,
    policy: PolicyKind,
    replicas: usize,
    records: &[&RunRecord],
) -> CellSummary {
    let completed = records.len();
    let lags: Vec<f64> = records
        .iter()
        .filter_map(|r| responsiveness_days(r, scenario.onset_day()))
        .collect();
    CellSummary {
        scenario,
        policy,
        replicas,
        completed,
        failed: replicas - completed,
        mean_revenue: mean(records.iter().map(|r| r.revenue.total())).unwrap_or(f64::NAN),
        mean_revenue_undiscounted: mean(records.iter().map(|r| r.revenue_undiscounted)).unwrap_or(f64::NAN),
        depeg_frequency: mean(records.iter().map(|r| f64::from(u8::from(r.depegged)))).unwrap_or(f64::NAN),
        mean_responsiveness_days: mean(lags.iter().copied()),
        responsive_replicas: lags.len(),
        supply_exhausted: records.iter().filter(|r| r.exhausted_time.is_some()).count(),
    }
}

/// Run every configured cell on the current rayon pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let jobs: Vec<(ScenarioId, PolicyKind, usize)> = config
        .scenarios
        .iter()
        .flat_map(|&s| {
            config
                .policies
                .iter()
                .flat_map(move |&p| (0..config.replicas).map(move |r| (s, p, r)))
        })
        .collect();
    info!(jobs = jobs.len(), "starting experiment");
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(s, p, r)| (s, p, r, run_replica(config, s, p, r)))
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (scenario, policy, replica, outcome) in outcomes {
        match outcome {
            Ok(rec) => records.push(rec),
            Err(e) => {
                warn!(%scenario, %policy, replica, error = %e, "replica failed");
                failures.push(ReplicaFailure {
                    scenario,
                    policy,
                    replica,
                    seed: event_seed(config.master_seed, replica),
                    error: e.to_string(),
                });
            }
        }
    }

    let mut cells = Vec::new();
    for &s in &config.scenarios {
        for &p in &config.policies {
            let cell: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.scenario == s && r.policy == p)
                .collect();
            let summary = summarize_cell(s, p, config.replicas, &cell);
            info!(
                scenario = %s,
                policy = %p,
                revenue = summary.mean_revenue,
                depeg = summary.depeg_frequency,
                "cell done"
            );
            cells.push(summary);
        }
    }
    Ok(ExperimentReport {
        config: config.clone(),
        cells,
        records,
        failures,
    })
}

/// Run on a dedicated pool of `workers` threads.
pub fn run_experiment_with_workers(config: &ExperimentConfig, workers: usize) -> Result<ExperimentReport> {
    ensure(workers >= 1, || "worker count must be >= 1".to_string())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_experiment(config))
}

/// One row of `replicas.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRow {
    pub scenario: ScenarioId,
    pub policy: PolicyKind,
    pub replica: usize,
    pub seed: u64,
    pub chi: Option<f64>,
    pub revenue: f64,
    pub revenue_undiscounted: f64,
    pub carry: f64,
    pub peg_cost: f64,
    pub fee_cost: f64,
    pub trading_cost: f64,
    pub depegged: u8,
    pub depeg_time_hours: Option<f64>,
    pub exhausted_time_hours: Option<f64>,
    pub responsiveness_days: Option<f64>,
    pub max_conservation_error: f64,
    pub nonconverged_rolls: usize,
}

impl ReplicaRow {
    pub fn from_record(r: &RunRecord) -> Self {
        Self {
            scenario: r.scenario,
            policy: r.policy,
            replica: r.replica,
            seed: r.seed,
            chi: r.chi,
            revenue: r.revenue.total(),
            revenue_undiscounted: r.revenue_undiscounted,
            carry: r.revenue.carry,
            peg_cost: r.revenue.peg,
            fee_cost: r.revenue.fee,
            trading_cost: r.revenue.trading,
            depegged: u8::from(r.depegged),
            depeg_time_hours: r.depeg_time,
            exhausted_time_hours: r.exhausted_time,
            responsiveness_days: responsiveness_days(r, r.scenario.onset_day()),
            max_conservation_error: r.max_conservation_error,
            nonconverged_rolls: r.nonconverged_rolls,
        }
    }
}

/// One row of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub replica: usize,
    pub time_hours: f64,
    pub policy: PolicyKind,
    pub omega: f64,
    pub delta: f64,
    pub r_liq: f64,
    pub r_bill: f64,
    pub delta_p: f64,
    #[serde(rename = "lambda_R")]
    pub lambda_r: f64,
    #[serde(rename = "lambda_M")]
    pub lambda_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub seeds: Vec<SeedEntry>,
    pub failures: Vec<ReplicaFailure>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedEntry {
    pub scenario: ScenarioId,
    pub replica: usize,
    pub event_seed: u64,
    pub chi: Option<f64>,
}

/// Files written by [`emit_reports`].
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub summary: PathBuf,
    pub replicas: PathBuf,
    pub trajectories: Vec<PathBuf>,
    pub manifest: PathBuf,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub const SUMMARY_HEADER: [&str; 11] = [
    "scenario",
    "policy",
    "replicas",
    "completed",
    "failed",
    "mean_revenue",
    "mean_revenue_undiscounted",
    "depeg_frequency",
    "mean_responsiveness_days",
    "responsive_replicas",
    "supply_exhausted",
];

pub const REPLICA_HEADER: [&str; 17] = [
    "scenario",
    "policy",
    "replica",
    "seed",
    "chi",
    "revenue",
    "revenue_undiscounted",
    "carry",
    "peg_cost",
    "fee_cost",
    "trading_cost",
    "depegged",
    "depeg_time_hours",
    "exhausted_time_hours",
    "responsiveness_days",
    "max_conservation_error",
    "nonconverged_rolls",
];

pub const TRAJECTORY_HEADER: [&str; 10] = [
    "replica",
    "time_hours",
    "policy",
    "omega",
    "delta",
    "r_liq",
    "r_bill",
    "delta_p",
    "lambda_R",
    "lambda_M",
];

pub fn trajectory_file_name(scenario: ScenarioId, policy: PolicyKind) -> String {
    format!("trajectory_{scenario}_{policy}.csv")
}

/// Write summary, per-replica, trajectory and manifest files into `dir`.
pub fn emit_reports(report: &ExperimentReport, dir: &Path) -> Result<ReportFiles> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let summary = dir.join("summary.csv");
    write_csv(&summary, &SUMMARY_HEADER, &report.cells)?;

    let replicas = dir.join("replicas.csv");
    write_csv(
        &replicas,
        &REPLICA_HEADER,
        report.records.iter().map(ReplicaRow::from_record),
    )?;

    let mut trajectories = Vec::new();
    for cell in &report.cells {
        let path = dir.join(trajectory_file_name(cell.scenario, cell.policy));
        let rows = report.records_for(cell.scenario, cell.policy).flat_map(|r| {
            r.windows.iter().map(move |w| TrajectoryRow {
                replica: r.replica,
                time_hours: w.time,
                policy: r.policy,
                omega: w.action.omega,
                delta: w.action.delta,
                r_liq: w.state.r_liq,
                r_bill: w.state.r_bill,
                delta_p: w.state.delta_p,
                lambda_r: w.lambda_r,
                lambda_m: w.lambda_m,
            })
        });
        write_csv(&path, &TRAJECTORY_HEADER, rows)?;
        trajectories.push(path);
    }

    let mut seeds: Vec<SeedEntry> = report
        .records
        .iter()
        .map(|r| SeedEntry {
            scenario: r.scenario,
            replica: r.replica,
            event_seed: r.seed,
            chi: r.chi,
        })
        .collect();
    seeds.sort_by_key(|s| (s.scenario, s.replica));
    seeds.dedup_by_key(|s| (s.scenario, s.replica));
    let manifest = Manifest {
        version: VERSION.to_string(),
        config: report.config.clone(),
        master_seed: report.config.master_seed,
        seeds,
        failures: report.failures.clone(),
    };
    let manifest_path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| io_err(&manifest_path, e))?;
    fs::write(&manifest_path, text + "\n").map_err(|e| io_err(&manifest_path, e))?;

    Ok(ReportFiles {
        summary,
        replicas,
        trajectories,
        manifest: manifest_path,
    })
}

/// Read `replicas.csv` back.
pub fn read_replica_rows(path: &Path) -> Result<Vec<ReplicaRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<ReplicaRow>, _>>()
        .map_err(|e| io_err(path, e))
}

/// Read `summary.csv` back.
pub fn read_summary_rows(path: &Path) -> Result<Vec<CellSummary>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<CellSummary>, _>>()
        .map_err(|e| io_err(path, e))
}
