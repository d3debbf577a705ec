//! Stablecoin reserve management: Hawkes flow simulation, moment-closure
//! forecasting, a Pontryagin sweep MPC with window soft-threshold controls,
//! benchmark policies and a Monte Carlo stress-test harness.

// `!(x > 0.0)` rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod dynamics;
pub mod error;
pub mod forecast;
pub mod harness;
pub mod hawkes;
pub mod metrics;
mod ode;
pub mod oracle;
pub mod pmp;
pub mod scenario;

pub use control::{
    max_liquidity_policy, max_yield_policy, shrink, window_fee, window_reallocation, ControlAction,
    ControlLimits, PolicyKind,
};
pub use dynamics::{peg_drift_rate, step_state, PegParams, RateEnvironment, ReserveState, StepOutcome};
pub use error::{Error, Result};
pub use forecast::{expected_net_flow, propagate_moments, FlowForecast, MeanIntensityPath};
pub use harness::{
    emit_reports, run_experiment, run_experiment_with_workers, run_replica, CellSummary, ExperimentConfig,
    ExperimentReport, OmegaMaxReference,
};
pub use hawkes::{
    apply_event_jump, branching_ratio, decay_intensity, sample_mark, simulate_stream_segment, EventKind,
    EventSource, HawkesParams, IntensityPair, IntensityState, MarkedEvent, PegFeedback,
};
pub use metrics::{depeg_indicator, responsiveness_days, total_revenue, RunRecord, WindowLog};
pub use pmp::{
    integrate_costates, solve_mpc_roll, stage_cost, switching_integral, CostTerms, CostateTrajectory, RollPlan,
    SweepConfig,
};
pub use scenario::{build_schedule, params_at, ScenarioId, ScenarioSchedule};
