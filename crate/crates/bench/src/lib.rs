//! Benchmark fixtures.

use pegreserve_core::pmp::RollInputs;
use pegreserve_core::{
    ControlLimits, CostTerms, ExperimentConfig, HawkesParams, PegFeedback, PegParams, PolicyKind, RateEnvironment,
    ReserveState, ScenarioId,
};

pub fn baseline_streams() -> (HawkesParams, HawkesParams) {
    (
        HawkesParams::new(100.0, 0.8, 2.0, 250_000.0).expect("valid"),
        HawkesParams::new(80.0, 0.6, 1.5, 300_000.0).expect("valid"),
    )
}

/// A calm roll at the start of the horizon with the default calibration.
pub fn calm_roll() -> RollInputs {
    let (params_r, params_m) = baseline_streams();
    let s = 1e10;
    RollInputs {
        measured: ReserveState {
            r_liq: 1e9,
            r_bill: 9e9,
            delta_p: 0.0,
            s_out: s,
            t: 0.0,
        },
        intensity_r: 500.0 / 3.0,
        intensity_m: 400.0 / 3.0,
        params_r,
        params_m,
        feedback: PegFeedback { zeta: 100.0 },
        rates: RateEnvironment::from_per_window(0.0, 4.93e-5, 7.31e-5, 8.0),
        costs: CostTerms {
            c_peg: 1.5e8,
            c_fee: 6e8,
            lambda_omega: 1e-4,
            rho_omega: 1e-5 / s,
        },
        peg: PegParams { eta: 10.0, gamma: 5.0 },
        limits: ControlLimits {
            omega_max: 0.1 * s / 8.0,
            delta_max: 0.0,
        },
    }
}

/// Same roll during a redemption surge.
pub fn stressed_roll() -> RollInputs {
    let mut inputs = calm_roll();
    inputs.params_r.lambda0 *= 3.0;
    inputs.intensity_r = 600.0;
    inputs.measured.delta_p = 0.05;
    inputs
}

/// One short single-shock cell for whole-replica timing.
pub fn replica_config(policy: PolicyKind, days: f64) -> ExperimentConfig {
    ExperimentConfig {
        scenarios: vec![ScenarioId::SingleShock],
        policies: vec![policy],
        replicas: 1,
        horizon_days: days,
        ..ExperimentConfig::default()
    }
}
