//! Brute-force reference checks runnable from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::control::{shrink, window_reallocation};
use crate::dynamics::{PegParams, RateEnvironment};
use crate::forecast::{propagate_moments, FlowForecast};
use crate::hawkes::{decay_intensity, HawkesParams, IntensityState, PegFeedback};
use crate::pmp::{integrate_costates, CostTerms, CostateTerminal, SurrogatePath};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Minimize λΔ|ω| + ½ρΔω² + Sω on a uniform grid of spacing `h` over [−ω_max, ω_max].
pub fn grid_window_minimizer(s_j: f64, lam_delta: f64, rho_delta: f64, omega_max: f64, h: f64) -> f64 {
    let n = (2.0 * omega_max / h).round() as i64;
    let objective = |w: f64| lam_delta * w.abs() + 0.5 * rho_delta * w * w + s_j * w;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=n {
        let w = -omega_max + i as f64 * h;
        let v = objective(w);
        if v < best.0 {
            best = (v, w);
        }
    }
    best.1
}

fn window_law_oracle(instances: usize, seed: u64) -> OracleOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..instances {
        let delta_j = rng.random_range(0.5..16.0);
        let costs = CostTerms {
            c_peg: 1.0,
            c_fee: 1.0,
            lambda_omega: rng.random_range(0.0..2.0),
            rho_omega: rng.random_range(0.05..5.0),
        };
        let omega_max = rng.random_range(0.1..10.0);
        let s_j = rng.random_range(-60.0..60.0);
        let h = 1e-4 * omega_max;
        let law = window_reallocation(s_j, delta_j, &costs, omega_max).unwrap_or(f64::NAN);
        let grid = grid_window_minimizer(
            s_j,
            costs.lambda_omega * delta_j,
            costs.rho_omega * delta_j,
            omega_max,
            h,
        );
        let cells = (law - grid).abs() / h;
        worst = worst.max(cells);
        if !(cells <= 1.0 + 1e-9) {
            failures += 1;
        }
    }
    OracleOutcome {
        name: "window law vs grid search",
        passed: failures == 0,
        detail: format!("{instances} instances, worst gap {worst:.3} grid cells"),
    }
}

fn dead_zone_oracle() -> OracleOutcome {
    let costs = CostTerms {
        c_peg: 1.0,
        c_fee: 1.0,
        lambda_omega: 0.625,
        rho_omega: 1.0,
    };
    let edge = costs.lambda_omega * 8.0;
    let a = window_reallocation(edge, 8.0, &costs, 1.0);
    let b = window_reallocation(-edge, 8.0, &costs, 1.0);
    let passed = a == Ok(0.0) && b == Ok(0.0) && shrink(edge, edge) == 0.0;
    OracleOutcome {
        name: "dead-zone boundary",
        passed,
        detail: format!("omega at |S|=lambda*Delta: {a:?}, {b:?}"),
    }
}

fn decay_oracle() -> OracleOutcome {
    let p = HawkesParams {
        lambda0: 100.0,
        kappa: 0.8,
        theta: 2.0,
        mark_mean: 1.0,
    };
    let st = IntensityState {
        current: 180.0,
        last_update: 0.0,
    };
    let got = decay_intensity(st, &p, 0.5).map(|s| s.current).unwrap_or(f64::NAN);
    let exact = 100.0 + 80.0 * (-1.0f64).exp();
    let rel = (got - exact).abs() / exact;
    OracleOutcome {
        name: "intensity decay closed form",
        passed: rel <= 1e-14,
        detail: format!("got {got:.10}, exact {exact:.10}"),
    }
}

fn moment_oracle() -> OracleOutcome {
    let r = HawkesParams {
        lambda0: 100.0,
        kappa: 0.8,
        theta: 2.0,
        mark_mean: 250_000.0,
    };
    let m = HawkesParams {
        lambda0: 80.0,
        kappa: 0.6,
        theta: 1.5,
        mark_mean: 300_000.0,
    };
    let fb = PegFeedback { zeta: 0.0 };
    let got = propagate_moments(100.0, 80.0, &r, &m, fb, |_| 0.0, 1.0, 0.1)
        .map(|p| *p.lambda_m.last().unwrap_or(&f64::NAN))
        .unwrap_or(f64::NAN);
    let exact = 400.0 / 3.0 - 160.0 / 3.0 * (-0.9f64).exp();
    let rel = (got - exact).abs() / exact;
    OracleOutcome {
        name: "mean intensity closed form",
        passed: rel <= 1e-6,
        detail: format!("relative error {rel:.3e}"),
    }
}

fn costate_oracle() -> OracleOutcome {
    let rates = RateEnvironment {
        r_cash: 0.0,
        r_bill: 4.93e-5,
        rho: 7.31e-5,
    };
    let dt = 0.1;
    let n = 91;
    let grid: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    let path = SurrogatePath {
        dt,
        grid: grid.clone(),
        r_liq: vec![1e9; n],
        r_bill: vec![9e9; n],
        delta_p: vec![0.0; n],
    };
    let fc = FlowForecast {
        dt,
        grid,
        q_hat: vec![1e6; n],
        s_out_hat: vec![1e10; n],
    };
    let costs = CostTerms {
        c_peg: 1.5e8,
        c_fee: 6e8,
        lambda_omega: 1e-4,
        rho_omega: 1e-15,
    };
    let peg = PegParams { eta: 10.0, gamma: 5.0 };
    let a = rates.rho - rates.r_bill;
    let exact = rates.r_bill / a * ((-a * 9.0).exp() - 1.0);
    let got = integrate_costates(&path, &fc, &rates, &costs, &peg, 1.0, CostateTerminal::default(), dt)
        .map(|c| c.p_bill[0])
        .unwrap_or(f64::NAN);
    let rel = (got - exact).abs() / exact.abs();
    OracleOutcome {
        name: "bill costate closed form",
        passed: rel <= 1e-8,
        detail: format!("got {got:.6e}, exact {exact:.6e}, relative error {rel:.3e}"),
    }
}

/// Run every oracle.
pub fn run_oracles(seed: u64) -> Vec<OracleOutcome> {
    vec![
        window_law_oracle(10_000, seed),
        dead_zone_oracle(),
        decay_oracle(),
        moment_oracle(),
        costate_oracle(),
    ]
}
