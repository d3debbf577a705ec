//! Window control laws and the two benchmark policies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::ReserveState;
use crate::error::{ensure, Error, Result};
use crate::pmp::CostTerms;

/// Reallocation rate `omega` ($/h, positive moves cash into bills) and fee spread `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlAction {
    pub omega: f64,
    pub delta: f64,
}

impl ControlAction {
    pub fn new(omega: f64, delta: f64) -> Self {
        Self { omega, delta }
    }

    pub fn hold() -> Self {
        Self::default()
    }

    pub fn within(&self, limits: &ControlLimits) -> bool {
        self.omega.abs() <= limits.omega_max && self.delta.abs() <= limits.delta_max
    }
}

/// Box constraint on the controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlLimits {
    pub omega_max: f64,
    pub delta_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    OptimalWindow,
    MaxYield,
    MaxLiquidity,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::OptimalWindow,
        PolicyKind::MaxYield,
        PolicyKind::MaxLiquidity,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::OptimalWindow => "optimal_window",
            PolicyKind::MaxYield => "max_yield",
            PolicyKind::MaxLiquidity => "max_liquidity",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown policy '{s}'")))
    }
}

/// Soft-thresholding: sign(z)·max(|z| − lam, 0).
pub fn shrink(z: f64, lam: f64) -> f64 {
    debug_assert!(lam >= 0.0);
    let mag = z.abs() - lam;
    if mag > 0.0 {
        z.signum() * mag
    } else {
        0.0
    }
}

fn project(x: f64, bound: f64) -> f64 {
    let y = x.clamp(-bound, bound);
    // normalize -0.0
    if y == 0.0 {
        0.0
    } else {
        y
    }
}

/// Optimal constant reallocation over a window of length `delta_j` given the
/// accumulated switching value `s_j` = ∫(p_bill − p_liq) dt.
///
/// Minimizes `λ_ω Δ|ω| + ½ ρ_ω Δ ω² + S_j ω` over `[−ω_max, ω_max]`.
pub fn window_reallocation(s_j: f64, delta_j: f64, costs: &CostTerms, omega_max: f64) -> Result<f64> {
    ensure(delta_j > 0.0, || format!("window length must be > 0, got {delta_j}"))?;
    if !(costs.rho_omega > 0.0) {
        return Err(Error::Config(
            "rho_omega must be > 0 for the window law".to_string(),
        ));
    }
    let unconstrained = -shrink(s_j, costs.lambda_omega * delta_j) / (costs.rho_omega * delta_j);
    Ok(project(unconstrained, omega_max))
}

/// Fee from the window-averaged peg costate: Proj(γ/(2 c_fee) · p̄_ΔP).
pub fn window_fee(p_dp_avg: f64, gamma: f64, c_fee: f64, delta_max: f64) -> f64 {
    debug_assert!(c_fee > 0.0);
    project(gamma / (2.0 * c_fee) * p_dp_avg, delta_max)
}

/// Keep everything in bills and raise cash only to cover the expected
/// outflow of the next window.
pub fn max_yield_policy(
    state: &ReserveState,
    next_window_outflow: f64,
    omega_max: f64,
    delta_j: f64,
) -> ControlAction {
    let omega = if state.r_liq <= next_window_outflow {
        -omega_max.min((next_window_outflow - state.r_liq) / delta_j)
    } else {
        omega_max.min(state.r_liq / delta_j)
    };
    ControlAction::new(if omega == 0.0 { 0.0 } else { omega }, 0.0)
}

/// All cash, never trades, never charges a fee.
pub fn max_liquidity_policy() -> ControlAction {
    ControlAction::hold()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn costs(lambda_omega: f64, rho_omega: f64) -> CostTerms {
        CostTerms {
            c_peg: 1.5e8,
            c_fee: 6e8,
            lambda_omega,
            rho_omega,
        }
    }

    #[test]
    fn shrink_examples() {
        assert_eq!(shrink(5.0, 2.0), 3.0);
        assert_eq!(shrink(-1.0, 2.0), 0.0);
        assert_eq!(shrink(-7.0, 3.0), -4.0);
        assert_eq!(shrink(2.0, 2.0), 0.0);
    }

    #[test]
    fn window_law_examples() {
        // λΔ = 5 with Δ = 1
        assert_eq!(window_reallocation(3.0, 1.0, &costs(5.0, 1.0), 10.0).unwrap(), 0.0);
        // λΔ = 2, ρΔ = 4 with Δ = 2
        let c = costs(1.0, 2.0);
        assert_eq!(window_reallocation(-10.0, 2.0, &c, 10.0).unwrap(), 2.0);
        assert_eq!(window_reallocation(10.0, 2.0, &c, 1.0).unwrap(), -1.0);
        assert!(matches!(
            window_reallocation(1.0, 2.0, &costs(1.0, 0.0), 1.0),
            Err(Error::Config(_))
        ));
        assert!(window_reallocation(1.0, 0.0, &c, 1.0).is_err());
    }

    #[test]
    fn fee_examples() {
        assert_eq!(window_fee(0.0, 5.0, 6e8, 0.01), 0.0);
        assert_eq!(window_fee(1.2e8, 5.0, 6e8, 0.01), 0.01);
        assert!((window_fee(1.2e8, 5.0, 6e8, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(window_fee(-3e9, 5.0, 6e8, 0.0), 0.0);
        assert_eq!(window_fee(3e9, 5.0, 6e8, 0.0), 0.0);
    }

    fn st(cash: f64) -> ReserveState {
        ReserveState {
            r_liq: cash,
            r_bill: 9e9,
            delta_p: 0.0,
            s_out: 1e10,
            t: 0.0,
        }
    }

    #[test]
    fn max_yield_examples() {
        let a = max_yield_policy(&st(0.0), 8e8, 1e12, 8.0);
        assert_eq!(a, ControlAction::new(-1e8, 0.0));
        let a = max_yield_policy(&st(1e9), 0.0, 1.25e9, 8.0);
        assert_eq!(a.omega, 1.25e8);
        let a = max_yield_policy(&st(1e9), 0.0, 1e8, 8.0);
        assert_eq!(a.omega, 1e8);
        let a = max_yield_policy(&st(3e8), 3e8, 1e8, 8.0);
        assert_eq!(a.omega, 0.0);
        assert!(a.omega.is_sign_positive());
    }

    #[test]
    fn max_liquidity_never_trades() {
        assert_eq!(max_liquidity_policy(), ControlAction::new(0.0, 0.0));
    }

    #[test]
    fn policy_tags_round_trip() {
        for p in PolicyKind::ALL {
            assert_eq!(p.as_str().parse::<PolicyKind>().unwrap(), p);
        }
        assert!("yolo".parse::<PolicyKind>().is_err());
    }
}
