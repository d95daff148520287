//! Per-cycle cost functions and the worst-case regret of the threshold policy.
//!
//! The cost of a dispatch can be rewritten as a sum over its rainflow cycles,
//! one term per full cycle, charge half and discharge half. The functions
//! below are those terms; their linear parts carry the price of the energy
//! moved by a cycle of the given depth.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::battery::BatteryParams;
use crate::error::{Error, Result};
use crate::market::MarketPrices;
use crate::policy::compute_u_hat;
use crate::stress::StressModel;

/// Relative tolerance for deciding that both price sides are equal.
pub const BALANCE_TOL: f64 = 1e-9;

fn check_depth(u: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(u));
    }
    Ok(())
}

/// `E R Phi(u) + E (theta / eta_c + pi eta_d) u`.
pub fn full_cycle_cost<S: StressModel + ?Sized>(
    u: f64,
    params: &BatteryParams,
    phi: &S,
    prices: &MarketPrices,
) -> Result<f64> {
    check_depth(u)?;
    let e = params.capacity;
    Ok(e * params.replacement_price * phi.value(u)
        + e * (prices.theta / params.eta_c + prices.pi * params.eta_d) * u)
}

/// `(1/2) E R Phi(v) + (E / eta_c) theta v`.
pub fn charge_half_cost<S: StressModel + ?Sized>(
    v: f64,
    params: &BatteryParams,
    phi: &S,
    prices: &MarketPrices,
) -> Result<f64> {
    check_depth(v)?;
    let e = params.capacity;
    Ok(0.5 * e * params.replacement_price * phi.value(v) + e / params.eta_c * prices.theta * v)
}

/// `(1/2) E R Phi(w) + E eta_d pi w`.
pub fn discharge_half_cost<S: StressModel + ?Sized>(
    w: f64,
    params: &BatteryParams,
    phi: &S,
    prices: &MarketPrices,
) -> Result<f64> {
    check_depth(w)?;
    let e = params.capacity;
    Ok(0.5 * e * params.replacement_price * phi.value(w) + e * params.eta_d * prices.pi * w)
}

/// `(v_hat, w_hat)`: the half-cycle depths priced by one side of the market
/// each, clamped to `[0, 1]`. Both are 1 for a free battery.
pub fn optimal_half_depths<S: StressModel + ?Sized>(
    prices: &MarketPrices,
    params: &BatteryParams,
    phi: &S,
) -> (f64, f64) {
    let r = params.replacement_price;
    if r == 0.0 {
        return (1.0, 1.0);
    }
    let v = phi.derivative_inverse(prices.theta / params.eta_c / r);
    let w = phi.derivative_inverse(prices.pi * params.eta_d / r);
    (v.clamp(0.0, 1.0), w.clamp(0.0, 1.0))
}

/// Which side of the market dominates the marginal value of a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `pi eta_d > theta / eta_c`: the under-response side weighs more.
    UnderWeighted,
    Balanced,
    /// `pi eta_d < theta / eta_c`: the over-response side weighs more.
    OverWeighted,
}

impl Regime {
    pub fn classify(prices: &MarketPrices, params: &BatteryParams) -> Self {
        let under = prices.pi * params.eta_d;
        let over = prices.theta / params.eta_c;
        let scale = under.abs().max(over.abs());
        if (under - over).abs() <= BALANCE_TOL * scale {
            Regime::Balanced
        } else if under > over {
            Regime::UnderWeighted
        } else {
            Regime::OverWeighted
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::UnderWeighted => "under-weighted",
            Regime::Balanced => "balanced",
            Regime::OverWeighted => "over-weighted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub u_hat: f64,
    pub v_hat: f64,
    pub w_hat: f64,
    pub regime: Regime,
    /// Worst-case excess cost of the threshold policy over the offline
    /// optimum ($).
    pub epsilon: f64,
}

/// Worst-case optimality gap of the threshold policy.
///
/// Zero when the two price sides balance; otherwise the excess of pricing up
/// to three half cycles at `u_hat` instead of their own optimal depths, with
/// the dominant side weighted once and the other side twice.
pub fn optimality_gap_bound<S: StressModel + ?Sized>(
    prices: &MarketPrices,
    params: &BatteryParams,
    phi: &S,
) -> Result<GapReport> {
    if !phi.is_strictly_convex() {
        return Err(Error::NonConvexStress);
    }
    let u_hat = compute_u_hat(prices, params, phi);
    let (v_hat, w_hat) = optimal_half_depths(prices, params, phi);
    let regime = Regime::classify(prices, params);
    let jv = |x| charge_half_cost(x, params, phi, prices);
    let jw = |x| discharge_half_cost(x, params, phi, prices);
    let epsilon = match regime {
        Regime::Balanced => 0.0,
        Regime::UnderWeighted => jw(u_hat)? + 2.0 * jv(u_hat)? - jw(w_hat)? - 2.0 * jv(v_hat)?,
        Regime::OverWeighted => 2.0 * jw(u_hat)? + jv(u_hat)? - 2.0 * jw(w_hat)? - jv(v_hat)?,
    };
    Ok(GapReport {
        u_hat,
        v_hat,
        w_hat,
        regime,
        epsilon: epsilon.max(0.0),
    })
}
