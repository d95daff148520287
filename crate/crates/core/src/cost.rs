//! Degradation cost, settlement cost and their sum.

use serde::{Deserialize, Serialize};

use crate::battery::{BatteryParams, Dispatch};
use crate::error::{Error, Result};
use crate::market::{MarketPrices, RegulationTrace};
use crate::numeric::pairwise_sum;
use crate::rainflow::{count_dispatch, CycleSet};
use crate::stress::StressModel;

/// Depths this far past 1 are accepted and treated as 1 (accumulated rounding
/// on a profile that spans the whole capacity).
const DEPTH_SLACK: f64 = 1e-9;

/// Operating cost of one dispatch, in dollars, plus the life fraction lost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub j_cyc: f64,
    pub j_reg: f64,
    pub j_total: f64,
    pub delta_life: f64,
}

/// Life loss of one full cycle of depth `u`.
pub fn stress<S: StressModel + ?Sized>(phi: &S, u: f64) -> Result<f64> {
    if !(0.0..=1.0 + DEPTH_SLACK).contains(&u) {
        return Err(Error::Domain(u));
    }
    Ok(phi.value(u.min(1.0)))
}

/// Total life loss: full cycles count once, half cycles count half.
pub fn delta_life<S: StressModel + ?Sized>(cycles: &CycleSet, phi: &S) -> Result<f64> {
    let eval = |xs: &[f64]| -> Result<Vec<f64>> { xs.iter().map(|&u| stress(phi, u)).collect() };
    let full = pairwise_sum(&eval(&cycles.full)?);
    let half =
        pairwise_sum(&eval(&cycles.charge_half)?) + pairwise_sum(&eval(&cycles.discharge_half)?);
    Ok(full + 0.5 * half)
}

/// `delta_life * E * R` for the cycles of `dispatch`.
pub fn cycle_aging_cost<S: StressModel + ?Sized>(
    dispatch: &Dispatch,
    params: &BatteryParams,
    phi: &S,
) -> Result<f64> {
    let cycles = count_dispatch(dispatch, params);
    Ok(delta_life(&cycles, phi)? * params.capacity * params.replacement_price)
}

/// Pay-for-performance settlement:
/// `T theta sum |c - d - r|^+ + T pi sum |r - c + d|^+`.
pub fn settlement_cost(
    dispatch: &Dispatch,
    trace: &RegulationTrace,
    prices: &MarketPrices,
) -> Result<f64> {
    if dispatch.len() != trace.len() {
        return Err(Error::LengthMismatch {
            left: dispatch.len(),
            right: trace.len(),
        });
    }
    let mut over = Vec::with_capacity(trace.len());
    let mut under = Vec::with_capacity(trace.len());
    for (net, &r) in dispatch.net().zip(&trace.setpoints) {
        let dev = net - r;
        over.push(dev.max(0.0));
        under.push((-dev).max(0.0));
    }
    Ok(trace.interval * (prices.theta * pairwise_sum(&over) + prices.pi * pairwise_sum(&under)))
}

/// Aging plus settlement cost of `dispatch` against `trace`.
pub fn total_cost<S: StressModel + ?Sized>(
    dispatch: &Dispatch,
    trace: &RegulationTrace,
    params: &BatteryParams,
    phi: &S,
    prices: &MarketPrices,
) -> Result<CostBreakdown> {
    if (trace.interval - params.interval).abs() > 1e-12 * params.interval {
        return Err(Error::param(format!(
            "trace interval {} h differs from battery interval {} h",
            trace.interval, params.interval
        )));
    }
    let cycles = count_dispatch(dispatch, params);
    let life = delta_life(&cycles, phi)?;
    let j_cyc = life * params.capacity * params.replacement_price;
    let j_reg = settlement_cost(dispatch, trace, prices)?;
    Ok(CostBreakdown {
        j_cyc,
        j_reg,
        j_total: j_cyc + j_reg,
        delta_life: life,
    })
}
