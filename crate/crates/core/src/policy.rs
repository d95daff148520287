//! Online controllers: the price-aware threshold policy and a price-blind
//! baseline that follows the instruction up to the physical limits.

use serde::{Deserialize, Serialize};

use crate::battery::{BatteryParams, Dispatch, SocSeries};
use crate::error::{Error, Result};
use crate::market::{MarketPrices, RegulationTrace};
use crate::stress::StressModel;

/// Cost-minimizing full-cycle depth for the given prices.
///
/// Solves `Phi'(u) = (pi eta_d + theta / eta_c) / R` and clamps to `[0, 1]`.
/// A free battery (`R = 0`) gets the whole capacity.
pub fn compute_u_hat<S: StressModel + ?Sized>(
    prices: &MarketPrices,
    params: &BatteryParams,
    phi: &S,
) -> f64 {
    if params.replacement_price == 0.0 {
        return 1.0;
    }
    let marginal = prices.pi * params.eta_d + prices.theta / params.eta_c;
    phi.derivative_inverse(marginal / params.replacement_price)
        .clamp(0.0, 1.0)
}

/// Charge/discharge decision for one interval (MW).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub charge: f64,
    pub discharge: f64,
}

impl Action {
    pub fn net(&self) -> f64 {
        self.charge - self.discharge
    }
}

/// A causal controller: sees the current SoC and instruction only.
pub trait Controller {
    fn step(&mut self, soc: f64, setpoint: f64) -> Action;
}

/// Threshold policy state.
///
/// Tracks the running SoC extrema and only follows the instruction while the
/// spread between them stays within `u_hat * E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    params: BatteryParams,
    u_hat: f64,
    running_max: f64,
    running_min: f64,
}

impl ThresholdPolicy {
    pub fn new<S: StressModel + ?Sized>(
        e0: f64,
        prices: &MarketPrices,
        params: &BatteryParams,
        phi: &S,
    ) -> Result<Self> {
        Self::with_threshold(e0, compute_u_hat(prices, params, phi), params)
    }

    pub fn with_threshold(e0: f64, u_hat: f64, params: &BatteryParams) -> Result<Self> {
        if !params.contains(e0) {
            return Err(Error::param(format!(
                "e0 = {e0} outside [{}, {}]",
                params.e_min, params.e_max
            )));
        }
        Ok(Self {
            params: *params,
            u_hat: u_hat.clamp(0.0, 1.0),
            running_max: e0,
            running_min: e0,
        })
    }

    pub fn u_hat(&self) -> f64 {
        self.u_hat
    }

    pub fn running_max(&self) -> f64 {
        self.running_max
    }

    pub fn running_min(&self) -> f64 {
        self.running_min
    }

    /// Energy span the policy allows between running extrema (MWh).
    pub fn span(&self) -> f64 {
        self.u_hat * self.params.capacity
    }

    /// Current `(lower, upper)` SoC band.
    pub fn band(&self) -> (f64, f64) {
        let span = self.span();
        (
            self.params.e_min.max(self.running_max - span),
            self.params.e_max.min(self.running_min + span),
        )
    }
}

impl Controller for ThresholdPolicy {
    fn step(&mut self, soc: f64, setpoint: f64) -> Action {
        self.running_max = self.running_max.max(soc);
        self.running_min = self.running_min.min(soc);
        let (lower, upper) = self.band();
        let span = self.span();
        let p = &self.params;
        let r = setpoint.clamp(-p.power, p.power);
        if r >= 0.0 {
            let lo = self.running_min;
            let limit = p.max_charge_where(soc, upper, |next| next <= upper && next - lo <= span);
            Action {
                charge: limit.min(r).max(0.0),
                discharge: 0.0,
            }
        } else {
            let hi = self.running_max;
            let limit =
                p.max_discharge_where(soc, lower, |next| next >= lower && hi - next <= span);
            Action {
                charge: 0.0,
                discharge: limit.min(-r).max(0.0),
            }
        }
    }
}

/// Follows the instruction exactly unless the battery is physically full or
/// empty. Ignores prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplePolicy {
    params: BatteryParams,
}

impl SimplePolicy {
    pub fn new(params: &BatteryParams) -> Self {
        Self { params: *params }
    }
}

impl Controller for SimplePolicy {
    fn step(&mut self, soc: f64, setpoint: f64) -> Action {
        let p = &self.params;
        let r = setpoint.clamp(-p.power, p.power);
        if r >= 0.0 {
            Action {
                charge: p.max_charge(soc, p.e_max).min(r),
                discharge: 0.0,
            }
        } else {
            Action {
                charge: 0.0,
                discharge: p.max_discharge(soc, p.e_min).min(-r),
            }
        }
    }
}

/// Runs `controller` over `trace` from `e0`.
///
/// Fails if an action breaks complementarity or pushes the SoC out of the
/// physical bounds.
pub fn rollout<C: Controller + ?Sized>(
    controller: &mut C,
    trace: &RegulationTrace,
    params: &BatteryParams,
    e0: f64,
) -> Result<(Dispatch, SocSeries)> {
    if !params.contains(e0) {
        return Err(Error::param(format!("e0 = {e0} outside the SoC bounds")));
    }
    let mut dispatch = Dispatch::with_capacity(trace.len());
    let mut soc = Vec::with_capacity(trace.len() + 1);
    soc.push(e0);
    let mut e = e0;
    for (n, &r) in trace.setpoints.iter().enumerate() {
        let a = controller.step(e, r);
        e = params
            .soc_step(e, a.charge, a.discharge)
            .map_err(|err| match err {
                Error::Complementarity { .. } => Error::Complementarity { index: n },
                Error::InvalidPower { .. } => Error::InvalidPower { index: n },
                other => other,
            })?;
        if !params.contains(e) {
            return Err(Error::Invariant(format!(
                "controller left the SoC bounds at step {}: {e}",
                n + 1
            )));
        }
        dispatch.push(a.charge, a.discharge);
        soc.push(e);
    }
    Ok((dispatch, SocSeries(soc)))
}
