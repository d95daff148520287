//! Battery description, dispatch sequences and state-of-charge dynamics.
//!
//! Units are MWh, MW, hours and $/MWh throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::shrink_until;

/// Physical and economic description of a battery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams {
    /// Lower operating bound on stored energy (MWh).
    pub e_min: f64,
    /// Upper operating bound on stored energy (MWh).
    pub e_max: f64,
    /// Nameplate energy capacity used to normalize cycle depths (MWh).
    #[serde(rename = "E")]
    pub capacity: f64,
    /// Power rating (MW).
    #[serde(rename = "P")]
    pub power: f64,
    pub eta_c: f64,
    pub eta_d: f64,
    /// Cell replacement price ($/MWh).
    #[serde(rename = "R")]
    pub replacement_price: f64,
    /// Control interval (hours).
    #[serde(rename = "T")]
    pub interval: f64,
}

impl Default for BatteryParams {
    /// The 0.1/0.95 MWh lithium-ion battery with a 300 $/kWh replacement
    /// price, lossless, 1 MW, 6 minute intervals.
    fn default() -> Self {
        Self {
            e_min: 0.1,
            e_max: 0.95,
            capacity: 1.0,
            power: 1.0,
            eta_c: 1.0,
            eta_d: 1.0,
            replacement_price: 300_000.0,
            interval: 0.1,
        }
    }
}

impl BatteryParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.e_min,
            self.e_max,
            self.capacity,
            self.power,
            self.eta_c,
            self.eta_d,
            self.replacement_price,
            self.interval,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::param("battery parameters must be finite"));
        }
        if !(0.0 <= self.e_min && self.e_min < self.e_max && self.e_max <= self.capacity) {
            return Err(Error::param(format!(
                "need 0 <= e_min < e_max <= E, got e_min={} e_max={} E={}",
                self.e_min, self.e_max, self.capacity
            )));
        }
        if !(self.eta_c > 0.0 && self.eta_c <= 1.0 && self.eta_d > 0.0 && self.eta_d <= 1.0) {
            return Err(Error::param("efficiencies must lie in (0, 1]"));
        }
        if !(self.power > 0.0) {
            return Err(Error::param("power rating must be positive"));
        }
        if self.replacement_price < 0.0 {
            return Err(Error::param("replacement price must be non-negative"));
        }
        if !(self.interval > 0.0) {
            return Err(Error::param("interval must be positive"));
        }
        Ok(())
    }

    /// Round-trip efficiency.
    pub fn round_trip(&self) -> f64 {
        self.eta_c * self.eta_d
    }

    /// Splits a round-trip efficiency evenly between charge and discharge.
    pub fn with_round_trip(mut self, eta: f64) -> Self {
        let side = eta.sqrt();
        self.eta_c = side;
        self.eta_d = side;
        self
    }

    pub fn contains(&self, e: f64) -> bool {
        self.e_min <= e && e <= self.e_max
    }

    /// Unchecked state update shared by every component that moves the SoC.
    #[inline]
    pub fn next_soc(&self, e: f64, charge: f64, discharge: f64) -> f64 {
        e + self.interval * self.eta_c * charge - self.interval / self.eta_d * discharge
    }

    /// One step of the linear SoC recursion. Bounds are not enforced here.
    pub fn soc_step(&self, e: f64, charge: f64, discharge: f64) -> Result<f64> {
        check_power(0, charge, discharge)?;
        Ok(self.next_soc(e, charge, discharge))
    }

    /// Rolls the recursion over a whole dispatch.
    ///
    /// Returns the first step whose SoC leaves `[e_min, e_max]` as an error
    /// instead of clipping it.
    pub fn simulate_soc(&self, e0: f64, dispatch: &Dispatch) -> Result<SocSeries> {
        if !self.contains(e0) {
            return Err(self.bound_error(0, e0));
        }
        let mut soc = Vec::with_capacity(dispatch.len() + 1);
        soc.push(e0);
        let mut e = e0;
        for (n, (&c, &d)) in dispatch.charge.iter().zip(&dispatch.discharge).enumerate() {
            check_power(n, c, d)?;
            e = self.next_soc(e, c, d);
            if !self.contains(e) {
                return Err(self.bound_error(n + 1, e));
            }
            soc.push(e);
        }
        Ok(SocSeries(soc))
    }

    /// Largest charge power that keeps the next SoC at or below `upper`.
    pub fn max_charge(&self, e: f64, upper: f64) -> f64 {
        self.max_charge_where(e, upper, |next| next <= upper)
    }

    /// Largest discharge power that keeps the next SoC at or above `lower`.
    pub fn max_discharge(&self, e: f64, lower: f64) -> f64 {
        self.max_discharge_where(e, lower, |next| next >= lower)
    }

    /// Closed-form charge limit toward `upper`, shrunk until `admit` holds
    /// for the SoC that [`next_soc`](Self::next_soc) actually produces.
    pub(crate) fn max_charge_where(&self, e: f64, upper: f64, admit: impl Fn(f64) -> bool) -> f64 {
        let rate = self.interval * self.eta_c;
        let estimate = (upper - e) / rate;
        shrink_until(estimate, upper.abs().max(e.abs()) / rate, |c| {
            admit(self.next_soc(e, c, 0.0))
        })
    }

    pub(crate) fn max_discharge_where(
        &self,
        e: f64,
        lower: f64,
        admit: impl Fn(f64) -> bool,
    ) -> f64 {
        let rate = self.interval / self.eta_d;
        let estimate = (e - lower) / rate;
        shrink_until(estimate, lower.abs().max(e.abs()) / rate, |d| {
            admit(self.next_soc(e, 0.0, d))
        })
    }

    fn bound_error(&self, index: usize, value: f64) -> Error {
        Error::SocBound {
            index,
            value,
            lower: self.e_min,
            upper: self.e_max,
        }
    }
}

fn check_power(index: usize, c: f64, d: f64) -> Result<()> {
    if !(c >= 0.0 && d >= 0.0 && c.is_finite() && d.is_finite()) {
        return Err(Error::InvalidPower { index });
    }
    if c > 0.0 && d > 0.0 {
        return Err(Error::Complementarity { index });
    }
    Ok(())
}

/// Charge and discharge power per interval (MW).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
}

impl Dispatch {
    pub fn new(charge: Vec<f64>, discharge: Vec<f64>) -> Result<Self> {
        if charge.len() != discharge.len() {
            return Err(Error::LengthMismatch {
                left: charge.len(),
                right: discharge.len(),
            });
        }
        for (n, (&c, &d)) in charge.iter().zip(&discharge).enumerate() {
            check_power(n, c, d)?;
        }
        Ok(Self { charge, discharge })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            charge: vec![0.0; n],
            discharge: vec![0.0; n],
        }
    }

    /// Builds a dispatch from signed net power (positive = charge).
    pub fn from_net(net: &[f64]) -> Self {
        Self {
            charge: net.iter().map(|&x| x.max(0.0)).collect(),
            discharge: net.iter().map(|&x| (-x).max(0.0)).collect(),
        }
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            charge: Vec::with_capacity(n),
            discharge: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, charge: f64, discharge: f64) {
        self.charge.push(charge);
        self.discharge.push(discharge);
    }

    pub fn len(&self) -> usize {
        self.charge.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charge.is_empty()
    }

    /// Net power `c_n - d_n` per step.
    pub fn net(&self) -> impl Iterator<Item = f64> + '_ {
        self.charge.iter().zip(&self.discharge).map(|(c, d)| c - d)
    }

    /// Checks complementarity, sign and the power rating.
    pub fn check(&self, params: &BatteryParams) -> Result<()> {
        if self.charge.len() != self.discharge.len() {
            return Err(Error::LengthMismatch {
                left: self.charge.len(),
                right: self.discharge.len(),
            });
        }
        for (n, (&c, &d)) in self.charge.iter().zip(&self.discharge).enumerate() {
            check_power(n, c, d)?;
            if c > params.power || d > params.power {
                return Err(Error::Invariant(format!(
                    "step {n} exceeds the power rating {}",
                    params.power
                )));
            }
        }
        Ok(())
    }
}

/// Stored energy `e_0, ..., e_N` (MWh).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SocSeries(pub Vec<f64>);

impl SocSeries {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `e_n / E` for every sample.
    pub fn normalized(&self, capacity: f64) -> Vec<f64> {
        self.0.iter().map(|e| e / capacity).collect()
    }

    /// `(min, max)` over the series.
    pub fn range(&self) -> Option<(f64, f64)> {
        let first = *self.0.first()?;
        Some(
            self.0
                .iter()
                .fold((first, first), |(lo, hi), &e| (lo.min(e), hi.max(e))),
        )
    }
}
