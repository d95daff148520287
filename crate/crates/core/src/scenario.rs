use serde::{Deserialize, Serialize};

use crate::battery::BatteryParams;
use crate::error::{Error, Result};
use crate::market::MarketPrices;
use crate::stress::{PowerLaw, StressModel};

/// Everything needed to price and control one battery besides the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario<S = PowerLaw> {
    pub battery: BatteryParams,
    pub prices: MarketPrices,
    pub stress: S,
    /// Initial stored energy (MWh).
    pub e0: f64,
}

impl Default for Scenario<PowerLaw> {
    fn default() -> Self {
        let battery = BatteryParams::default();
        Self {
            e0: 0.5 * (battery.e_min + battery.e_max),
            battery,
            prices: MarketPrices::default(),
            stress: PowerLaw::default(),
        }
    }
}

impl<S: StressModel> Scenario<S> {
    pub fn validate(&self) -> Result<()> {
        self.battery.validate()?;
        self.prices.validate()?;
        if !self.stress.is_strictly_convex() {
            return Err(Error::NonConvexStress);
        }
        if !self.battery.contains(self.e0) {
            return Err(Error::param(format!(
                "e0 = {} outside [{}, {}]",
                self.e0, self.battery.e_min, self.battery.e_max
            )));
        }
        Ok(())
    }

    pub fn with_prices(&self, prices: MarketPrices) -> Self
    where
        S: Clone,
    {
        Self {
            prices,
            ..self.clone()
        }
    }
}
