//! Flat TOML scenario files.
//!
//! ```toml
//! e_min = 0.1
//! e_max = 0.95
//! E = 1.0
//! P = 1.0
//! eta_c = 0.9219544457292887
//! eta_d = 0.9219544457292887
//! R = 300000.0
//! T = 0.1
//! theta = 80.0
//! pi = 20.0
//! alpha = 5.24e-4
//! beta = 2.03
//! e0 = 0.525
//! ```
//!
//! Every key is optional; missing keys fall back to the defaults of
//! [`Scenario::default`]. A missing `e0` means the middle of the SoC bounds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::battery::BatteryParams;
use crate::error::{Error, Result};
use crate::market::MarketPrices;
use crate::scenario::Scenario;
use crate::stress::PowerLaw;

pub const KEYS: [&str; 13] = [
    "e_min", "e_max", "E", "P", "eta_c", "eta_d", "R", "T", "theta", "pi", "alpha", "beta", "e0",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_max: Option<f64>,
    #[serde(rename = "E", skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    #[serde(rename = "P", skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_d: Option<f64>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub replacement_price: Option<f64>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub interval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e0: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn slot(&mut self, key: &str) -> Option<&mut Option<f64>> {
        Some(match key {
            "e_min" => &mut self.e_min,
            "e_max" => &mut self.e_max,
            "E" => &mut self.capacity,
            "P" => &mut self.power,
            "eta_c" => &mut self.eta_c,
            "eta_d" => &mut self.eta_d,
            "R" => &mut self.replacement_price,
            "T" => &mut self.interval,
            "theta" => &mut self.theta,
            "pi" => &mut self.pi,
            "alpha" => &mut self.alpha,
            "beta" => &mut self.beta,
            "e0" => &mut self.e0,
            _ => return None,
        })
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = self
            .slot(key)
            .ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
        *slot = Some(value);
        Ok(())
    }

    /// Applies a `KEY=VALUE` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got `{assignment}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("`{value}` is not a number")))?;
        self.set(key.trim(), value)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let d = Scenario::default();
        let b = d.battery;
        let battery = BatteryParams {
            e_min: self.e_min.unwrap_or(b.e_min),
            e_max: self.e_max.unwrap_or(b.e_max),
            capacity: self.capacity.unwrap_or(b.capacity),
            power: self.power.unwrap_or(b.power),
            eta_c: self.eta_c.unwrap_or(b.eta_c),
            eta_d: self.eta_d.unwrap_or(b.eta_d),
            replacement_price: self.replacement_price.unwrap_or(b.replacement_price),
            interval: self.interval.unwrap_or(b.interval),
        };
        let prices = MarketPrices {
            theta: self.theta.unwrap_or(d.prices.theta),
            pi: self.pi.unwrap_or(d.prices.pi),
        };
        let stress = PowerLaw {
            alpha: self.alpha.unwrap_or(d.stress.alpha),
            beta: self.beta.unwrap_or(d.stress.beta),
        };
        let scenario = Scenario {
            e0: self.e0.unwrap_or(0.5 * (battery.e_min + battery.e_max)),
            battery,
            prices,
            stress,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
