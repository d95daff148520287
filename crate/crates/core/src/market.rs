//! Market prices and regulation instructions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pay-for-performance penalty prices ($/MWh).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketPrices {
    /// Over-response price.
    pub theta: f64,
    /// Under-response price.
    pub pi: f64,
}

impl MarketPrices {
    pub fn new(theta: f64, pi: f64) -> Result<Self> {
        let m = Self { theta, pi };
        m.validate()?;
        Ok(m)
    }

    pub fn balanced(price: f64) -> Self {
        Self {
            theta: price,
            pi: price,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= 0.0 && self.pi >= 0.0 && self.theta.is_finite() && self.pi.is_finite()) {
            return Err(Error::param("prices must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            theta: self.theta * k,
            pi: self.pi * k,
        }
    }
}

impl Default for MarketPrices {
    fn default() -> Self {
        Self::balanced(50.0)
    }
}

/// Instructed regulation set-points `r_n` (MW, positive = charge) with their
/// interval duration (hours).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegulationTrace {
    pub interval: f64,
    pub setpoints: Vec<f64>,
}

impl RegulationTrace {
    /// Builds a trace, clipping every set-point into `[-power, power]`.
    pub fn new(interval: f64, setpoints: Vec<f64>, power: f64) -> Result<Self> {
        let (trace, clipped) = Self::clipped(interval, setpoints, power)?;
        if clipped > 0 {
            log::warn!("clipped {clipped} set-points to +/-{power} MW");
        }
        Ok(trace)
    }

    /// Like [`new`](Self::new) but reports how many samples were clipped.
    pub fn clipped(interval: f64, mut setpoints: Vec<f64>, power: f64) -> Result<(Self, usize)> {
        if setpoints.is_empty() {
            return Err(Error::Empty);
        }
        if !(interval > 0.0 && interval.is_finite()) {
            return Err(Error::param("interval must be positive"));
        }
        let mut clipped = 0;
        for (n, r) in setpoints.iter_mut().enumerate() {
            if !r.is_finite() {
                return Err(Error::param(format!("set-point {n} is not finite")));
            }
            if r.abs() > power {
                *r = r.clamp(-power, power);
                clipped += 1;
            }
        }
        Ok((
            Self {
                interval,
                setpoints,
            },
            clipped,
        ))
    }

    pub fn len(&self) -> usize {
        self.setpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.setpoints.is_empty()
    }

    /// The trace concatenated with itself `times` times in total.
    pub fn repeated(&self, times: usize) -> Self {
        Self {
            interval: self.interval,
            setpoints: self.setpoints.repeat(times),
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            interval: self.interval,
            setpoints: self.setpoints.iter().map(|r| -r).collect(),
        }
    }
}
