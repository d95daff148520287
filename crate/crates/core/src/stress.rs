//! Cycle-depth stress functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INVERSE_TOL: f64 = 1e-12;
const CONVEXITY_SAMPLES: usize = 256;

/// Life lost by one full cycle as a function of its depth on `[0, 1]`.
///
/// Implementors supply the value and its derivative; the derivative inverse
/// defaults to bisection on `[0, 1]`.
pub trait StressModel: Send + Sync {
    fn value(&self, depth: f64) -> f64;

    fn derivative(&self, depth: f64) -> f64;

    /// Depth at which the derivative equals `slope`, clamped to `[0, 1]`.
    fn derivative_inverse(&self, slope: f64) -> f64 {
        if slope <= self.derivative(0.0) {
            return 0.0;
        }
        if slope >= self.derivative(1.0) {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while hi - lo > INVERSE_TOL {
            let mid = 0.5 * (lo + hi);
            if self.derivative(mid) < slope {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Sampled check that the derivative is strictly increasing on `[0, 1]`
    /// and the function vanishes at zero.
    fn is_strictly_convex(&self) -> bool {
        if self.value(0.0).abs() > 1e-15 {
            return false;
        }
        let mut last = self.derivative(0.0);
        for i in 1..=CONVEXITY_SAMPLES {
            let d = self.derivative(i as f64 / CONVEXITY_SAMPLES as f64);
            if !(d > last) {
                return false;
            }
            last = d;
        }
        true
    }
}

/// `alpha * u^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub alpha: f64,
    pub beta: f64,
}

impl PowerLaw {
    /// Lithium-ion cells lasting roughly 3000 cycles at 80 % depth.
    pub const LITHIUM_ION: PowerLaw = PowerLaw {
        alpha: 5.24e-4,
        beta: 2.03,
    };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let phi = Self { alpha, beta };
        phi.validate()?;
        Ok(phi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha must be positive"));
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return Err(Error::NonConvexStress);
        }
        Ok(())
    }

    /// Closed-form derivative inverse without clamping to `[0, 1]`.
    pub fn derivative_inverse_unclamped(&self, slope: f64) -> f64 {
        if slope <= 0.0 {
            return 0.0;
        }
        (slope / (self.alpha * self.beta)).powf(1.0 / (self.beta - 1.0))
    }
}

impl Default for PowerLaw {
    fn default() -> Self {
        Self::LITHIUM_ION
    }
}

impl StressModel for PowerLaw {
    fn value(&self, depth: f64) -> f64 {
        if depth <= 0.0 {
            return 0.0;
        }
        self.alpha * depth.powf(self.beta)
    }

    fn derivative(&self, depth: f64) -> f64 {
        if depth <= 0.0 {
            return 0.0;
        }
        self.alpha * self.beta * depth.powf(self.beta - 1.0)
    }

    fn derivative_inverse(&self, slope: f64) -> f64 {
        self.derivative_inverse_unclamped(slope).clamp(0.0, 1.0)
    }

    fn is_strictly_convex(&self) -> bool {
        self.validate().is_ok()
    }
}

/// `sum_k a_k u^k` for `k >= 1`. Coefficient `i` multiplies `u^(i+1)`.
///
/// Has no closed-form derivative inverse, so it goes through bisection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub coefficients: Vec<f64>,
}

impl StressModel for Polynomial {
    fn value(&self, depth: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, a| (acc + a) * depth)
    }

    fn derivative(&self, depth: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (i, a)| acc * depth + (i + 1) as f64 * a)
    }
}
