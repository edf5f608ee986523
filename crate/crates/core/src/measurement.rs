//! Isotropic range-based measurement models.
//!
//! A sensor at `p` observing a source at `q` reads `g(|p - q|) + noise`, with
//! `g(r) = k (r - c1)^(-b) + c0`. The inverse-square law is the special case
//! `k = 1, b = 2, c0 = c1 = 0`.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Point in `R^k` (k = 2 or 3).
pub type Position = DVector<f64>;

/// Margin kept between the evaluation range and the singular point `c1`.
pub const DOMAIN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    InverseSquare,
    PowerLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementModel {
    pub kind: ModelKind,
    pub gain: f64,
    pub exponent: f64,
    pub offset: f64,
    pub shift: f64,
    pub noise_var: f64,
}

impl MeasurementModel {
    pub fn inverse_square(noise_var: f64) -> Self {
        Self {
            kind: ModelKind::InverseSquare,
            gain: 1.0,
            exponent: 2.0,
            offset: 0.0,
            shift: 0.0,
            noise_var,
        }
    }

    pub fn power_law(gain: f64, exponent: f64, offset: f64, shift: f64, noise_var: f64) -> Result<Self> {
        let model = Self {
            kind: ModelKind::PowerLaw,
            gain,
            exponent,
            offset,
            shift,
            noise_var,
        };
        model.validate()?;
        Ok(model)
    }

    /// Same law with a different exponent, as used for model-mismatch runs.
    pub fn with_exponent(&self, exponent: f64) -> Self {
        let kind = if self.kind == ModelKind::InverseSquare && exponent != 2.0 {
            ModelKind::PowerLaw
        } else {
            self.kind
        };
        Self { kind, exponent, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.exponent > 0.0) {
            return Err(Error::Config(format!(
                "power law needs gain > 0 and exponent > 0 (got {}, {})",
                self.gain, self.exponent
            )));
        }
        if !(self.noise_var >= 0.0) || !self.offset.is_finite() || !self.shift.is_finite() {
            return Err(Error::Config("noise_var must be >= 0 and offsets finite".into()));
        }
        if self.kind == ModelKind::InverseSquare
            && (self.gain != 1.0 || self.exponent != 2.0 || self.offset != 0.0 || self.shift != 0.0)
        {
            return Err(Error::Config("inverse_square requires gain=1, exponent=2, offset=shift=0".into()));
        }
        Ok(())
    }

    /// Smallest admissible range.
    pub fn min_range(&self) -> f64 {
        self.shift.max(0.0) + DOMAIN_EPS
    }

    fn check(&self, r: f64) -> Result<f64> {
        let min = self.min_range();
        if r.is_finite() && r > min {
            Ok(r - self.shift)
        } else {
            Err(Error::Domain { r, min })
        }
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        let s = self.check(r)?;
        Ok(self.gain * s.powf(-self.exponent) + self.offset)
    }

    /// First (`order = 1`) or second (`order = 2`) derivative of `g`.
    pub fn deriv(&self, r: f64, order: u8) -> Result<f64> {
        let s = self.check(r)?;
        let (k, b) = (self.gain, self.exponent);
        match order {
            1 => Ok(-k * b * s.powf(-b - 1.0)),
            2 => Ok(k * b * (b + 1.0) * s.powf(-b - 2.0)),
            _ => Err(Error::Numeric(format!("unsupported derivative order {order}"))),
        }
    }

    /// Noise-free reading of a sensor at `p` for a source at `q`.
    pub fn expected(&self, p: &Position, q: &Position) -> Result<f64> {
        self.value((p - q).norm())
    }

    /// Noisy reading `g(|p - q|) + nu`, `nu ~ N(0, noise_var)`.
    pub fn measure<R: Rng + ?Sized>(&self, p: &Position, q: &Position, rng: &mut R) -> Result<f64> {
        let clean = self.expected(p, q)?;
        if self.noise_var == 0.0 {
            return Ok(clean);
        }
        let normal = Normal::new(0.0, self.noise_var.sqrt()).map_err(|e| Error::Numeric(e.to_string()))?;
        Ok(clean + normal.sample(rng))
    }
}

pub fn g_value(model: &MeasurementModel, r: f64) -> Result<f64> {
    model.value(r)
}

pub fn g_deriv(model: &MeasurementModel, r: f64, order: u8) -> Result<f64> {
    model.deriv(r, order)
}
