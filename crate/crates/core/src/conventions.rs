//! Global sign and normalization choices, pinned in one place.
//!
//! Metric signature is (+,-,-,-); the invariant interval of a separation
//! (t, x) is t^2 - |x|^2 and k.x means k0 t - k.x. Every contraction carries
//! the measure contraction_norm * d^D k / (2 omega_k) over the positive mass
//! shell, with omega_k = sqrt(k^2 + m^2) and contraction_norm = (2 pi)^{-D}.
//! `closed_form_calibration` relates the closed-form propagator branches to
//! the quadrature normalization; it is measured, never assumed, and defaults
//! to 1 until calibrated.

use serde::{Deserialize, Serialize};

pub const SUPPORTED_DIMS: [u32; 2] = [1, 3];

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Conventions {
    /// Field mass m > 0; lengths and times are quoted in units of 1/m.
    pub mass: f64,
    /// Number of spatial dimensions D (1 or 3).
    pub spatial_dims: u32,
    /// The constant C multiplying every mass-shell contraction integral.
    pub contraction_norm: f64,
    /// Multiplier applied to closed-form propagator branches to match the
    /// quadrature normalization. Measured by `propagator::measure_calibration`.
    pub closed_form_calibration: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConventionsError {
    #[error("mass must be finite and positive, got {0}")]
    InvalidMass(f64),
    #[error("unsupported spatial dimension {0}; supported: 1, 3")]
    UnsupportedDimension(u32),
    #[error("contraction_norm must be finite and positive, got {0}")]
    InvalidNorm(f64),
}

impl Conventions {
    /// Canonical conventions for dimension D: C = (2 pi)^{-D}, calibration 1.
    pub fn new(mass: f64, spatial_dims: u32) -> Result<Self, ConventionsError> {
        let c = Conventions {
            mass,
            spatial_dims,
            contraction_norm: (2.0 * std::f64::consts::PI).powi(-(spatial_dims.min(9) as i32)),
            closed_form_calibration: 1.0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConventionsError> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(ConventionsError::InvalidMass(self.mass));
        }
        if !SUPPORTED_DIMS.contains(&self.spatial_dims) {
            return Err(ConventionsError::UnsupportedDimension(self.spatial_dims));
        }
        if !(self.contraction_norm.is_finite() && self.contraction_norm > 0.0) {
            return Err(ConventionsError::InvalidNorm(self.contraction_norm));
        }
        Ok(())
    }

    /// Copy with the measured closed-form calibration applied.
    pub fn with_calibration(mut self, c: f64) -> Self {
        self.closed_form_calibration = c;
        self
    }

    /// On-shell energy for radial momentum k.
    #[inline]
    pub fn omega(&self, k: f64) -> f64 {
        (k * k + self.mass * self.mass).sqrt()
    }

    /// Invariant interval t^2 - |x|^2 of a separation.
    #[inline]
    pub fn interval(&self, t: f64, r: f64) -> f64 {
        t * t - r * r
    }
}

/// m = 1, D = 3, C = (2 pi)^{-3}.
pub fn default_conventions() -> Conventions {
    Conventions::new(1.0, 3).expect("canonical defaults are valid")
}

impl Default for Conventions {
    fn default() -> Self {
        default_conventions()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = default_conventions();
        assert_eq!(c.mass, 1.0);
        assert_eq!(c.spatial_dims, 3);
        let tau = 2.0 * std::f64::consts::PI;
        assert!((c.contraction_norm - tau.powi(-3)).abs() < 1e-18);
        assert_eq!(c.closed_form_calibration, 1.0);
    }

    #[test]
    fn dimension_override() {
        let c = Conventions::new(1.0, 1).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        assert!((c.contraction_norm - 1.0 / tau).abs() < 1e-16);
    }

    #[test]
    fn validation() {
        assert_eq!(
            Conventions::new(0.0, 3).unwrap_err(),
            ConventionsError::InvalidMass(0.0)
        );
        assert_eq!(
            Conventions::new(-1.0, 3).unwrap_err(),
            ConventionsError::InvalidMass(-1.0)
        );
        assert_eq!(
            Conventions::new(1.0, 2).unwrap_err(),
            ConventionsError::UnsupportedDimension(2)
        );
        let mut c = default_conventions();
        c.contraction_norm = -1.0;
        assert_eq!(c.validate().unwrap_err(), ConventionsError::InvalidNorm(-1.0));
    }

    #[test]
    fn omega_and_interval() {
        let c = Conventions::new(2.0, 3).unwrap();
        assert!((c.omega(0.0) - 2.0).abs() < 1e-15);
        assert!((c.omega(3.0) - 13.0_f64.sqrt()).abs() < 1e-15);
        assert!(c.interval(1.0, 2.0) < 0.0);
        assert!(c.interval(2.0, 1.0) > 0.0);
    }
}
