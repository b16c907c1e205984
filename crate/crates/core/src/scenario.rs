use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::wavelength;

/// Radio and link-budget parameters shared by sensing and communication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub wavelength: f64,
    /// Noise power σ² in watts.
    pub noise_power: f64,
    pub snapshots: usize,
    pub alpha_s: Complex64,
    /// Transmit power budget in watts.
    pub p_max: f64,
    /// Linear SINR threshold Γ.
    pub gamma_min: f64,
}

impl Scenario {
    pub fn new(
        wavelength: f64,
        noise_power: f64,
        snapshots: usize,
        alpha_s: Complex64,
        p_max: f64,
        gamma_min: f64,
    ) -> Result<Self> {
        let s = Scenario { wavelength, noise_power, snapshots, alpha_s, p_max, gamma_min };
        s.validate()?;
        Ok(s)
    }

    /// 28 GHz, σ² = −113 dBm, L = 64, α_s = 1, P = 25 dBm, Γ = 5 dB.
    pub fn reference() -> Self {
        Scenario {
            wavelength: wavelength(28e9),
            noise_power: dbm_to_watts(-113.0),
            snapshots: 64,
            alpha_s: Complex64::new(1.0, 0.0),
            p_max: dbm_to_watts(25.0),
            gamma_min: db_to_linear(5.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.wavelength) {
            return Err(Error::InvalidArgument(format!("wavelength must be positive, got {}", self.wavelength)));
        }
        if !positive(self.noise_power) {
            return Err(Error::InvalidArgument(format!("noise power must be positive, got {}", self.noise_power)));
        }
        if self.snapshots == 0 {
            return Err(Error::InvalidArgument("snapshot count must be at least 1".into()));
        }
        if !positive(self.alpha_s.norm()) {
            return Err(Error::InvalidArgument("reflection coefficient must be nonzero".into()));
        }
        if !positive(self.p_max) {
            return Err(Error::InvalidArgument(format!("power budget must be positive, got {}", self.p_max)));
        }
        if !(self.gamma_min >= 0.0) || !self.gamma_min.is_finite() {
            return Err(Error::InvalidArgument(format!("SINR threshold must be nonnegative, got {}", self.gamma_min)));
        }
        Ok(())
    }

    /// Required received power Γσ² at the communication user.
    pub fn sinr_floor(&self) -> f64 {
        self.gamma_min * self.noise_power
    }

    /// Common FIM prefactor 2|α_s|²L/σ².
    pub fn fim_scale(&self) -> f64 {
        2.0 * self.alpha_s.norm_sqr() * self.snapshots as f64 / self.noise_power
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Γ = 2^R − 1 for a rate target in bits/s/Hz.
pub fn rate_to_sinr(bits: f64) -> f64 {
    2f64.powf(bits) - 1.0
}
