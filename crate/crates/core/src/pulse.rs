//! Gaussian intensity envelopes.
//!
//! Only the cycle-averaged intensity I(t) enters the rotor Hamiltonian, so the
//! optical carrier is kept as metadata and never propagated.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::units;

/// Window half-width in units of the FWHM duration.
pub const DEFAULT_WINDOW_MULTIPLIER: f64 = 3.0;

/// Gaussian pulse with peak intensity `i0` (atomic units), intensity FWHM
/// `tau_i` (atomic time units) and peak at `t_center`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSpec {
    pub i0: f64,
    pub tau_i: f64,
    pub t_center: f64,
    /// Carrier wavelength in nm; informational only.
    pub lambda_c_nm: Option<f64>,
}

impl PulseSpec {
    pub fn new(i0: f64, tau_i: f64, t_center: f64) -> Result<Self> {
        if !(i0 >= 0.0) || !i0.is_finite() {
            return Err(Error::InvalidParameter(format!("peak intensity must be >= 0, got {i0}")));
        }
        if !(tau_i > 0.0) || !tau_i.is_finite() {
            return Err(Error::InvalidParameter(format!("pulse duration must be > 0, got {tau_i}")));
        }
        if !t_center.is_finite() {
            return Err(Error::InvalidParameter("non-finite pulse center".into()));
        }
        Ok(PulseSpec { i0, tau_i, t_center, lambda_c_nm: None })
    }

    /// Pulse centred at t = 0 from laboratory units.
    pub fn from_lab(i0_w_cm2: f64, tau_fs: f64) -> Result<Self> {
        Self::new(units::w_per_cm2_to_au(i0_w_cm2), units::fs_to_au(tau_fs), 0.0)
    }

    pub fn with_carrier_nm(mut self, lambda: f64) -> Self {
        self.lambda_c_nm = Some(lambda);
        self
    }

    pub fn with_center(self, t_center: f64) -> Self {
        PulseSpec { t_center, ..self }
    }

    pub fn scaled(self, factor: f64) -> Self {
        PulseSpec { i0: self.i0 * factor, ..self }
    }

    pub fn i0_w_cm2(&self) -> f64 {
        units::au_to_w_per_cm2(self.i0)
    }

    pub fn tau_fs(&self) -> f64 {
        units::au_to_fs(self.tau_i)
    }

    /// I(t) = I0 exp(-4 ln2 (t - t_c)^2 / tau^2).
    pub fn intensity_at(&self, t: f64) -> f64 {
        let x = (t - self.t_center) / self.tau_i;
        self.i0 * (-4.0 * LN_2 * x * x).exp()
    }

    /// Fluence (2 / (eps0 c)) sqrt(pi / (4 ln2)) I0 tau, in atomic units
    /// (eps0 = 1/(4 pi), c = 1/alpha).
    pub fn fluence(&self) -> f64 {
        let eps0_c = units::SPEED_OF_LIGHT_AU / (4.0 * PI);
        2.0 / eps0_c * (PI / (4.0 * LN_2)).sqrt() * self.i0 * self.tau_i
    }

    /// Exact time integral of I(t) over the real line.
    pub fn integrated_intensity(&self) -> f64 {
        (PI / (4.0 * LN_2)).sqrt() * self.i0 * self.tau_i
    }

    /// Half-width `multiplier * tau_i` of the integration window.
    pub fn half_width(&self, multiplier: f64) -> f64 {
        multiplier * self.tau_i
    }

    /// Integration window [t_c - w, t_c + w] with w = multiplier * tau_i.
    pub fn support_window(&self, multiplier: f64) -> (f64, f64) {
        let w = self.half_width(multiplier);
        (self.t_center - w, self.t_center + w)
    }

    /// Smallest half-width beyond which I(t) < threshold * I0.
    pub fn half_width_for_threshold(&self, threshold: f64) -> Result<f64> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidParameter(format!("threshold must lie in (0, 1), got {threshold}")));
        }
        Ok(self.tau_i * ((1.0 / threshold).ln() / (4.0 * LN_2)).sqrt())
    }
}
