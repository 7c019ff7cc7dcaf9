//! Physical constants and unit conversions.
//!
//! Everything inside the crate works in atomic units (hbar = m_e = e = 4 pi eps0 = 1).
//! Laboratory units (cm^-1, fs, ps, W/cm^2, a0^3, cm^3) are converted at the
//! boundary through [`Quantity`] or the free functions below.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT_SI: f64 = 299_792_458.0;
/// Speed of light in cm/fs.
pub const SPEED_OF_LIGHT_CM_PER_FS: f64 = SPEED_OF_LIGHT_SI * 1e2 * 1e-15;
/// Vacuum permittivity, F/m (CODATA 2018).
pub const VACUUM_PERMITTIVITY_SI: f64 = 8.854_187_812_8e-12;
/// Bohr radius, m (CODATA 2018).
pub const BOHR_RADIUS_SI: f64 = 5.291_772_109_03e-11;
/// Hartree energy expressed as a wavenumber, cm^-1 (CODATA 2018).
pub const HARTREE_IN_WAVENUMBERS: f64 = 219_474.631_363_20;
/// Atomic unit of time, fs (CODATA 2018).
pub const AU_TIME_IN_FS: f64 = 2.418_884_326_585_7e-2;
/// Atomic unit of electric field, V/m (CODATA 2018).
pub const AU_FIELD_SI: f64 = 5.142_206_747_63e11;
/// Speed of light in atomic units (inverse fine-structure constant).
pub const SPEED_OF_LIGHT_AU: f64 = 137.035_999_084;
/// Boltzmann constant expressed as wavenumber per kelvin, cm^-1/K.
pub const BOLTZMANN_WAVENUMBERS_PER_K: f64 = 0.695_034_800_0;

/// Atomic unit of intensity in W/cm^2: the cycle-averaged intensity
/// eps0 c E^2 / 2 of a field with amplitude one atomic unit.
pub fn au_intensity_w_per_cm2() -> f64 {
    0.5 * VACUUM_PERMITTIVITY_SI * SPEED_OF_LIGHT_SI * AU_FIELD_SI * AU_FIELD_SI * 1e-4
}

/// Volume of one cubic Bohr radius in cm^3.
pub fn bohr_cubed_in_cm3() -> f64 {
    (BOHR_RADIUS_SI * 1e2).powi(3)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dimension {
    Energy,
    Time,
    Intensity,
    Polarizability,
}

/// Unit tags accepted at the library boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Unit {
    Wavenumber,
    Hartree,
    Femtosecond,
    Picosecond,
    AuTime,
    WattPerCm2,
    AuIntensity,
    BohrCubed,
    Cm3,
}

impl Unit {
    pub fn dimension(self) -> Dimension {
        match self {
            Unit::Wavenumber | Unit::Hartree => Dimension::Energy,
            Unit::Femtosecond | Unit::Picosecond | Unit::AuTime => Dimension::Time,
            Unit::WattPerCm2 | Unit::AuIntensity => Dimension::Intensity,
            Unit::BohrCubed | Unit::Cm3 => Dimension::Polarizability,
        }
    }

    /// Multiplier taking a value in this unit to atomic units.
    fn to_au_factor(self) -> f64 {
        match self {
            Unit::Wavenumber => 1.0 / HARTREE_IN_WAVENUMBERS,
            Unit::Hartree => 1.0,
            Unit::Femtosecond => 1.0 / AU_TIME_IN_FS,
            Unit::Picosecond => 1e3 / AU_TIME_IN_FS,
            Unit::AuTime => 1.0,
            Unit::WattPerCm2 => 1.0 / au_intensity_w_per_cm2(),
            Unit::AuIntensity => 1.0,
            Unit::BohrCubed => 1.0,
            Unit::Cm3 => 1.0 / bohr_cubed_in_cm3(),
        }
    }

    pub fn parse(tag: &str) -> Result<Unit> {
        let unit = match tag.trim() {
            "cm-1" | "cm^-1" | "1/cm" => Unit::Wavenumber,
            "hartree" | "Eh" => Unit::Hartree,
            "fs" => Unit::Femtosecond,
            "ps" => Unit::Picosecond,
            "au_time" => Unit::AuTime,
            "W/cm2" | "W/cm^2" | "Wcm2" => Unit::WattPerCm2,
            "au_intensity" => Unit::AuIntensity,
            "a0^3" | "a03" | "bohr^3" => Unit::BohrCubed,
            "cm3" | "cm^3" => Unit::Cm3,
            other => return Err(Error::UnknownUnit(other.to_string())),
        };
        Ok(unit)
    }

    fn canonical(dim: Dimension) -> Unit {
        match dim {
            Dimension::Energy => Unit::Hartree,
            Dimension::Time => Unit::AuTime,
            Dimension::Intensity => Unit::AuIntensity,
            Dimension::Polarizability => Unit::BohrCubed,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Unit::Wavenumber => "cm^-1",
            Unit::Hartree => "hartree",
            Unit::Femtosecond => "fs",
            Unit::Picosecond => "ps",
            Unit::AuTime => "au_time",
            Unit::WattPerCm2 => "W/cm^2",
            Unit::AuIntensity => "au_intensity",
            Unit::BohrCubed => "a0^3",
            Unit::Cm3 => "cm^3",
        };
        f.write_str(s)
    }
}

/// A value tagged with its unit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: Unit,
}

impl Quantity {
    /// Builds a quantity; durations and intensities must be non-negative.
    pub fn new(value: f64, unit: Unit) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite value {value} {unit}")));
        }
        match unit.dimension() {
            Dimension::Time | Dimension::Intensity if value < 0.0 => Err(Error::InvalidParameter(
                format!("negative {:?}: {value} {unit}", unit.dimension()),
            )),
            _ => Ok(Quantity { value, unit }),
        }
    }

    pub fn dimension(&self) -> Dimension {
        self.unit.dimension()
    }

    /// Value in atomic units.
    pub fn to_canonical(&self) -> f64 {
        self.value * self.unit.to_au_factor()
    }

    /// Re-expresses the quantity in `unit`; the dimensions must agree.
    pub fn convert(&self, unit: Unit) -> Result<Quantity> {
        if unit.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch { from: self.unit, to: unit });
        }
        Ok(Quantity { value: self.to_canonical() / unit.to_au_factor(), unit })
    }

    pub fn canonical(&self) -> Quantity {
        Quantity { value: self.to_canonical(), unit: Unit::canonical(self.dimension()) }
    }
}

pub fn wavenumber_to_hartree(k: f64) -> f64 {
    k / HARTREE_IN_WAVENUMBERS
}

pub fn hartree_to_wavenumber(e: f64) -> f64 {
    e * HARTREE_IN_WAVENUMBERS
}

pub fn fs_to_au(t: f64) -> f64 {
    t / AU_TIME_IN_FS
}

pub fn au_to_fs(t: f64) -> f64 {
    t * AU_TIME_IN_FS
}

pub fn ps_to_au(t: f64) -> f64 {
    t * 1e3 / AU_TIME_IN_FS
}

pub fn w_per_cm2_to_au(i: f64) -> f64 {
    i / au_intensity_w_per_cm2()
}

pub fn au_to_w_per_cm2(i: f64) -> f64 {
    i * au_intensity_w_per_cm2()
}

/// Angular frequency 2 pi c b, in rad/fs, of a wavenumber `b` given in cm^-1.
pub fn wavenumber_to_angular_frequency(b: f64) -> Result<f64> {
    if !(b >= 0.0) {
        return Err(Error::InvalidParameter(format!("wavenumber must be non-negative, got {b}")));
    }
    Ok(2.0 * PI * SPEED_OF_LIGHT_CM_PER_FS * b)
}

/// Peak angular-coupling energy I/(2 eps0 c) * dalpha, in hartree.
///
/// `i0` is in atomic intensity units and `dalpha` is a polarizability volume
/// in a0^3. With the atomic intensity unit defined through E^2 = I, the
/// prefactor reduces to E^2/4.
pub fn interaction_strength(i0: f64, dalpha: f64) -> Result<f64> {
    if !(i0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("intensity must be non-negative, got {i0}")));
    }
    Ok(0.25 * i0 * dalpha)
}

/// Polarizability volume in a0^3 from either a0^3 or cm^3 input.
pub fn polarizability_to_canonical(q: Quantity) -> Result<f64> {
    match q.unit {
        Unit::BohrCubed | Unit::Cm3 => Ok(q.to_canonical()),
        other => Err(Error::DimensionMismatch { from: other, to: Unit::BohrCubed }),
    }
}
