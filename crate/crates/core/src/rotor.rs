//! Rotational basis bookkeeping, field-free energies and the cos^2(theta)
//! coupling matrix for a fixed-m block.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::units;

/// Basis truncation that keeps the pulse dynamics converged up to 4e13 W/cm^2.
pub const DEFAULT_J_MAX: usize = 20;

/// Effective-rotor parameters, all in atomic units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MolecularParams {
    /// Rotational constant B (hartree).
    pub b: f64,
    /// Polarizability anisotropy (a0^3).
    pub dalpha: f64,
    /// Perpendicular polarizability (a0^3).
    pub alpha_perp: f64,
}

impl MolecularParams {
    pub fn new(b: f64, dalpha: f64, alpha_perp: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("rotational constant must be positive, got {b}")));
        }
        if !dalpha.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite dalpha {dalpha}")));
        }
        if !(alpha_perp >= 0.0) || !alpha_perp.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "perpendicular polarizability must be non-negative, got {alpha_perp}"
            )));
        }
        Ok(MolecularParams { b, dalpha, alpha_perp })
    }

    /// Builds parameters from B in cm^-1 and polarizabilities in a0^3.
    pub fn from_lab(b_cm: f64, dalpha_a03: f64, alpha_perp_a03: f64) -> Result<Self> {
        Self::new(units::wavenumber_to_hartree(b_cm), dalpha_a03, alpha_perp_a03)
    }

    /// MgH+ in its ground vibrational level: B = 6.3685 cm^-1,
    /// dalpha = 16.20 a0^3, alpha_perp = 2 dalpha.
    pub fn mgh_plus() -> Self {
        Self::from_lab(6.3685, 16.20, 32.40).expect("reference parameters are valid")
    }

    pub fn with_dalpha(self, dalpha: f64) -> Self {
        MolecularParams { dalpha, ..self }
    }

    pub fn with_alpha_perp(self, alpha_perp: f64) -> Self {
        MolecularParams { alpha_perp, ..self }
    }

    /// Rotational constant in cm^-1.
    pub fn b_wavenumber(&self) -> f64 {
        units::hartree_to_wavenumber(self.b)
    }
}

/// E_j = B j (j + 1).
pub fn rotational_energy(j: i64, params: &MolecularParams) -> Result<f64> {
    if j < 0 {
        return Err(Error::InvalidParameter(format!("rotational quantum number must be >= 0, got {j}")));
    }
    let j = j as f64;
    Ok(params.b * j * (j + 1.0))
}

/// The block { |j, m> : |m| <= j <= j_max }.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisSpec {
    pub j_max: usize,
    pub m: i32,
}

impl BasisSpec {
    pub fn new(j_max: usize, m: i32) -> Result<Self> {
        if (m.unsigned_abs() as usize) > j_max {
            return Err(Error::InvalidParameter(format!("|m| = {} exceeds j_max = {j_max}", m.abs())));
        }
        Ok(BasisSpec { j_max, m })
    }

    pub fn j_min(&self) -> usize {
        self.m.unsigned_abs() as usize
    }

    pub fn dim(&self) -> usize {
        self.j_max - self.j_min() + 1
    }

    pub fn j_values(&self) -> impl Iterator<Item = usize> {
        self.j_min()..=self.j_max
    }

    pub fn index_of(&self, j: usize) -> Option<usize> {
        (j >= self.j_min() && j <= self.j_max).then(|| j - self.j_min())
    }

    pub fn j_at(&self, index: usize) -> usize {
        self.j_min() + index
    }

    pub fn energies(&self, params: &MolecularParams) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.j_values().map(|j| params.b * (j * (j + 1)) as f64))
    }
}

/// <j, m| cos^2 theta |j, m>.
pub fn cos2_diagonal(j: usize, m: i32) -> f64 {
    let j = j as f64;
    let m2 = (m as f64).powi(2);
    (2.0 * j * (j + 1.0) - 2.0 * m2 - 1.0) / ((2.0 * j - 1.0) * (2.0 * j + 3.0))
}

/// <j + 2, m| cos^2 theta |j, m>.
pub fn cos2_offdiagonal(j: usize, m: i32) -> f64 {
    let j = j as f64;
    let m2 = (m as f64).powi(2);
    let num = ((j + 1.0).powi(2) - m2) * ((j + 2.0).powi(2) - m2);
    let den = (2.0 * j + 1.0) * (2.0 * j + 3.0).powi(2) * (2.0 * j + 5.0);
    (num / den).sqrt()
}

/// Matrix of cos^2 theta over the block; only Delta j = 0, +-2 are non-zero.
pub fn cos2_matrix(spec: &BasisSpec) -> DMatrix<f64> {
    let n = spec.dim();
    let mut mat = DMatrix::zeros(n, n);
    for (a, j) in spec.j_values().enumerate() {
        mat[(a, a)] = cos2_diagonal(j, spec.m);
        if a + 2 < n {
            let v = cos2_offdiagonal(j, spec.m);
            mat[(a, a + 2)] = v;
            mat[(a + 2, a)] = v;
        }
    }
    mat
}

/// Diagonal of exp(-i E_j t).
pub fn free_phase_vector(spec: &BasisSpec, params: &MolecularParams, t: f64) -> DVector<Complex64> {
    spec.energies(params).map(|e| Complex64::from_polar(1.0, -e * t))
}
