//! Single-pulse population maps over peak intensity and duration.

use rayon::prelude::*;

use crate::dynamics::PropagationSettings;
use crate::ensemble::{single_pulse_transfer, InitialDistribution};
use crate::error::{Error, Result};
use crate::pulse::PulseSpec;
use crate::rotor::MolecularParams;

/// Highest peak intensity (W/cm^2) for which j_max = 20 is converged.
pub const MAX_VALIDATED_INTENSITY_W_CM2: f64 = 4e13;

#[derive(Clone, Debug, PartialEq)]
pub struct LandscapePoint {
    pub i0_w_cm2: f64,
    pub tau_fs: f64,
    /// Final level populations, indexed by j.
    pub populations: Vec<f64>,
}

pub fn check_intensity(i0_w_cm2: f64) -> Result<()> {
    if i0_w_cm2 > MAX_VALIDATED_INTENSITY_W_CM2 {
        return Err(Error::InvalidParameter(format!(
            "peak intensity {i0_w_cm2:e} W/cm^2 exceeds the validated range ({MAX_VALIDATED_INTENSITY_W_CM2:e} W/cm^2)"
        )));
    }
    Ok(())
}

/// Final populations after one pulse, for every (I0, tau) pair; ordered by
/// intensity, then duration.
pub fn pulse_landscape(
    dist: &InitialDistribution,
    params: &MolecularParams,
    j_max: usize,
    intensities_w_cm2: &[f64],
    durations_fs: &[f64],
    settings: &PropagationSettings,
) -> Result<Vec<LandscapePoint>> {
    for &i in intensities_w_cm2 {
        check_intensity(i)?;
    }
    let grid: Vec<(f64, f64)> = intensities_w_cm2
        .iter()
        .flat_map(|&i| durations_fs.iter().map(move |&t| (i, t)))
        .collect();
    grid.into_par_iter()
        .map(|(i0, tau)| {
            let pulse = PulseSpec::from_lab(i0, tau)?;
            let t = single_pulse_transfer(params, j_max, dist.j_ini_max(), &pulse, settings)?;
            Ok(LandscapePoint { i0_w_cm2: i0, tau_fs: tau, populations: t.apply(dist.weights()) })
        })
        .collect()
}

fn pure_populations(params: &MolecularParams, j_max: usize, i0: f64, tau_fs: f64, settings: &PropagationSettings) -> Result<Vec<f64>> {
    let pulse = PulseSpec::from_lab(i0, tau_fs)?;
    Ok(single_pulse_transfer(params, j_max, 0, &pulse, settings)?.apply(&[1.0]))
}

/// Lowest intensity in [lo, hi] (W/cm^2) at which levels `ja` and `jb` carry
/// equal population after a single pulse acting on j = 0. Returns the
/// intensity and the populations there.
#[allow(clippy::too_many_arguments)]
pub fn equal_population_intensity(
    params: &MolecularParams,
    j_max: usize,
    tau_fs: f64,
    ja: usize,
    jb: usize,
    lo: f64,
    hi: f64,
    settings: &PropagationSettings,
) -> Result<(f64, Vec<f64>)> {
    check_intensity(hi)?;
    let diff = |i: f64| -> Result<(f64, Vec<f64>)> {
        let p = pure_populations(params, j_max, i, tau_fs, settings)?;
        Ok((p[ja] - p[jb], p))
    };
    let coarse = 40;
    let mut a = lo;
    let (mut fa, _) = diff(a)?;
    let mut bracket = None;
    for k in 1..=coarse {
        let b = lo + (hi - lo) * k as f64 / coarse as f64;
        let (fb, _) = diff(b)?;
        if fa.signum() != fb.signum() {
            bracket = Some((a, fa, b));
            break;
        }
        a = b;
        fa = fb;
    }
    let (mut a, mut fa, mut b) =
        bracket.ok_or_else(|| Error::Analysis(format!("no crossing of j={ja} and j={jb} in [{lo:e}, {hi:e}]")))?;
    while (b - a) > 1e-6 * b {
        let mid = 0.5 * (a + b);
        let (fm, _) = diff(mid)?;
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    let mid = 0.5 * (a + b);
    let (_, pops) = diff(mid)?;
    Ok((mid, pops))
}
