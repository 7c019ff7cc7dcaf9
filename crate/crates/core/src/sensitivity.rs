//! Polarizability-anisotropy scans with Monte-Carlo error bands.
//!
//! Populations are linear in the initial level weights, so each sample only
//! reweights level transfer matrices computed once per dalpha.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dynamics::PropagationSettings;
use crate::ensemble::{InitialDistribution, LevelTransfer, PulsePairPropagators};
use crate::error::{Error, Result};
use crate::interferometry::{interferogram_from_transfers, transfer_scan, DelayGrid, Interferogram};
use crate::pulse::PulseSpec;
use crate::rotor::MolecularParams;
use crate::units;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseModel {
    Gaussian,
    /// Uniform with the same standard deviation as the Gaussian.
    Uniform,
}

impl NoiseModel {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            NoiseModel::Gaussian => rng.sample(StandardNormal),
            NoiseModel::Uniform => rng.random_range(-3f64.sqrt()..3f64.sqrt()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityConfig {
    /// Candidate anisotropies (a0^3).
    pub dalpha_values: Vec<f64>,
    /// Peak intensity of the second pulse relative to the first.
    pub intensity_ratio: f64,
    /// Relative standard deviation applied to each initial weight a_j.
    pub init_uncertainty: f64,
    /// Relative standard deviation of the measured population.
    pub meas_uncertainty: f64,
    pub n_samples: usize,
    pub rng_seed: u64,
    pub target_j: usize,
    pub grid: DelayGrid,
    pub noise: NoiseModel,
    /// Error bars are mean +- band_k * sample standard deviation.
    pub band_k: f64,
    /// Shortest delay interval (atomic units) that counts as separable.
    pub min_separable: f64,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            dalpha_values: vec![16.20, 17.01, 15.39],
            intensity_ratio: 1.6,
            init_uncertainty: 0.02,
            meas_uncertainty: 0.02,
            n_samples: 1000,
            rng_seed: 1,
            target_j: 0,
            grid: DelayGrid::default_scan(),
            noise: NoiseModel::Gaussian,
            band_k: 1.0,
            min_separable: units::fs_to_au(50.0),
        }
    }
}

impl SensitivityConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.dalpha_values.is_empty() {
            return bad("dalpha_values must not be empty".into());
        }
        if !(self.intensity_ratio >= 0.0) {
            return bad(format!("intensity_ratio must be >= 0, got {}", self.intensity_ratio));
        }
        if !(self.init_uncertainty >= 0.0) || !(self.meas_uncertainty >= 0.0) {
            return bad("uncertainties must be >= 0".into());
        }
        if self.n_samples == 0 {
            return bad("n_samples must be >= 1".into());
        }
        if !(self.band_k >= 0.0) {
            return bad(format!("band_k must be >= 0, got {}", self.band_k));
        }
        if !(self.min_separable >= 0.0) {
            return bad("minimum separable length must be >= 0".into());
        }
        Ok(())
    }
}

/// One member of a dalpha scan.
pub struct DalphaMember {
    pub dalpha: f64,
    pub interferogram: Interferogram,
    pub transfers: Vec<LevelTransfer>,
    weights: Vec<f64>,
}

/// Interferograms for every dalpha in `cfg`, the second pulse scaled by
/// `cfg.intensity_ratio`.
pub fn scan_dalpha(
    cfg: &SensitivityConfig,
    params: &MolecularParams,
    j_max: usize,
    first: &PulseSpec,
    dist: &InitialDistribution,
    settings: &PropagationSettings,
) -> Result<Vec<DalphaMember>> {
    cfg.validate()?;
    if cfg.target_j > j_max {
        return Err(Error::InvalidParameter(format!("target level {} exceeds j_max = {j_max}", cfg.target_j)));
    }
    let second = first.scaled(cfg.intensity_ratio);
    cfg.dalpha_values
        .iter()
        .map(|&dalpha| {
            let wrap = |e| Error::Dalpha { dalpha, source: Box::new(e) };
            let p = params.with_dalpha(dalpha);
            let props =
                PulsePairPropagators::new(&p, j_max, dist.j_ini_max(), first, &second, settings).map_err(wrap)?;
            let transfers = transfer_scan(&props, &cfg.grid).map_err(wrap)?;
            let interferogram = interferogram_from_transfers(&props, dist.weights(), &dist.label, &cfg.grid, &transfers);
            Ok(DalphaMember { dalpha, interferogram, transfers, weights: dist.weights().to_vec() })
        })
        .collect()
}

/// Mean curve and error band of the measured population for one dalpha.
#[derive(Clone, Debug, PartialEq)]
pub struct BandCurve {
    pub dalpha: f64,
    /// Noise-free population of the target level.
    pub nominal: Vec<f64>,
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityReport {
    pub delays: Vec<f64>,
    pub target_j: usize,
    pub curves: Vec<BandCurve>,
}

impl SensitivityReport {
    pub fn curve(&self, dalpha: f64) -> Result<&BandCurve> {
        self.curves
            .iter()
            .find(|c| (c.dalpha - dalpha).abs() <= 1e-9 * dalpha.abs().max(1.0))
            .ok_or_else(|| Error::Analysis(format!("dalpha = {dalpha} not in report")))
    }
}

fn band_curve(member: &DalphaMember, cfg: &SensitivityConfig) -> BandCurve {
    let n_delay = member.transfers.len();
    let n_levels = member.weights.len();
    let target = cfg.target_j;
    let nominal: Vec<f64> = member.transfers.iter().map(|t| t.apply_to(target, &member.weights)).collect();

    // Welford accumulation keeps zero-noise bands exactly zero.
    let mut mean = vec![0.0; n_delay];
    let mut m2 = vec![0.0; n_delay];
    let mut perturbed = vec![0.0; n_levels];
    for sample in 0..cfg.n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(sample as u64);
        for (p, &a) in perturbed.iter_mut().zip(member.weights.iter()) {
            let z = cfg.noise.draw(&mut rng);
            *p = (a * (1.0 + cfg.init_uncertainty * z)).max(0.0);
        }
        let total: f64 = perturbed.iter().sum();
        if total > 0.0 {
            perturbed.iter_mut().for_each(|p| *p /= total);
        } else {
            perturbed.copy_from_slice(&member.weights);
        }
        let count = (sample + 1) as f64;
        for (i, t) in member.transfers.iter().enumerate() {
            let rho = t.apply_to(target, &perturbed);
            let z = cfg.noise.draw(&mut rng);
            let measured = (rho * (1.0 + cfg.meas_uncertainty * z)).clamp(0.0, 1.0);
            let delta = measured - mean[i];
            mean[i] += delta / count;
            m2[i] += delta * (measured - mean[i]);
        }
    }
    let mut lo = Vec::with_capacity(n_delay);
    let mut hi = Vec::with_capacity(n_delay);
    for i in 0..n_delay {
        let var = if cfg.n_samples > 1 { m2[i].max(0.0) / (cfg.n_samples - 1) as f64 } else { 0.0 };
        let half = cfg.band_k * var.sqrt();
        lo.push(mean[i] - half);
        hi.push(mean[i] + half);
    }
    BandCurve { dalpha: member.dalpha, nominal, mean, lo, hi }
}

/// Monte-Carlo bands from an existing scan.
pub fn bands_from_scan(members: &[DalphaMember], cfg: &SensitivityConfig) -> Result<SensitivityReport> {
    cfg.validate()?;
    let delays = members.first().map(|m| m.interferogram.delays.clone()).unwrap_or_default();
    let curves = members.par_iter().map(|m| band_curve(m, cfg)).collect();
    Ok(SensitivityReport { delays, target_j: cfg.target_j, curves })
}

/// For each sample the initial weights receive relative noise (clamped at 0,
/// renormalised) and the measured target population receives relative noise
/// (clamped to [0, 1]). Sample streams depend only on (seed, sample index).
pub fn monte_carlo_bands(
    cfg: &SensitivityConfig,
    params: &MolecularParams,
    j_max: usize,
    first: &PulseSpec,
    dist: &InitialDistribution,
    settings: &PropagationSettings,
) -> Result<SensitivityReport> {
    let members = scan_dalpha(cfg, params, j_max, first, dist, settings)?;
    bands_from_scan(&members, cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Separability {
    pub separable: bool,
    /// Delay intervals (atomic units) over which the two bands are disjoint.
    pub intervals: Vec<(f64, f64)>,
}

/// Delay intervals inside `window` where the bands of `da1` and `da2` do not
/// overlap, keeping those at least `min_len` long.
pub fn separability(
    report: &SensitivityReport,
    da1: f64,
    da2: f64,
    window: Option<(f64, f64)>,
    min_len: f64,
) -> Result<Separability> {
    let a = report.curve(da1)?;
    let b = report.curve(da2)?;
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let eps = 1e-9 * report.delays.last().copied().unwrap_or(1.0).abs().max(1.0);
    let disjoint: Vec<bool> = (0..report.delays.len())
        .map(|i| {
            let d = report.delays[i];
            d >= lo - eps && d <= hi + eps && (a.hi[i] < b.lo[i] || b.hi[i] < a.lo[i])
        })
        .collect();
    let mut intervals = Vec::new();
    let mut i = 0;
    while i < disjoint.len() {
        if disjoint[i] {
            let start = i;
            while i + 1 < disjoint.len() && disjoint[i + 1] {
                i += 1;
            }
            let (t0, t1) = (report.delays[start], report.delays[i]);
            if t1 - t0 >= min_len - eps {
                intervals.push((t0, t1));
            }
        }
        i += 1;
    }
    Ok(Separability { separable: !intervals.is_empty(), intervals })
}

/// Largest |f_a(tau) - f_b(tau)| of level `j` over all pairs of interferograms.
pub fn max_pairwise_separation(family: &[&Interferogram], j: usize) -> Result<f64> {
    let traces = family.iter().map(|ig| ig.trace(j)).collect::<Result<Vec<_>>>()?;
    let mut best: f64 = 0.0;
    for (ia, a) in traces.iter().enumerate() {
        for b in traces.iter().skip(ia + 1) {
            for (x, y) in a.iter().zip(b.iter()) {
                best = best.max((x - y).abs());
            }
        }
    }
    Ok(best)
}
