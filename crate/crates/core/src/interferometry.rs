//! Delay scans, visibilities, revival estimates and population spectra.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::dynamics::PropagationSettings;
use crate::ensemble::{InitialDistribution, LevelTransfer, PulsePairPropagators};
use crate::error::{Error, Result};
use crate::pulse::PulseSpec;
use crate::rotor::MolecularParams;
use crate::units;

/// Uniform delay grid (atomic time units).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl DelayGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(start >= 0.0) || !(step > 0.0) || len == 0 {
            return Err(Error::InvalidParameter(format!(
                "delay grid needs start >= 0, step > 0 and at least one point (start {start}, step {step}, len {len})"
            )));
        }
        Ok(DelayGrid { start, step, len })
    }

    /// Grid from `start` to `stop` inclusive (the last point is the largest
    /// grid point not exceeding `stop` up to rounding).
    pub fn from_range(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(stop >= start) {
            return Err(Error::InvalidParameter(format!("delay grid stop {stop} precedes start {start}")));
        }
        let len = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Self::new(start, step, len)
    }

    pub fn from_fs(start_fs: f64, stop_fs: f64, step_fs: f64) -> Result<Self> {
        Self::from_range(units::fs_to_au(start_fs), units::fs_to_au(stop_fs), units::fs_to_au(step_fs))
    }

    /// 0.3 ps to 4.0 ps in 5 fs steps.
    pub fn default_scan() -> Self {
        Self::from_fs(300.0, 4000.0, 5.0).expect("default grid is valid")
    }

    pub fn at(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.at(i)).collect()
    }

    pub fn stop(&self) -> f64 {
        self.at(self.len - 1)
    }

    /// Length of the sampled record, len * step.
    pub fn span(&self) -> f64 {
        self.len as f64 * self.step
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterferogramMeta {
    pub params: MolecularParams,
    pub first: PulseSpec,
    pub second: PulseSpec,
    pub distribution: String,
    pub j_max: usize,
}

/// Final level populations versus pulse delay.
#[derive(Clone, Debug, PartialEq)]
pub struct Interferogram {
    pub delays: Vec<f64>,
    /// populations[i][j] at delays[i].
    pub populations: Vec<Vec<f64>>,
    pub meta: InterferogramMeta,
}

impl Interferogram {
    pub fn trace(&self, j: usize) -> Result<Vec<f64>> {
        if j > self.meta.j_max {
            return Err(Error::Analysis(format!("level j = {j} not in interferogram (j_max = {})", self.meta.j_max)));
        }
        Ok(self.populations.iter().map(|row| row[j]).collect())
    }

    /// Grid step, or an error if the delays are not uniformly spaced.
    pub fn uniform_step(&self) -> Result<f64> {
        uniform_step(&self.delays)
    }
}

fn uniform_step(delays: &[f64]) -> Result<f64> {
    if delays.len() < 2 {
        return Err(Error::Analysis("need at least two delays".into()));
    }
    let step = (delays[delays.len() - 1] - delays[0]) / (delays.len() - 1) as f64;
    if !(step > 0.0) {
        return Err(Error::Analysis("delays must be strictly increasing".into()));
    }
    for w in delays.windows(2) {
        if ((w[1] - w[0]) - step).abs() > 1e-6 * step {
            return Err(Error::Analysis("delay grid is not uniform".into()));
        }
    }
    Ok(step)
}

/// Level transfer matrices at every grid delay.
pub fn transfer_scan(props: &PulsePairPropagators, grid: &DelayGrid) -> Result<Vec<LevelTransfer>> {
    (0..grid.len)
        .into_par_iter()
        .map(|i| {
            let delay = grid.at(i);
            props
                .transfer(delay)
                .map_err(|e| Error::Delay { delay_fs: units::au_to_fs(delay), source: Box::new(e) })
        })
        .collect()
}

/// Delays below which two pulses count as overlapping, 1.5 (tau1 + tau2).
pub fn overlap_threshold(p1: &PulseSpec, p2: &PulseSpec) -> f64 {
    1.5 * (p1.tau_i + p2.tau_i)
}

/// Delay scan of the ensemble `dist` under the pulse pair (`p1`, `p2`).
#[allow(clippy::too_many_arguments)]
pub fn scan_interferogram(
    dist: &InitialDistribution,
    params: &MolecularParams,
    j_max: usize,
    p1: &PulseSpec,
    p2: &PulseSpec,
    grid: &DelayGrid,
    settings: &PropagationSettings,
    allow_overlap: bool,
) -> Result<Interferogram> {
    if !allow_overlap && grid.start < overlap_threshold(p1, p2) * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "delay grid starts at {:.1} fs, inside the pulse-overlap region (< {:.1} fs)",
            units::au_to_fs(grid.start),
            units::au_to_fs(overlap_threshold(p1, p2))
        )));
    }
    let props = PulsePairPropagators::new(params, j_max, dist.j_ini_max(), p1, p2, settings)?;
    interferogram_from(&props, dist, grid)
}

/// Interferogram for `dist` using precomputed propagators.
pub fn interferogram_from(
    props: &PulsePairPropagators,
    dist: &InitialDistribution,
    grid: &DelayGrid,
) -> Result<Interferogram> {
    let transfers = transfer_scan(props, grid)?;
    Ok(interferogram_from_transfers(props, dist.weights(), &dist.label, grid, &transfers))
}

pub fn interferogram_from_transfers(
    props: &PulsePairPropagators,
    weights: &[f64],
    label: &str,
    grid: &DelayGrid,
    transfers: &[LevelTransfer],
) -> Interferogram {
    Interferogram {
        delays: grid.values(),
        populations: transfers.iter().map(|t| t.apply(weights)).collect(),
        meta: InterferogramMeta {
            params: props.params,
            first: props.first,
            second: props.second,
            distribution: label.to_string(),
            j_max: props.j_max,
        },
    }
}

/// Michelson contrast (max - min) / (max + min) of a population trace.
pub fn visibility_of(trace: &[f64]) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::Analysis("empty visibility window".into()));
    }
    let max = trace.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = trace.iter().copied().fold(f64::INFINITY, f64::min);
    if max + min <= 0.0 {
        return Ok(0.0);
    }
    Ok((max - min) / (max + min))
}

/// Visibility of level `j` over `window` (inclusive delay bounds, atomic
/// units) or the whole grid.
pub fn visibility(ig: &Interferogram, j: usize, window: Option<(f64, f64)>) -> Result<f64> {
    let trace = ig.trace(j)?;
    let selected: Vec<f64> = match window {
        None => trace,
        Some((lo, hi)) => {
            let eps = 1e-9 * (hi - lo).abs().max(1.0);
            ig.delays
                .iter()
                .zip(trace)
                .filter(|(d, _)| **d >= lo - eps && **d <= hi + eps)
                .map(|(_, p)| p)
                .collect()
        }
    };
    visibility_of(&selected)
}

/// S_j(E) = sqrt(|DFT f_j|) on the non-negative energy axis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumResult {
    pub j: usize,
    /// Energies (hartree) of the bins, spaced by 2 pi / (len * step).
    pub energies: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl SpectrumResult {
    pub fn resolution(&self) -> f64 {
        self.energies.get(1).copied().unwrap_or(0.0)
    }

    /// Indices of local maxima (the first bin counts if it exceeds its neighbour).
    /// Local maxima, ignoring bins below 1e-6 of the largest amplitude.
    pub fn peaks(&self) -> Vec<usize> {
        self.peaks_above(1e-6)
    }

    /// Local maxima whose amplitude exceeds `rel` times the largest one.
    pub fn peaks_above(&self, rel: f64) -> Vec<usize> {
        let a = &self.amplitudes;
        let floor = rel * a.iter().cloned().fold(0.0, f64::max);
        (0..a.len())
            .filter(|&i| {
                if a[i] <= floor {
                    return false;
                }
                let left = if i > 0 { a[i - 1] } else { f64::NEG_INFINITY };
                let right = if i + 1 < a.len() { a[i + 1] } else { f64::NEG_INFINITY };
                a[i] > left && a[i] >= right
            })
            .collect()
    }

    /// Bin nearest to `energy`.
    pub fn bin_of(&self, energy: f64) -> usize {
        ((energy / self.resolution()).round().max(0.0) as usize).min(self.energies.len() - 1)
    }
}

pub fn spectrum(ig: &Interferogram, j: usize) -> Result<SpectrumResult> {
    let step = ig.uniform_step()?;
    let trace = ig.trace(j)?;
    Ok(spectrum_of(&trace, step, j))
}

pub fn spectrum_of(trace: &[f64], step: f64, j: usize) -> SpectrumResult {
    let n = trace.len();
    let mut buf: Vec<Complex<f64>> = trace.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bins = n / 2 + 1;
    let d_omega = 2.0 * PI / (n as f64 * step);
    SpectrumResult {
        j,
        energies: (0..bins).map(|k| k as f64 * d_omega).collect(),
        amplitudes: buf.iter().take(bins).map(|z| z.norm().sqrt()).collect(),
    }
}

/// T_rev = pi / B.
pub fn revival_time(params: &MolecularParams) -> f64 {
    PI / params.b
}

/// Lag (in grid steps) within [min_lag, max_lag] minimising the mean squared
/// difference between f(tau) and f(tau + lag) for level `j`.
pub fn estimate_period(ig: &Interferogram, j: usize, min_lag: f64, max_lag: f64) -> Result<f64> {
    let step = ig.uniform_step()?;
    let f = ig.trace(j)?;
    let lo = (min_lag / step).ceil().max(1.0) as usize;
    let hi = ((max_lag / step).floor() as usize).min(f.len().saturating_sub(2));
    if lo > hi {
        return Err(Error::Analysis("lag range does not fit in the delay grid".into()));
    }
    let (best, _) = (lo..=hi)
        .map(|lag| {
            let n = f.len() - lag;
            let msd = (0..n).map(|i| (f[i + lag] - f[i]).powi(2)).sum::<f64>() / n as f64;
            (lag, msd)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    Ok(best as f64 * step)
}
