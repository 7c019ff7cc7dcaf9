//! Initial-state ensembles and incoherent averaging.
//!
//! A distribution stores the total population a_j of each rotational level;
//! each of the 2j + 1 magnetic sublevels carries a_j / (2j + 1). Propagated
//! populations are summed per m block, and blocks with m and -m are identical
//! so only m >= 0 is propagated (weight 2 for m > 0).

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::{
    sequence_propagator, truncation_leak, BlockHamiltonian, PropagationSettings, SequenceTiming,
    TRUNCATION_WARN_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::pulse::PulseSpec;
use crate::rotor::{BasisSpec, MolecularParams};
use crate::units;

/// Highest initially populated level kept in ensemble sums.
pub const DEFAULT_J_INI_MAX: usize = 6;

/// Level weights a_j, normalised to one.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialDistribution {
    weights: Vec<f64>,
    pub label: String,
}

impl InitialDistribution {
    /// Normalises `weights` (indexed by j). Trailing zeros are dropped.
    pub fn new(mut weights: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("level weights must be finite and non-negative".into()));
        }
        while weights.last() == Some(&0.0) {
            weights.pop();
        }
        let total: f64 = weights.iter().sum();
        if weights.is_empty() || !(total > 0.0) {
            return Err(Error::InvalidParameter("distribution has no population".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(InitialDistribution { weights, label: label.into() })
    }

    /// All population in j = 0.
    pub fn pure_ground() -> Self {
        InitialDistribution { weights: vec![1.0], label: "pure".into() }
    }

    /// Boltzmann level populations (2j + 1) exp(-E_j / kT) / Z over j <= j_cut.
    /// Trailing levels below 1e-15 of the largest weight are dropped so that
    /// no time is spent propagating them.
    pub fn thermal(temperature: f64, params: &MolecularParams, j_cut: usize) -> Result<Self> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::InvalidParameter(format!("temperature must be positive, got {temperature}")));
        }
        let kt = units::BOLTZMANN_WAVENUMBERS_PER_K * temperature / units::HARTREE_IN_WAVENUMBERS;
        let mut weights = (0..=j_cut)
            .map(|j| {
                let e = params.b * (j * (j + 1)) as f64;
                (2 * j + 1) as f64 * (-e / kt).exp()
            })
            .collect::<Vec<f64>>();
        let largest = weights.iter().cloned().fold(0.0, f64::max);
        let keep = weights.iter().rposition(|&w| w >= 1e-15 * largest).map_or(0, |k| k + 1);
        weights.truncate(keep);
        Self::new(weights, format!("thermal:{temperature}"))
    }

    /// Stand-in for a rotationally cooled room-temperature ensemble with
    /// ground-state population 0.38.
    pub fn surrogate_cooled() -> Self {
        Self::new(vec![0.38, 0.30, 0.18, 0.09, 0.03, 0.015, 0.005], "surrogate")
            .expect("surrogate weights are valid")
    }

    /// Parses "j weight" rows; '#' starts a comment line. Levels above `j_cap`
    /// are rejected.
    pub fn parse(text: &str, j_cap: usize) -> Result<Self> {
        let mut weights: Vec<f64> = Vec::new();
        let mut rows = 0;
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Distribution { line, msg: format!("expected `j weight`, got `{content}`") });
            }
            let j: usize = fields[0]
                .parse()
                .map_err(|_| Error::Distribution { line, msg: format!("invalid level `{}`", fields[0]) })?;
            let w: f64 = fields[1]
                .parse()
                .map_err(|_| Error::Distribution { line, msg: format!("invalid weight `{}`", fields[1]) })?;
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Distribution { line, msg: format!("weight must be non-negative, got {w}") });
            }
            if j > j_cap {
                return Err(Error::Distribution { line, msg: format!("level j = {j} exceeds j_ini_max = {j_cap}") });
            }
            if weights.len() <= j {
                weights.resize(j + 1, 0.0);
            }
            weights[j] += w;
            rows += 1;
        }
        if rows == 0 {
            return Err(Error::Distribution { line: 0, msg: "no data rows".into() });
        }
        Self::new(weights, "file").map_err(|e| Error::Distribution { line: 0, msg: e.to_string() })
    }

    pub fn load(path: &Path, j_cap: usize) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Distribution {
            line: 0,
            msg: format!("{}: {e}", path.display()),
        })?;
        let mut dist = Self::parse(&text, j_cap)?;
        dist.label = format!("file:{}", path.display());
        Ok(dist)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights.get(j).copied().unwrap_or(0.0)
    }

    /// Highest level with non-zero weight.
    pub fn j_ini_max(&self) -> usize {
        self.weights.len() - 1
    }

    /// Weight of a single |j, m> state.
    pub fn state_weight(&self, j: usize) -> f64 {
        self.weight(j) / (2 * j + 1) as f64
    }

    /// Renders the distribution in the file format accepted by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        let mut s = String::from("# j weight\n");
        for (j, w) in self.weights.iter().enumerate() {
            s.push_str(&format!("{j} {w:.15e}\n"));
        }
        s
    }
}

/// Level-to-level transition probabilities averaged over magnetic sublevels:
/// prob(j', j) = 1/(2j + 1) sum_m |<j', m| U |j, m>|^2.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelTransfer {
    pub j_max: usize,
    pub j_ini_max: usize,
    /// Row-major (j_max + 1) x (j_ini_max + 1).
    probs: Vec<f64>,
}

impl LevelTransfer {
    fn zeros(j_max: usize, j_ini_max: usize) -> Self {
        LevelTransfer { j_max, j_ini_max, probs: vec![0.0; (j_max + 1) * (j_ini_max + 1)] }
    }

    pub fn prob(&self, j_final: usize, j_initial: usize) -> f64 {
        self.probs[j_final * (self.j_ini_max + 1) + j_initial]
    }

    fn add_block(&mut self, spec: &BasisSpec, u: &DMatrix<Complex64>, multiplicity: f64) {
        for j in spec.j_values().take_while(|&j| j <= self.j_ini_max) {
            let col = spec.index_of(j).unwrap();
            let w = multiplicity / (2 * j + 1) as f64;
            for (row, jf) in spec.j_values().enumerate() {
                self.probs[jf * (self.j_ini_max + 1) + j] += w * u[(row, col)].norm_sqr();
            }
        }
    }

    /// Final level populations for initial level weights `a` (indexed by j).
    pub fn apply(&self, a: &[f64]) -> Vec<f64> {
        let n = self.j_ini_max + 1;
        (0..=self.j_max)
            .map(|jf| {
                a.iter().take(n).enumerate().map(|(j, w)| w * self.probs[jf * n + j]).sum()
            })
            .collect()
    }

    /// Population of a single final level.
    pub fn apply_to(&self, j_final: usize, a: &[f64]) -> f64 {
        let n = self.j_ini_max + 1;
        a.iter().take(n).enumerate().map(|(j, w)| w * self.probs[j_final * n + j]).sum()
    }
}

/// How magnetic sublevels are summed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MSummation {
    /// Propagate m >= 0 and count m > 0 twice.
    Folded,
    /// Propagate every m from -j to j.
    Full,
}

fn block_ms(j_ini_max: usize, mode: MSummation) -> Vec<(i32, f64)> {
    let top = j_ini_max as i32;
    match mode {
        MSummation::Folded => (0..=top).map(|m| (m, if m == 0 { 1.0 } else { 2.0 })).collect(),
        MSummation::Full => (-top..=top).map(|m| (m, 1.0)).collect(),
    }
}

fn with_provenance(m: i32, e: Error) -> Error {
    Error::InitialState { j: m.unsigned_abs() as usize, m, source: Box::new(e) }
}

/// A pulse sequence applied to the ensemble.
#[derive(Clone, Copy, Debug)]
pub enum Sequence {
    Single(PulseSpec),
    Pair { first: PulseSpec, delay: f64, second: PulseSpec },
}

/// Per-block propagators of two pulses, reused across delays.
pub struct PulsePairPropagators {
    pub params: MolecularParams,
    pub j_max: usize,
    pub j_ini_max: usize,
    pub first: PulseSpec,
    pub second: PulseSpec,
    pub settings: PropagationSettings,
    mode: MSummation,
    blocks: Vec<PairBlock>,
    warned: AtomicBool,
}

struct PairBlock {
    m: i32,
    multiplicity: f64,
    ham: BlockHamiltonian,
    first: DMatrix<Complex64>,
    second: DMatrix<Complex64>,
}

impl PulsePairPropagators {
    pub fn new(
        params: &MolecularParams,
        j_max: usize,
        j_ini_max: usize,
        first: &PulseSpec,
        second: &PulseSpec,
        settings: &PropagationSettings,
    ) -> Result<Self> {
        Self::with_summation(params, j_max, j_ini_max, first, second, settings, MSummation::Folded)
    }

    pub fn with_summation(
        params: &MolecularParams,
        j_max: usize,
        j_ini_max: usize,
        first: &PulseSpec,
        second: &PulseSpec,
        settings: &PropagationSettings,
        mode: MSummation,
    ) -> Result<Self> {
        settings.validate()?;
        if j_ini_max > j_max {
            return Err(Error::InvalidParameter(format!("j_ini_max = {j_ini_max} exceeds j_max = {j_max}")));
        }
        let mult = settings.window_multiplier;
        let blocks = block_ms(j_ini_max, mode)
            .into_par_iter()
            .map(|(m, multiplicity)| {
                let spec = BasisSpec::new(j_max, m)?;
                let ham = BlockHamiltonian::new(spec, params);
                let window = |p: &PulseSpec| {
                    let (a, b) = p.support_window(mult);
                    ham.propagator(p, a, b, settings)
                };
                let u1 = window(first).map_err(|e| with_provenance(m, e))?;
                let u2 = if second == first { u1.clone() } else { window(second).map_err(|e| with_provenance(m, e))? };
                Ok(PairBlock { m, multiplicity, ham, first: u1, second: u2 })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PulsePairPropagators {
            params: *params,
            j_max,
            j_ini_max,
            first: *first,
            second: *second,
            settings: *settings,
            mode,
            blocks,
            warned: AtomicBool::new(false),
        })
    }

    pub fn summation(&self) -> MSummation {
        self.mode
    }

    fn note_leak(&self, leak: f64) {
        if leak > TRUNCATION_WARN_THRESHOLD && !self.warned.swap(true, Ordering::Relaxed) {
            warn!("population {leak:.3e} reached the top of the basis (j_max = {}); increase j_max", self.j_max);
        }
    }

    fn columns(&self, spec: &BasisSpec) -> Vec<usize> {
        spec.j_values().take_while(|&j| j <= self.j_ini_max).map(|j| spec.index_of(j).unwrap()).collect()
    }

    /// Transfer matrix after the first pulse alone.
    pub fn first_pulse_transfer(&self) -> LevelTransfer {
        let mut out = LevelTransfer::zeros(self.j_max, self.j_ini_max);
        for b in &self.blocks {
            self.note_leak(truncation_leak(&b.first, self.columns(&b.ham.spec)));
            out.add_block(&b.ham.spec, &b.first, b.multiplicity);
        }
        out
    }

    /// Transfer matrix of the full sequence at peak-to-peak `delay`.
    pub fn transfer(&self, delay: f64) -> Result<LevelTransfer> {
        let timing = SequenceTiming::new(&self.first, delay, &self.second, self.settings.window_multiplier)?;
        let mut out = LevelTransfer::zeros(self.j_max, self.j_ini_max);
        for b in &self.blocks {
            let u = sequence_propagator(&b.ham, &b.first, &b.second, &timing, &self.settings)
                .map_err(|e| with_provenance(b.m, e))?;
            self.note_leak(truncation_leak(&u, self.columns(&b.ham.spec)));
            out.add_block(&b.ham.spec, &u, b.multiplicity);
        }
        Ok(out)
    }
}

/// Level transfer of a single pulse.
pub fn single_pulse_transfer(
    params: &MolecularParams,
    j_max: usize,
    j_ini_max: usize,
    pulse: &PulseSpec,
    settings: &PropagationSettings,
) -> Result<LevelTransfer> {
    if j_ini_max > j_max {
        return Err(Error::InvalidParameter(format!("j_ini_max = {j_ini_max} exceeds j_max = {j_max}")));
    }
    let (a, b) = pulse.support_window(settings.window_multiplier);
    let blocks = block_ms(j_ini_max, MSummation::Folded)
        .into_par_iter()
        .map(|(m, mult)| {
            let spec = BasisSpec::new(j_max, m)?;
            let ham = BlockHamiltonian::new(spec, params);
            let u = ham.propagator(pulse, a, b, settings).map_err(|e| with_provenance(m, e))?;
            Ok((spec, u, mult))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = LevelTransfer::zeros(j_max, j_ini_max);
    for (spec, u, mult) in &blocks {
        let cols: Vec<usize> = spec.j_values().take_while(|&j| j <= j_ini_max).map(|j| spec.index_of(j).unwrap()).collect();
        let leak = truncation_leak(u, cols);
        if leak > TRUNCATION_WARN_THRESHOLD {
            warn!("population {leak:.3e} reached the top of the basis (j_max = {j_max}); increase j_max");
        }
        out.add_block(spec, u, *mult);
    }
    Ok(out)
}

/// Final level populations rho_{j'j'} of the ensemble after `seq`.
pub fn ensemble_populations(
    dist: &InitialDistribution,
    params: &MolecularParams,
    j_max: usize,
    seq: &Sequence,
    settings: &PropagationSettings,
) -> Result<Vec<f64>> {
    let j_ini = dist.j_ini_max();
    let transfer = match seq {
        Sequence::Single(p) => single_pulse_transfer(params, j_max, j_ini, p, settings)?,
        Sequence::Pair { first, delay, second } => {
            PulsePairPropagators::new(params, j_max, j_ini, first, second, settings)?.transfer(*delay)?
        }
    };
    Ok(transfer.apply(dist.weights()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{apply_sequence, propagate_pulse, RotorState};
    use approx::assert_abs_diff_eq;

    #[test]
    fn pure_and_thermal() {
        let g = InitialDistribution::pure_ground();
        assert_eq!(g.weights(), &[1.0]);
        assert_eq!(g.state_weight(0), 1.0);

        let p = MolecularParams::mgh_plus();
        let cold = InitialDistribution::thermal(0.01, &p, 10).unwrap();
        assert_abs_diff_eq!(cold.weight(0), 1.0, epsilon = 1e-12);
        let t20 = InitialDistribution::thermal(20.0, &p, 10).unwrap();
        assert_abs_diff_eq!(t20.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let peak = (0..=10).max_by(|&a, &b| t20.weight(a).total_cmp(&t20.weight(b))).unwrap();
        for j in peak..t20.j_ini_max() {
            assert!(t20.weight(j + 1) < t20.weight(j));
        }
        // The negligible tail is dropped, not the populated levels.
        assert!(t20.j_ini_max() >= 6 && t20.j_ini_max() < 10);
        assert!(t20.weight(t20.j_ini_max()) < 1e-12);
        assert!(InitialDistribution::thermal(0.0, &p, 6).is_err());
        assert!(InitialDistribution::thermal(-3.0, &p, 6).is_err());
    }

    #[test]
    fn thermal_uses_boltzmann_statistics() {
        let p = MolecularParams::mgh_plus();
        let t = 20.0;
        let d = InitialDistribution::thermal(t, &p, 6).unwrap();
        // independent evaluation directly in cm^-1 and kelvin
        let b = 6.3685;
        let kt = 0.695_034_8 * t;
        let z: f64 = (0..=6).map(|j| (2 * j + 1) as f64 * (-(b * (j * (j + 1)) as f64) / kt).exp()).sum();
        assert_abs_diff_eq!(d.weight(0), 1.0 / z, epsilon = 1e-12);
        assert_abs_diff_eq!(d.weight(0), 0.3922, epsilon = 1e-4);
    }

    #[test]
    fn parse_distributions() {
        let single = InitialDistribution::parse("0 1.0\n", 6).unwrap();
        assert_eq!(single.weights(), InitialDistribution::pure_ground().weights());

        let text = "# surrogate\n0 0.38\n1 0.30\n2 0.18\n3 0.09\n4 0.03\n5 0.015\n6 0.005\n";
        let d = InitialDistribution::parse(text, 6).unwrap();
        assert_abs_diff_eq!(d.weight(0), 0.38 / 1.0, epsilon = 1e-12);
        assert_eq!(d.weights(), InitialDistribution::surrogate_cooled().weights());

        let doubled = InitialDistribution::parse("0 0.76\n1 0.60\n2 0.36\n3 0.18\n4 0.06\n5 0.03\n6 0.01\n", 6).unwrap();
        for (a, b) in doubled.weights().iter().zip(d.weights()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let round = InitialDistribution::parse(&d.to_text(), 6).unwrap();
        for (a, b) in round.weights().iter().zip(d.weights()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(InitialDistribution::parse("", 6), Err(Error::Distribution { .. })));
        assert!(matches!(InitialDistribution::parse("# only\n", 6), Err(Error::Distribution { .. })));
        assert!(matches!(InitialDistribution::parse("0 -1\n", 6), Err(Error::Distribution { line: 1, .. })));
        assert!(matches!(InitialDistribution::parse("0 1\n1 x\n", 6), Err(Error::Distribution { line: 2, .. })));
        assert!(matches!(InitialDistribution::parse("0 1 2\n", 6), Err(Error::Distribution { .. })));
        assert!(matches!(InitialDistribution::parse("7 1\n", 6), Err(Error::Distribution { .. })));
        assert!(matches!(InitialDistribution::parse("0 0\n", 6), Err(Error::Distribution { .. })));
    }

    fn settings() -> PropagationSettings {
        PropagationSettings::default()
    }

    #[test]
    fn pure_ground_equals_single_state_propagation() {
        let p = MolecularParams::mgh_plus();
        let pulse = PulseSpec::from_lab(0.7e13, 120.0).unwrap();
        let ens = ensemble_populations(
            &InitialDistribution::pure_ground(),
            &p,
            20,
            &Sequence::Single(pulse),
            &settings(),
        )
        .unwrap();
        let state = RotorState::basis(BasisSpec::new(20, 0).unwrap(), 0).unwrap();
        let direct = propagate_pulse(&state, &p, &pulse, &settings()).unwrap().populations();
        for (a, b) in ens.iter().zip(direct.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_intensity_leaves_levels_unchanged() {
        let p = MolecularParams::mgh_plus();
        let dark = PulseSpec::from_lab(0.0, 100.0).unwrap();
        let dist = InitialDistribution::thermal(20.0, &p, 6).unwrap();
        let seq = Sequence::Pair { first: dark, delay: units::fs_to_au(900.0), second: dark };
        let out = ensemble_populations(&dist, &p, 20, &seq, &settings()).unwrap();
        for j in 0..=20 {
            assert_abs_diff_eq!(out[j], dist.weight(j), epsilon = 1e-12);
        }
    }

    #[test]
    fn ensemble_is_linear_recomposition_and_trace_preserving() {
        let p = MolecularParams::mgh_plus();
        let pulse = PulseSpec::from_lab(0.55e13, 100.0).unwrap();
        let dist = InitialDistribution::surrogate_cooled();
        let delay = units::fs_to_au(1234.0);
        let seq = Sequence::Pair { first: pulse, delay, second: pulse.scaled(1.3) };
        let ens = ensemble_populations(&dist, &p, 20, &seq, &settings()).unwrap();
        assert_abs_diff_eq!(ens.iter().sum::<f64>(), 1.0, epsilon = 1e-8);

        let mut manual = vec![0.0; 21];
        for j in 0..=dist.j_ini_max() {
            for m in -(j as i32)..=(j as i32) {
                let state = RotorState::basis(BasisSpec::new(20, m).unwrap(), j).unwrap();
                let out = apply_sequence(&state, &p, &pulse, delay, &pulse.scaled(1.3), &settings()).unwrap();
                for (jf, pop) in out.populations().iter().enumerate() {
                    manual[jf] += dist.state_weight(j) * pop;
                }
            }
        }
        for (a, b) in ens.iter().zip(manual.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn folded_m_sum_matches_full_sum() {
        let p = MolecularParams::mgh_plus();
        let pulse = PulseSpec::from_lab(0.9e13, 80.0).unwrap();
        let s = settings();
        let folded = PulsePairPropagators::with_summation(&p, 16, 4, &pulse, &pulse, &s, MSummation::Folded).unwrap();
        let full = PulsePairPropagators::with_summation(&p, 16, 4, &pulse, &pulse, &s, MSummation::Full).unwrap();
        for delay_fs in [500.0, 1800.0] {
            let a = folded.transfer(units::fs_to_au(delay_fs)).unwrap();
            let b = full.transfer(units::fs_to_au(delay_fs)).unwrap();
            for jf in 0..=16 {
                for j in 0..=4 {
                    assert_abs_diff_eq!(a.prob(jf, j), b.prob(jf, j), epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn provenance_on_failure() {
        let p = MolecularParams::mgh_plus();
        let pulse = PulseSpec::from_lab(1e13, 100.0).unwrap();
        let bad = PropagationSettings { dt: units::fs_to_au(80.0), tol: 1e-16, max_refinements: 0, ..Default::default() };
        let err = single_pulse_transfer(&p, 10, 2, &pulse, &bad).unwrap_err();
        assert!(matches!(err, Error::InitialState { .. }));
        assert_eq!(err.category(), "propagation");
    }
}
