//! Time propagation of a fixed-m rotor block.
//!
//! The Hamiltonian is H(t) = B J^2 - I(t)/(2 eps0 c) (dalpha cos^2 theta + alpha_perp).
//! In atomic units with E^2 = I the coupling prefactor is I(t)/4. Pulses are
//! integrated with a fourth-order commutator-free Magnus scheme whose step
//! exponentials are evaluated by a Chebyshev expansion; free evolution is
//! applied exactly as diagonal phases.

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pulse::{PulseSpec, DEFAULT_WINDOW_MULTIPLIER};
use crate::rotor::{cos2_matrix, free_phase_vector, BasisSpec, MolecularParams};
use crate::units;

/// Population in the two highest levels of a block above which the basis is
/// considered too small.
pub const TRUNCATION_WARN_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationSettings {
    /// Integration step (atomic time units).
    pub dt: f64,
    /// Unitarity / convergence tolerance.
    pub tol: f64,
    /// Pulse window half-width in units of the FWHM duration.
    pub window_multiplier: f64,
    /// Number of step halvings attempted before giving up.
    pub max_refinements: usize,
    /// Verify each pulse propagator against one with half the step.
    pub check_convergence: bool,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        PropagationSettings {
            dt: units::fs_to_au(0.5),
            tol: 1e-10,
            window_multiplier: DEFAULT_WINDOW_MULTIPLIER,
            max_refinements: 4,
            check_convergence: true,
        }
    }
}

impl PropagationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.window_multiplier > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "window multiplier must be positive, got {}",
                self.window_multiplier
            )));
        }
        Ok(())
    }
}

/// Anything that provides a cycle-averaged intensity I(t) in atomic units.
pub trait Envelope: Sync {
    fn intensity(&self, t: f64) -> f64;
}

impl Envelope for PulseSpec {
    fn intensity(&self, t: f64) -> f64 {
        self.intensity_at(t)
    }
}

/// Two envelopes added without any carrier interference term.
pub struct SummedEnvelope<'a>(pub &'a PulseSpec, pub &'a PulseSpec);

impl Envelope for SummedEnvelope<'_> {
    fn intensity(&self, t: f64) -> f64 {
        self.0.intensity_at(t) + self.1.intensity_at(t)
    }
}

/// Wavefunction restricted to one m block, coefficients indexed by j - |m|.
#[derive(Clone, Debug, PartialEq)]
pub struct RotorState {
    pub spec: BasisSpec,
    pub coeffs: DVector<Complex64>,
}

impl RotorState {
    /// The basis state |j, m>.
    pub fn basis(spec: BasisSpec, j: usize) -> Result<Self> {
        let idx = spec
            .index_of(j)
            .ok_or_else(|| Error::InvalidParameter(format!("j = {j} outside block {spec:?}")))?;
        let mut coeffs = DVector::zeros(spec.dim());
        coeffs[idx] = Complex64::new(1.0, 0.0);
        Ok(RotorState { spec, coeffs })
    }

    /// Normalised superposition of the given (j, amplitude) pairs.
    pub fn superposition(spec: BasisSpec, amps: &[(usize, Complex64)]) -> Result<Self> {
        let mut coeffs = DVector::zeros(spec.dim());
        for &(j, c) in amps {
            let idx = spec
                .index_of(j)
                .ok_or_else(|| Error::InvalidParameter(format!("j = {j} outside block {spec:?}")))?;
            coeffs[idx] += c;
        }
        let n = coeffs.norm();
        if n == 0.0 {
            return Err(Error::InvalidParameter("zero state".into()));
        }
        Ok(RotorState { spec, coeffs: coeffs / Complex64::new(n, 0.0) })
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    pub fn population(&self, j: usize) -> f64 {
        self.spec.index_of(j).map_or(0.0, |i| self.coeffs[i].norm_sqr())
    }

    /// |c_j|^2 indexed by j from 0 to j_max (zero below |m|).
    pub fn populations(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.spec.j_max + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[self.spec.j_at(i)] = c.norm_sqr();
        }
        out
    }

    /// Population held by the two highest levels of the block.
    pub fn top_population(&self) -> f64 {
        let n = self.coeffs.len();
        self.coeffs.iter().skip(n.saturating_sub(2)).map(|c| c.norm_sqr()).sum()
    }
}

/// Bessel functions J_0(x) .. J_n(x) by Miller's backward recurrence.
pub(crate) fn bessel_j_sequence(x: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = 2 * ((n.max(x.ceil() as usize) + 20 + (x.sqrt() * 10.0) as usize) / 2);
    let mut j_next = 0.0;
    let mut j_cur = 1e-30;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let j_prev = 2.0 * k as f64 / x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
        // j_cur now holds J_{k-1}
        let order = k - 1;
        if order <= n {
            out[order] = j_cur;
        }
        if order % 2 == 0 && order > 0 {
            norm += 2.0 * j_cur;
        }
    }
    norm += j_cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Real symmetric tridiagonal matrix: `diag[i]` and `off[i]` = A[i][i+1].
#[derive(Clone, Debug)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }

    /// out = ((A - shift) / scale) * v for an n x cols row-major block `v`.
    fn apply_scaled(&self, v: &[Complex64], cols: usize, shift: f64, scale: f64, out: &mut [Complex64]) {
        let n = self.dim();
        let inv = 1.0 / scale;
        for i in 0..n {
            let d = (self.diag[i] - shift) * inv;
            let row = &mut out[i * cols..(i + 1) * cols];
            for (k, o) in row.iter_mut().enumerate() {
                *o = v[i * cols + k] * d;
            }
            if i > 0 {
                let e = self.off[i - 1] * inv;
                for (k, o) in row.iter_mut().enumerate() {
                    *o += v[(i - 1) * cols + k] * e;
                }
            }
            if i + 1 < n {
                let e = self.off[i] * inv;
                for (k, o) in row.iter_mut().enumerate() {
                    *o += v[(i + 1) * cols + k] * e;
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                self.diag[r]
            } else if r + 1 == c {
                self.off[r]
            } else if c + 1 == r {
                self.off[c]
            } else {
                0.0
            }
        })
    }
}

/// Scratch buffers reused across Chebyshev applications.
#[derive(Default)]
pub struct ChebyshevWorkspace {
    prev: Vec<Complex64>,
    cur: Vec<Complex64>,
    next: Vec<Complex64>,
    acc: Vec<Complex64>,
    bessel: Vec<f64>,
}

/// Replaces the row-major n x cols block `v` by exp(-i h A) v using a
/// Chebyshev expansion on the Gershgorin interval of A.
pub fn chebyshev_apply(a: &Tridiagonal, h: f64, v: &mut [Complex64], cols: usize) {
    chebyshev_apply_with(a, h, v, cols, &mut ChebyshevWorkspace::default());
}

pub fn chebyshev_apply_with(a: &Tridiagonal, h: f64, v: &mut [Complex64], cols: usize, ws: &mut ChebyshevWorkspace) {
    let (lo, hi) = a.gershgorin();
    let center = 0.5 * (hi + lo);
    let half = 0.5 * (hi - lo);
    let global = Complex64::from_polar(1.0, -center * h);
    let r = half * h.abs();
    if r < 1e-300 {
        v.iter_mut().for_each(|z| *z *= global);
        return;
    }
    // J_k(r) decays super-exponentially once k > r.
    let mut kmax = r.ceil() as usize + 4;
    loop {
        ws.bessel = bessel_j_sequence(r, kmax + 1);
        if ws.bessel[kmax].abs() < 1e-17 {
            break;
        }
        kmax += 2;
    }
    let base = Complex64::new(0.0, -h.signum());

    let len = v.len();
    let zero = Complex64::new(0.0, 0.0);
    ws.prev.clear();
    ws.prev.extend_from_slice(v);
    ws.cur.resize(len, zero);
    ws.next.resize(len, zero);
    a.apply_scaled(&ws.prev, cols, center, half, &mut ws.cur);
    ws.acc.clear();
    let b0 = ws.bessel[0];
    ws.acc.extend(ws.prev.iter().map(|z| z * b0));
    let mut phase = base;
    for k in 1..=kmax {
        if k > 1 {
            a.apply_scaled(&ws.cur, cols, center, half, &mut ws.next);
            for (nx, pv) in ws.next.iter_mut().zip(ws.prev.iter()) {
                *nx = *nx * 2.0 - pv;
            }
            std::mem::swap(&mut ws.prev, &mut ws.cur);
            std::mem::swap(&mut ws.cur, &mut ws.next);
            phase *= base;
        }
        let coef = phase * (2.0 * ws.bessel[k]);
        for (acc, c) in ws.acc.iter_mut().zip(ws.cur.iter()) {
            *acc += coef * c;
        }
    }
    for (out, acc) in v.iter_mut().zip(ws.acc.iter()) {
        *out = acc * global;
    }
}

const CFM4_C1: f64 = 0.5 - 0.288_675_134_594_812_9; // 1/2 - sqrt(3)/6
const CFM4_C2: f64 = 0.5 + 0.288_675_134_594_812_9;
const CFM4_A1: f64 = (3.0 - 2.0 * 1.732_050_807_568_877_2) / 12.0;
const CFM4_A2: f64 = (3.0 + 2.0 * 1.732_050_807_568_877_2) / 12.0;

/// One parity chain (j = j0, j0 + 2, ...) of a block; H = diag(E) - I V with
/// V tridiagonal along the chain.
#[derive(Clone, Debug)]
struct ParityChain {
    /// Block indices covered by the chain.
    indices: Vec<usize>,
    energies: Vec<f64>,
    coupling: Tridiagonal,
}

impl ParityChain {
    fn combination(&self, e_weight: f64, intensity: f64) -> Tridiagonal {
        Tridiagonal {
            diag: self
                .energies
                .iter()
                .zip(self.coupling.diag.iter())
                .map(|(e, v)| e_weight * e - intensity * v)
                .collect(),
            off: self.coupling.off.iter().map(|v| -intensity * v).collect(),
        }
    }

    fn propagator(&self, env: &dyn Envelope, t0: f64, h: f64, steps: usize) -> Vec<Complex64> {
        let n = self.indices.len();
        let mut u = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            u[i * n + i] = Complex64::new(1.0, 0.0);
        }
        let mut ws = ChebyshevWorkspace::default();
        for k in 0..steps {
            let t = t0 + k as f64 * h;
            let i1 = env.intensity(t + CFM4_C1 * h);
            let i2 = env.intensity(t + CFM4_C2 * h);
            chebyshev_apply_with(&self.combination(0.5, CFM4_A2 * i1 + CFM4_A1 * i2), h, &mut u, n, &mut ws);
            chebyshev_apply_with(&self.combination(0.5, CFM4_A1 * i1 + CFM4_A2 * i2), h, &mut u, n, &mut ws);
        }
        u
    }
}

/// Hamiltonian pieces of one m block.
#[derive(Clone, Debug)]
pub struct BlockHamiltonian {
    pub spec: BasisSpec,
    pub energies: DVector<f64>,
    /// (dalpha cos^2 theta + alpha_perp) / 4; H = diag(E) - I(t) * coupling.
    pub coupling: DMatrix<f64>,
    chains: Vec<ParityChain>,
}

impl BlockHamiltonian {
    pub fn new(spec: BasisSpec, params: &MolecularParams) -> Self {
        let mut coupling = cos2_matrix(&spec) * params.dalpha;
        for i in 0..spec.dim() {
            coupling[(i, i)] += params.alpha_perp;
        }
        coupling *= 0.25;
        let energies = spec.energies(params);
        let chains = (0..2usize.min(spec.dim()))
            .map(|first| {
                let indices: Vec<usize> = (first..spec.dim()).step_by(2).collect();
                let diag = indices.iter().map(|&i| coupling[(i, i)]).collect();
                let off = indices.windows(2).map(|w| coupling[(w[0], w[1])]).collect();
                ParityChain {
                    energies: indices.iter().map(|&i| energies[i]).collect(),
                    indices,
                    coupling: Tridiagonal { diag, off },
                }
            })
            .collect();
        BlockHamiltonian { spec, energies, coupling, chains }
    }

    /// Dense H = diag(E) - I V.
    pub fn at(&self, intensity: f64) -> DMatrix<f64> {
        let mut h = &self.coupling * (-intensity);
        for i in 0..self.energies.len() {
            h[(i, i)] += self.energies[i];
        }
        h
    }

    pub fn free_phases(&self, t: f64) -> DVector<Complex64> {
        self.energies.map(|e| Complex64::from_polar(1.0, -e * t))
    }

    /// Propagator over [t0, t1] with a fixed number of CFM4 steps.
    pub fn propagator_steps(&self, env: &dyn Envelope, t0: f64, t1: f64, steps: usize) -> DMatrix<Complex64> {
        let n = self.spec.dim();
        let h = (t1 - t0) / steps as f64;
        let mut u = DMatrix::<Complex64>::zeros(n, n);
        for chain in &self.chains {
            let m = chain.indices.len();
            let cu = chain.propagator(env, t0, h, steps);
            for (a, &ra) in chain.indices.iter().enumerate() {
                for (b, &rb) in chain.indices.iter().enumerate() {
                    u[(ra, rb)] = cu[a * m + b];
                }
            }
        }
        u
    }

    /// Propagator over [t0, t1] at nominal step `settings.dt`, refined by
    /// step halving until transition probabilities stop changing.
    pub fn propagator(
        &self,
        env: &dyn Envelope,
        t0: f64,
        t1: f64,
        settings: &PropagationSettings,
    ) -> Result<DMatrix<Complex64>> {
        settings.validate()?;
        if t1 <= t0 {
            return Ok(DMatrix::identity(self.spec.dim(), self.spec.dim()));
        }
        let mut steps = ((t1 - t0) / settings.dt).ceil().max(1.0) as usize;
        let mut u = self.propagator_steps(env, t0, t1, steps);
        if !settings.check_convergence {
            return Ok(u);
        }
        let threshold = settings.tol * 100.0;
        let mut change = f64::INFINITY;
        for _ in 0..=settings.max_refinements {
            steps *= 2;
            let finer = self.propagator_steps(env, t0, t1, steps);
            change = u
                .iter()
                .zip(finer.iter())
                .map(|(a, b)| (a.norm_sqr() - b.norm_sqr()).abs())
                .fold(0.0, f64::max);
            u = finer;
            if change < threshold {
                return Ok(u);
            }
        }
        Err(Error::Convergence { change, refinements: settings.max_refinements + 1 })
    }
}

/// Largest population that any column of `u` (restricted to `columns`)
/// leaves in the two highest levels of the block.
pub fn truncation_leak(u: &DMatrix<Complex64>, columns: impl IntoIterator<Item = usize>) -> f64 {
    let n = u.nrows();
    columns
        .into_iter()
        .map(|c| (n.saturating_sub(2)..n).map(|r| u[(r, c)].norm_sqr()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn check_truncation(leak: f64, spec: &BasisSpec) {
    if leak > TRUNCATION_WARN_THRESHOLD {
        warn!(
            "population {leak:.3e} reached the top of the basis (j_max = {}, m = {}); increase j_max",
            spec.j_max, spec.m
        );
    }
}

/// Free evolution c_j -> exp(-i E_j t) c_j.
pub fn propagate_free(state: &RotorState, params: &MolecularParams, duration: f64) -> RotorState {
    let phases = free_phase_vector(&state.spec, params, duration);
    RotorState { spec: state.spec, coeffs: state.coeffs.component_mul(&phases) }
}

/// Propagates `state`, given at the start of the pulse window, to the end of
/// the window [t_c - w, t_c + w].
pub fn propagate_pulse(
    state: &RotorState,
    params: &MolecularParams,
    pulse: &PulseSpec,
    settings: &PropagationSettings,
) -> Result<RotorState> {
    let ham = BlockHamiltonian::new(state.spec, params);
    let (t0, t1) = pulse.support_window(settings.window_multiplier);
    let u = ham.propagator(pulse, t0, t1, settings)?;
    let out = RotorState { spec: state.spec, coeffs: &u * &state.coeffs };
    check_truncation(out.top_population(), &state.spec);
    Ok(out)
}

/// Timing of a two-pulse sequence with peak-to-peak delay.
#[derive(Clone, Copy, Debug)]
pub struct SequenceTiming {
    pub first: PulseSpec,
    pub second: PulseSpec,
    pub delay: f64,
    pub start: f64,
    pub end: f64,
    pub overlapping: bool,
}

impl SequenceTiming {
    /// The second pulse is placed at `first.t_center + delay`, ignoring its
    /// own `t_center`.
    pub fn new(first: &PulseSpec, delay: f64, second: &PulseSpec, multiplier: f64) -> Result<Self> {
        if !(delay >= 0.0) || !delay.is_finite() {
            return Err(Error::InvalidParameter(format!("delay must be >= 0, got {delay}")));
        }
        let second = second.with_center(first.t_center + delay);
        let w1 = first.half_width(multiplier);
        let w2 = second.half_width(multiplier);
        let start = (first.t_center - w1).min(second.t_center - w2);
        let end = (first.t_center + w1).max(second.t_center + w2);
        Ok(SequenceTiming { first: *first, second, delay, start, end, overlapping: delay < w1 + w2 })
    }

    /// Delay below which the pulses are treated as overlapping for warnings.
    pub fn overlap_warning_threshold(&self) -> f64 {
        1.5 * (self.first.tau_i + self.second.tau_i)
    }
}

/// Total propagator of a pulse pair from `timing.start` to `timing.end`.
///
/// Non-overlapping windows are composed as U2 D U1; overlapping windows are
/// integrated in one pass over the summed envelope.
pub fn sequence_propagator(
    ham: &BlockHamiltonian,
    first: &DMatrix<Complex64>,
    second: &DMatrix<Complex64>,
    timing: &SequenceTiming,
    settings: &PropagationSettings,
) -> Result<DMatrix<Complex64>> {
    if timing.overlapping {
        if timing.delay < timing.overlap_warning_threshold() {
            warn!(
                "pulse delay {:.1} fs is inside the overlap region; integrating the summed envelope",
                units::au_to_fs(timing.delay)
            );
        }
        let env = SummedEnvelope(&timing.first, &timing.second);
        return ham.propagator(&env, timing.start, timing.end, settings);
    }
    let w1 = timing.first.half_width(settings.window_multiplier);
    let w2 = timing.second.half_width(settings.window_multiplier);
    let gap = timing.delay - w1 - w2;
    let phases = ham.free_phases(gap);
    let mut mid = first.clone();
    for (r, mut row) in mid.row_iter_mut().enumerate() {
        row *= phases[r];
    }
    Ok(second * mid)
}

/// Pulse 1, free evolution, pulse 2. The input state is taken at the start of
/// the combined support window and returned at its end.
pub fn apply_sequence(
    state: &RotorState,
    params: &MolecularParams,
    p1: &PulseSpec,
    delay: f64,
    p2: &PulseSpec,
    settings: &PropagationSettings,
) -> Result<RotorState> {
    let timing = SequenceTiming::new(p1, delay, p2, settings.window_multiplier)?;
    let ham = BlockHamiltonian::new(state.spec, params);
    let u = if timing.overlapping {
        sequence_propagator(&ham, &DMatrix::zeros(0, 0), &DMatrix::zeros(0, 0), &timing, settings)?
    } else {
        let (a0, a1) = timing.first.support_window(settings.window_multiplier);
        let (b0, b1) = timing.second.support_window(settings.window_multiplier);
        let u1 = ham.propagator(&timing.first, a0, a1, settings)?;
        let u2 = ham.propagator(&timing.second, b0, b1, settings)?;
        sequence_propagator(&ham, &u1, &u2, &timing, settings)?
    };
    let out = RotorState { spec: state.spec, coeffs: &u * &state.coeffs };
    check_truncation(out.top_population(), &state.spec);
    Ok(out)
}

/// Autocorrelation C(t) = sum_j |c_j|^2 exp(-i E_j t) under free evolution.
pub fn correlation(initial: &RotorState, params: &MolecularParams, t: f64) -> Complex64 {
    let phases = free_phase_vector(&initial.spec, params, t);
    initial.coeffs.iter().zip(phases.iter()).map(|(c, p)| c.norm_sqr() * p).sum()
}
