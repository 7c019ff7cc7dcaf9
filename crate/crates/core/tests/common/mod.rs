//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rotramsey::rotor::MolecularParams;
use rotramsey::units;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Associated Legendre functions normalised so that int Theta_l^m(x)^2 dx = 1,
/// for l = m..=l_max.
pub fn normalized_legendre(l_max: usize, m: usize, x: f64) -> Vec<f64> {
    let mut pmm = 0.5f64.sqrt();
    for k in 1..=m {
        pmm *= ((2 * k + 1) as f64 / (2 * k) as f64).sqrt() * (1.0 - x * x).sqrt();
    }
    let mut vals = vec![pmm];
    if l_max > m {
        vals.push(x * ((2 * m + 3) as f64).sqrt() * pmm);
    }
    for l in (m + 2)..=l_max {
        let a = |l: usize| (((4 * l * l - 1) as f64) / ((l * l - m * m) as f64)).sqrt();
        let n = vals.len();
        let next = a(l) * (x * vals[n - 1] - vals[n - 2] / a(l - 1));
        vals.push(next);
    }
    vals
}

/// <j1 m|cos^2 theta|j2 m> on the basis j = |m|..=j_max, by quadrature.
pub fn cos2_by_quadrature(j_max: usize, m: i32) -> DMatrix<f64> {
    let am = m.unsigned_abs() as usize;
    let dim = j_max + 1 - am;
    let nodes = gauss_legendre(64);
    let mut out = DMatrix::zeros(dim, dim);
    for &(x, w) in &nodes {
        let p = normalized_legendre(j_max, am, x);
        for a in 0..dim {
            for b in 0..dim {
                out[(a, b)] += w * p[a] * x * x * p[b];
            }
        }
    }
    out
}

fn midpoint_propagator(
    energies: &DVector<f64>,
    coupling: &DMatrix<f64>,
    intensity: &dyn Fn(f64) -> f64,
    t0: f64,
    t1: f64,
    steps: usize,
) -> DMatrix<Complex64> {
    let n = energies.len();
    let h = (t1 - t0) / steps as f64;
    let mut u = DMatrix::<Complex64>::identity(n, n);
    for s in 0..steps {
        let t = t0 + (s as f64 + 0.5) * h;
        let ham = DMatrix::from_diagonal(energies) - coupling * intensity(t);
        let eig = SymmetricEigen::new(ham);
        let q = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
        let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(0.0, -l * h).exp()));
        u = &q * phases * q.transpose() * u;
    }
    u
}

/// Brute-force propagator of one m-block (j = |m|..=j_max, both parities)
/// through a Gaussian pulse over [t_c - 3 tau, t_c + 3 tau]: exact dense
/// exponentials of the midpoint Hamiltonian, Richardson-extrapolated in the
/// step size.
pub fn dense_pulse_propagator(
    params: &MolecularParams,
    j_max: usize,
    m: i32,
    i0_w_cm2: f64,
    tau_fs: f64,
    step_fs: f64,
) -> DMatrix<Complex64> {
    let am = m.unsigned_abs() as usize;
    let b = units::wavenumber_to_hartree(params.b_wavenumber());
    let energies = DVector::from_iterator(j_max + 1 - am, (am..=j_max).map(|j| b * (j * (j + 1)) as f64));
    let dim = energies.len();
    let coupling = (cos2_by_quadrature(j_max, m) * params.dalpha + DMatrix::identity(dim, dim) * params.alpha_perp) * 0.25;
    let i0 = i0_w_cm2 / units::au_intensity_w_per_cm2();
    let tau = tau_fs / units::AU_TIME_IN_FS;
    let intensity = move |t: f64| i0 * (-4.0 * std::f64::consts::LN_2 * (t / tau).powi(2)).exp();
    let (t0, t1) = (-3.0 * tau, 3.0 * tau);
    let steps = ((t1 - t0) / (step_fs / units::AU_TIME_IN_FS)).ceil() as usize;
    let coarse = midpoint_propagator(&energies, &coupling, &intensity, t0, t1, steps);
    let fine = midpoint_propagator(&energies, &coupling, &intensity, t0, t1, 2 * steps);
    (fine * Complex64::new(4.0, 0.0) - coarse) / Complex64::new(3.0, 0.0)
}

/// Final populations indexed by j (zero below |m|) after the dense oracle acts
/// on |j0, m>.
pub fn dense_pulse_populations(
    params: &MolecularParams,
    j_max: usize,
    j0: usize,
    m: i32,
    i0_w_cm2: f64,
    tau_fs: f64,
) -> Vec<f64> {
    let am = m.unsigned_abs() as usize;
    let u = dense_pulse_propagator(params, j_max, m, i0_w_cm2, tau_fs, 0.25);
    let mut pops = vec![0.0; j_max + 1];
    for j in am..=j_max {
        pops[j] = u[(j - am, j0 - am)].norm_sqr();
    }
    pops
}
