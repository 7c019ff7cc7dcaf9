//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rotramsey::dynamics::{correlation, propagate_pulse, PropagationSettings, RotorState};
use rotramsey::ensemble::{single_pulse_transfer, InitialDistribution};
use rotramsey::interferometry::{
    estimate_period, revival_time, scan_interferogram, spectrum, visibility, DelayGrid, Interferogram,
};
use rotramsey::landscape::equal_population_intensity;
use rotramsey::pulse::PulseSpec;
use rotramsey::rotor::{cos2_matrix, BasisSpec, MolecularParams};
use rotramsey::sensitivity::{bands_from_scan, max_pairwise_separation, scan_dalpha, separability, SensitivityConfig};
use rotramsey::units;

type Outcome = Result<(bool, String), String>;

struct Shared {
    params: MolecularParams,
    settings: PropagationSettings,
    i_star: f64,
    pure: Option<Interferogram>,
    worst_norm: f64,
    worst_trace: f64,
}

fn in_range(x: f64, centre: f64, tol: f64) -> bool {
    (x - centre).abs() <= tol
}

fn row_sum_error(ig: &Interferogram) -> f64 {
    ig.populations.iter().map(|row| (row.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
}

fn pure_interferogram(s: &mut Shared) -> Result<Interferogram, String> {
    if let Some(ig) = &s.pure {
        return Ok(ig.clone());
    }
    let p = PulseSpec::from_lab(s.i_star, 100.0).map_err(|e| e.to_string())?;
    let ig = scan_interferogram(
        &InitialDistribution::pure_ground(),
        &s.params,
        20,
        &p,
        &p,
        &DelayGrid::default_scan(),
        &s.settings,
        false,
    )
    .map_err(|e| e.to_string())?;
    s.worst_norm = s.worst_norm.max(row_sum_error(&ig));
    s.pure = Some(ig.clone());
    Ok(ig)
}

fn crossing(s: &mut Shared) -> Outcome {
    let t = Instant::now();
    let (i, pops) = equal_population_intensity(&s.params, 20, 100.0, 0, 2, 1e12, 1.5e13, &s.settings)
        .map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    s.i_star = i;
    s.worst_norm = s.worst_norm.max((pops.iter().sum::<f64>() - 1.0).abs());
    let ok = in_range(i, 0.5e13, 0.1e13)
        && in_range(pops[0], 0.47, 0.03)
        && in_range(pops[2], 0.47, 0.03)
        && in_range(pops[4], 0.06, 0.02)
        && elapsed < Duration::from_secs(60);
    Ok((
        ok,
        format!(
            "I* = {:.4e} W/cm^2, p0 = {:.4}, p2 = {:.4}, p4 = {:.4}, {:.1} s",
            i,
            pops[0],
            pops[2],
            pops[4],
            elapsed.as_secs_f64()
        ),
    ))
}

fn revival(s: &mut Shared) -> Outcome {
    let ig = pure_interferogram(s)?;
    let step = ig.uniform_step().map_err(|e| e.to_string())?;
    let t_rev = revival_time(&s.params);
    let period = estimate_period(&ig, 0, units::ps_to_au(2.0), units::ps_to_au(3.2)).map_err(|e| e.to_string())?;
    let period_fs = units::au_to_fs(period);
    let pulse = PulseSpec::from_lab(s.i_star, 100.0).map_err(|e| e.to_string())?;
    let ground = RotorState::basis(BasisSpec::new(20, 0).unwrap(), 0).unwrap();
    let packet = propagate_pulse(&ground, &s.params, &pulse, &s.settings).map_err(|e| e.to_string())?;
    s.worst_norm = s.worst_norm.max((packet.norm() - 1.0).abs());
    let c = correlation(&packet, &s.params, t_rev).norm();
    let ok = (period_fs - 2620.0).abs() <= units::au_to_fs(step) + 1e-9 && (c - 1.0).abs() <= 1e-10;
    Ok((
        ok,
        format!(
            "period = {:.1} fs (T_rev = {:.1} fs), |C(T_rev)| - 1 = {:.2e}",
            period_fs,
            units::au_to_fs(t_rev),
            c - 1.0
        ),
    ))
}

fn pure_visibility(s: &mut Shared) -> Outcome {
    let ig = pure_interferogram(s)?;
    let t_rev = revival_time(&s.params);
    let window = (ig.delays[0], ig.delays[0] + t_rev);
    let v0 = visibility(&ig, 0, Some(window)).map_err(|e| e.to_string())?;
    let v2 = visibility(&ig, 2, Some(window)).map_err(|e| e.to_string())?;
    let ok = v0 >= 0.99 && in_range(v2, 0.90, 0.03);
    Ok((ok, format!("V0 = {v0:.4}, V2 = {v2:.4} over one revival period from the scan start")))
}

fn thermal(s: &mut Shared) -> Outcome {
    let t = Instant::now();
    let dist = InitialDistribution::thermal(20.0, &s.params, 20).map_err(|e| e.to_string())?;
    let a0 = dist.weight(0);
    let p = PulseSpec::from_lab(s.i_star, 100.0).map_err(|e| e.to_string())?;
    let ig = scan_interferogram(&dist, &s.params, 20, &p, &p, &DelayGrid::default_scan(), &s.settings, false)
        .map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    s.worst_trace = s.worst_trace.max(row_sum_error(&ig));
    let v0 = visibility(&ig, 0, None).map_err(|e| e.to_string())?;
    let v2 = visibility(&ig, 2, None).map_err(|e| e.to_string())?;
    let ok = in_range(a0, 0.38, 0.01)
        && in_range(v0, 0.91, 0.03)
        && in_range(v2, 0.76, 0.04)
        && elapsed < Duration::from_secs(600);
    Ok((
        ok,
        format!("a0 = {a0:.4}, V0 = {v0:.4}, V2 = {v2:.4}, scan {:.1} s", elapsed.as_secs_f64()),
    ))
}

fn spectra(s: &mut Shared) -> Outcome {
    let ig = pure_interferogram(s)?;
    let s0 = spectrum(&ig, 0).map_err(|e| e.to_string())?;
    let s2 = spectrum(&ig, 2).map_err(|e| e.to_string())?;
    let b = s.params.b;
    let mut ok = true;
    let mut found = Vec::new();
    for (label, sp) in [("S0", &s0), ("S2", &s2)] {
        let peaks = sp.peaks_above(0.02);
        for k in [0.0, 6.0, 14.0, 20.0] {
            let target = sp.bin_of(k * b);
            let hit = peaks.iter().any(|&p| p.abs_diff(target) <= 1);
            ok &= hit;
            if !hit {
                found.push(format!("{label} misses {k}B"));
            }
        }
    }
    let ratio = |k: f64| {
        let (a, c) = (s0.amplitudes[s0.bin_of(k * b)], s2.amplitudes[s2.bin_of(k * b)]);
        (a - c).abs() / a.max(c)
    };
    let (r0, r6) = (ratio(0.0), ratio(6.0));
    ok &= r0 <= 0.15 && r6 <= 0.15;
    let missing = if found.is_empty() { "all peaks found".to_string() } else { found.join(", ") };
    Ok((
        ok,
        format!("{missing}; S0/S2 height mismatch {:.1}% at 0, {:.1}% at 6B", 100.0 * r0, 100.0 * r6),
    ))
}

fn sensitivity_ordering(s: &mut Shared) -> Outcome {
    let first = PulseSpec::from_lab(0.55e13, 100.0).map_err(|e| e.to_string())?;
    let dist = InitialDistribution::surrogate_cooled();
    let mut seps = Vec::new();
    let mut v0 = 0.0;
    for ratio in [1.0, 1.6] {
        let cfg = SensitivityConfig { intensity_ratio: ratio, ..Default::default() };
        let members = scan_dalpha(&cfg, &s.params, 20, &first, &dist, &s.settings).map_err(|e| e.to_string())?;
        for m in &members {
            s.worst_trace = s.worst_trace.max(row_sum_error(&m.interferogram));
        }
        let family: Vec<&Interferogram> = members.iter().map(|m| &m.interferogram).collect();
        seps.push(max_pairwise_separation(&family, 0).map_err(|e| e.to_string())?);
        if ratio == 1.6 {
            v0 = visibility(&members[0].interferogram, 0, None).map_err(|e| e.to_string())?;
        }
    }
    let ok = 5.0 * seps[0] <= seps[1] && in_range(v0, 0.79, 0.05);
    Ok((
        ok,
        format!(
            "max separation {:.4} (ratio 1) vs {:.4} (ratio 1.6), factor {:.2}; V0(1.6) = {v0:.4}",
            seps[0],
            seps[1],
            seps[1] / seps[0]
        ),
    ))
}

fn separability_check(s: &mut Shared) -> Outcome {
    let t = Instant::now();
    let d = 16.20;
    let plus5 = d * 1.05;
    let minus5 = d * 0.95;
    let plus2 = d * 1.02;
    let minus2 = d * 0.98;
    let base = SensitivityConfig {
        dalpha_values: vec![d, plus5, minus5, plus2, minus2],
        intensity_ratio: 1.6,
        init_uncertainty: 0.02,
        meas_uncertainty: 0.02,
        n_samples: 1000,
        grid: DelayGrid::from_fs(1500.0, 3750.0, 5.0).map_err(|e| e.to_string())?,
        ..Default::default()
    };
    let first = PulseSpec::from_lab(0.55e13, 100.0).map_err(|e| e.to_string())?;
    let members = scan_dalpha(&base, &s.params, 20, &first, &InitialDistribution::surrogate_cooled(), &s.settings)
        .map_err(|e| e.to_string())?;
    let early = Some((units::fs_to_au(1500.0), units::fs_to_au(2000.0)));
    let late = Some((units::fs_to_au(3450.0), units::fs_to_au(3750.0)));
    let sep = |meas: f64, other: f64, window| -> Result<bool, String> {
        let cfg = SensitivityConfig { meas_uncertainty: meas, ..base.clone() };
        let report = bands_from_scan(&members, &cfg).map_err(|e| e.to_string())?;
        Ok(separability(&report, d, other, window, cfg.min_separable).map_err(|e| e.to_string())?.separable)
    };
    let five_early = sep(0.02, plus5, early)? && sep(0.02, minus5, early)?;
    let two_late = sep(0.02, plus2, late)? && sep(0.02, minus2, late)?;
    let two_late_noisy = sep(0.05, plus2, late)? || sep(0.05, minus2, late)?;
    let five_late_noisy = sep(0.05, plus5, late)? && sep(0.05, minus5, late)?;
    let elapsed = t.elapsed();
    let ok = five_early && two_late && !two_late_noisy && five_late_noisy && elapsed < Duration::from_secs(1800);
    Ok((
        ok,
        format!(
            "2% noise: +-5% in [1.5,2.0] ps {five_early}, +-2% in [3.45,3.75] ps {two_late}; \
             5% noise: +-2% {two_late_noisy}, +-5% {five_late_noisy}; n = 1000, {:.1} s",
            elapsed.as_secs_f64()
        ),
    ))
}

fn oracles(s: &mut Shared) -> Outcome {
    let mut worst_cos2: f64 = 0.0;
    for m in -6..=6 {
        let spec = BasisSpec::new(20, m).unwrap();
        let diff = cos2_matrix(&spec) - common::cos2_by_quadrature(20, m);
        worst_cos2 = worst_cos2.max(diff.amax());
    }

    let params = MolecularParams::mgh_plus();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    let mut worst_prop: f64 = 0.0;
    for _ in 0..20 {
        let i0 = rng.random_range(1e11..=1e13);
        let tau = rng.random_range(50.0..=500.0);
        let j0 = rng.random_range(0..=4usize);
        let m = rng.random_range(0..=j0.min(3)) as i32;
        let pulse = PulseSpec::from_lab(i0, tau).map_err(|e| e.to_string())?;
        let start = RotorState::basis(BasisSpec::new(8, m).unwrap(), j0).unwrap();
        let out = propagate_pulse(&start, &params, &pulse, &s.settings).map_err(|e| e.to_string())?;
        s.worst_norm = s.worst_norm.max((out.norm() - 1.0).abs());
        let reference = common::dense_pulse_populations(&params, 8, j0, m, i0, tau);
        let got = out.populations();
        for j in 0..=8 {
            worst_prop = worst_prop.max((got[j] - reference[j]).abs());
        }
    }

    let pulse = PulseSpec::from_lab(s.i_star, 100.0).map_err(|e| e.to_string())?;
    let with = single_pulse_transfer(&params, 20, 6, &pulse, &s.settings).map_err(|e| e.to_string())?;
    let without =
        single_pulse_transfer(&params.with_alpha_perp(0.0), 20, 6, &pulse, &s.settings).map_err(|e| e.to_string())?;
    let mut worst_perp: f64 = 0.0;
    for jf in 0..=20 {
        for ji in 0..=6 {
            worst_perp = worst_perp.max((with.prob(jf, ji) - without.prob(jf, ji)).abs());
        }
    }

    let ok = worst_cos2 <= 1e-10
        && worst_prop <= 1e-8
        && s.worst_norm <= 1e-10
        && s.worst_trace <= 1e-8
        && worst_perp <= 1e-12;
    Ok((
        ok,
        format!(
            "cos2 {worst_cos2:.1e}, dense oracle {worst_prop:.1e}, norm {:.1e}, trace {:.1e}, alpha_perp {worst_perp:.1e}",
            s.worst_norm, s.worst_trace
        ),
    ))
}

fn main() -> ExitCode {
    let mut shared = Shared {
        params: MolecularParams::mgh_plus(),
        settings: PropagationSettings::default(),
        i_star: 0.55e13,
        pure: None,
        worst_norm: 0.0,
        worst_trace: 0.0,
    };
    let criteria: [(&str, fn(&mut Shared) -> Outcome); 8] = [
        ("equal-population crossing", crossing),
        ("revival period", revival),
        ("pure-state visibilities", pure_visibility),
        ("thermal ensemble", thermal),
        ("spectrum peaks", spectra),
        ("sensitivity ordering", sensitivity_ordering),
        ("separability", separability_check),
        ("oracle suites", oracles),
    ];
    let mut failures = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = run(&mut shared).unwrap_or_else(|e| (false, format!("error: {e}")));
        if !ok {
            failures += 1;
        }
        println!(
            "criterion {} [{}] {}: {} ({:.1} s)",
            n + 1,
            if ok { "PASS" } else { "FAIL" },
            name,
            detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
