//! Subcommand drivers. Each writes self-describing CSV files and returns the
//! paths it wrote.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use log::info;

use rotramsey::ensemble::InitialDistribution;
use rotramsey::interferometry::{scan_interferogram, spectrum, visibility, Interferogram};
use rotramsey::landscape::pulse_landscape;
use rotramsey::sensitivity::{monte_carlo_bands, separability};
use rotramsey::units;

use crate::config::RunConfig;

/// Fixed-width scientific notation, 13 significant digits.
fn num(x: f64) -> String {
    format!("{x:.12e}")
}

fn write_csv(cfg: &RunConfig, name: &str, header: &str, body: &str) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let path = cfg.output_path(name);
    let text = format!("{}{header}\n{body}", cfg.comment_block());
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(path)
}

fn distribution(cfg: &RunConfig) -> Result<InitialDistribution> {
    cfg.initial.load(&cfg.params, cfg.j_ini_max)
}

pub fn landscape(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dist = distribution(cfg)?;
    let points = pulse_landscape(
        &dist,
        &cfg.params,
        cfg.j_max,
        &cfg.landscape.intensities_w_cm2,
        &cfg.landscape.durations_fs,
        &cfg.settings,
    )?;
    let mut body = String::new();
    for p in &points {
        let pop = |j: usize| p.populations.get(j).copied().unwrap_or(0.0);
        writeln!(
            body,
            "{},{},{},{},{},{}",
            num(p.i0_w_cm2),
            num(p.tau_fs),
            num(pop(0)),
            num(pop(2)),
            num(pop(4)),
            num(pop(6))
        )?;
    }
    Ok(vec![write_csv(cfg, "landscape.csv", "I0_Wcm2,tauI_fs,p_j0,p_j2,p_j4,p_j6", &body)?])
}

fn run_scan(cfg: &RunConfig) -> Result<Interferogram> {
    let dist = distribution(cfg)?;
    Ok(scan_interferogram(
        &dist,
        &cfg.params,
        cfg.j_max,
        &cfg.pulse1,
        &cfg.pulse2,
        &cfg.grid,
        &cfg.settings,
        cfg.allow_overlap,
    )?)
}

fn level_header(prefix: &str, j_max: usize) -> String {
    (0..=j_max).map(|j| format!(",{prefix}{j}")).collect()
}

fn write_spectrum(cfg: &RunConfig, ig: &Interferogram) -> Result<PathBuf> {
    let spectra = (0..=cfg.j_max).map(|j| spectrum(ig, j)).collect::<rotramsey::Result<Vec<_>>>()?;
    let mut body = String::new();
    for k in 0..spectra[0].energies.len() {
        body.push_str(&num(spectra[0].energies[k] / cfg.params.b));
        for s in &spectra {
            body.push(',');
            body.push_str(&num(s.amplitudes[k]));
        }
        body.push('\n');
    }
    let header = format!("energy_in_B_units{}", level_header("S_j", cfg.j_max));
    write_csv(cfg, "spectrum.csv", &header, &body)
}

fn write_visibility(cfg: &RunConfig, ig: &Interferogram) -> Result<PathBuf> {
    let mut body = String::new();
    for j in 0..=cfg.j_max {
        let trace = ig.trace(j)?;
        if trace.iter().all(|&p| p < 1e-12) {
            continue;
        }
        let v = visibility(ig, j, cfg.visibility_window)?;
        writeln!(body, "{j},{}", num(v))?;
    }
    write_csv(cfg, "visibility.csv", "j,visibility", &body)
}

pub fn interferogram(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ig = run_scan(cfg)?;
    let mut body = String::new();
    for (tau, row) in ig.delays.iter().zip(&ig.populations) {
        body.push_str(&num(units::au_to_fs(*tau)));
        for j in 0..=cfg.j_max {
            body.push(',');
            body.push_str(&num(row.get(j).copied().unwrap_or(0.0)));
        }
        body.push('\n');
    }
    let header = format!("tau_fs{}", level_header("p_j", cfg.j_max));
    let mut written = vec![write_csv(cfg, "interferogram.csv", &header, &body)?];
    if cfg.spectrum {
        written.push(write_spectrum(cfg, &ig)?);
    }
    written.push(write_visibility(cfg, &ig)?);
    Ok(written)
}

pub fn spectrum_only(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ig = run_scan(cfg)?;
    Ok(vec![write_spectrum(cfg, &ig)?, write_visibility(cfg, &ig)?])
}

pub fn sensitivity(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dist = distribution(cfg)?;
    let sc = &cfg.sensitivity;
    let report = monte_carlo_bands(sc, &cfg.params, cfg.j_max, &cfg.pulse1, &dist, &cfg.settings)?;
    let mut body = String::new();
    for (i, tau) in report.delays.iter().enumerate() {
        for c in &report.curves {
            writeln!(
                body,
                "{},{},{},{},{}",
                num(units::au_to_fs(*tau)),
                num(c.dalpha),
                num(c.mean[i]),
                num(c.lo[i]),
                num(c.hi[i])
            )?;
        }
    }
    let mut written = vec![write_csv(cfg, "sensitivity_report.csv", "tau_fs,dalpha_au,mean,lo,hi", &body)?];

    let mut body = String::new();
    for (a, &da) in sc.dalpha_values.iter().enumerate() {
        for &db in &sc.dalpha_values[a + 1..] {
            let sep = separability(&report, da, db, cfg.separability_window, sc.min_separable)?;
            info!("dalpha {da} vs {db}: {} separable interval(s)", sep.intervals.len());
            for (t0, t1) in sep.intervals {
                writeln!(body, "{},{},{},{}", num(da), num(db), num(units::au_to_fs(t0)), num(units::au_to_fs(t1)))?;
            }
        }
    }
    written.push(write_csv(cfg, "separability.csv", "dalpha_a,dalpha_b,window_start_fs,window_end_fs", &body)?);
    Ok(written)
}

/// Renders the configured initial distribution as "j,weight" CSV.
pub fn thermal_dist(cfg: &RunConfig) -> Result<String> {
    let dist = distribution(cfg)?;
    let mut text = format!("{}# distribution {}\nj,weight\n", cfg.comment_block(), dist.label);
    for (j, w) in dist.weights().iter().enumerate() {
        writeln!(text, "{j},{}", num(*w))?;
    }
    Ok(text)
}
