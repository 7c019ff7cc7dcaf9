//! Run configuration: TOML sections with unit-suffixed keys, presets and
//! default filling.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use rotramsey::dynamics::PropagationSettings;
use rotramsey::ensemble::{InitialDistribution, DEFAULT_J_INI_MAX};
use rotramsey::interferometry::DelayGrid;
use rotramsey::pulse::PulseSpec;
use rotramsey::rotor::{MolecularParams, DEFAULT_J_MAX};
use rotramsey::sensitivity::{NoiseModel, SensitivityConfig};
use rotramsey::units;

/// Configuration problems; always reported in the "validation" category.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Landscape,
    Interferogram,
    Spectrum,
    Sensitivity,
    ThermalDist,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Landscape => "landscape",
            Mode::Interferogram => "interferogram",
            Mode::Spectrum => "spectrum",
            Mode::Sensitivity => "sensitivity",
            Mode::ThermalDist => "thermal-dist",
        }
    }
}

macro_rules! section {
    ($name:ident { $($(#[$meta:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        #[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $(
                $(#[$meta])*
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        impl $name {
            /// Fields set in `over` win.
            fn merge(self, over: Self) -> Self {
                $name { $($field: over.$field.or(self.$field),)* }
            }
        }
    };
}

section!(MoleculeSection {
    #[serde(rename = "B_cm")]
    b_cm: f64,
    dalpha_au: f64,
    alpha_perp_au: f64,
});

section!(PulseSection {
    #[serde(rename = "I0_Wcm2")]
    i0_wcm2: f64,
    #[serde(rename = "tauI_fs")]
    tau_i_fs: f64,
});

section!(InitialSection {
    state: String,
    j_ini_max: usize,
});

section!(PropagationSection {
    j_max: usize,
    dt_fs: f64,
    window_tau: f64,
    tol: f64,
    max_refinements: usize,
    check_convergence: bool,
});

section!(ScanSection {
    start_fs: f64,
    stop_fs: f64,
    step_fs: f64,
    allow_overlap: bool,
    spectrum: bool,
    visibility_start_fs: f64,
    visibility_stop_fs: f64,
});

section!(LandscapeSection {
    #[serde(rename = "I0_start_Wcm2")]
    i0_start_wcm2: f64,
    #[serde(rename = "I0_stop_Wcm2")]
    i0_stop_wcm2: f64,
    #[serde(rename = "I0_points")]
    i0_points: usize,
    #[serde(rename = "tauI_start_fs")]
    tau_i_start_fs: f64,
    #[serde(rename = "tauI_stop_fs")]
    tau_i_stop_fs: f64,
    #[serde(rename = "tauI_points")]
    tau_i_points: usize,
});

section!(SensitivitySection {
    dalpha_au: Vec<f64>,
    intensity_ratio: f64,
    init_uncertainty: f64,
    meas_uncertainty: f64,
    n_samples: usize,
    seed: u64,
    target_j: usize,
    noise: String,
    band_k: f64,
    min_separable_fs: f64,
    window_start_fs: f64,
    window_stop_fs: f64,
});

section!(OutputSection { prefix: String });

/// Configuration file contents, every key optional.
#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default)]
    pub molecule: MoleculeSection,
    #[serde(default)]
    pub pulse1: PulseSection,
    #[serde(default)]
    pub pulse2: PulseSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub propagation: PropagationSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub landscape: LandscapeSection,
    #[serde(default)]
    pub sensitivity: SensitivitySection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RawConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| invalid(format!("{origin}: {}", e.to_string().trim_end())))
    }

    pub fn merge(self, over: RawConfig) -> RawConfig {
        RawConfig {
            mode: over.mode.or(self.mode),
            molecule: self.molecule.merge(over.molecule),
            pulse1: self.pulse1.merge(over.pulse1),
            pulse2: self.pulse2.merge(over.pulse2),
            initial: self.initial.merge(over.initial),
            propagation: self.propagation.merge(over.propagation),
            scan: self.scan.merge(over.scan),
            landscape: self.landscape.merge(over.landscape),
            sensitivity: self.sensitivity.merge(over.sensitivity),
            output: self.output.merge(over.output),
        }
    }

    /// Documented defaults for every key. Optional window bounds stay unset.
    pub fn defaults() -> RawConfig {
        let mgh = MolecularParams::mgh_plus();
        let sens = SensitivityConfig::default();
        RawConfig {
            mode: None,
            molecule: MoleculeSection {
                b_cm: Some(mgh.b_wavenumber()),
                dalpha_au: Some(mgh.dalpha),
                alpha_perp_au: Some(mgh.alpha_perp),
            },
            pulse1: PulseSection { i0_wcm2: Some(0.55e13), tau_i_fs: Some(100.0) },
            pulse2: PulseSection::default(),
            initial: InitialSection { state: Some("pure".into()), j_ini_max: Some(DEFAULT_J_INI_MAX) },
            propagation: PropagationSection {
                j_max: Some(DEFAULT_J_MAX),
                dt_fs: Some(0.5),
                window_tau: Some(3.0),
                tol: Some(1e-10),
                max_refinements: Some(4),
                check_convergence: Some(true),
            },
            scan: ScanSection {
                start_fs: Some(300.0),
                stop_fs: Some(4000.0),
                step_fs: Some(5.0),
                allow_overlap: Some(false),
                spectrum: Some(true),
                visibility_start_fs: None,
                visibility_stop_fs: None,
            },
            landscape: LandscapeSection {
                i0_start_wcm2: Some(0.05e13),
                i0_stop_wcm2: Some(2.0e13),
                i0_points: Some(40),
                tau_i_start_fs: Some(50.0),
                tau_i_stop_fs: Some(500.0),
                tau_i_points: Some(19),
            },
            sensitivity: SensitivitySection {
                dalpha_au: Some(sens.dalpha_values.clone()),
                intensity_ratio: Some(sens.intensity_ratio),
                init_uncertainty: Some(sens.init_uncertainty),
                meas_uncertainty: Some(sens.meas_uncertainty),
                n_samples: Some(sens.n_samples),
                seed: Some(sens.rng_seed),
                target_j: Some(sens.target_j),
                noise: Some("gaussian".into()),
                band_k: Some(sens.band_k),
                min_separable_fs: Some(50.0),
                window_start_fs: None,
                window_stop_fs: None,
            },
            output: OutputSection { prefix: Some(String::new()) },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }
}

pub const PRESET_NAMES: [&str; 5] = ["fig2", "fig3", "fig4", "fig6", "fig8"];

pub fn preset_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig2" => include_str!("../presets/fig2.toml"),
        "fig3" => include_str!("../presets/fig3.toml"),
        "fig4" => include_str!("../presets/fig4.toml"),
        "fig6" => include_str!("../presets/fig6.toml"),
        "fig8" => include_str!("../presets/fig8.toml"),
        _ => return None,
    })
}

/// Where the initial level distribution comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialSelector {
    Pure,
    Thermal(f64),
    File(PathBuf),
    Surrogate,
}

impl InitialSelector {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "pure" {
            return Ok(InitialSelector::Pure);
        }
        if s == "surrogate" {
            return Ok(InitialSelector::Surrogate);
        }
        if let Some(t) = s.strip_prefix("thermal:") {
            let t: f64 = t
                .trim()
                .parse()
                .map_err(|_| invalid(format!("initial.state: invalid temperature `{t}`")))?;
            return Ok(InitialSelector::Thermal(t));
        }
        if let Some(p) = s.strip_prefix("file:") {
            if p.trim().is_empty() {
                bail!(ConfigError("initial.state: empty file path".into()));
            }
            return Ok(InitialSelector::File(PathBuf::from(p.trim())));
        }
        Err(invalid(format!(
            "initial.state: expected pure | thermal:T | file:PATH | surrogate, got `{s}`"
        )))
    }

    pub fn load(&self, params: &MolecularParams, j_ini_max: usize) -> Result<InitialDistribution> {
        Ok(match self {
            InitialSelector::Pure => InitialDistribution::pure_ground(),
            InitialSelector::Thermal(t) => InitialDistribution::thermal(*t, params, j_ini_max)?,
            InitialSelector::Surrogate => InitialDistribution::surrogate_cooled(),
            InitialSelector::File(p) => InitialDistribution::load(p, j_ini_max)
                .with_context(|| format!("loading initial distribution from {}", p.display()))?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct LandscapeSpec {
    pub intensities_w_cm2: Vec<f64>,
    pub durations_fs: Vec<f64>,
}

/// Fully resolved and validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mode: Mode,
    pub resolved: RawConfig,
    pub params: MolecularParams,
    pub pulse1: PulseSpec,
    pub pulse2: PulseSpec,
    pub initial: InitialSelector,
    pub j_ini_max: usize,
    pub j_max: usize,
    pub settings: PropagationSettings,
    pub grid: DelayGrid,
    pub allow_overlap: bool,
    pub spectrum: bool,
    pub visibility_window: Option<(f64, f64)>,
    pub landscape: LandscapeSpec,
    pub sensitivity: SensitivityConfig,
    pub separability_window: Option<(f64, f64)>,
    pub out_dir: PathBuf,
    pub prefix: String,
}

impl RunConfig {
    pub fn output_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(format!("{}{name}", self.prefix))
    }

    /// Echo of the resolved configuration as a '#' comment block.
    pub fn comment_block(&self) -> String {
        let mut s = format!("# rotramsey {} {}\n", self.mode.name(), env!("CARGO_PKG_VERSION"));
        for line in self.resolved.to_toml().lines() {
            if line.is_empty() {
                s.push_str("#\n");
            } else {
                s.push_str(&format!("# {line}\n"));
            }
        }
        s
    }
}

/// Command-line overrides applied after the preset and the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub temperature: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        n => (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn window(start: Option<f64>, stop: Option<f64>) -> Option<(f64, f64)> {
    match (start, stop) {
        (None, None) => None,
        (a, b) => Some((
            a.map(units::fs_to_au).unwrap_or(f64::NEG_INFINITY),
            b.map(units::fs_to_au).unwrap_or(f64::INFINITY),
        )),
    }
}

/// Layers defaults, preset, config file and flags, then validates.
pub fn resolve(mode: Mode, ov: &Overrides) -> Result<RunConfig> {
    let mut raw = RawConfig::defaults();
    if let Some(name) = &ov.preset {
        let text = preset_text(name).ok_or_else(|| {
            invalid(format!("unknown preset `{name}` (available: {})", PRESET_NAMES.join(", ")))
        })?;
        raw = raw.merge(RawConfig::parse(text, &format!("preset {name}"))?);
    }
    if let Some(path) = &ov.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        raw = raw.merge(RawConfig::parse(&text, &path.display().to_string())?);
    }
    if let Some(seed) = ov.seed {
        raw.sensitivity.seed = Some(seed);
    }
    if let Some(t) = ov.temperature {
        raw.initial.state = Some(format!("thermal:{t}"));
    }
    if let Some(m) = &raw.mode {
        let compatible = m == mode.name() || (mode == Mode::Spectrum && m == "interferogram");
        if !compatible {
            bail!(ConfigError(format!("mode = \"{m}\" in the configuration conflicts with subcommand `{}`", mode.name())));
        }
    }
    raw.mode = Some(mode.name().to_string());
    raw.pulse2 = raw.pulse1.clone().merge(raw.pulse2);
    build(mode, raw, ov.out_dir.clone().unwrap_or_else(|| PathBuf::from(".")))
}

fn build(mode: Mode, raw: RawConfig, out_dir: PathBuf) -> Result<RunConfig> {
    let m = &raw.molecule;
    let params = MolecularParams::from_lab(m.b_cm.unwrap(), m.dalpha_au.unwrap(), m.alpha_perp_au.unwrap())
        .context("molecule")?;
    let pulse1 = PulseSpec::from_lab(raw.pulse1.i0_wcm2.unwrap(), raw.pulse1.tau_i_fs.unwrap()).context("pulse1")?;
    let pulse2 = PulseSpec::from_lab(
        raw.pulse2.i0_wcm2.unwrap(),
        raw.pulse2.tau_i_fs.unwrap(),
    )
    .context("pulse2")?;
    let initial = InitialSelector::parse(raw.initial.state.as_deref().unwrap())?;
    let j_ini_max = raw.initial.j_ini_max.unwrap();

    let p = &raw.propagation;
    let j_max = p.j_max.unwrap();
    if j_max < 2 {
        bail!(ConfigError(format!("propagation.j_max must be >= 2, got {j_max}")));
    }
    if j_ini_max > j_max {
        bail!(ConfigError(format!("initial.j_ini_max ({j_ini_max}) exceeds propagation.j_max ({j_max})")));
    }
    let settings = PropagationSettings {
        dt: units::fs_to_au(p.dt_fs.unwrap()),
        tol: p.tol.unwrap(),
        window_multiplier: p.window_tau.unwrap(),
        max_refinements: p.max_refinements.unwrap(),
        check_convergence: p.check_convergence.unwrap(),
    };
    settings.validate().context("propagation")?;

    let s = &raw.scan;
    let grid = DelayGrid::from_fs(s.start_fs.unwrap(), s.stop_fs.unwrap(), s.step_fs.unwrap()).context("scan")?;
    let visibility_window = window(s.visibility_start_fs, s.visibility_stop_fs);

    let l = &raw.landscape;
    let landscape = LandscapeSpec {
        intensities_w_cm2: linspace(l.i0_start_wcm2.unwrap(), l.i0_stop_wcm2.unwrap(), l.i0_points.unwrap()),
        durations_fs: linspace(l.tau_i_start_fs.unwrap(), l.tau_i_stop_fs.unwrap(), l.tau_i_points.unwrap()),
    };

    let sc = &raw.sensitivity;
    let noise = match sc.noise.as_deref().unwrap() {
        "gaussian" => NoiseModel::Gaussian,
        "uniform" => NoiseModel::Uniform,
        other => bail!(ConfigError(format!("sensitivity.noise: expected gaussian | uniform, got `{other}`"))),
    };
    let sensitivity = SensitivityConfig {
        dalpha_values: sc.dalpha_au.clone().unwrap(),
        intensity_ratio: sc.intensity_ratio.unwrap(),
        init_uncertainty: sc.init_uncertainty.unwrap(),
        meas_uncertainty: sc.meas_uncertainty.unwrap(),
        n_samples: sc.n_samples.unwrap(),
        rng_seed: sc.seed.unwrap(),
        target_j: sc.target_j.unwrap(),
        grid,
        noise,
        band_k: sc.band_k.unwrap(),
        min_separable: units::fs_to_au(sc.min_separable_fs.unwrap()),
    };
    if mode == Mode::Sensitivity {
        sensitivity.validate().context("sensitivity")?;
        if sensitivity.target_j > j_max {
            bail!(ConfigError(format!("sensitivity.target_j ({}) exceeds j_max ({j_max})", sensitivity.target_j)));
        }
    }
    let separability_window = window(sc.window_start_fs, sc.window_stop_fs);

    if let InitialSelector::File(path) = &initial {
        if !Path::new(path).exists() {
            bail!(rotramsey::Error::Distribution { line: 0, msg: format!("{}: file not found", path.display()) });
        }
    }

    let prefix = raw.output.prefix.clone().unwrap();
    let allow_overlap = s.allow_overlap.unwrap();
    let spectrum = s.spectrum.unwrap();
    Ok(RunConfig {
        mode,
        resolved: raw,
        params,
        pulse1,
        pulse2,
        initial,
        j_ini_max,
        j_max,
        settings,
        grid,
        allow_overlap,
        spectrum,
        visibility_window,
        landscape,
        sensitivity,
        separability_window,
        out_dir,
        prefix,
    })
}
