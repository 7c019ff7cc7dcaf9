use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{ConfigError, Mode, Overrides};

#[derive(Parser)]
#[command(name = "rotramsey", version, about = "Rotational Ramsey interferometry of trapped molecular ions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file, layered over the preset.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (default: current directory).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Monte-Carlo seed, overrides sensitivity.seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Built-in parameter set: fig2, fig3, fig4, fig6 or fig8.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Single-pulse final populations over intensity and duration.
    Landscape(Common),
    /// Two-pulse delay scan with spectrum and visibility summary.
    Interferogram(Common),
    /// Spectrum and visibility summary of a delay scan.
    Spectrum(Common),
    /// Anisotropy scan with Monte-Carlo error bands and separability.
    Sensitivity(Common),
    /// Print the configured initial level distribution.
    ThermalDist {
        #[command(flatten)]
        common: Common,
        /// Shortcut for initial.state = "thermal:T" (kelvin).
        #[arg(long, value_name = "T")]
        temperature: Option<f64>,
    },
}

fn category(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<rotramsey::Error>() {
            return e.category();
        }
        if cause.downcast_ref::<ConfigError>().is_some() {
            return "validation";
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "internal"
}

fn exit_code(category: &str) -> u8 {
    match category {
        "validation" => 2,
        "distribution" => 3,
        "propagation" => 4,
        "analysis" => 5,
        "io" => 6,
        _ => 1,
    }
}

/// Chain of messages, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if parts.last().is_some_and(|prev| prev.contains(&msg)) {
            continue;
        }
        parts.push(msg);
    }
    parts.join(": ")
}

fn run(cli: Cli) -> Result<()> {
    let (mode, common, temperature) = match cli.command {
        Command::Landscape(c) => (Mode::Landscape, c, None),
        Command::Interferogram(c) => (Mode::Interferogram, c, None),
        Command::Spectrum(c) => (Mode::Spectrum, c, None),
        Command::Sensitivity(c) => (Mode::Sensitivity, c, None),
        Command::ThermalDist { common, temperature } => (Mode::ThermalDist, common, temperature),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(ConfigError("--threads must be >= 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring thread pool")?;
    }
    let overrides = Overrides {
        preset: common.preset.clone(),
        config: common.config.clone(),
        seed: common.seed,
        temperature,
        out_dir: common.out.clone(),
    };
    let cfg = config::resolve(mode, &overrides)?;
    let written = match mode {
        Mode::Landscape => commands::landscape(&cfg)?,
        Mode::Interferogram => commands::interferogram(&cfg)?,
        Mode::Spectrum => commands::spectrum_only(&cfg)?,
        Mode::Sensitivity => commands::sensitivity(&cfg)?,
        Mode::ThermalDist => {
            let text = commands::thermal_dist(&cfg)?;
            std::io::stdout().write_all(text.as_bytes())?;
            if common.out.is_some() {
                let path = cfg.output_path("initial_distribution.csv");
                std::fs::create_dir_all(&cfg.out_dir)?;
                std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
                vec![path]
            } else {
                Vec::new()
            }
        }
    };
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let cat = category(&err);
            eprintln!("error[{cat}]: {}", describe(&err));
            ExitCode::from(exit_code(cat))
        }
    }
}
