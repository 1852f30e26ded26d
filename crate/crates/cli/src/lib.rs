//! Command implementations behind the `dmimo` binary.

pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use dmimo::calibration::{apply_calibration, estimate_offsets, los_reference, residual_phase_error};
use dmimo::dataset::{generate_synthetic_dataset, read_dataset, write_dataset};
use dmimo::scenarios::{run_scenario, write_results_csv, ScenarioSummary};
use dmimo::ErrorClass;
use serde::Serialize;
use thiserror::Error;

use config::{LoadedConfig, RunConfigFile};

pub const OFFSETS_FILE: &str = "offsets.csv";
pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dmimo::Error),
    #[error("invalid config: {0}")]
    Toml(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Core(dmimo::Error::Config(msg.into()))
    }

    /// 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Toml(_) => 1,
            CliError::Core(e) => match e.class() {
                ErrorClass::Config => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numerical => 3,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dmimo", version, about = "Location-informed precoding simulations for distributed massive MIMO")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic line-of-sight CSI dataset.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Dataset directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate and remove per-antenna-pair phase offsets of a dataset.
    Calibrate {
        #[arg(long)]
        dataset: PathBuf,
        /// Config whose [geometry] replaces the dataset's antenna layout.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for offsets.csv and the calibrated dataset.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo scenario and write results.csv and summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the configured RNG seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

pub fn run(cli: Cli, stdout: &mut impl Write) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { config, out } => cmd_generate(&config, out.as_deref(), stdout),
        Command::Calibrate { dataset, config, out } => cmd_calibrate(&dataset, config.as_deref(), &out, stdout),
        Command::Simulate {
            config,
            out,
            trials,
            seed,
        } => cmd_simulate(&config, out.as_deref(), trials, seed, stdout),
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| {
        CliError::Core(dmimo::Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn cmd_generate(config: &Path, out: Option<&Path>, stdout: &mut impl Write) -> Result<(), CliError> {
    let loaded = LoadedConfig::load(config)?;
    let section = loaded
        .file
        .generate
        .as_ref()
        .ok_or_else(|| CliError::config("config has no [generate] section"))?;
    let geometry = loaded.geometry()?;
    let params = loaded.file.channel.params(geometry.wavelength());
    let (grid, manifest, offsets) =
        generate_synthetic_dataset(&geometry, &section.grid, section.tx_count, &params, section.offset_seed)?;
    let dir = loaded.output_dir(out)?;
    write_dataset(&grid, &manifest, &dir)?;
    if let Some(table) = offsets {
        table.write_csv(&dir.join("injected_offsets.csv"))?;
    }
    writeln!(
        stdout,
        "wrote {} CSI values ({} tx × {} rx × {} points) to {}",
        grid.present_count(),
        grid.tx_count(),
        grid.rx_count(),
        grid.num_points(),
        dir.display()
    )
    .map_err(io_error(Path::new("<stdout>")))?;
    Ok(())
}

pub fn cmd_calibrate(
    dataset: &Path,
    config: Option<&Path>,
    out: &Path,
    stdout: &mut impl Write,
) -> Result<(), CliError> {
    let (grid, mut manifest) = read_dataset(dataset)?;
    if let Some(path) = config {
        let loaded = LoadedConfig::load(path)?;
        if let Some(g) = &loaded.file.geometry {
            let geometry = g.build()?;
            if geometry.num_antennas() != manifest.rx_count {
                return Err(CliError::config(format!(
                    "config geometry has {} antennas, dataset has {} rx",
                    geometry.num_antennas(),
                    manifest.rx_count
                )));
            }
            manifest.rx_positions = geometry.antenna_positions().to_vec();
            manifest.ap_partition = Some(geometry.ap_partition().to_vec());
            manifest.wavelength = geometry.wavelength();
        }
    }
    let los = los_reference(&manifest)?;
    let table = estimate_offsets(&grid, &los)?;
    let calibrated = apply_calibration(&grid, &table)?;
    let (mean, max) = residual_phase_error(&calibrated, &los)?;
    write_dataset(&calibrated, &manifest, out)?;
    table.write_csv(&out.join(OFFSETS_FILE))?;
    writeln!(
        stdout,
        "calibrated {} antenna pairs; mean residual phase error {mean:e} rad (max {max:e} rad)",
        table.len()
    )
    .map_err(io_error(Path::new("<stdout>")))?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    config: &'a RunConfigFile,
    noise_variance: f64,
    reference_power: f64,
    rows: &'a [dmimo::scenarios::SummaryRow],
}

pub fn cmd_simulate(
    config: &Path,
    out: Option<&Path>,
    trials: Option<usize>,
    seed: Option<u64>,
    stdout: &mut impl Write,
) -> Result<(), CliError> {
    let mut loaded = LoadedConfig::load(config)?;
    {
        let s = loaded
            .file
            .scenario
            .as_mut()
            .ok_or_else(|| CliError::config("config has no [scenario] section"))?;
        if let Some(t) = trials {
            s.trials = t;
        }
        if let Some(seed) = seed {
            s.rng_seed = seed;
        }
    }
    let scenario = loaded.scenario()?;
    let dir = loaded.output_dir(out)?;
    let run = run_scenario(&scenario)?;

    fs::create_dir_all(&dir).map_err(io_error(&dir))?;
    let results_path = dir.join(RESULTS_FILE);
    let file = fs::File::create(&results_path).map_err(io_error(&results_path))?;
    write_results_csv(&scenario, &run.trials, std::io::BufWriter::new(file))?;

    let ScenarioSummary {
        noise_variance,
        reference_power,
        rows,
    } = &run.summary;
    let summary = SummaryFile {
        config: &loaded.file,
        noise_variance: *noise_variance,
        reference_power: *reference_power,
        rows,
    };
    let summary_path = dir.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&summary_path, json + "\n").map_err(io_error(&summary_path))?;

    let w = |e| io_error(Path::new("<stdout>"))(e);
    for row in rows {
        let nmse = row.nmse_target.map(|v| format!(" @ NMSE {v}")).unwrap_or_default();
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2} dB"));
        writeln!(
            stdout,
            "{}{nmse}: median {}, 90% guaranteed {}, failures {}/{}",
            row.precoder,
            fmt(row.median_db),
            fmt(row.guaranteed_90_db),
            row.failures,
            row.trials
        )
        .map_err(w)?;
    }
    writeln!(stdout, "wrote {} and {}", results_path.display(), summary_path.display()).map_err(w)?;
    Ok(())
}
