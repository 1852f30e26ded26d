//! TOML run configuration.
//!
//! Units: distances in meters, noise floor in dB relative to the mean
//! received power, NMSE as a linear ratio.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use dmimo::dataset::{read_dataset, GridSpec};
use dmimo::geometry::{AmplitudeModel, ArrayGeometry, LosChannelParams, Point3, Region, DEFAULT_WAVELENGTH};
use dmimo::precoders::{InfoSet, PrecoderEntry, PrecoderSpec};
use dmimo::scenarios::{
    default_ue_region, ChannelSource, DatasetChannels, ScenarioConfig, DEFAULT_MIN_SPACING, DEFAULT_NOISE_FLOOR_DB,
    DEFAULT_TRIALS,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub schema_version: u32,
    /// Antenna layout; defaults to the 8 × 8 perimeter testbed, or to the
    /// dataset's layout when the scenario reads a dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryConfig>,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateSection>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    #[default]
    Perimeter,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub layout: Layout,
    pub wavelength_m: f64,
    // Perimeter layout.
    pub side_m: f64,
    pub aps_per_side: usize,
    pub antennas_per_ap: usize,
    /// Element spacing; half a wavelength when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing_m: Option<f64>,
    // Explicit layout.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub antenna_positions: Option<Vec<Point3>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap_partition: Option<Vec<Vec<usize>>>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            layout: Layout::Perimeter,
            wavelength_m: DEFAULT_WAVELENGTH,
            side_m: 6.0,
            aps_per_side: 2,
            antennas_per_ap: 8,
            spacing_m: None,
            antenna_positions: None,
            ap_partition: None,
        }
    }
}

impl GeometryConfig {
    pub fn build(&self) -> Result<ArrayGeometry, CliError> {
        let geometry = match self.layout {
            Layout::Perimeter => {
                if self.antenna_positions.is_some() || self.ap_partition.is_some() {
                    return Err(CliError::config(
                        "antenna_positions/ap_partition require layout = \"explicit\"",
                    ));
                }
                ArrayGeometry::perimeter(
                    self.side_m,
                    self.aps_per_side,
                    self.antennas_per_ap,
                    self.spacing_m.unwrap_or(self.wavelength_m / 2.0),
                    self.wavelength_m,
                )
            }
            Layout::Explicit => {
                let (Some(positions), Some(partition)) = (&self.antenna_positions, &self.ap_partition) else {
                    return Err(CliError::config("explicit layout needs antenna_positions and ap_partition"));
                };
                ArrayGeometry::new(positions.clone(), partition.clone(), self.wavelength_m)
            }
        };
        geometry.map_err(|e| CliError::Core(e.context("geometry")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub amplitude_model: AmplitudeModel,
    pub reference_gain: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            amplitude_model: AmplitudeModel::FreeSpace,
            reference_gain: 1.0,
        }
    }
}

impl ChannelConfig {
    pub fn params(&self, wavelength: f64) -> LosChannelParams {
        LosChannelParams {
            wavelength,
            amplitude_model: self.amplitude_model,
            reference_gain: self.reference_gain,
        }
    }
}

/// A precoder given by name (`"RZF_nf"`) or spelled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PrecoderConfig {
    Name(String),
    Custom(CustomPrecoder),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomPrecoder {
    pub label: String,
    pub spec: PrecoderSpec,
    /// Information the precoder may read; defaults to what it requires.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grants: Option<InfoSet>,
}

impl PrecoderConfig {
    pub fn entry(&self) -> Result<PrecoderEntry, CliError> {
        match self {
            PrecoderConfig::Name(name) => Ok(PrecoderEntry::named(name)?),
            PrecoderConfig::Custom(c) => Ok(PrecoderEntry {
                label: c.label.clone(),
                spec: c.spec,
                grants: c.grants.unwrap_or_else(|| c.spec.requirements()),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    /// Dataset directory, relative to the config file.
    pub path: PathBuf,
    #[serde(default)]
    pub tx: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub k_users: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_noise_floor")]
    pub noise_floor_db: f64,
    #[serde(default = "default_min_spacing")]
    pub min_spacing_m: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_ue_region")]
    pub ue_region: Region,
    pub precoders: Vec<PrecoderConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmse_grid: Option<Vec<f64>>,
    /// Groups of access-point indices; each user is served by one group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clustering: Option<Vec<Vec<usize>>>,
    /// Measured channels instead of synthetic LoS.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSource>,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}
fn default_noise_floor() -> f64 {
    DEFAULT_NOISE_FLOOR_DB
}
fn default_min_spacing() -> f64 {
    DEFAULT_MIN_SPACING
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSection {
    pub grid: GridSpec,
    #[serde(default = "one")]
    pub tx_count: usize,
    /// Draw random per-pair phase offsets with this seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_seed: Option<u64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory, relative to the config file; `--out` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// A parsed config together with the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub file: RunConfigFile,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| dmimo::Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file = parse(&text).map_err(|e| match e {
            CliError::Toml(msg) => CliError::Toml(format!("{}: {msg}", path.display())),
            e => e,
        })?;
        Ok(LoadedConfig {
            file,
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self, cli_out: Option<&Path>) -> Result<PathBuf, CliError> {
        match (cli_out, &self.file.output.dir) {
            (Some(p), _) => Ok(p.to_path_buf()),
            (None, Some(p)) => Ok(self.resolve(p)),
            (None, None) => Err(CliError::config("no output directory: pass --out or set [output] dir")),
        }
    }

    pub fn geometry(&self) -> Result<ArrayGeometry, CliError> {
        self.file.geometry.clone().unwrap_or_default().build()
    }

    pub fn scenario_section(&self) -> Result<&ScenarioSection, CliError> {
        self.file
            .scenario
            .as_ref()
            .ok_or_else(|| CliError::config("config has no [scenario] section"))
    }

    /// Builds and validates the scenario; reads the dataset if one is configured.
    pub fn scenario(&self) -> Result<ScenarioConfig, CliError> {
        let s = self.scenario_section()?;
        let (geometry, channel_source) = match &s.dataset {
            None => {
                let geometry = self.geometry()?;
                let params = self.file.channel.params(geometry.wavelength());
                (geometry, ChannelSource::SyntheticLos(params))
            }
            Some(d) => {
                let (grid, manifest) = read_dataset(&self.resolve(&d.path))?;
                let geometry = match &self.file.geometry {
                    Some(g) => g.build()?,
                    None => manifest.geometry()?,
                };
                (geometry, ChannelSource::Dataset(Arc::new(DatasetChannels { grid, tx: d.tx })))
            }
        };
        let config = ScenarioConfig {
            geometry,
            ue_region: s.ue_region,
            k_users: s.k_users,
            trials: s.trials,
            noise_floor_db: s.noise_floor_db,
            min_spacing_m: s.min_spacing_m,
            precoders: s.precoders.iter().map(PrecoderConfig::entry).collect::<Result<_, _>>()?,
            nmse_grid: s.nmse_grid.clone(),
            clustering: s.clustering.clone(),
            rng_seed: s.rng_seed,
            channel_source,
        };
        config.validate()?;
        Ok(config)
    }
}

pub fn parse(text: &str) -> Result<RunConfigFile, CliError> {
    let raw: toml::Table = toml::from_str(text).map_err(|e| CliError::Toml(e.to_string()))?;
    match raw.get("schema_version").and_then(toml::Value::as_integer) {
        Some(v) if v == i64::from(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(CliError::config(format!(
                "unsupported schema_version {v} (expected {SCHEMA_VERSION})"
            )))
        }
        None => return Err(CliError::config("missing integer schema_version")),
    }
    toml::from_str(text).map_err(|e| CliError::Toml(e.to_string()))
}
