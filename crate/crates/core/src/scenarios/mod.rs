//! Monte Carlo evaluation of precoders over random user drops.
//!
//! Each trial drops `K` users, derives their channels (synthetic LoS or a
//! measured grid), optionally corrupts the CSI handed to the precoders, and
//! evaluates the SINR of every user for every configured precoder against
//! the true channel. Trials are independent and run in parallel; per-trial
//! randomness comes from [`trial_seeds`], so results do not depend on the
//! thread count.

mod cluster;
mod report;

pub use cluster::{cluster_by_gain, cluster_users, group_antennas, ClusterAssignment};
pub use report::{summarize, write_results_csv, ScenarioSummary, SummaryRow, RESULTS_HEADER};

use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::CsiGrid;
use crate::error::{Error, Result};
use crate::geometry::{los_channel, place_ues, ArrayGeometry, LosChannelParams, Point3, Region};
use crate::linalg::CVector;
use crate::metrics::{from_db, inject_channel_error, sinr_all, ChannelErrorModel, LinkRealization};
use crate::precoders::{
    build_precoding_matrix, BaseVector, ChannelMatrix, InfoAccess, NoiseReference, PrecoderEntry, Scope,
};

/// Default trial count for scenario runs.
pub const DEFAULT_TRIALS: usize = 10_000;
pub const DEFAULT_NOISE_FLOOR_DB: f64 = -20.0;
pub const DEFAULT_MIN_SPACING: f64 = 0.10;

/// Measured CSI used as the channel source: user `k` at grid point `p`
/// sees `grid[tx, :, p]`.
#[derive(Debug, Clone)]
pub struct DatasetChannels {
    pub grid: CsiGrid,
    pub tx: usize,
}

#[derive(Debug, Clone)]
pub enum ChannelSource {
    SyntheticLos(LosChannelParams),
    Dataset(Arc<DatasetChannels>),
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub geometry: ArrayGeometry,
    /// Region users are dropped in.
    pub ue_region: Region,
    pub k_users: usize,
    pub trials: usize,
    pub noise_floor_db: f64,
    pub min_spacing_m: f64,
    pub precoders: Vec<PrecoderEntry>,
    /// Target NMSE values of the CSI given to the precoders.
    pub nmse_grid: Option<Vec<f64>>,
    /// Groups of access points; each user is served by one group.
    pub clustering: Option<Vec<Vec<usize>>>,
    pub rng_seed: u64,
    pub channel_source: ChannelSource,
}

impl ScenarioConfig {
    /// Synthetic free-space LoS scenario on the default testbed with the
    /// given precoders.
    pub fn synthetic(k_users: usize, trials: usize, precoders: &[&str], rng_seed: u64) -> Result<Self> {
        let geometry = ArrayGeometry::default_testbed();
        let params = LosChannelParams::new(geometry.wavelength(), Default::default());
        Ok(ScenarioConfig {
            geometry,
            ue_region: default_ue_region(),
            k_users,
            trials,
            noise_floor_db: DEFAULT_NOISE_FLOOR_DB,
            min_spacing_m: DEFAULT_MIN_SPACING,
            precoders: precoders.iter().map(|n| PrecoderEntry::named(n)).collect::<Result<_>>()?,
            nmse_grid: None,
            clustering: None,
            rng_seed,
            channel_source: ChannelSource::SyntheticLos(params),
        })
    }

    /// Checks everything that can be checked before a trial runs, including
    /// that every precoder was granted the information it reads.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return cfg("trials must be at least 1".into());
        }
        if self.k_users == 0 {
            return cfg("at least one user is required".into());
        }
        if !self.noise_floor_db.is_finite() {
            return cfg("noise floor must be finite".into());
        }
        if !(self.min_spacing_m >= 0.0) || !self.min_spacing_m.is_finite() {
            return cfg(format!("invalid min spacing {}", self.min_spacing_m));
        }
        self.ue_region.validate()?;
        if self.precoders.is_empty() {
            return cfg("no precoders configured".into());
        }
        let mut labels = std::collections::BTreeSet::new();
        for p in &self.precoders {
            p.validate()?;
            if !labels.insert(p.label.as_str()) {
                return cfg(format!("precoder label `{}` used twice", p.label));
            }
            if p.spec.base == BaseVector::FarField && p.spec.scope == Scope::Centralized {
                let single_arrays = match &self.clustering {
                    None => self.geometry.num_aps() == 1,
                    Some(groups) => groups.iter().all(|g| g.len() == 1),
                };
                if !single_arrays {
                    return cfg(format!(
                        "`{}`: far-field weights need a single linear array; use the distributed scope",
                        p.label
                    ));
                }
            }
        }
        if let Some(grid) = &self.nmse_grid {
            if grid.is_empty() {
                return cfg("nmse_grid is empty".into());
            }
            if let Some(v) = grid.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return cfg(format!("invalid NMSE value {v}"));
            }
        }
        if let Some(groups) = &self.clustering {
            let mut seen = vec![false; self.geometry.num_aps()];
            for ap in groups.iter().flatten() {
                match seen.get_mut(*ap) {
                    None => return cfg(format!("clustering references unknown access point {ap}")),
                    Some(true) => return cfg(format!("access point {ap} appears in two clusters")),
                    Some(s) => *s = true,
                }
            }
            if let Some(ap) = seen.iter().position(|s| !s) {
                return cfg(format!("access point {ap} is not in any cluster"));
            }
        }
        if let ChannelSource::Dataset(d) = &self.channel_source {
            if d.grid.rx_count() != self.geometry.num_antennas() {
                return cfg(format!(
                    "dataset has {} rx antennas, geometry has {}",
                    d.grid.rx_count(),
                    self.geometry.num_antennas()
                ));
            }
            if d.tx >= d.grid.tx_count() {
                return cfg(format!("dataset tx {} out of range", d.tx));
            }
            if complete_points(d).is_empty() {
                return Err(Error::NoData.context("dataset has no grid point with CSI on every rx antenna"));
            }
        }
        Ok(())
    }
}

/// Central 3 m × 3 m square of the default testbed.
pub fn default_ue_region() -> Region {
    Region {
        min: Point3::new(1.5, 1.5, 0.0),
        max: Point3::new(4.5, 4.5, 0.0),
    }
}

/// Seeds for user placement and CSI error of one trial: the first two
/// outputs of ChaCha8 seeded with `rng_seed` on stream `trial`.
pub fn trial_seeds(rng_seed: u64, trial: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(trial as u64);
    (rng.next_u64(), rng.next_u64())
}

fn complete_points(d: &DatasetChannels) -> Vec<usize> {
    (0..d.grid.num_points())
        .filter(|&p| (0..d.grid.rx_count()).all(|rx| d.grid.get(d.tx, rx, p).is_some()))
        .collect()
}

/// User positions and true channels of one trial.
pub fn trial_channels(config: &ScenarioConfig, trial: usize) -> Result<(Vec<Point3>, ChannelMatrix)> {
    let (placement_seed, _) = trial_seeds(config.rng_seed, trial);
    let drop = place_ues(&config.ue_region, config.k_users, config.min_spacing_m, placement_seed)?;
    match &config.channel_source {
        ChannelSource::SyntheticLos(params) => {
            let cols = drop
                .positions
                .iter()
                .map(|p| los_channel(&config.geometry, p, params))
                .collect::<Result<Vec<_>>>()?;
            Ok((drop.positions, ChannelMatrix::from_columns(&cols)?))
        }
        ChannelSource::Dataset(d) => {
            let usable = complete_points(d);
            let mut positions = Vec::with_capacity(config.k_users);
            let mut cols = Vec::with_capacity(config.k_users);
            for p in &drop.positions {
                let idx = *usable
                    .iter()
                    .min_by(|a, b| {
                        let da = d.grid.points()[**a].position().distance(p);
                        let db = d.grid.points()[**b].position().distance(p);
                        da.total_cmp(&db)
                    })
                    .ok_or(Error::NoData)?;
                positions.push(d.grid.points()[idx].position());
                cols.push(CVector::from_iterator(
                    d.grid.rx_count(),
                    (0..d.grid.rx_count()).map(|rx| d.grid.get(d.tx, rx, idx).expect("complete point")),
                ));
            }
            Ok((positions, ChannelMatrix::from_columns(&cols)?))
        }
    }
}

/// Noise level of a scenario: the configured floor relative to the mean
/// of `‖h_k‖²` over all users and trials.
pub fn noise_reference(config: &ScenarioConfig) -> Result<NoiseReference> {
    let per_trial = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let (_, h) = trial_channels(config, t)?;
            Ok(h.as_matrix().iter().map(|z| z.norm_sqr()).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let reference_power = per_trial.iter().sum::<f64>() / (config.trials * config.k_users) as f64;
    Ok(NoiseReference {
        variance: from_db(config.noise_floor_db) * reference_power,
        reference_power,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderOutcome {
    /// SINR in dB of every user.
    Sinr(Vec<f64>),
    Failed(String),
}

/// All precoder outcomes of one trial at one CSI quality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialPoint {
    pub nmse_target: Option<f64>,
    pub realized_nmse: Option<f64>,
    pub clusters: Option<Vec<usize>>,
    /// One entry per configured precoder, in configuration order.
    pub outcomes: Vec<PrecoderOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub positions: Vec<Point3>,
    /// One entry per NMSE grid value (a single entry without a grid).
    pub points: Vec<TrialPoint>,
}

pub fn run_trial(config: &ScenarioConfig, noise: &NoiseReference, trial: usize) -> Result<TrialResult> {
    let (positions, h) = trial_channels(config, trial)?;
    let (_, error_seed) = trial_seeds(config.rng_seed, trial);
    let cluster_antennas = match &config.clustering {
        Some(groups) => Some(group_antennas(&config.geometry, groups)?),
        None => None,
    };
    let targets: Vec<Option<f64>> = match &config.nmse_grid {
        Some(g) => g.iter().map(|v| Some(*v)).collect(),
        None => vec![None],
    };
    let entry_power = h.as_matrix().iter().map(|z| z.norm_sqr()).sum::<f64>()
        / (h.num_antennas() * h.num_users()) as f64;

    let mut points = Vec::with_capacity(targets.len());
    for target in targets {
        let (estimate, realized) = match target {
            Some(nmse) => {
                let model = ChannelErrorModel {
                    variance: nmse * entry_power,
                    rng_seed: error_seed,
                };
                let (e, r) = inject_channel_error(&h, &model)?;
                (e, Some(r))
            }
            None => (h.clone(), None),
        };
        let (assignment, view) = match (&config.clustering, &cluster_antennas) {
            (Some(groups), Some(antennas)) => {
                let a = cluster_users(&estimate, &config.geometry, groups)?;
                let v = a.view(antennas.clone());
                (Some(a.ue_to_group), Some(v))
            }
            _ => (None, None),
        };
        let outcomes = config
            .precoders
            .iter()
            .map(|entry| {
                let mut access = InfoAccess::new(&config.geometry, entry.grants, *noise)
                    .with_csi(&estimate)
                    .with_positions(&positions);
                if let Some(v) = &view {
                    access = access.with_clusters(v);
                }
                match build_precoding_matrix(&entry.spec, &access) {
                    Ok(w) => {
                        let link = LinkRealization::new(&h, &w, noise.variance)?;
                        Ok(PrecoderOutcome::Sinr(sinr_all(&link).into_iter().map(|s| s.db).collect()))
                    }
                    Err(e) if matches!(e.root(), Error::NotGranted(_) | Error::Config(_)) => Err(e),
                    Err(e) => Ok(PrecoderOutcome::Failed(e.to_string())),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        points.push(TrialPoint {
            nmse_target: target,
            realized_nmse: realized,
            clusters: assignment,
            outcomes,
        });
    }
    Ok(TrialResult {
        trial,
        positions,
        points,
    })
}

/// Everything a scenario run produces.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub noise: NoiseReference,
    pub trials: Vec<TrialResult>,
    pub summary: ScenarioSummary,
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun> {
    config.validate()?;
    let noise = noise_reference(config)?;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, &noise, t).map_err(|e| e.context(format!("trial {t}"))))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(config, &noise, &trials)?;
    Ok(ScenarioRun {
        noise,
        trials,
        summary,
    })
}
