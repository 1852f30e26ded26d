//! Per-antenna-pair hardware phase calibration of CSI grids.
//!
//! Every (tx, rx) pair gets one compensation phase `φ` chosen so that
//! `exp(jφ)·H_emp` phase-aligns with the theoretical line-of-sight channel
//! over all grid points. The least-squares optimum over unit phasors is the
//! angle of the summed products `exp(j∠H_los)·exp(−j∠H_emp)`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{los_grid, CsiGrid, DatasetManifest};
use crate::error::{Error, Result};
use crate::geometry::{AmplitudeModel, LosChannelParams};
use crate::linalg::{phasor, wrap_phase};

/// Compensation phase per (tx, rx) antenna pair, in `(−π, π]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhaseOffsetTable {
    offsets: BTreeMap<(usize, usize), f64>,
}

impl PhaseOffsetTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, tx: usize, rx: usize, radians: f64) {
        self.offsets.insert((tx, rx), radians);
    }

    pub fn get(&self, tx: usize, rx: usize) -> Option<f64> {
        self.offsets.get(&(tx, rx)).copied()
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.offsets.iter().map(|(k, v)| (*k, *v))
    }

    /// Table undoing this one.
    pub fn negated(&self) -> PhaseOffsetTable {
        PhaseOffsetTable {
            offsets: self.offsets.iter().map(|(k, v)| (*k, wrap_phase(-v))).collect(),
        }
    }

    /// Writes `tx,rx,offset_radians` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        let mut body = || -> std::io::Result<()> {
            writeln!(f, "tx,rx,offset_radians")?;
            for ((tx, rx), phi) in self.iter() {
                writeln!(f, "{tx},{rx},{phi:?}")?;
            }
            f.flush()
        };
        body().map_err(io)
    }

    pub fn read_csv(path: &Path) -> Result<PhaseOffsetTable> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })?;
        let mut table = PhaseOffsetTable::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.position().map_or(0, |p| p.line()),
                msg: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let bad = || Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: "expected tx,rx,offset_radians".into(),
            };
            if record.len() != 3 {
                return Err(bad());
            }
            let tx = record[0].trim().parse().map_err(|_| bad())?;
            let rx = record[1].trim().parse().map_err(|_| bad())?;
            let phi: f64 = record[2].trim().parse().map_err(|_| bad())?;
            table.insert(tx, rx, phi);
        }
        Ok(table)
    }
}

/// Compensation phase for one antenna pair from its empirical and
/// line-of-sight values over the grid. Points missing (or zero) on either
/// side are skipped.
pub fn estimate_phase_offset(empirical: &[Option<Complex64>], los: &[Option<Complex64>]) -> Result<f64> {
    if empirical.len() != los.len() {
        return Err(Error::Dimension(format!(
            "empirical slice has {} points, LoS slice {}",
            empirical.len(),
            los.len()
        )));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let mut used = 0usize;
    for (e, l) in empirical.iter().zip(los) {
        if let (Some(e), Some(l)) = (e, l) {
            if e.norm() == 0.0 || l.norm() == 0.0 {
                continue;
            }
            sum += phasor(l.arg()) * phasor(-e.arg());
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::NoData);
    }
    if sum.norm() <= 1e-9 * used as f64 {
        return Err(Error::Unidentifiable);
    }
    Ok(wrap_phase(sum.arg()))
}

/// Phase-only misfit `Σ |exp(j∠H_los) − exp(jφ)·exp(j∠H_emp)|²` minimized by
/// [`estimate_phase_offset`].
pub fn calibration_objective(empirical: &[Option<Complex64>], los: &[Option<Complex64>], phi: f64) -> f64 {
    empirical
        .iter()
        .zip(los)
        .filter_map(|(e, l)| match (e, l) {
            (Some(e), Some(l)) if e.norm() > 0.0 && l.norm() > 0.0 => {
                Some((phasor(l.arg()) - phasor(phi) * phasor(e.arg())).norm_sqr())
            }
            _ => None,
        })
        .sum()
}

/// Theoretical LoS reference for a dataset (phases only matter).
pub fn los_reference(manifest: &DatasetManifest) -> Result<CsiGrid> {
    let geometry = manifest.geometry()?;
    let params = LosChannelParams::new(manifest.wavelength, AmplitudeModel::UnitMagnitude);
    los_grid(&geometry, manifest.grid.clone(), manifest.tx_count, &params)
}

/// Estimates every pair of `grid` against `los`. All failing pairs are
/// reported together.
pub fn estimate_offsets(grid: &CsiGrid, los: &CsiGrid) -> Result<PhaseOffsetTable> {
    if grid.tx_count() != los.tx_count() || grid.rx_count() != los.rx_count() || grid.points() != los.points() {
        return Err(Error::Dimension("empirical and LoS grids differ in shape".into()));
    }
    let pairs: Vec<(usize, usize)> = grid.pairs().collect();
    let results: Vec<_> = pairs
        .par_iter()
        .map(|&(tx, rx)| (tx, rx, estimate_phase_offset(grid.pair(tx, rx), los.pair(tx, rx))))
        .collect();
    let mut table = PhaseOffsetTable::new();
    let mut failed = Vec::new();
    let mut first_error = None;
    for (tx, rx, r) in results {
        match r {
            Ok(phi) => table.insert(tx, rx, phi),
            Err(e) => {
                failed.push(format!("({tx}, {rx})"));
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        None => Ok(table),
        Some(e) => Err(e.context(format!("antenna pairs {}", failed.join(" ")))),
    }
}

/// Multiplies every value of pair `(t, r)` by `exp(jφ_t^r)`.
pub fn apply_calibration(grid: &CsiGrid, table: &PhaseOffsetTable) -> Result<CsiGrid> {
    let mut out = grid.clone();
    for (tx, rx) in grid.pairs() {
        let phi = table.get(tx, rx).ok_or(Error::Coverage { tx, rx })?;
        let rot = phasor(phi);
        for v in out.pair_mut(tx, rx).iter_mut().flatten() {
            *v *= rot;
        }
    }
    Ok(out)
}

/// Applies one uniform `(−π, π]` phase offset per antenna pair, drawn in
/// (tx, rx) order from a seeded generator. Returns the offset grid and the
/// injected offsets.
pub fn inject_hardware_offsets(grid: &CsiGrid, rng_seed: u64) -> (CsiGrid, PhaseOffsetTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut table = PhaseOffsetTable::new();
    for (tx, rx) in grid.pairs() {
        let u: f64 = rng.random();
        table.insert(tx, rx, std::f64::consts::PI - std::f64::consts::TAU * u);
    }
    let out = apply_calibration(grid, &table).expect("table covers every pair");
    (out, table)
}

/// Mean and maximum absolute phase difference (wrapped) between `grid` and
/// `los` over all points present in both.
pub fn residual_phase_error(grid: &CsiGrid, los: &CsiGrid) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut max: f64 = 0.0;
    let mut n = 0usize;
    for (tx, rx) in grid.pairs() {
        for (e, l) in grid.pair(tx, rx).iter().zip(los.pair(tx, rx)) {
            if let (Some(e), Some(l)) = (e, l) {
                let d = wrap_phase(e.arg() - l.arg()).abs();
                total += d;
                max = max.max(d);
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::NoData);
    }
    Ok((total / n as f64, max))
}
