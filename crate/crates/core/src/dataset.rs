//! CSI grids and their on-disk format.
//!
//! A dataset is a directory holding `manifest.json` (geometry and grid
//! description) and `csi.csv` with header `tx,rx,m,n,re,im`, one row per
//! available CSI value. Absent rows mark missing measurements. Floats are
//! written in shortest round-trip form, so a write/read cycle is lossless.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calibration::{inject_hardware_offsets, PhaseOffsetTable};
use crate::error::{Error, Result};
use crate::geometry::{los_channel, ArrayGeometry, LosChannelParams, Point3};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CSI_FILE: &str = "csi.csv";
pub const CSI_HEADER: [&str; 6] = ["tx", "rx", "m", "n", "re", "im"];

/// One measurement position, indexed by its grid coordinates `(m, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub m: usize,
    pub n: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl GridPoint {
    pub fn position(&self) -> Point3 {
        Point3::new(self.x, self.y, self.z)
    }
}

/// CSI between every (tx antenna, rx antenna) pair over a set of grid
/// positions. The tx antenna is the one moved over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiGrid {
    tx_count: usize,
    rx_count: usize,
    points: Vec<GridPoint>,
    values: Vec<Option<Complex64>>,
}

impl CsiGrid {
    /// Grid with every value missing.
    pub fn empty(tx_count: usize, rx_count: usize, points: Vec<GridPoint>) -> Result<Self> {
        if tx_count == 0 || rx_count == 0 {
            return Err(Error::Dimension("CSI grid needs at least one tx and one rx antenna".into()));
        }
        let mut seen = BTreeSet::new();
        for p in &points {
            if !p.position().is_finite() {
                return Err(Error::Consistency(format!("grid point ({}, {}) is not finite", p.m, p.n)));
            }
            if !seen.insert((p.m, p.n)) {
                return Err(Error::Consistency(format!("grid point ({}, {}) listed twice", p.m, p.n)));
            }
        }
        let len = tx_count * rx_count * points.len();
        Ok(CsiGrid {
            tx_count,
            rx_count,
            points,
            values: vec![None; len],
        })
    }

    pub fn tx_count(&self) -> usize {
        self.tx_count
    }

    pub fn rx_count(&self) -> usize {
        self.rx_count
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    fn offset(&self, tx: usize, rx: usize) -> usize {
        assert!(tx < self.tx_count && rx < self.rx_count, "antenna pair ({tx}, {rx}) out of range");
        (tx * self.rx_count + rx) * self.points.len()
    }

    pub fn get(&self, tx: usize, rx: usize, point: usize) -> Option<Complex64> {
        self.values[self.offset(tx, rx) + point]
    }

    pub fn set(&mut self, tx: usize, rx: usize, point: usize, value: Option<Complex64>) {
        let o = self.offset(tx, rx);
        self.values[o + point] = value;
    }

    /// Values of one antenna pair over all grid points.
    pub fn pair(&self, tx: usize, rx: usize) -> &[Option<Complex64>] {
        let o = self.offset(tx, rx);
        &self.values[o..o + self.points.len()]
    }

    pub fn pair_mut(&mut self, tx: usize, rx: usize) -> &mut [Option<Complex64>] {
        let o = self.offset(tx, rx);
        let n = self.points.len();
        &mut self.values[o..o + n]
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.tx_count).flat_map(move |t| (0..self.rx_count).map(move |r| (t, r)))
    }

    pub fn present_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Index of the grid point closest to `p`.
    pub fn nearest_point(&self, p: &Point3) -> Option<usize> {
        self.points
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.position().distance(p).total_cmp(&b.1.position().distance(p)))
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub wavelength: f64,
    pub tx_count: usize,
    pub rx_count: usize,
    pub rx_positions: Vec<Point3>,
    /// Access-point grouping of the rx antennas, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ap_partition: Option<Vec<Vec<usize>>>,
    pub grid: Vec<GridPoint>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) || !self.wavelength.is_finite() {
            return Err(Error::Consistency(format!("wavelength {} is not positive", self.wavelength)));
        }
        if self.rx_positions.len() != self.rx_count {
            return Err(Error::Consistency(format!(
                "rx_count is {} but {} rx positions are listed",
                self.rx_count,
                self.rx_positions.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for p in &self.grid {
            if !seen.insert((p.m, p.n)) {
                return Err(Error::Consistency(format!("grid point ({}, {}) listed twice", p.m, p.n)));
            }
        }
        Ok(())
    }

    /// Receive-side geometry; without a stored partition every antenna is
    /// its own access point.
    pub fn geometry(&self) -> Result<ArrayGeometry> {
        let partition = self
            .ap_partition
            .clone()
            .unwrap_or_else(|| (0..self.rx_count).map(|i| vec![i]).collect());
        ArrayGeometry::new(self.rx_positions.clone(), partition, self.wavelength)
    }

    fn check_grid(&self, grid: &CsiGrid) -> Result<()> {
        if grid.tx_count() != self.tx_count || grid.rx_count() != self.rx_count {
            return Err(Error::Consistency(format!(
                "manifest describes {}x{} antennas, grid holds {}x{}",
                self.tx_count,
                self.rx_count,
                grid.tx_count(),
                grid.rx_count()
            )));
        }
        if grid.points() != self.grid.as_slice() {
            return Err(Error::Consistency("manifest grid differs from CSI grid points".into()));
        }
        Ok(())
    }
}

/// Rectangular grid of measurement positions at constant height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    #[serde(default)]
    pub z: f64,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::Domain("grid needs at least one point per axis".into()));
        }
        let axis = |lim: [f64; 2], n: usize, i: usize| {
            if n == 1 {
                lim[0]
            } else {
                lim[0] + (lim[1] - lim[0]) * i as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for m in 0..self.nx {
            for n in 0..self.ny {
                out.push(GridPoint {
                    m,
                    n,
                    x: axis(self.x, self.nx, m),
                    y: axis(self.y, self.ny, n),
                    z: self.z,
                });
            }
        }
        Ok(out)
    }
}

/// Exact line-of-sight CSI from every grid point to every rx antenna; the
/// same channel is used for each of the `tx_count` tx antennas.
pub fn los_grid(geometry: &ArrayGeometry, points: Vec<GridPoint>, tx_count: usize, params: &LosChannelParams) -> Result<CsiGrid> {
    let mut grid = CsiGrid::empty(tx_count, geometry.num_antennas(), points)?;
    for p in 0..grid.num_points() {
        let pos = grid.points()[p].position();
        let h = los_channel(geometry, &pos, params)
            .map_err(|e| e.context(format!("grid point ({}, {})", grid.points()[p].m, grid.points()[p].n)))?;
        for tx in 0..tx_count {
            for (rx, z) in h.iter().enumerate() {
                grid.set(tx, rx, p, Some(*z));
            }
        }
    }
    Ok(grid)
}

/// Synthetic dataset over `grid_spec`; with `offset_seed` set, random
/// per-pair hardware phase offsets are applied and returned as ground truth.
pub fn generate_synthetic_dataset(
    geometry: &ArrayGeometry,
    grid_spec: &GridSpec,
    tx_count: usize,
    params: &LosChannelParams,
    offset_seed: Option<u64>,
) -> Result<(CsiGrid, DatasetManifest, Option<PhaseOffsetTable>)> {
    let points = grid_spec.points()?;
    let grid = los_grid(geometry, points.clone(), tx_count, params)?;
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        wavelength: params.wavelength,
        tx_count,
        rx_count: geometry.num_antennas(),
        rx_positions: geometry.antenna_positions().to_vec(),
        ap_partition: Some(geometry.ap_partition().to_vec()),
        grid: points,
    };
    match offset_seed {
        None => Ok((grid, manifest, None)),
        Some(seed) => {
            let (grid, table) = inject_hardware_offsets(&grid, seed);
            Ok((grid, manifest, Some(table)))
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `manifest.json` and `csi.csv` into directory `dir` (created if
/// needed).
pub fn write_dataset(grid: &CsiGrid, manifest: &DatasetManifest, dir: &Path) -> Result<()> {
    manifest.validate()?;
    manifest.check_grid(grid)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let manifest_path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&manifest_path, json + "\n").map_err(io_err(&manifest_path))?;

    let csi_path = dir.join(CSI_FILE);
    let file = fs::File::create(&csi_path).map_err(io_err(&csi_path))?;
    let mut out = std::io::BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "{}", CSI_HEADER.join(","))?;
        for (tx, rx) in grid.pairs() {
            for (p, v) in grid.pair(tx, rx).iter().enumerate() {
                if let Some(z) = v {
                    let gp = &grid.points()[p];
                    writeln!(out, "{tx},{rx},{},{},{:?},{:?}", gp.m, gp.n, z.re, z.im)?;
                }
            }
        }
        out.flush()
    };
    write().map_err(io_err(&csi_path))
}

/// Reads and validates a dataset directory written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<(CsiGrid, DatasetManifest)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: manifest_path.clone(),
        line: e.line() as u64,
        msg: e.to_string(),
    })?;
    let found = raw.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != FORMAT_VERSION {
        return Err(Error::Version {
            path: manifest_path,
            found,
            expected: FORMAT_VERSION,
        });
    }
    let manifest: DatasetManifest = serde_json::from_value(raw).map_err(|e| Error::Parse {
        path: manifest_path.clone(),
        line: 0,
        msg: e.to_string(),
    })?;
    manifest.validate()?;

    let mut grid = CsiGrid::empty(manifest.tx_count, manifest.rx_count, manifest.grid.clone())?;
    let index: HashMap<(usize, usize), usize> =
        manifest.grid.iter().enumerate().map(|(i, p)| ((p.m, p.n), i)).collect();

    let csi_path = dir.join(CSI_FILE);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&csi_path)
        .map_err(|e| csv_error(&csi_path, e))?;
    let header = reader.headers().map_err(|e| csv_error(&csi_path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != CSI_HEADER {
        return Err(Error::Parse {
            path: csi_path,
            line: 1,
            msg: format!("expected header `{}`", CSI_HEADER.join(",")),
        });
    }
    let mut tx_seen = BTreeSet::new();
    let mut rx_seen = BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&csi_path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |msg: String| Error::Parse {
            path: csi_path.clone(),
            line,
            msg,
        };
        let int = |i: usize| -> Result<usize> {
            record[i]
                .trim()
                .parse::<usize>()
                .map_err(|_| bad(format!("field `{}` is not a non-negative integer: `{}`", CSI_HEADER[i], &record[i])))
        };
        let float = |i: usize| -> Result<f64> {
            let v = record[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("field `{}` is not a number: `{}`", CSI_HEADER[i], &record[i])))?;
            if !v.is_finite() {
                return Err(bad(format!("field `{}` is not finite", CSI_HEADER[i])));
            }
            Ok(v)
        };
        let (tx, rx, m, n) = (int(0)?, int(1)?, int(2)?, int(3)?);
        let value = Complex64::new(float(4)?, float(5)?);
        if tx >= manifest.tx_count || rx >= manifest.rx_count {
            return Err(bad(format!("antenna pair ({tx}, {rx}) outside the manifest's {}x{}", manifest.tx_count, manifest.rx_count)));
        }
        let p = *index
            .get(&(m, n))
            .ok_or_else(|| bad(format!("grid point ({m}, {n}) not in the manifest")))?;
        if grid.get(tx, rx, p).is_some() {
            return Err(bad(format!("duplicate value for tx {tx}, rx {rx}, point ({m}, {n})")));
        }
        grid.set(tx, rx, p, Some(value));
        tx_seen.insert(tx);
        rx_seen.insert(rx);
    }
    if rx_seen.len() != manifest.rx_count || tx_seen.len() != manifest.tx_count {
        return Err(Error::Consistency(format!(
            "manifest declares {} tx / {} rx antennas, CSV contains {} / {}",
            manifest.tx_count,
            manifest.rx_count,
            tx_seen.len(),
            rx_seen.len()
        )));
    }
    Ok((grid, manifest))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: PathBuf::from(path),
            source,
        },
        kind => Error::Parse {
            path: PathBuf::from(path),
            line,
            msg: format!("{kind:?}"),
        },
    }
}
