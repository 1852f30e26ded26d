//! Antenna and user geometry plus the line-of-sight channel model.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{phasor, CVector};

/// Carrier wavelength used when none is configured (about 2.61 GHz).
pub const DEFAULT_WAVELENGTH: f64 = 0.115;

/// Rejection budget for [`place_ues`].
pub const DEFAULT_PLACEMENT_BUDGET: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    fn sub(&self, o: &Point3) -> [f64; 3] {
        [self.x - o.x, self.y - o.y, self.z - o.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

/// Axis-aligned box; degenerate extents (e.g. a fixed height) are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub min: Point3,
    pub max: Point3,
}

impl Region {
    pub fn new(min: Point3, max: Point3) -> Result<Self> {
        let r = Region { min, max };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::Domain("region bounds must be finite".into()));
        }
        if self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z {
            return Err(Error::Domain("region min exceeds max".into()));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (self.min.x..=self.max.x).contains(&p.x)
            && (self.min.y..=self.max.y).contains(&p.y)
            && (self.min.z..=self.max.z).contains(&p.z)
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Point3 {
        let lerp = |lo: f64, hi: f64, u: f64| lo + (hi - lo) * u;
        Point3::new(
            lerp(self.min.x, self.max.x, rng.random::<f64>()),
            lerp(self.min.y, self.max.y, rng.random::<f64>()),
            lerp(self.min.z, self.max.z, rng.random::<f64>()),
        )
    }
}

/// Base-station antennas grouped into access points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    antenna_positions: Vec<Point3>,
    ap_partition: Vec<Vec<usize>>,
    wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(
        antenna_positions: Vec<Point3>,
        ap_partition: Vec<Vec<usize>>,
        wavelength: f64,
    ) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::Domain(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if antenna_positions.is_empty() {
            return Err(Error::Domain("geometry has no antennas".into()));
        }
        if let Some(i) = antenna_positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::Domain(format!("antenna {i} has a non-finite coordinate")));
        }
        let mut seen = vec![false; antenna_positions.len()];
        for (ap, members) in ap_partition.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::Domain(format!("access point {ap} has no antennas")));
            }
            for &i in members {
                match seen.get_mut(i) {
                    None => {
                        return Err(Error::Domain(format!(
                            "access point {ap} references antenna {i} out of range"
                        )))
                    }
                    Some(true) => {
                        return Err(Error::Domain(format!(
                            "antenna {i} assigned to more than one access point"
                        )))
                    }
                    Some(s) => *s = true,
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Domain(format!(
                "antenna {i} not assigned to any access point"
            )));
        }
        Ok(ArrayGeometry {
            antenna_positions,
            ap_partition,
            wavelength,
        })
    }

    /// Linear arrays on the perimeter of a square region `[0, side]²` at
    /// height 0. Sides are walked counter-clockwise starting at `y = 0`; each
    /// side carries `aps_per_side` arrays of `antennas_per_ap` elements spaced
    /// `spacing` apart along the side, centred at `(a + ½)/aps_per_side` of it.
    pub fn perimeter(
        side: f64,
        aps_per_side: usize,
        antennas_per_ap: usize,
        spacing: f64,
        wavelength: f64,
    ) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::Domain(format!("wavelength must be positive, got {wavelength}")));
        }
        if !(side > 0.0) || aps_per_side == 0 || antennas_per_ap == 0 || !(spacing > 0.0) {
            return Err(Error::Domain("perimeter layout needs positive sizes".into()));
        }
        let array_len = spacing * (antennas_per_ap - 1) as f64;
        if array_len * aps_per_side as f64 >= side {
            return Err(Error::Domain("access-point arrays overlap along a side".into()));
        }
        // (origin, direction) for each side.
        let sides = [
            ([0.0, 0.0], [1.0, 0.0]),
            ([side, 0.0], [0.0, 1.0]),
            ([side, side], [-1.0, 0.0]),
            ([0.0, side], [0.0, -1.0]),
        ];
        let mut positions = Vec::new();
        let mut partition = Vec::new();
        for (origin, dir) in sides {
            for a in 0..aps_per_side {
                let centre = (a as f64 + 0.5) / aps_per_side as f64 * side;
                let mut members = Vec::with_capacity(antennas_per_ap);
                for e in 0..antennas_per_ap {
                    let s = centre - array_len / 2.0 + spacing * e as f64;
                    members.push(positions.len());
                    positions.push(Point3::new(origin[0] + dir[0] * s, origin[1] + dir[1] * s, 0.0));
                }
                partition.push(members);
            }
        }
        ArrayGeometry::new(positions, partition, wavelength)
    }

    /// 8 access points of 8 half-wavelength-spaced antennas around a 6 m square.
    pub fn default_testbed() -> Self {
        ArrayGeometry::perimeter(6.0, 2, 8, DEFAULT_WAVELENGTH / 2.0, DEFAULT_WAVELENGTH)
            .expect("default geometry is valid")
    }

    pub fn antenna_positions(&self) -> &[Point3] {
        &self.antenna_positions
    }

    pub fn ap_partition(&self) -> &[Vec<usize>] {
        &self.ap_partition
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn num_antennas(&self) -> usize {
        self.antenna_positions.len()
    }

    pub fn num_aps(&self) -> usize {
        self.ap_partition.len()
    }

    /// Geometry restricted to `antennas`, as a single access point.
    pub fn subarray(&self, antennas: &[usize]) -> Result<ArrayGeometry> {
        let positions = antennas
            .iter()
            .map(|&i| {
                self.antenna_positions.get(i).copied().ok_or_else(|| {
                    Error::Domain(format!("antenna {i} out of range"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = positions.len();
        ArrayGeometry::new(positions, vec![(0..n).collect()], self.wavelength)
    }

    /// Angle from broadside of the linear array formed by `antennas` towards
    /// `target`, seen from the first antenna. Positive angles point against
    /// the array axis (first → last antenna), which makes the far-field
    /// weights phase-match the line-of-sight channel of a distant target.
    pub fn steering_angle(&self, antennas: &[usize], target: &Point3) -> Result<f64> {
        let (first, last) = match antennas {
            [f, .., l] => (self.antenna_positions[*f], self.antenna_positions[*l]),
            _ => return Ok(0.0),
        };
        let axis = last.sub(&first);
        let to_target = target.sub(&first);
        let (na, nt) = (norm3(&axis), norm3(&to_target));
        if nt == 0.0 {
            return Err(Error::Singularity { antenna: antennas[0] });
        }
        let cos = (axis[0] * to_target[0] + axis[1] * to_target[1] + axis[2] * to_target[2]) / (na * nt);
        Ok((-cos).clamp(-1.0, 1.0).asin())
    }
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeModel {
    UnitMagnitude,
    #[default]
    FreeSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LosChannelParams {
    pub wavelength: f64,
    pub amplitude_model: AmplitudeModel,
    /// Scale applied to the free-space law; unused for unit magnitude.
    pub reference_gain: f64,
}

impl LosChannelParams {
    pub fn new(wavelength: f64, amplitude_model: AmplitudeModel) -> Self {
        LosChannelParams {
            wavelength,
            amplitude_model,
            reference_gain: 1.0,
        }
    }

    pub fn amplitude(&self, distance: f64) -> f64 {
        match self.amplitude_model {
            AmplitudeModel::UnitMagnitude => 1.0,
            AmplitudeModel::FreeSpace => {
                self.reference_gain * self.wavelength / (4.0 * PI * distance)
            }
        }
    }
}

/// Propagation phase `−2πd/λ`, not reduced modulo 2π.
pub fn los_phase(distance: f64, wavelength: f64) -> Result<f64> {
    if !(distance > 0.0) || !(wavelength > 0.0) {
        return Err(Error::Domain(format!(
            "los_phase needs positive distance and wavelength (d = {distance}, λ = {wavelength})"
        )));
    }
    Ok(-2.0 * PI * distance / wavelength)
}

/// Line-of-sight channel from every antenna of `geometry` to `ue`.
pub fn los_channel(geometry: &ArrayGeometry, ue: &Point3, params: &LosChannelParams) -> Result<CVector> {
    let positions = geometry.antenna_positions();
    let mut h = CVector::zeros(positions.len());
    for (i, p) in positions.iter().enumerate() {
        let d = p.distance(ue);
        if d == 0.0 {
            return Err(Error::Singularity { antenna: i });
        }
        h[i] = phasor(los_phase(d, params.wavelength)?) * params.amplitude(d);
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UePlacement {
    pub positions: Vec<Point3>,
    pub min_spacing: f64,
}

impl UePlacement {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.positions.iter().enumerate() {
            for b in &self.positions[i + 1..] {
                best = best.min(a.distance(b));
            }
        }
        best
    }
}

/// Uniform placement of `k` users in `roi` with pairwise spacing at least
/// `min_spacing`, deterministic in `rng_seed`.
pub fn place_ues(roi: &Region, k: usize, min_spacing: f64, rng_seed: u64) -> Result<UePlacement> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    place_ues_with(roi, k, min_spacing, DEFAULT_PLACEMENT_BUDGET, &mut rng)
}

/// Rejection sampler behind [`place_ues`]; `budget` bounds the total number of
/// rejected candidates.
pub fn place_ues_with<R: Rng>(
    roi: &Region,
    k: usize,
    min_spacing: f64,
    budget: usize,
    rng: &mut R,
) -> Result<UePlacement> {
    roi.validate()?;
    if !(min_spacing >= 0.0) || !min_spacing.is_finite() {
        return Err(Error::Domain(format!("invalid min_spacing {min_spacing}")));
    }
    let mut positions: Vec<Point3> = Vec::with_capacity(k);
    let mut rejections = 0;
    while positions.len() < k {
        let candidate = roi.sample(rng);
        let ok = min_spacing == 0.0
            || positions.iter().all(|p| p.distance(&candidate) >= min_spacing);
        if ok {
            positions.push(candidate);
        } else {
            rejections += 1;
            if rejections >= budget {
                return Err(Error::PlacementInfeasible {
                    k,
                    min_spacing,
                    attempts: rejections,
                });
            }
        }
    }
    Ok(UePlacement {
        positions,
        min_spacing,
    })
}
