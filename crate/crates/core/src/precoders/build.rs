use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Point3};
use crate::linalg::{self, CVector};

use super::spec::{BaseVector, InfoSet, PrecoderSpec, Regularization, Scope, Suppression};
use super::{
    far_field_weights, near_field_phases, orthogonalize, orthogonalize_regularized, ChannelMatrix,
    PrecodingMatrix,
};

/// Noise level used to resolve [`Regularization::NoiseVariance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseReference {
    /// `σ_n²` in channel power units.
    pub variance: f64,
    /// Average received power `‖h_k‖²` the noise floor is quoted against.
    pub reference_power: f64,
}

impl NoiseReference {
    /// `α` for a given column scaling of the suppression matrix: raw channel
    /// columns use `σ_n²`, unit-norm columns use `σ_n²` relative to the
    /// reference power.
    pub fn alpha(&self, regularization: Regularization, unit_columns: bool) -> Option<f64> {
        match regularization {
            Regularization::Off => None,
            Regularization::Fixed(a) => Some(a),
            Regularization::NoiseVariance if unit_columns => Some(self.variance / self.reference_power),
            Regularization::NoiseVariance => Some(self.variance),
        }
    }
}

/// Static grouping of users onto antenna sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterView {
    /// Antenna indices controlled by each cluster.
    pub cluster_antennas: Vec<Vec<usize>>,
    /// Serving cluster of every user.
    pub cluster_of_user: Vec<usize>,
}

/// Gatekeeper for everything a precoder may read. CSI and positions are
/// handed out only when granted, CSI only for users sharing the intended
/// user's cluster and only on the cluster's own antennas.
#[derive(Debug, Clone, Copy)]
pub struct InfoAccess<'a> {
    geometry: &'a ArrayGeometry,
    csi: Option<&'a ChannelMatrix>,
    positions: Option<&'a [Point3]>,
    clusters: Option<&'a ClusterView>,
    grants: InfoSet,
    noise: NoiseReference,
}

impl<'a> InfoAccess<'a> {
    pub fn new(geometry: &'a ArrayGeometry, grants: InfoSet, noise: NoiseReference) -> Self {
        InfoAccess {
            geometry,
            csi: None,
            positions: None,
            clusters: None,
            grants,
            noise,
        }
    }

    pub fn with_csi(mut self, csi: &'a ChannelMatrix) -> Self {
        self.csi = Some(csi);
        self
    }

    pub fn with_positions(mut self, positions: &'a [Point3]) -> Self {
        self.positions = Some(positions);
        self
    }

    pub fn with_clusters(mut self, clusters: &'a ClusterView) -> Self {
        self.clusters = Some(clusters);
        self
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        self.geometry
    }

    pub fn num_users(&self) -> Result<usize> {
        match (self.csi, self.positions) {
            (Some(h), Some(p)) if h.num_users() != p.len() => Err(Error::Dimension(format!(
                "{} CSI columns but {} user positions",
                h.num_users(),
                p.len()
            ))),
            (Some(h), _) => Ok(h.num_users()),
            (None, Some(p)) => Ok(p.len()),
            (None, None) => Err(Error::NotGranted("neither CSI nor user positions supplied".into())),
        }
    }

    /// Antennas that may transmit to user `k`.
    pub fn serving_antennas(&self, k: usize) -> Vec<usize> {
        match self.clusters {
            Some(c) => c.cluster_antennas[c.cluster_of_user[k]].clone(),
            None => (0..self.geometry.num_antennas()).collect(),
        }
    }

    /// Whether CSI of `user` is visible to the processor serving `intended`.
    pub fn csi_visible(&self, intended: usize, user: usize) -> bool {
        match self.clusters {
            Some(c) => c.cluster_of_user[intended] == c.cluster_of_user[user],
            None => true,
        }
    }

    pub fn csi(&self, intended: usize, user: usize, rows: &[usize]) -> Result<CVector> {
        let granted = if user == intended {
            self.grants.csi_intended
        } else {
            self.grants.csi_unintended
        };
        if !granted {
            return Err(Error::NotGranted(format!("CSI of user {user}")));
        }
        if !self.csi_visible(intended, user) {
            return Err(Error::NotGranted(format!(
                "CSI of user {user} outside the cluster serving user {intended}"
            )));
        }
        if self.clusters.is_some() {
            let serving = self.serving_antennas(intended);
            if let Some(r) = rows.iter().find(|r| !serving.contains(r)) {
                return Err(Error::NotGranted(format!(
                    "CSI on antenna {r}, which does not serve user {intended}"
                )));
            }
        }
        let h = self
            .csi
            .ok_or_else(|| Error::NotGranted("no CSI supplied".into()))?;
        if user >= h.num_users() {
            return Err(Error::Dimension(format!("user {user} out of range")));
        }
        Ok(CVector::from_iterator(
            rows.len(),
            rows.iter().map(|&r| h.as_matrix()[(r, user)]),
        ))
    }

    pub fn location(&self, intended: usize, user: usize) -> Result<Point3> {
        let granted = if user == intended {
            self.grants.location_intended
        } else {
            self.grants.location_unintended
        };
        if !granted {
            return Err(Error::NotGranted(format!("location of user {user}")));
        }
        let p = self
            .positions
            .ok_or_else(|| Error::NotGranted("no user positions supplied".into()))?;
        p.get(user)
            .copied()
            .ok_or_else(|| Error::Dimension(format!("user {user} out of range")))
    }
}

enum Source {
    Csi,
    NearField,
}

/// Precoding vector for user `k`: base vector, suppression subspace and
/// (regularized) orthogonalization, assembled per antenna group and
/// normalized to unit norm over the full array.
pub fn build_precoder(spec: &PrecoderSpec, access: &InfoAccess<'_>, k: usize) -> Result<CVector> {
    spec.validate()?;
    let users = access.num_users()?;
    if k >= users {
        return Err(Error::Dimension(format!("user {k} out of range ({users} users)")));
    }
    let geometry = access.geometry();
    let serving = access.serving_antennas(k);
    let groups: Vec<(Option<usize>, Vec<usize>)> = match spec.scope {
        Scope::Centralized => vec![(None, serving)],
        Scope::DistributedPerAp => geometry
            .ap_partition()
            .iter()
            .enumerate()
            .map(|(ap, members)| {
                (Some(ap), members.iter().copied().filter(|i| serving.contains(i)).collect::<Vec<_>>())
            })
            .filter(|(_, rows)| !rows.is_empty())
            .collect(),
    };

    let mut w = CVector::zeros(geometry.num_antennas());
    for (ap, rows) in &groups {
        let where_ = match ap {
            Some(ap) => format!("{spec}, user {k}, AP {ap}"),
            None => format!("{spec}, user {k}"),
        };
        let part = group_precoder(spec, access, k, users, rows).map_err(|e| e.context(where_))?;
        for (slot, &r) in rows.iter().enumerate() {
            w[r] = part[slot];
        }
    }
    linalg::normalized(&w).map_err(|e| e.context(format!("{spec}, user {k}")))
}

fn group_precoder(
    spec: &PrecoderSpec,
    access: &InfoAccess<'_>,
    k: usize,
    users: usize,
    rows: &[usize],
) -> Result<CVector> {
    let geometry = access.geometry();
    // Bases are scaled so that concatenating the groups reproduces the
    // centralized base vector.
    let base = match spec.base {
        BaseVector::Mrt => access.csi(k, k, rows)?,
        BaseVector::NearField => near_field_phases(geometry, &access.location(k, k)?, rows)?,
        BaseVector::FarField => {
            let target = access.location(k, k)?;
            if !geometry.ap_partition().iter().any(|ap| rows.iter().all(|r| ap.contains(r))) {
                return Err(Error::Config(
                    "far-field weights need each antenna group to be a single linear array".into(),
                ));
            }
            let theta = geometry.steering_angle(rows, &target)?;
            let sub = geometry.subarray(rows)?;
            far_field_weights(&sub, theta, 0)? * num_complex::Complex64::new((rows.len() as f64).sqrt(), 0.0)
        }
    };

    let mut columns = Vec::new();
    let mut has_near_field = false;
    for l in (0..users).filter(|&l| l != k) {
        let source = match spec.suppression {
            Suppression::None => None,
            Suppression::Csi => access.csi_visible(k, l).then_some(Source::Csi),
            Suppression::NearField => Some(Source::NearField),
            Suppression::Hybrid if access.csi_visible(k, l) => Some(Source::Csi),
            Suppression::Hybrid => Some(Source::NearField),
        };
        match source {
            None => {}
            Some(Source::Csi) => columns.push(access.csi(k, l, rows)?),
            Some(Source::NearField) => {
                has_near_field = true;
                columns.push(near_field_phases(geometry, &access.location(k, l)?, rows)?);
            }
        }
    }
    if has_near_field {
        columns = columns
            .iter()
            .map(linalg::normalized)
            .collect::<Result<Vec<_>>>()?;
    }
    let v = linalg::from_columns(rows.len(), &columns);
    match access.noise.alpha(spec.regularization, has_near_field) {
        None => orthogonalize(&base, &v),
        Some(alpha) => {
            let out = orthogonalize_regularized(&base, &v, alpha)?;
            if out.norm() == 0.0 {
                return Err(Error::FullySuppressed);
            }
            Ok(out)
        }
    }
}

/// All `K` precoding vectors of `spec` as a matrix.
pub fn build_precoding_matrix(spec: &PrecoderSpec, access: &InfoAccess<'_>) -> Result<PrecodingMatrix> {
    let users = access.num_users()?;
    let cols = (0..users)
        .map(|k| build_precoder(spec, access, k))
        .collect::<Result<Vec<_>>>()?;
    PrecodingMatrix::from_columns(&cols)
}
