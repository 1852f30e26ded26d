use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::precoders::{ChannelMatrix, ClusterView};

/// Static user → AP-group association.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterAssignment {
    /// Serving group of each user.
    pub ue_to_group: Vec<usize>,
    /// Mean channel gain of each user (row) over each group's antennas (column).
    pub mean_gains: Vec<Vec<f64>>,
}

/// Antenna indices of each group of access points.
pub fn group_antennas(geometry: &ArrayGeometry, ap_groups: &[Vec<usize>]) -> Result<Vec<Vec<usize>>> {
    ap_groups
        .iter()
        .map(|aps| {
            let mut antennas = Vec::new();
            for &ap in aps {
                let members = geometry
                    .ap_partition()
                    .get(ap)
                    .ok_or_else(|| Error::Config(format!("access point {ap} does not exist")))?;
                antennas.extend_from_slice(members);
            }
            Ok(antennas)
        })
        .collect()
}

/// Assigns each user (column of `gains`, an `M × K` table of `|h|²`) to the
/// antenna group with the largest mean gain. Ties go to the lowest group index.
pub fn cluster_by_gain(gains: &DMatrix<f64>, groups: &[Vec<usize>]) -> Result<ClusterAssignment> {
    if groups.is_empty() || groups.iter().any(|g| g.is_empty()) {
        return Err(Error::Config("clustering needs non-empty antenna groups".into()));
    }
    if let Some(&bad) = groups.iter().flatten().find(|&&i| i >= gains.nrows()) {
        return Err(Error::Dimension(format!("antenna {bad} outside the gain table")));
    }
    let mut ue_to_group = Vec::with_capacity(gains.ncols());
    let mut mean_gains = Vec::with_capacity(gains.ncols());
    for k in 0..gains.ncols() {
        let means: Vec<f64> = groups
            .iter()
            .map(|g| g.iter().map(|&i| gains[(i, k)]).sum::<f64>() / g.len() as f64)
            .collect();
        let mut best = 0;
        for (j, &m) in means.iter().enumerate().skip(1) {
            if m > means[best] {
                best = j;
            }
        }
        ue_to_group.push(best);
        mean_gains.push(means);
    }
    Ok(ClusterAssignment {
        ue_to_group,
        mean_gains,
    })
}

/// Gain-based clustering of the users in `h` onto groups of access points.
pub fn cluster_users(h: &ChannelMatrix, geometry: &ArrayGeometry, ap_groups: &[Vec<usize>]) -> Result<ClusterAssignment> {
    let groups = group_antennas(geometry, ap_groups)?;
    let m = h.as_matrix();
    let gains = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].norm_sqr());
    cluster_by_gain(&gains, &groups)
}

impl ClusterAssignment {
    pub fn view(&self, group_antennas: Vec<Vec<usize>>) -> ClusterView {
        ClusterView {
            cluster_antennas: group_antennas,
            cluster_of_user: self.ue_to_group.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{los_channel, AmplitudeModel, LosChannelParams, Point3};

    #[test]
    fn concentrated_gain_wins() {
        let mut gains = DMatrix::zeros(8, 1);
        gains[(5, 0)] = 1.0;
        gains[(4, 0)] = 0.5;
        let groups = vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]];
        let a = cluster_by_gain(&gains, &groups).unwrap();
        assert_eq!(a.ue_to_group, vec![2]);
        assert_eq!(a.mean_gains[0], vec![0.0, 0.0, 0.75, 0.0]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let gains = DMatrix::from_element(4, 2, 1.0);
        let groups = vec![vec![2, 3], vec![0, 1]];
        assert_eq!(cluster_by_gain(&gains, &groups).unwrap().ue_to_group, vec![0, 0]);
    }

    #[test]
    fn users_near_a_side_join_that_sides_pair() {
        let g = ArrayGeometry::default_testbed();
        let pairs = vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]];
        let params = LosChannelParams::new(g.wavelength(), AmplitudeModel::FreeSpace);
        // Sides: y = 0, x = 6, y = 6, x = 0.
        let probes = [
            (Point3::new(3.0, 0.8, 0.0), 0),
            (Point3::new(5.2, 3.0, 0.0), 1),
            (Point3::new(3.0, 5.2, 0.0), 2),
            (Point3::new(0.8, 3.0, 0.0), 3),
        ];
        let cols: Vec<_> = probes.iter().map(|(p, _)| los_channel(&g, p, &params).unwrap()).collect();
        let h = ChannelMatrix::from_columns(&cols).unwrap();
        let a = cluster_users(&h, &g, &pairs).unwrap();
        assert_eq!(a.ue_to_group, vec![0, 1, 2, 3]);
    }

    #[test]
    fn rejects_unknown_ap() {
        let g = ArrayGeometry::default_testbed();
        assert!(group_antennas(&g, &[vec![0, 9]]).is_err());
    }
}
