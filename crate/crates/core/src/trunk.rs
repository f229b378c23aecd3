//! Trunk landmark extraction from 3D point clouds.
//!
//! A point is kept as a trunk point when some point of the cloud lies close
//! to the location `probe_height` metres straight above it. Trunk points are
//! then grouped by single-linkage clustering and every large enough cluster
//! becomes one 2D landmark at the mean of its horizontal projections.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{centroid, Point2, Point3, PointCloud3};
use crate::spatial::SpatialIndex3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrunkExtractionParams {
    /// Vertical offset of the probe point above each candidate, metres.
    pub probe_height: f64,
    /// Largest admissible distance between the probe and its nearest neighbor.
    pub probe_radius: f64,
    /// Largest link length inside a cluster.
    pub cluster_tolerance: f64,
    /// Clusters with fewer points are dropped.
    pub min_cluster_size: usize,
}

impl Default for TrunkExtractionParams {
    fn default() -> Self {
        TrunkExtractionParams {
            probe_height: 2.0,
            probe_radius: 0.2,
            cluster_tolerance: 0.5,
            min_cluster_size: 30,
        }
    }
}

impl TrunkExtractionParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.probe_height, self.probe_radius, self.cluster_tolerance]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !positive || self.min_cluster_size == 0 {
            return Err(Error::InvalidParams(
                "trunk extraction parameters must be strictly positive".into(),
            ));
        }
        if self.probe_radius >= self.probe_height {
            return Err(Error::InvalidParams(
                "probe radius must be smaller than the probe height".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Landmark {
    pub id: usize,
    pub position: Point2,
    /// Number of cluster points the landmark was computed from, when known.
    pub support: Option<usize>,
}

/// Ordered set of 2D trunk landmarks with ids `0..len`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrunkMap {
    pub landmarks: Vec<Landmark>,
}

impl TrunkMap {
    pub fn from_positions<I: IntoIterator<Item = Point2>>(positions: I) -> Self {
        TrunkMap {
            landmarks: positions
                .into_iter()
                .enumerate()
                .map(|(id, position)| Landmark {
                    id,
                    position,
                    support: None,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn positions(&self) -> Vec<Point2> {
        self.landmarks.iter().map(|l| l.position).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrunkCluster {
    pub member_points: Vec<Point3>,
    pub centroid2d: Point2,
}

impl TrunkCluster {
    fn from_members(member_points: Vec<Point3>) -> Self {
        let xy: Vec<Point2> = member_points.iter().map(Point3::xy).collect();
        let centroid2d = centroid(&xy).unwrap_or_default();
        TrunkCluster {
            member_points,
            centroid2d,
        }
    }
}

/// Indices of the points that pass the vertical probe test, ascending.
pub fn trunk_point_indices(cloud: &PointCloud3, params: &TrunkExtractionParams) -> Result<Vec<usize>> {
    params.validate()?;
    let index = SpatialIndex3::build(cloud)?;
    let keep: Vec<bool> = cloud
        .points
        .par_iter()
        .map(|p| {
            let probe = Point3::new(p.x, p.y, p.z + params.probe_height);
            index.nearest_within(&probe, params.probe_radius).is_some()
        })
        .collect();
    Ok(keep
        .iter()
        .enumerate()
        .filter_map(|(i, &k)| k.then_some(i))
        .collect())
}

pub fn select_trunk_points(cloud: &PointCloud3, params: &TrunkExtractionParams) -> Result<PointCloud3> {
    let keep = trunk_point_indices(cloud, params)?;
    Ok(keep.into_iter().map(|i| cloud.points[i]).collect())
}

/// Single-linkage components at `tolerance`, each listed in ascending index
/// order; components are ordered by their lowest member.
pub(crate) fn connected_components(points: &[Point3], tolerance: f64) -> Vec<Vec<usize>> {
    if points.is_empty() {
        return Vec::new();
    }
    let index = match SpatialIndex3::from_points(points.to_vec()) {
        Ok(index) => index,
        Err(_) => return Vec::new(),
    };
    let mut label = vec![false; points.len()];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for seed in 0..points.len() {
        if label[seed] {
            continue;
        }
        label[seed] = true;
        queue.push_back(seed);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push(i);
            for j in index.within_radius(&points[i], tolerance) {
                if !label[j] {
                    label[j] = true;
                    queue.push_back(j);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

pub fn cluster_trunk_points(trunk_points: &PointCloud3, params: &TrunkExtractionParams) -> Result<Vec<TrunkCluster>> {
    params.validate()?;
    Ok(connected_components(&trunk_points.points, params.cluster_tolerance)
        .into_iter()
        .filter(|c| c.len() >= params.min_cluster_size)
        .map(|c| TrunkCluster::from_members(c.into_iter().map(|i| trunk_points.points[i]).collect()))
        .collect())
}

pub fn extract_trunk_map(cloud: &PointCloud3, params: &TrunkExtractionParams) -> Result<TrunkMap> {
    let trunk_points = select_trunk_points(cloud, params)?;
    let clusters = cluster_trunk_points(&trunk_points, params)?;
    Ok(TrunkMap {
        landmarks: clusters
            .into_iter()
            .enumerate()
            .map(|(id, c)| Landmark {
                id,
                position: c.centroid2d,
                support: Some(c.member_points.len()),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> TrunkExtractionParams {
        TrunkExtractionParams::default()
    }

    fn vertical_line() -> PointCloud3 {
        (0..=6).map(|k| Point3::new(0.0, 0.0, k as f64 * 0.5)).collect()
    }

    #[test]
    fn vertical_line_keeps_lower_part() {
        let kept = select_trunk_points(&vertical_line(), &params()).unwrap();
        let zs: Vec<f64> = kept.iter().map(|p| p.z).collect();
        assert_eq!(zs, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn isolated_point_yields_nothing() {
        let cloud = PointCloud3::new(vec![Point3::new(1.0, 2.0, 3.0)]);
        assert!(select_trunk_points(&cloud, &params()).unwrap().is_empty());
    }

    #[test]
    fn plane_yields_nothing() {
        let cloud: PointCloud3 = (0..40)
            .flat_map(|i| (0..40).map(move |j| Point3::new(i as f64 * 0.1, j as f64 * 0.1, 0.0)))
            .collect();
        assert!(select_trunk_points(&cloud, &params()).unwrap().is_empty());
        assert!(extract_trunk_map(&cloud, &params()).unwrap().is_empty());
    }

    #[test]
    fn empty_cloud_is_an_error() {
        assert!(matches!(
            select_trunk_points(&PointCloud3::default(), &params()),
            Err(Error::EmptyCloud)
        ));
    }

    #[test]
    fn bad_params_rejected() {
        let mut p = params();
        p.probe_radius = 3.0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.min_cluster_size = 0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.cluster_tolerance = -1.0;
        assert!(p.validate().is_err());
    }

    fn blob(rng: &mut ChaCha8Rng, cx: f64, cy: f64, n: usize) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                Point3::new(
                    cx + rng.gen_range(-0.15..0.15),
                    cy + rng.gen_range(-0.15..0.15),
                    rng.gen_range(0.0..0.3),
                )
            })
            .collect()
    }

    #[test]
    fn two_groups_two_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts = blob(&mut rng, 0.0, 0.0, 50);
        pts.extend(blob(&mut rng, 10.0, 0.0, 50));
        let clusters = cluster_trunk_points(&PointCloud3::new(pts), &params()).unwrap();
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].member_points.len(), 50);
        assert!(clusters[0].centroid2d.norm() < 0.1);
        assert!(clusters[1].centroid2d.distance(&Point2::new(10.0, 0.0)) < 0.1);
    }

    #[test]
    fn small_group_discarded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = blob(&mut rng, 0.0, 0.0, 10);
        assert!(cluster_trunk_points(&PointCloud3::new(pts), &params()).unwrap().is_empty());
        assert!(cluster_trunk_points(&PointCloud3::default(), &params()).unwrap().is_empty());
    }

    #[test]
    fn chains_link_through_intermediate_points() {
        // Ends are 2 m apart but every consecutive gap is 0.4 m.
        let pts: Vec<Point3> = (0..=5).map(|k| Point3::new(k as f64 * 0.4, 0.0, 0.0)).collect();
        let comps = connected_components(&pts, 0.5);
        assert_eq!(comps, vec![vec![0, 1, 2, 3, 4, 5]]);
        let comps = connected_components(&pts, 0.3);
        assert_eq!(comps.len(), 6);
    }
}
