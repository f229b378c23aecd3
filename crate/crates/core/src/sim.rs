//! Synthetic forests and lidar scans.
//!
//! Trees are vertical cylinders standing on the plane `z = 0`. A scan casts
//! one ray per channel and azimuth from a sensor mounted above the vehicle;
//! the first cylinder or ground hit produces a return. Clouds are expressed
//! in the vehicle frame: `x` forward, `y` left, `z` up from the ground.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{angle_diff, Point2, Point3, PointCloud3, RigidTransform2D};
use crate::trunk::TrunkMap;

/// Densest random sequential packing of disks, in points per `s²`.
const JAMMING_DENSITY: f64 = 0.6965;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForestSpec {
    /// Width and height of the stand, metres; the stand spans `[0, w] × [0, h]`.
    pub area: (f64, f64),
    /// Trees per hectare.
    pub density: f64,
    pub min_spacing: f64,
    /// Diameter at breast height.
    pub dbh_mean: f64,
    pub dbh_std: f64,
    pub height_range: (f64, f64),
    pub seed: u64,
}

impl Default for ForestSpec {
    fn default() -> Self {
        ForestSpec {
            area: (100.0, 100.0),
            density: 500.0,
            min_spacing: 2.5,
            dbh_mean: 0.3,
            dbh_std: 0.05,
            height_range: (15.0, 25.0),
            seed: 0,
        }
    }
}

impl ForestSpec {
    pub fn tree_count(&self) -> usize {
        (self.density * self.area.0 * self.area.1 / 10_000.0).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.area.0, self.area.1, self.density, self.min_spacing, self.dbh_mean]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !positive || self.dbh_std < 0.0 || !(self.height_range.0 > 0.0 && self.height_range.0 <= self.height_range.1) {
            return Err(Error::InvalidParams("forest parameters out of range".into()));
        }
        let cap = 0.9 * JAMMING_DENSITY * self.area.0 * self.area.1 / (self.min_spacing * self.min_spacing);
        if self.tree_count() as f64 > cap {
            return Err(Error::InfeasibleForest(format!(
                "{} trees cannot be placed {} m apart in {} x {} m",
                self.tree_count(),
                self.min_spacing,
                self.area.0,
                self.area.1
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    /// Ground-truth stem positions; tree ids are landmark ids.
    pub trunks: TrunkMap,
    pub radii: Vec<f64>,
    pub heights: Vec<f64>,
    pub area: (f64, f64),
}

impl Forest {
    pub fn len(&self) -> usize {
        self.trunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trunks.is_empty()
    }

    pub fn empty(area: (f64, f64)) -> Self {
        Forest {
            trunks: TrunkMap::default(),
            radii: Vec::new(),
            heights: Vec::new(),
            area,
        }
    }

    /// Forest from explicit `(position, radius, height)` trees.
    pub fn from_trees(area: (f64, f64), trees: &[(Point2, f64, f64)]) -> Self {
        Forest {
            trunks: TrunkMap::from_positions(trees.iter().map(|t| t.0)),
            radii: trees.iter().map(|t| t.1).collect(),
            heights: trees.iter().map(|t| t.2).collect(),
            area,
        }
    }
}

/// Poisson-disc stand with exactly [`ForestSpec::tree_count`] trees.
pub fn generate_forest(spec: &ForestSpec) -> Result<Forest> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.tree_count();
    let (w, h) = spec.area;
    let s = spec.min_spacing;
    let cell = s / std::f64::consts::SQRT_2;
    let (gw, gh) = ((w / cell).ceil() as usize + 1, (h / cell).ceil() as usize + 1);
    let mut grid: Vec<Option<usize>> = vec![None; gw * gh];
    let mut positions: Vec<Point2> = Vec::with_capacity(n);

    let max_attempts = 2000 * n + 10_000;
    let mut attempts = 0;
    while positions.len() < n {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::InfeasibleForest(format!("placed only {} of {n} trees", positions.len())));
        }
        let p = Point2::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
        let (cx, cy) = ((p.x / cell) as usize, (p.y / cell) as usize);
        let clear = (cx.saturating_sub(2)..(cx + 3).min(gw)).all(|gx| {
            (cy.saturating_sub(2)..(cy + 3).min(gh)).all(|gy| grid[gy * gw + gx].is_none_or(|q| positions[q].distance(&p) >= s))
        });
        if clear {
            grid[cy * gw + cx] = Some(positions.len());
            positions.push(p);
        }
    }

    let dbh = Normal::new(spec.dbh_mean, spec.dbh_std).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let radii = (0..n).map(|_| 0.5 * dbh.sample(&mut rng).max(0.05)).collect();
    let (hmin, hmax) = spec.height_range;
    let heights = (0..n)
        .map(|_| if hmax > hmin { rng.gen_range(hmin..hmax) } else { hmin })
        .collect();
    Ok(Forest {
        trunks: TrunkMap::from_positions(positions),
        radii,
        heights,
        area: spec.area,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScannerSpec {
    pub channels: usize,
    /// Channels span `[-vertical_fov, vertical_fov]` degrees.
    pub vertical_fov: f64,
    /// Total horizontal opening in degrees, centered on the heading.
    pub horizontal_fov: f64,
    pub max_range: f64,
    pub range_noise_sigma: f64,
    /// Azimuth step, degrees.
    pub angular_resolution: f64,
    pub mount_height: f64,
}

impl Default for ScannerSpec {
    fn default() -> Self {
        ScannerSpec {
            channels: 16,
            vertical_fov: 15.0,
            horizontal_fov: 210.0,
            max_range: 100.0,
            range_noise_sigma: 0.03,
            angular_resolution: 0.2,
            mount_height: 1.5,
        }
    }
}

impl ScannerSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.channels > 0
            && self.vertical_fov >= 0.0
            && self.vertical_fov < 90.0
            && self.horizontal_fov > 0.0
            && self.horizontal_fov <= 360.0
            && self.max_range > 0.0
            && self.range_noise_sigma >= 0.0
            && self.angular_resolution > 0.0
            && self.mount_height > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams("scanner parameters out of range".into()))
        }
    }

    /// Channel elevations in radians, lowest first.
    pub fn elevations(&self) -> Vec<f64> {
        if self.channels == 1 {
            return vec![0.0];
        }
        let step = 2.0 * self.vertical_fov / (self.channels - 1) as f64;
        (0..self.channels)
            .map(|k| (-self.vertical_fov + step * k as f64).to_radians())
            .collect()
    }

    /// Azimuths relative to the heading in radians, right to left.
    pub fn azimuths(&self) -> Vec<f64> {
        let full = self.horizontal_fov >= 360.0 - 1e-9;
        let steps = (self.horizontal_fov / self.angular_resolution + 1e-9).floor() as usize;
        let count = if full { steps } else { steps + 1 };
        (0..count)
            .map(|k| (-0.5 * self.horizontal_fov + self.angular_resolution * k as f64).to_radians())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedScan {
    /// Returns in the vehicle frame, channel-major then azimuth.
    pub cloud: PointCloud3,
    /// Tree hit by each return, `None` for ground.
    pub hit_tree: Vec<Option<usize>>,
    /// Vehicle pose in the world frame.
    pub true_pose: RigidTransform2D,
    pub visible_trunk_ids: BTreeSet<usize>,
}

/// Horizontal distance along unit direction `u` from `o` to the first
/// intersection with the circle `(c, r)`, if in front of `o`.
fn ray_circle(o: Point2, u: Point2, c: Point2, r: f64) -> Option<f64> {
    let w = c - o;
    let b = w.dot(&u);
    let disc = b * b - (w.dot(&w) - r * r);
    if disc < 0.0 {
        return None;
    }
    let s = b - disc.sqrt();
    (s > 0.0).then_some(s)
}

/// Ray casting from `pose` against the forest; `seed` drives range noise.
pub fn simulate_scan(forest: &Forest, pose: &RigidTransform2D, scanner: &ScannerSpec, seed: u64) -> Result<SimulatedScan> {
    scanner.validate()?;
    let elevations = scanner.elevations();
    let azimuths = scanner.azimuths();
    let n_az = azimuths.len();
    let origin = pose.t;
    let res = scanner.angular_resolution.to_radians();
    let first = azimuths[0];

    // Trees each azimuth might hit, by angular extent.
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); n_az];
    for (id, lm) in forest.trunks.landmarks.iter().enumerate() {
        let r = forest.radii[id];
        let d = lm.position.distance(&origin);
        if d <= r || d - r > scanner.max_range {
            continue;
        }
        let bearing = angle_diff((lm.position - origin).y.atan2((lm.position - origin).x), pose.theta);
        let half = (r / d).asin() + 1e-9;
        for shift in [-2.0 * std::f64::consts::PI, 0.0, 2.0 * std::f64::consts::PI] {
            let lo = ((bearing + shift - half - first) / res).ceil().max(0.0);
            let hi = ((bearing + shift + half - first) / res).floor().min(n_az as f64 - 1.0);
            if lo > hi {
                continue;
            }
            for bucket in &mut buckets[lo as usize..=hi as usize] {
                if !bucket.contains(&id) {
                    bucket.push(id);
                }
            }
        }
    }

    // Per azimuth: candidate cylinder entries sorted by horizontal distance.
    let hits: Vec<Vec<(f64, usize)>> = azimuths
        .par_iter()
        .zip(buckets.par_iter())
        .map(|(&az, bucket)| {
            let u = Point2::new(1.0, 0.0).rotated(pose.theta + az);
            let mut hs: Vec<(f64, usize)> = bucket
                .iter()
                .filter_map(|&id| ray_circle(origin, u, forest.trunks.landmarks[id].position, forest.radii[id]).map(|s| (s, id)))
                .collect();
            hs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            hs
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = if scanner.range_noise_sigma > 0.0 {
        let normal = Normal::new(0.0, scanner.range_noise_sigma).map_err(|e| Error::InvalidParams(e.to_string()))?;
        (0..elevations.len() * n_az).map(|_| normal.sample(&mut rng)).collect()
    } else {
        vec![0.0; elevations.len() * n_az]
    };

    let h = scanner.mount_height;
    let to_local = pose.inverse();
    let mut points = Vec::new();
    let mut hit_tree = Vec::new();
    for (ci, &phi) in elevations.iter().enumerate() {
        let tan = phi.tan();
        let cos = phi.cos();
        for (ai, &az) in azimuths.iter().enumerate() {
            let tree = hits[ai].iter().find(|&&(s, id)| {
                let z = h + s * tan;
                (0.0..=forest.heights[id]).contains(&z)
            });
            let (s, id) = match tree {
                Some(&(s, id)) => (s, Some(id)),
                None if phi < 0.0 => (h / -tan, None),
                None => continue,
            };
            let range = s / cos;
            if range > scanner.max_range {
                continue;
            }
            let noisy = (range + noise[ci * n_az + ai]).max(0.0);
            let horizontal = noisy * cos;
            let world = origin + Point2::new(1.0, 0.0).rotated(pose.theta + az) * horizontal;
            let local = to_local.apply(world);
            points.push(Point3::new(local.x, local.y, h + noisy * phi.sin()));
            hit_tree.push(id);
        }
    }
    let visible_trunk_ids = hit_tree.iter().flatten().copied().collect();
    Ok(SimulatedScan {
        cloud: PointCloud3::new(points),
        hit_tree,
        true_pose: *pose,
        visible_trunk_ids,
    })
}

/// Odometry noise added to each scan's pose relative to the first scan.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PoseJitter {
    pub sigma_xy: f64,
    /// Radians.
    pub sigma_theta: f64,
}

/// Transform taking scan `s` into the frame of `first`.
fn relative(first: &SimulatedScan, s: &SimulatedScan) -> RigidTransform2D {
    first.true_pose.inverse().compose(&s.true_pose)
}

fn transformed<'a>(cloud: &'a PointCloud3, t: &RigidTransform2D) -> impl Iterator<Item = Point3> + 'a {
    let t = *t;
    cloud.iter().map(move |p| {
        let q = t.apply(p.xy());
        Point3::new(q.x, q.y, p.z)
    })
}

/// All scans in the frame of the first one, concatenated in order.
pub fn aggregate_scans(scans: &[SimulatedScan]) -> Result<PointCloud3> {
    aggregate_scans_with_jitter(scans, PoseJitter::default(), 0)
}

pub fn aggregate_scans_with_jitter(scans: &[SimulatedScan], jitter: PoseJitter, seed: u64) -> Result<PointCloud3> {
    let first = scans.first().ok_or(Error::InvalidParams("no scans to aggregate".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(scans.iter().map(|s| s.cloud.len()).sum());
    for (k, s) in scans.iter().enumerate() {
        if k == 0 {
            points.extend_from_slice(&s.cloud.points);
            continue;
        }
        let mut t = relative(first, s);
        if jitter.sigma_xy > 0.0 || jitter.sigma_theta > 0.0 {
            let n = Normal::new(0.0, 1.0).expect("unit normal");
            let (dx, dy, dth): (f64, f64, f64) = (n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng));
            t = RigidTransform2D::new(
                t.theta + jitter.sigma_theta * dth,
                t.t + Point2::new(jitter.sigma_xy * dx, jitter.sigma_xy * dy),
            );
        }
        points.extend(transformed(&s.cloud, &t));
    }
    Ok(PointCloud3::new(points))
}

/// `frames` poses starting at `start`, each `spacing` metres further along
/// the heading.
pub fn straight_path(start: &RigidTransform2D, frames: usize, spacing: f64) -> Vec<RigidTransform2D> {
    (0..frames)
        .map(|k| RigidTransform2D::new(start.theta, start.apply(Point2::new(spacing * k as f64, 0.0))))
        .collect()
}

/// Clearance kept between the vehicle and any stem, metres.
pub const VEHICLE_CLEARANCE: f64 = 1.0;

/// Random start pose at least `margin` from the stand border whose
/// straight path of `frames` frames keeps clear of every stem.
pub fn random_site_pose<R: Rng>(forest: &Forest, margin: f64, frames: usize, spacing: f64, rng: &mut R) -> Result<RigidTransform2D> {
    let (w, h) = forest.area;
    if 2.0 * margin >= w.min(h) {
        return Err(Error::InvalidParams("site margin leaves no room for sites".into()));
    }
    let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    for _ in 0..10_000 {
        let start = RigidTransform2D::new(heading, Point2::new(rng.gen_range(margin..w - margin), rng.gen_range(margin..h - margin)));
        let path = straight_path(&start, frames, spacing);
        let clear = forest
            .trunks
            .landmarks
            .iter()
            .zip(&forest.radii)
            .all(|(l, r)| path.iter().all(|p| p.t.distance(&l.position) > r + VEHICLE_CLEARANCE));
        if clear {
            return Ok(start);
        }
    }
    Err(Error::InfeasibleForest("no clear path for the vehicle".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> ScannerSpec {
        ScannerSpec {
            range_noise_sigma: 0.0,
            ..ScannerSpec::default()
        }
    }

    #[test]
    fn forest_count_and_spacing() {
        let spec = ForestSpec {
            seed: 5,
            ..ForestSpec::default()
        };
        let f = generate_forest(&spec).unwrap();
        assert!((450..=550).contains(&f.len()));
        let p = f.trunks.positions();
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                assert!(p[i].distance(&p[j]) >= spec.min_spacing);
            }
        }
        assert_eq!(generate_forest(&spec).unwrap(), f);
    }

    #[test]
    fn overpacked_forest_rejected() {
        let spec = ForestSpec {
            density: 5000.0,
            min_spacing: 2.5,
            ..ForestSpec::default()
        };
        assert!(matches!(generate_forest(&spec), Err(Error::InfeasibleForest(_))));
    }

    #[test]
    fn single_tree_returns_lie_on_cylinder() {
        let forest = Forest::from_trees((20.0, 20.0), &[(Point2::new(15.0, 10.0), 0.2, 20.0)]);
        let pose = RigidTransform2D::new(0.0, Point2::new(10.0, 10.0));
        let scan = simulate_scan(&forest, &pose, &quiet(), 0).unwrap();
        let mut n = 0;
        for (p, hit) in scan.cloud.iter().zip(&scan.hit_tree) {
            match hit {
                Some(0) => {
                    n += 1;
                    // Vehicle frame: tree 5 m straight ahead.
                    let d = p.xy().distance(&Point2::new(5.0, 0.0));
                    assert!((d - 0.2).abs() < 1e-6, "{d}");
                    assert!(p.xy().y.atan2(p.x).abs() < (0.2f64 / 5.0).asin() + 1e-9);
                }
                None => assert!(p.z.abs() < 1e-9),
                Some(_) => unreachable!(),
            }
        }
        assert!(n > 100);
        assert_eq!(scan.visible_trunk_ids, BTreeSet::from([0]));
    }

    #[test]
    fn hidden_tree_gets_no_returns() {
        let forest = Forest::from_trees(
            (30.0, 30.0),
            &[(Point2::new(10.0, 5.0), 0.3, 20.0), (Point2::new(15.0, 5.0), 0.2, 20.0)],
        );
        let pose = RigidTransform2D::new(0.0, Point2::new(5.0, 5.0));
        let scan = simulate_scan(&forest, &pose, &quiet(), 0).unwrap();
        assert_eq!(scan.visible_trunk_ids, BTreeSet::from([0]));
    }

    #[test]
    fn empty_forest_only_ground() {
        let scan = simulate_scan(&Forest::empty((50.0, 50.0)), &RigidTransform2D::identity(), &ScannerSpec::default(), 1).unwrap();
        assert!(!scan.cloud.is_empty());
        assert!(scan.hit_tree.iter().all(Option::is_none));
        // 8 of 16 channels look down.
        assert_eq!(scan.cloud.len(), 8 * ScannerSpec::default().azimuths().len());
    }

    #[test]
    fn returns_within_range_and_fov() {
        let forest = generate_forest(&ForestSpec {
            seed: 9,
            ..ForestSpec::default()
        })
        .unwrap();
        let scanner = ScannerSpec::default();
        let scan = simulate_scan(&forest, &RigidTransform2D::new(1.0, Point2::new(50.0, 50.0)), &scanner, 2).unwrap();
        let half = (0.5 * scanner.horizontal_fov).to_radians() + 1e-6;
        for p in scan.cloud.iter() {
            let d = Point3::new(0.0, 0.0, scanner.mount_height).distance(p);
            assert!(d <= scanner.max_range + 0.2);
            assert!(p.y.atan2(p.x).abs() <= half);
        }
    }

    /// No cylinder crosses the open segment from the sensor to a return.
    #[test]
    fn no_return_is_behind_a_cylinder() {
        let forest = generate_forest(&ForestSpec {
            area: (40.0, 40.0),
            seed: 4,
            ..ForestSpec::default()
        })
        .unwrap();
        let pose = RigidTransform2D::new(0.3, Point2::new(20.0, 20.0));
        let scan = simulate_scan(&forest, &pose, &quiet(), 0).unwrap();
        let sensor = Point3::new(pose.t.x, pose.t.y, 1.5);
        for p in scan.cloud.iter() {
            let w = pose.apply(p.xy());
            let end = Point3::new(w.x, w.y, p.z);
            for (id, lm) in forest.trunks.landmarks.iter().enumerate() {
                // Sample the segment interior.
                for k in 1..200 {
                    let f = k as f64 / 200.0 * (1.0 - 1e-6);
                    let q = Point3::new(
                        sensor.x + f * (end.x - sensor.x),
                        sensor.y + f * (end.y - sensor.y),
                        sensor.z + f * (end.z - sensor.z),
                    );
                    let inside = q.xy().distance(&lm.position) < forest.radii[id] - 1e-6 && q.z < forest.heights[id];
                    assert!(!inside, "segment to {end:?} crosses tree {id}");
                }
            }
        }
    }

    #[test]
    fn one_scan_aggregates_to_itself() {
        let forest = generate_forest(&ForestSpec::default()).unwrap();
        let scan = simulate_scan(&forest, &RigidTransform2D::new(0.4, Point2::new(50.0, 50.0)), &ScannerSpec::default(), 3).unwrap();
        assert_eq!(aggregate_scans(std::slice::from_ref(&scan)).unwrap(), scan.cloud);
        assert!(aggregate_scans(&[]).is_err());
    }

    #[test]
    fn two_scans_overlap_on_the_same_trunk() {
        let forest = Forest::from_trees((30.0, 30.0), &[(Point2::new(15.0, 15.0), 0.25, 20.0)]);
        let a = RigidTransform2D::new(0.0, Point2::new(10.0, 15.0));
        let b = RigidTransform2D::new(0.5, Point2::new(9.0, 12.0));
        let scans: Vec<SimulatedScan> = [a, b]
            .iter()
            .enumerate()
            .map(|(k, p)| simulate_scan(&forest, p, &quiet(), k as u64).unwrap())
            .collect();
        let cloud = aggregate_scans(&scans).unwrap();
        let axis = a.inverse().apply(Point2::new(15.0, 15.0));
        let mut on_trunk = 0;
        for (p, hit) in cloud.iter().zip(scans.iter().flat_map(|s| s.hit_tree.iter())) {
            if hit.is_some() {
                assert!((p.xy().distance(&axis) - 0.25).abs() < 1e-6);
                on_trunk += 1;
            }
        }
        assert!(on_trunk > scans[0].visible_trunk_ids.len());
    }

    #[test]
    fn more_scans_see_more_trunks() {
        let forest = generate_forest(&ForestSpec {
            seed: 12,
            ..ForestSpec::default()
        })
        .unwrap();
        let path = straight_path(&RigidTransform2D::new(0.2, Point2::new(30.0, 40.0)), 10, 1.0);
        let scans: Vec<SimulatedScan> = path
            .iter()
            .enumerate()
            .map(|(k, p)| simulate_scan(&forest, p, &ScannerSpec::default(), k as u64).unwrap())
            .collect();
        let union: BTreeSet<usize> = scans.iter().flat_map(|s| s.visible_trunk_ids.iter().copied()).collect();
        for s in &scans {
            assert!(union.is_superset(&s.visible_trunk_ids));
            assert!(union.len() > s.visible_trunk_ids.len());
        }
    }

    #[test]
    fn scan_is_deterministic() {
        let forest = generate_forest(&ForestSpec::default()).unwrap();
        let pose = RigidTransform2D::new(2.0, Point2::new(40.0, 60.0));
        let a = simulate_scan(&forest, &pose, &ScannerSpec::default(), 77).unwrap();
        let b = simulate_scan(&forest, &pose, &ScannerSpec::default(), 77).unwrap();
        assert_eq!(a, b);
    }
}
