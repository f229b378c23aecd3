//! Static kd-tree over 3D points.
//!
//! The tree is stored implicitly: every subrange `[lo, hi)` of `order` is a
//! subtree whose root sits at `(lo + hi) / 2`. Queries break distance ties by
//! the lowest original point index so results never depend on build order.

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    /// Index of the point in the cloud the index was built from.
    pub index: usize,
    pub point: Point3,
    pub distance: f64,
}

#[derive(Clone, Debug)]
pub struct SpatialIndex3 {
    points: Vec<Point3>,
    order: Vec<usize>,
    axes: Vec<u8>,
}

impl SpatialIndex3 {
    pub fn build(cloud: &PointCloud3) -> Result<Self> {
        Self::from_points(cloud.points.clone())
    }

    pub fn from_points(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let n = points.len();
        let mut index = SpatialIndex3 {
            points,
            order: (0..n).collect(),
            axes: vec![0; n],
        };
        index.build_range(0, n);
        Ok(index)
    }

    fn build_range(&mut self, lo: usize, hi: usize) {
        if hi - lo <= 1 {
            return;
        }
        let axis = self.widest_axis(lo, hi);
        let mid = (lo + hi) / 2;
        let points = &self.points;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            points[a]
                .coord(axis)
                .total_cmp(&points[b].coord(axis))
                .then(a.cmp(&b))
        });
        self.axes[mid] = axis as u8;
        self.build_range(lo, mid);
        self.build_range(mid + 1, hi);
    }

    fn widest_axis(&self, lo: usize, hi: usize) -> usize {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for &i in &self.order[lo..hi] {
            let p = &self.points[i];
            for axis in 0..3 {
                min[axis] = min[axis].min(p.coord(axis));
                max[axis] = max[axis].max(p.coord(axis));
            }
        }
        (0..3)
            .max_by(|&a, &b| (max[a] - min[a]).total_cmp(&(max[b] - min[b])).then(b.cmp(&a)))
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    /// Closest indexed point to `q`.
    pub fn nearest(&self, q: &Point3) -> Neighbor {
        let mut best = (f64::INFINITY, usize::MAX);
        self.nearest_in(q, 0, self.points.len(), &mut best);
        let (d2, index) = best;
        Neighbor {
            index,
            point: self.points[index],
            distance: d2.sqrt(),
        }
    }

    /// Closest indexed point within `radius` of `q` (inclusive), if any.
    pub fn nearest_within(&self, q: &Point3, radius: f64) -> Option<Neighbor> {
        let r2 = radius * radius;
        // Seed the bound just above r² so points at exactly `radius` qualify.
        let mut best = (r2.next_up(), usize::MAX);
        self.nearest_in(q, 0, self.points.len(), &mut best);
        let (d2, index) = best;
        (index != usize::MAX && d2 <= r2).then(|| Neighbor {
            index,
            point: self.points[index],
            distance: d2.sqrt(),
        })
    }

    fn nearest_in(&self, q: &Point3, lo: usize, hi: usize, best: &mut (f64, usize)) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        let d2 = p.distance_squared(q);
        if d2 < best.0 || (d2 == best.0 && idx < best.1) {
            *best = (d2, idx);
        }
        let axis = self.axes[mid] as usize;
        let diff = q.coord(axis) - p.coord(axis);
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_in(q, near.0, near.1, best);
        if diff * diff <= best.0 {
            self.nearest_in(q, far.0, far.1, best);
        }
    }

    /// Indices of all points within `radius` of `q` (inclusive), ascending.
    pub fn within_radius(&self, q: &Point3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.radius_in(q, radius * radius, 0, self.points.len(), &mut out);
        out.sort_unstable();
        out
    }

    fn radius_in(&self, q: &Point3, r2: f64, lo: usize, hi: usize, out: &mut Vec<usize>) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        if p.distance_squared(q) <= r2 {
            out.push(idx);
        }
        let axis = self.axes[mid] as usize;
        let diff = q.coord(axis) - p.coord(axis);
        if diff <= 0.0 || diff * diff <= r2 {
            self.radius_in(q, r2, lo, mid, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.radius_in(q, r2, mid + 1, hi, out);
        }
    }
}
