#![allow(dead_code)]

use forestloc::{DTGraph, Point2, Point3, RigidTransform2D};
use rand::Rng;

/// Uniform points in `[-extent, extent]²` kept at least `spacing` apart.
pub fn scattered<R: Rng>(rng: &mut R, n: usize, extent: f64, spacing: f64) -> Vec<Point2> {
    let mut pts: Vec<Point2> = Vec::with_capacity(n);
    while pts.len() < n {
        let p = Point2::new(rng.gen_range(-extent..extent), rng.gen_range(-extent..extent));
        if pts.iter().all(|q| q.distance(&p) >= spacing) {
            pts.push(p);
        }
    }
    pts
}

pub fn random_transform<R: Rng>(rng: &mut R, max_shift: f64) -> RigidTransform2D {
    let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let r = rng.gen_range(0.0..max_shift);
    let a = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    RigidTransform2D::new(theta, Point2::new(r * a.cos(), r * a.sin()))
}

/// The `count` world points closest to `center`, expressed in a local
/// frame related to the world by `pose` (local -> world).
pub fn local_window(world: &[Point2], center: Point2, count: usize, pose: &RigidTransform2D) -> Vec<Point2> {
    let mut idx: Vec<usize> = (0..world.len()).collect();
    idx.sort_by(|&a, &b| world[a].distance(&center).total_cmp(&world[b].distance(&center)).then(a.cmp(&b)));
    let inv = pose.inverse();
    idx.into_iter().take(count).map(|i| inv.apply(world[i])).collect()
}

pub fn graph(points: Vec<Point2>) -> DTGraph {
    DTGraph::from_points(points).expect("triangulable point set")
}

/// Roughly plantation-density stand of `n` trees centred on the origin.
pub fn stand<R: Rng>(rng: &mut R, n: usize) -> Vec<Point2> {
    let extent = (n as f64 / 0.03).sqrt() / 2.0;
    scattered(rng, n, extent, 2.5)
}

/// `n` points uniformly on a vertical cylinder surface of the given radius
/// and height standing on z = 0, with radial noise `sigma`.
pub fn cylinder<R: Rng>(rng: &mut R, axis: Point2, radius: f64, height: f64, n: usize, sigma: f64) -> Vec<Point3> {
    (0..n)
        .map(|_| {
            let a = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let r = radius + sigma * rng.gen_range(-1.0..1.0);
            Point3::new(axis.x + r * a.cos(), axis.y + r * a.sin(), rng.gen_range(0.0..height))
        })
        .collect()
}

/// Regular ground grid at z = 0 over `[x0, x0 + size]²` with spacing `step`.
pub fn ground(x0: f64, y0: f64, size: f64, step: f64) -> Vec<Point3> {
    let k = (size / step) as usize;
    (0..=k)
        .flat_map(|i| (0..=k).map(move |j| Point3::new(x0 + i as f64 * step, y0 + j as f64 * step, 0.0)))
        .collect()
}
