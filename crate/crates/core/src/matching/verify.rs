//! Outlier rejection and the global transform search over all accepted
//! correspondences.

use std::cmp::Ordering;

use crate::geometry::{angle_diff, normalize_angle, Point2, RigidTransform2D};

use super::{Correspondence, ResidualNorm};

/// Half-widths used when the candidate spread along an axis collapses.
pub const COLLAPSED_ANGLE_HALF_WIDTH: f64 = 1.0 * std::f64::consts::PI / 180.0;
pub const COLLAPSED_SHIFT_HALF_WIDTH: f64 = 0.5;

/// Lower bounds on the median absolute deviation.
pub const MAD_FLOOR_ANGLE: f64 = 1e-3;
pub const MAD_FLOOR_SHIFT: f64 = 1e-2;

/// Rejection is skipped when fewer correspondences would survive it.
pub const MIN_KEPT_AFTER_REJECTION: usize = 4;

#[derive(Clone, Copy, Debug)]
pub struct SearchGrid {
    pub angle_steps: usize,
    pub shift_steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerificationOutcome {
    pub transform: RigidTransform2D,
    pub residual: f64,
    /// Lowest residual among grid nodes and candidate transforms, before
    /// refinement.
    pub coarse_residual: f64,
    pub evaluations: usize,
}

/// Summed alignment error of `t` over the vertex pairs.
pub fn alignment_residual(pairs: &[(Point2, Point2)], t: &RigidTransform2D, norm: ResidualNorm) -> f64 {
    let (s, c) = t.theta.sin_cos();
    residual_sc(pairs, s, c, t.t.x, t.t.y, norm)
}

fn residual_sc(pairs: &[(Point2, Point2)], s: f64, c: f64, x: f64, y: f64, norm: ResidualNorm) -> f64 {
    pairs
        .iter()
        .map(|(l, g)| {
            let dx = c * l.x - s * l.y + x - g.x;
            let dy = s * l.x + c * l.y + y - g.y;
            match norm {
                ResidualNorm::Euclidean => dx.hypot(dy),
                ResidualNorm::Squared => dx * dx + dy * dy,
            }
        })
        .sum()
}

/// Index of the angle with the smallest summed circular distance to the
/// others, lowest index on ties.
fn circular_medoid(angles: &[f64]) -> usize {
    let cost = |i: usize| -> f64 { angles.iter().map(|&b| angle_diff(b, angles[i]).abs()).sum() };
    (0..angles.len())
        .min_by(|&a, &b| cost(a).total_cmp(&cost(b)).then(a.cmp(&b)))
        .unwrap_or(0)
}

/// Candidate angles unwrapped onto a common branch around their medoid.
pub fn unwrapped_angles(corrs: &[Correspondence]) -> Vec<f64> {
    let raw: Vec<f64> = corrs.iter().map(|c| c.transform.theta).collect();
    if raw.is_empty() {
        return raw;
    }
    let reference = raw[circular_medoid(&raw)];
    raw.iter().map(|&a| reference + angle_diff(a, reference)).collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Keep mask over `corrs`: a correspondence survives when its angle and both
/// translation components lie within `k` scaled MADs of the median.
pub fn reject_outliers(corrs: &[Correspondence], k: f64) -> Vec<bool> {
    let n = corrs.len();
    if n < MIN_KEPT_AFTER_REJECTION {
        return vec![true; n];
    }
    let angles = unwrapped_angles(corrs);
    let xs: Vec<f64> = corrs.iter().map(|c| c.transform.t.x).collect();
    let ys: Vec<f64> = corrs.iter().map(|c| c.transform.t.y).collect();
    let mut keep = vec![true; n];
    for (values, floor) in [(&angles, MAD_FLOOR_ANGLE), (&xs, MAD_FLOOR_SHIFT), (&ys, MAD_FLOOR_SHIFT)] {
        let med = median(&mut values.clone());
        let mut dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
        let mad = median(&mut dev).max(floor);
        for (i, v) in values.iter().enumerate() {
            if (v - med).abs() > k * mad {
                keep[i] = false;
            }
        }
    }
    if keep.iter().filter(|&&k| k).count() < MIN_KEPT_AFTER_REJECTION {
        return vec![true; n];
    }
    keep
}

fn interval(values: impl Iterator<Item = f64>, half_width: f64) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi - lo < 1e-9 {
        let mid = 0.5 * (lo + hi);
        (mid - half_width, mid + half_width)
    } else {
        (lo, hi)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| if n > 1 { lo + step * i as f64 } else { 0.5 * (lo + hi) })
}

type Node = (f64, [f64; 3]);

fn better(a: &Node, b: &Node) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a.1.iter().zip(b.1.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()) == Some(Ordering::Less),
    }
}

/// Minimizes the summed alignment residual over rotation and translation.
///
/// The search box spans the candidate transforms. Grid nodes and the
/// candidate transforms themselves seed a simplex refinement, which is only
/// kept when it lowers the residual.
pub fn verify(corrs: &[Correspondence], grid: SearchGrid, norm: ResidualNorm) -> VerificationOutcome {
    let pairs: Vec<(Point2, Point2)> = corrs.iter().flat_map(|c| c.pairs.iter().copied()).collect();
    let angles = unwrapped_angles(corrs);
    let b = interval(angles.iter().copied(), COLLAPSED_ANGLE_HALF_WIDTH);
    let dx = interval(corrs.iter().map(|c| c.transform.t.x), COLLAPSED_SHIFT_HALF_WIDTH);
    let dy = interval(corrs.iter().map(|c| c.transform.t.y), COLLAPSED_SHIFT_HALF_WIDTH);

    let f = |v: &[f64; 3]| {
        let (s, c) = v[0].sin_cos();
        residual_sc(&pairs, s, c, v[1], v[2], norm)
    };

    let mut evaluations = 0;
    let mut best: Node = (f64::INFINITY, [0.0; 3]);
    let xs: Vec<f64> = linspace(dx.0, dx.1, grid.shift_steps).collect();
    let ys: Vec<f64> = linspace(dy.0, dy.1, grid.shift_steps).collect();
    for beta in linspace(b.0, b.1, grid.angle_steps) {
        let (s, c) = beta.sin_cos();
        let rotated: Vec<(Point2, Point2)> =
            pairs.iter().map(|(l, g)| (Point2::new(c * l.x - s * l.y, s * l.x + c * l.y), *g)).collect();
        for &x in &xs {
            for &y in &ys {
                let r = residual_sc(&rotated, 0.0, 1.0, x, y, norm);
                evaluations += 1;
                let node = (r, [beta, x, y]);
                if better(&node, &best) {
                    best = node;
                }
            }
        }
    }
    for (c, &theta) in corrs.iter().zip(angles.iter()) {
        let v = [theta, c.transform.t.x, c.transform.t.y];
        let node = (f(&v), v);
        evaluations += 1;
        if better(&node, &best) {
            best = node;
        }
    }
    let coarse = best;

    let spacing = |(lo, hi): (f64, f64), n: usize| (hi - lo) / (n.max(2) - 1) as f64;
    let mut step = [spacing(b, grid.angle_steps), spacing(dx, grid.shift_steps), spacing(dy, grid.shift_steps)];
    for _ in 0..3 {
        let (v, r, n) = nelder_mead(&f, best.1, step, 4000);
        evaluations += n;
        if r < best.0 {
            best = (r, v);
        }
        step = step.map(|s| s * 1e-2);
    }

    VerificationOutcome {
        transform: RigidTransform2D::new(normalize_angle(best.1[0]), Point2::new(best.1[1], best.1[2])),
        residual: best.0,
        coarse_residual: coarse.0,
        evaluations,
    }
}

/// Downhill simplex minimization; returns the best vertex, its value and
/// the number of evaluations.
fn nelder_mead<F: Fn(&[f64; 3]) -> f64>(f: &F, x0: [f64; 3], step: [f64; 3], max_iter: usize) -> ([f64; 3], f64, usize) {
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    simplex.push((x0, f(&x0)));
    for i in 0..3 {
        let mut x = x0;
        x[i] += if step[i] > 0.0 { step[i] } else { 1e-6 };
        simplex.push((x, f(&x)));
    }
    let mut evals = 4;
    let lerp = |a: &[f64; 3], b: &[f64; 3], t: f64| -> [f64; 3] { [0, 1, 2].map(|i| a[i] + t * (b[i] - a[i])) };

    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (lo, hi) = (simplex[0].1, simplex[3].1);
        let size = (1..4)
            .map(|i| (0..3).map(|k| (simplex[i].0[k] - simplex[0].0[k]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if hi - lo <= 1e-15 * (1.0 + lo.abs()) && size < 1e-12 || size < 1e-14 {
            break;
        }
        let centroid = [0, 1, 2].map(|k| (simplex[0].0[k] + simplex[1].0[k] + simplex[2].0[k]) / 3.0);
        let worst = simplex[3];
        let xr = lerp(&centroid, &worst.0, -1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = lerp(&centroid, &worst.0, -2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = lerp(&centroid, &xr, 0.5);
                (x, f(&x))
            } else {
                let x = lerp(&centroid, &worst.0, 0.5);
                (x, f(&x))
            };
            evals += 1;
            if fc < worst.1.min(fr) {
                simplex[3] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for s in simplex.iter_mut().skip(1) {
                    s.0 = lerp(&best, &s.0, 0.5);
                    s.1 = f(&s.0);
                }
                evals += 3;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0, simplex[0].1, evals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr_with(theta: f64, t: Point2, pairs: [(Point2, Point2); 6]) -> Correspondence {
        Correspondence {
            local_center: 0,
            global_center: 0,
            perm: [0, 1, 2, 3, 4, 5],
            local_vertices: [0; 6],
            global_vertices: [0; 6],
            pairs,
            betas: [None; 6],
            transform: RigidTransform2D::new(theta, t),
            residual: 0.0,
            feature_deviation: 0.0,
        }
    }

    fn hexagon(offset: Point2) -> [Point2; 6] {
        [0, 1, 2, 3, 4, 5].map(|k| {
            let a = k as f64 * 1.1 + 0.3;
            offset + Point2::new((2.0 + k as f64 * 0.4) * a.cos(), (2.0 + k as f64 * 0.4) * a.sin())
        })
    }

    fn exact_corr(truth: RigidTransform2D, offset: Point2, theta: f64, t: Point2) -> Correspondence {
        let local = hexagon(offset);
        corr_with(theta, t, local.map(|p| (p, truth.apply(p))))
    }

    const GRID: SearchGrid = SearchGrid {
        angle_steps: 64,
        shift_steps: 32,
    };

    #[test]
    fn exact_candidate_is_kept() {
        let truth = RigidTransform2D::new(0.7, Point2::new(12.0, -4.0));
        let c = exact_corr(truth, Point2::new(3.0, 1.0), truth.theta, truth.t);
        let out = verify(&[c], GRID, ResidualNorm::Euclidean);
        assert!(out.residual < 1e-9);
        assert!((out.transform.theta - 0.7).abs() < 1e-9);
    }

    #[test]
    fn refinement_reaches_the_common_optimum() {
        // Candidates are each slightly off; the joint optimum is the truth.
        let truth = RigidTransform2D::new(-2.0, Point2::new(-40.0, 25.0));
        let corrs: Vec<Correspondence> = (0..5)
            .map(|k| {
                let e = 0.01 * (k as f64 - 2.0);
                exact_corr(truth, Point2::new(8.0 * k as f64, -3.0 * k as f64), truth.theta + e, truth.t + Point2::new(e, -e))
            })
            .collect();
        let out = verify(&corrs, GRID, ResidualNorm::Euclidean);
        assert!(out.residual <= out.coarse_residual);
        assert!(out.residual < 1e-6, "{}", out.residual);
        assert!(angle_diff(out.transform.theta, truth.theta).abs() < 1e-8);
        assert!(out.transform.t.distance(&truth.t) < 1e-6);
    }

    #[test]
    fn wraparound_angles_stay_together() {
        let truth = RigidTransform2D::new(std::f64::consts::PI - 0.001, Point2::new(1.0, 1.0));
        let a = exact_corr(truth, Point2::new(0.0, 0.0), truth.theta, truth.t);
        let wrapped = RigidTransform2D::new(truth.theta + 0.003, truth.t);
        let b = exact_corr(truth, Point2::new(5.0, 5.0), wrapped.theta, wrapped.t);
        assert!(wrapped.theta < 0.0);
        let un = unwrapped_angles(&[a.clone(), b.clone()]);
        assert!((un[0] - un[1]).abs() < 0.01);
        let out = verify(&[a, b], GRID, ResidualNorm::Euclidean);
        assert!(out.residual < 1e-6);
    }

    #[test]
    fn outlier_is_dropped() {
        let truth = RigidTransform2D::new(0.2, Point2::new(3.0, 3.0));
        let mut corrs: Vec<Correspondence> = (0..6)
            .map(|k| exact_corr(truth, Point2::new(k as f64, 0.0), truth.theta + 1e-4 * k as f64, truth.t))
            .collect();
        corrs.push(exact_corr(truth, Point2::new(0.0, 9.0), 1.5, Point2::new(-20.0, 7.0)));
        let keep = reject_outliers(&corrs, 3.0);
        assert_eq!(keep, vec![true, true, true, true, true, true, false]);
        // Too few to judge.
        assert_eq!(reject_outliers(&corrs[4..], 3.0), vec![true; 3]);
    }

    #[test]
    fn squared_norm_residual() {
        let pairs = [(Point2::new(0.0, 0.0), Point2::new(3.0, 4.0))];
        let id = RigidTransform2D::identity();
        assert_eq!(alignment_residual(&pairs, &id, ResidualNorm::Euclidean), 5.0);
        assert_eq!(alignment_residual(&pairs, &id, ResidualNorm::Squared), 25.0);
    }
}
