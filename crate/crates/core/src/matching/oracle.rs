//! Exhaustive reference matcher for small graphs.
//!
//! Compares every local star with every map star under all three
//! orientation-preserving center rotations, with no index and no edge-length
//! heuristics. Outlier rejection is shared with [`super::localize`]. The
//! final transform comes from iteratively reweighted Procrustes rather than a
//! grid search, so agreement with [`super::localize`] is meaningful.

use crate::error::{Error, Result};
use crate::geometry::{Point2, RigidTransform2D};
use crate::graph::{DTGraph, TriangleStar};

use super::{correspondence_for, reject_outliers, Correspondence, MatchParams, ResidualNorm};

pub const ORACLE_MAX_VERTICES: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub correspondences: Vec<Correspondence>,
    pub transform: RigidTransform2D,
    pub residual: f64,
}

/// Global star slots for a local-to-global center rotation, pairing
/// neighbors by the center vertices they share.
fn rotation_pairing(local: &TriangleStar, global: &TriangleStar, r: usize) -> Option<[usize; 6]> {
    let center = [r % 3, (1 + r) % 3, (2 + r) % 3];
    let mut perm = [center[0], center[1], center[2], 0, 0, 0];
    for s in 0..3 {
        let mut mapped: Vec<usize> = (0..3).filter(|&k| k != local.shared_edge[s]).map(|k| center[k]).collect();
        mapped.sort_unstable();
        let hit = (0..3).find(|&gs| {
            let mut edge: Vec<usize> = (0..3).filter(|&k| k != global.shared_edge[gs]).collect();
            edge.sort_unstable();
            edge == mapped
        })?;
        perm[3 + s] = 3 + hit;
    }
    Some(perm)
}

fn within_tolerance(local: &TriangleStar, global: &TriangleStar, tol: f64) -> bool {
    (0..8).all(|k| (local.features[k] - global.features[k]).abs() <= tol * global.features[k].abs())
}

fn total_error(pairs: &[(Point2, Point2)], t: &RigidTransform2D, norm: ResidualNorm) -> f64 {
    pairs
        .iter()
        .map(|(l, g)| {
            let d = t.apply(*l).distance(g);
            match norm {
                ResidualNorm::Euclidean => d,
                ResidualNorm::Squared => d * d,
            }
        })
        .sum()
}

/// Weighted least-squares rigid alignment.
fn weighted_procrustes(pairs: &[(Point2, Point2)], w: &[f64]) -> RigidTransform2D {
    let sw: f64 = w.iter().sum();
    let (mut lc, mut gc) = (Point2::default(), Point2::default());
    for ((l, g), &wi) in pairs.iter().zip(w) {
        lc = lc + *l * (wi / sw);
        gc = gc + *g * (wi / sw);
    }
    let (mut sin, mut cos) = (0.0, 0.0);
    for ((l, g), &wi) in pairs.iter().zip(w) {
        let (a, b) = (*l - lc, *g - gc);
        sin += wi * a.cross(&b);
        cos += wi * a.dot(&b);
    }
    let theta = sin.atan2(cos);
    RigidTransform2D::new(theta, gc - lc.rotated(theta))
}

/// Minimizer of the summed residual starting from `start`. Each
/// reweighting step never increases the Euclidean objective.
fn irls(pairs: &[(Point2, Point2)], start: RigidTransform2D, norm: ResidualNorm) -> RigidTransform2D {
    let ones = vec![1.0; pairs.len()];
    if norm == ResidualNorm::Squared {
        return weighted_procrustes(pairs, &ones);
    }
    let mut t = start;
    let mut f = total_error(pairs, &t, norm);
    for _ in 0..2000 {
        let w: Vec<f64> = pairs.iter().map(|(l, g)| 1.0 / t.apply(*l).distance(g).max(1e-12)).collect();
        let next = weighted_procrustes(pairs, &w);
        let fn_ = total_error(pairs, &next, norm);
        if fn_ > f {
            break;
        }
        let done = f - fn_ <= 1e-15 * (1.0 + f);
        t = next;
        f = fn_;
        if done {
            break;
        }
    }
    t
}

/// Reference matching result by exhaustive enumeration. Both graphs must
/// have at most [`ORACLE_MAX_VERTICES`] vertices.
pub fn brute_force_match_oracle(local: &DTGraph, map: &DTGraph, params: &MatchParams) -> Result<OracleResult> {
    for g in [local, map] {
        if g.num_vertices() > ORACLE_MAX_VERTICES {
            return Err(Error::OracleSizeCap(g.num_vertices()));
        }
    }
    let local_stars = local.select_interior_stars();
    let map_stars = map.select_interior_stars();
    let mut chosen = Vec::new();
    let mut any_candidate = false;
    for ls in &local_stars {
        let mut best: Option<Correspondence> = None;
        for gs in &map_stars {
            if !within_tolerance(ls, gs, params.feature_tolerance) {
                continue;
            }
            any_candidate = true;
            for r in 0..3 {
                let Some(perm) = rotation_pairing(ls, gs, r) else {
                    continue;
                };
                let Ok(c) = correspondence_for(ls, gs, perm) else {
                    continue;
                };
                if c.residual / 6.0 > params.max_vertex_residual {
                    continue;
                }
                let wins = match &best {
                    None => true,
                    Some(b) => (c.residual, c.global_center, c.perm) < (b.residual, b.global_center, b.perm),
                };
                if wins {
                    best = Some(c);
                }
            }
        }
        chosen.extend(best);
    }
    if !any_candidate {
        return Err(Error::NoOverlap);
    }
    if let Some(k) = params.outlier_mads {
        let keep = reject_outliers(&chosen, k);
        chosen = chosen.into_iter().zip(keep).filter_map(|(c, k)| k.then_some(c)).collect();
    }
    if chosen.is_empty() || chosen.len() < params.min_matches {
        return Err(Error::InsufficientMatches {
            found: chosen.len(),
            required: params.min_matches.max(1),
        });
    }

    let pairs: Vec<(Point2, Point2)> = chosen.iter().flat_map(|c| c.pairs).collect();
    let mut fit: Option<(f64, RigidTransform2D)> = None;
    for c in &chosen {
        let t = irls(&pairs, c.transform, params.residual_norm);
        let r = total_error(&pairs, &t, params.residual_norm);
        if fit.is_none_or(|(best, _)| r < best) {
            fit = Some((r, t));
        }
    }
    let (residual, transform) = fit.expect("at least one correspondence");
    Ok(OracleResult {
        correspondences: chosen,
        transform,
        residual,
    })
}
