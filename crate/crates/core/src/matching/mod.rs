//! Star matching and global localization.
//!
//! Every interior star of the local graph is compared against the map's
//! stars by feature vector. Surviving pairs get a vertex pairing and a rigid
//! transform; the best pair per local star is kept, outliers are rejected
//! and a final search finds the transform that best aligns all pairs.

mod correspond;
mod oracle;
mod verify;

use std::time::Instant;

use rayon::prelude::*;

pub use correspond::{
    center_pairings, complete_pairing, correspond_vertices, correspondence_for, estimate_transform,
    pair_remaining, side_product, Correspondence, TransformEstimate,
};
pub use oracle::{brute_force_match_oracle, OracleResult, ORACLE_MAX_VERTICES};
pub use verify::{alignment_residual, reject_outliers, unwrapped_angles, verify, SearchGrid, VerificationOutcome};

use crate::error::{Error, Result};
use crate::geometry::RigidTransform2D;
use crate::graph::{DTGraph, TriangleStar};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ResidualNorm {
    /// Sum of Euclidean distances.
    #[default]
    Euclidean,
    /// Sum of squared distances.
    Squared,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchParams {
    /// Relative per-feature tolerance for star candidates.
    pub feature_tolerance: f64,
    pub max_candidates_per_star: usize,
    /// Pairs whose mean per-vertex alignment error exceeds this (m) are
    /// not accepted.
    pub max_vertex_residual: f64,
    pub angle_steps: usize,
    pub shift_steps: usize,
    pub min_matches: usize,
    /// Outlier threshold in MADs; `None` disables rejection.
    pub outlier_mads: Option<f64>,
    pub residual_norm: ResidualNorm,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            feature_tolerance: 0.05,
            max_candidates_per_star: 16,
            max_vertex_residual: 0.5,
            angle_steps: 64,
            shift_steps: 32,
            min_matches: 1,
            outlier_mads: Some(3.0),
            residual_norm: ResidualNorm::Euclidean,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.feature_tolerance.is_finite()
            && self.feature_tolerance > 0.0
            && self.max_vertex_residual > 0.0
            && self.max_candidates_per_star > 0
            && self.angle_steps > 0
            && self.shift_steps > 0
            && self.outlier_mads.is_none_or(|k| k > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams("matching parameters out of range".into()))
        }
    }

    fn grid(&self) -> SearchGrid {
        SearchGrid {
            angle_steps: self.angle_steps,
            shift_steps: self.shift_steps,
        }
    }
}

/// A map star accepted as a candidate for some local star.
#[derive(Clone, Copy, Debug)]
pub struct StarCandidate<'a> {
    pub star: &'a TriangleStar,
    /// Summed absolute feature difference.
    pub deviation: f64,
}

/// Summed absolute feature difference, or `None` when some feature differs
/// by more than `tolerance` relative to the map value.
pub fn feature_deviation(local: &TriangleStar, global: &TriangleStar, tolerance: f64) -> Option<f64> {
    let mut total = 0.0;
    for (l, g) in local.features.iter().zip(global.features.iter()) {
        let d = (l - g).abs();
        if d > tolerance * g.abs() {
            return None;
        }
        total += d;
    }
    Some(total)
}

fn rank_candidates<'a>(local: &TriangleStar, pool: impl Iterator<Item = &'a TriangleStar>, params: &MatchParams) -> Vec<StarCandidate<'a>> {
    let mut out: Vec<StarCandidate<'a>> = pool
        .filter_map(|g| {
            feature_deviation(local, g, params.feature_tolerance).map(|deviation| StarCandidate { star: g, deviation })
        })
        .collect();
    out.sort_by(|a, b| a.deviation.total_cmp(&b.deviation).then(a.star.center.cmp(&b.star.center)));
    out.truncate(params.max_candidates_per_star);
    out
}

/// Map stars similar to `local`, most similar first.
pub fn find_candidate_stars<'a>(local: &TriangleStar, global: &'a [TriangleStar], params: &MatchParams) -> Vec<StarCandidate<'a>> {
    rank_candidates(local, global.iter(), params)
}

/// Map graph with its interior stars sorted by center area for range
/// lookups.
#[derive(Clone, Debug)]
pub struct MapIndex {
    graph: DTGraph,
    stars: Vec<TriangleStar>,
}

impl MapIndex {
    pub fn new(graph: DTGraph) -> Self {
        let mut stars = graph.select_interior_stars();
        stars.sort_by(|a, b| a.features[0].total_cmp(&b.features[0]).then(a.center.cmp(&b.center)));
        MapIndex { graph, stars }
    }

    pub fn graph(&self) -> &DTGraph {
        &self.graph
    }

    pub fn stars(&self) -> &[TriangleStar] {
        &self.stars
    }

    /// Same result as [`find_candidate_stars`] over all map stars.
    pub fn candidates(&self, local: &TriangleStar, params: &MatchParams) -> Vec<StarCandidate<'_>> {
        let area = local.features[0];
        let tol = params.feature_tolerance;
        // |a - g| <= tol * g  <=>  a / (1 + tol) <= g <= a / (1 - tol)
        let lo = area / (1.0 + tol);
        let hi = if tol < 1.0 { area / (1.0 - tol) } else { f64::INFINITY };
        let start = self.stars.partition_point(|s| s.features[0] < lo * (1.0 - 1e-12));
        let end = self.stars.partition_point(|s| s.features[0] <= hi * (1.0 + 1e-12));
        rank_candidates(local, self.stars[start..end.max(start)].iter(), params)
    }
}

/// Wall-clock seconds spent in each localization phase.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LocalizationTimings {
    pub star_selection: f64,
    pub matching: f64,
    pub verification: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalizationResult {
    /// Local-to-map transform. The local frame is centered on the vehicle,
    /// so `pose.t` is the vehicle position and `pose.theta` its heading.
    pub pose: RigidTransform2D,
    pub residual: f64,
    /// Correspondences used by the final search.
    pub correspondences: Vec<Correspondence>,
    pub rejected: usize,
    pub candidate_count: usize,
    pub local_star_count: usize,
    pub timings: LocalizationTimings,
}

impl LocalizationResult {
    pub fn match_count(&self) -> usize {
        self.correspondences.len()
    }
}

fn preferred(a: &Correspondence, b: &Correspondence) -> bool {
    a.residual
        .total_cmp(&b.residual)
        .then(a.global_center.cmp(&b.global_center))
        .then(a.perm.cmp(&b.perm))
        .is_lt()
}

/// Best accepted correspondence for one local star plus the number of
/// candidates examined.
fn best_for_star(local: &TriangleStar, map: &MapIndex, params: &MatchParams, initial: Option<&RigidTransform2D>) -> (Option<Correspondence>, usize) {
    let mut candidates = map.candidates(local, params);
    if let Some(pose) = initial {
        let predicted = pose.apply(local.centroid());
        candidates.sort_by(|a, b| {
            a.star
                .centroid()
                .distance(&predicted)
                .total_cmp(&b.star.centroid().distance(&predicted))
        });
    }
    let mut best: Option<Correspondence> = None;
    for cand in &candidates {
        let Ok(c) = correspond_vertices(local, cand.star) else {
            continue;
        };
        if c.residual / 6.0 > params.max_vertex_residual {
            continue;
        }
        if best.as_ref().is_none_or(|b| preferred(&c, b)) {
            best = Some(c);
        }
    }
    (best, candidates.len())
}

/// Localizes the local graph in the map.
///
/// `initial` only changes the order in which candidates are examined; the
/// result does not depend on it.
pub fn localize(local: &DTGraph, map: &MapIndex, params: &MatchParams, initial: Option<&RigidTransform2D>) -> Result<LocalizationResult> {
    params.validate()?;
    let clock = Instant::now();
    let stars = local.select_interior_stars();
    let star_selection = clock.elapsed().as_secs_f64();
    if stars.is_empty() {
        return Err(Error::NoOverlap);
    }

    let clock = Instant::now();
    let per_star: Vec<(Option<Correspondence>, usize)> =
        stars.par_iter().map(|s| best_for_star(s, map, params, initial)).collect();
    let candidate_count = per_star.iter().map(|(_, n)| n).sum();
    let accepted: Vec<Correspondence> = per_star.into_iter().filter_map(|(c, _)| c).collect();
    let matching = clock.elapsed().as_secs_f64();
    if candidate_count == 0 {
        return Err(Error::NoOverlap);
    }

    let clock = Instant::now();
    let keep = match params.outlier_mads {
        Some(k) => reject_outliers(&accepted, k),
        None => vec![true; accepted.len()],
    };
    let rejected = keep.iter().filter(|&&k| !k).count();
    let kept: Vec<Correspondence> = accepted.into_iter().zip(keep).filter_map(|(c, k)| k.then_some(c)).collect();
    if kept.is_empty() || kept.len() < params.min_matches {
        return Err(Error::InsufficientMatches {
            found: kept.len(),
            required: params.min_matches.max(1),
        });
    }
    let outcome = verify(&kept, params.grid(), params.residual_norm);
    let verification = clock.elapsed().as_secs_f64();

    Ok(LocalizationResult {
        pose: outcome.transform,
        residual: outcome.residual,
        correspondences: kept,
        rejected,
        candidate_count,
        local_star_count: stars.len(),
        timings: LocalizationTimings {
            star_selection,
            matching,
            verification,
        },
    })
}
