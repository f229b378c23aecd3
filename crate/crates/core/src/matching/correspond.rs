//! Vertex pairing between two similar triangle stars and the per-pair rigid
//! transform estimate.

use crate::error::{Error, Result};
use crate::geometry::{centroid, Point2, RigidTransform2D};
use crate::graph::TriangleStar;

/// Center edges whose length differs from the best-matching pair by less
/// than this fraction of the edge length are treated as equally good.
pub const EDGE_AMBIGUITY_REL: f64 = 0.05;

/// Residual gap below which two pairings count as a tie.
pub const RESIDUAL_TIE: f64 = 1e-6;

/// Centered vectors shorter than this give no usable angle.
pub const MIN_CENTERED_LENGTH: f64 = 1e-9;

/// One matched pair of triangle stars.
#[derive(Clone, Debug, PartialEq)]
pub struct Correspondence {
    pub local_center: usize,
    pub global_center: usize,
    /// Maps local star slot `i` to global star slot `perm[i]`.
    pub perm: [usize; 6],
    /// Local and global vertex ids, paired slot by slot.
    pub local_vertices: [usize; 6],
    pub global_vertices: [usize; 6],
    /// Paired coordinates `(local, global)`.
    pub pairs: [(Point2, Point2); 6],
    /// Candidate rotation angle per vertex pair, `None` when excluded.
    pub betas: [Option<f64>; 6],
    pub transform: RigidTransform2D,
    /// Summed distance between transformed local and global vertices.
    pub residual: f64,
    /// Summed absolute difference of the two feature vectors.
    pub feature_deviation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformEstimate {
    pub transform: RigidTransform2D,
    pub betas: [Option<f64>; 6],
    pub residual: f64,
}

/// Length of the center edge opposite each center slot.
fn center_edge_lengths(s: &TriangleStar) -> [f64; 3] {
    let v = &s.vertices;
    [v[1].distance(&v[2]), v[2].distance(&v[0]), v[0].distance(&v[1])]
}

/// `(CA × CB) · (HM × HN)` for planar points, i.e. the product of the
/// orientations of `C` relative to `AB` and of `H` relative to `MN`.
/// Positive when both lie on the same side of their edge.
pub fn side_product(a: Point2, b: Point2, c: Point2, m: Point2, n: Point2, h: Point2) -> f64 {
    (a - c).cross(&(b - c)) * (m - h).cross(&(n - h))
}

/// Given a first pair `A ↔ M`, decides how the remaining vertices pair up.
/// Returns `[(B, N), (C, H)]` when the side product is positive and
/// `[(B, H), (C, N)]` otherwise. Arguments and results are slot indices.
pub fn pair_remaining(
    local: &[Point2],
    global: &[Point2],
    (a, b, c): (usize, usize, usize),
    (m, n, h): (usize, usize, usize),
) -> [(usize, usize); 2] {
    let s = side_product(local[a], local[b], local[c], global[m], global[n], global[h]);
    if s > 0.0 {
        [(b, n), (c, h)]
    } else {
        [(b, h), (c, n)]
    }
}

/// Candidate center-vertex mappings from edge-length similarity, best first.
/// More than one entry means the edge pairing was ambiguous.
pub fn center_pairings(local: &TriangleStar, global: &TriangleStar) -> Vec<[usize; 3]> {
    let ll = center_edge_lengths(local);
    let gl = center_edge_lengths(global);
    let mut options: Vec<(f64, usize, usize)> = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| ((ll[i] - gl[j]).abs(), i, j))
        .collect();
    options.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let (best, bi, _) = options[0];
    let margin = EDGE_AMBIGUITY_REL * ll[bi];

    let mut maps: Vec<[usize; 3]> = Vec::new();
    for &(diff, i, j) in &options {
        if diff > best + margin {
            break;
        }
        // The edge opposite A pairs with the edge opposite M.
        let (b, c) = ((i + 1) % 3, (i + 2) % 3);
        let (n, h) = ((j + 1) % 3, (j + 2) % 3);
        let rest = pair_remaining(&local.vertices, &global.vertices, (i, b, c), (j, n, h));
        let mut map = [0; 3];
        map[i] = j;
        for (l, g) in rest {
            map[l] = g;
        }
        if !maps.contains(&map) {
            maps.push(map);
        }
    }
    maps
}

/// Extends a center mapping to the neighbor apexes: neighbors sharing
/// paired center edges are paired.
pub fn complete_pairing(local: &TriangleStar, global: &TriangleStar, center: [usize; 3]) -> [usize; 6] {
    let mut perm = [center[0], center[1], center[2], 0, 0, 0];
    for s in 0..3 {
        let target = center[local.shared_edge[s]];
        let gs = global
            .shared_edge
            .iter()
            .position(|&e| e == target)
            .expect("every center edge of a star has a neighbor");
        perm[3 + s] = 3 + gs;
    }
    perm
}

/// Rotation and translation aligning the paired star vertices.
///
/// Each pair proposes the signed angle between its centroid-relative
/// vectors; the proposal with the smallest summed alignment error wins.
pub fn estimate_transform(perm: &[usize; 6], local: &[Point2; 6], global: &[Point2; 6]) -> Result<TransformEstimate> {
    let lc = centroid(local).ok_or(Error::DegenerateStar)?;
    let gc = centroid(global).ok_or(Error::DegenerateStar)?;
    let a: Vec<Point2> = local.iter().map(|&p| p - lc).collect();
    let b: Vec<Point2> = (0..6).map(|i| global[perm[i]] - gc).collect();

    let mut betas = [None; 6];
    for i in 0..6 {
        let (na, nb) = (a[i].norm(), b[i].norm());
        if na < MIN_CENTERED_LENGTH || nb < MIN_CENTERED_LENGTH {
            continue;
        }
        let cos = (a[i].dot(&b[i]) / (na * nb)).clamp(-1.0, 1.0);
        let sign = if a[i].perp().dot(&b[i]) < 0.0 { -1.0 } else { 1.0 };
        betas[i] = Some(sign * cos.acos());
    }

    let fit = |beta: f64| -> f64 { (0..6).map(|j| (a[j].rotated(beta) - b[j]).norm()).sum() };
    let mut best: Option<(f64, f64)> = None;
    for beta in betas.iter().flatten() {
        let cost = fit(*beta);
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, *beta));
        }
    }
    let (_, theta) = best.ok_or(Error::DegenerateStar)?;
    let transform = RigidTransform2D::new(theta, gc - lc.rotated(theta));
    let residual = (0..6)
        .map(|j| transform.apply(local[j]).distance(&global[perm[j]]))
        .sum();
    Ok(TransformEstimate {
        transform,
        betas,
        residual,
    })
}

fn assemble(local: &TriangleStar, global: &TriangleStar, perm: [usize; 6], est: TransformEstimate) -> Correspondence {
    let mut pairs = [(Point2::default(), Point2::default()); 6];
    let mut global_vertices = [0; 6];
    for i in 0..6 {
        pairs[i] = (local.vertices[i], global.vertices[perm[i]]);
        global_vertices[i] = global.vertex_ids[perm[i]];
    }
    Correspondence {
        local_center: local.center,
        global_center: global.center,
        perm,
        local_vertices: local.vertex_ids,
        global_vertices,
        pairs,
        betas: est.betas,
        transform: est.transform,
        residual: est.residual,
        feature_deviation: local
            .features
            .iter()
            .zip(global.features.iter())
            .map(|(x, y)| (x - y).abs())
            .sum(),
    }
}

/// Correspondence for an explicit vertex permutation.
pub fn correspondence_for(local: &TriangleStar, global: &TriangleStar, perm: [usize; 6]) -> Result<Correspondence> {
    let est = estimate_transform(&perm, &local.vertices, &global.vertices)?;
    Ok(assemble(local, global, perm, est))
}

/// Pairs the six star vertices and estimates the aligning transform.
///
/// When the center edge pairing is ambiguous every plausible pairing is
/// tried and the one with the lowest residual is kept.
pub fn correspond_vertices(local: &TriangleStar, global: &TriangleStar) -> Result<Correspondence> {
    let mut scored: Vec<Correspondence> = center_pairings(local, global)
        .into_iter()
        .filter_map(|center| correspondence_for(local, global, complete_pairing(local, global, center)).ok())
        .collect();
    if scored.is_empty() {
        return Err(Error::DegenerateStar);
    }
    scored.sort_by(|x, y| x.residual.total_cmp(&y.residual));
    if scored.len() > 1 && scored[1].residual - scored[0].residual < RESIDUAL_TIE {
        return Err(Error::AmbiguousCorrespondence);
    }
    Ok(scored.swap_remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DTGraph;
    use std::f64::consts::PI;

    /// A hexagon-ish ring around a central triangle; the center triangle's
    /// star is the only interior one.
    fn star_points() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(4.1, 0.3),
            Point2::new(1.7, 3.6),
            Point2::new(2.9, -3.8),
            Point2::new(5.8, 3.9),
            Point2::new(-2.6, 2.4),
            // outer ring keeps the six star vertices off the hull
            Point2::new(-7.0, -7.5),
            Point2::new(10.5, -6.0),
            Point2::new(11.0, 9.0),
            Point2::new(0.5, 11.5),
            Point2::new(-9.0, 6.0),
            Point2::new(-10.0, -1.0),
            Point2::new(3.0, -10.0),
        ]
    }

    fn center_star(points: &[Point2]) -> TriangleStar {
        let g = DTGraph::from_points(points.to_vec()).unwrap();
        let t = (0..g.num_triangles())
            .find(|&t| {
                let mut v = g.triangles()[t];
                v.sort();
                v == [0, 1, 2]
            })
            .expect("center triangle present");
        g.star(t).expect("center star is interior")
    }

    fn moved(points: &[Point2], t: RigidTransform2D) -> Vec<Point2> {
        points.iter().map(|&p| t.apply(p)).collect()
    }

    fn id_pairing_holds(c: &Correspondence) {
        for (l, g) in &c.pairs {
            assert!(c.transform.apply(*l).distance(g) < 1e-9);
        }
    }

    #[test]
    fn translated_star_pairs_translates() {
        let pts = star_points();
        let l = center_star(&pts);
        let g = center_star(&moved(&pts, RigidTransform2D::new(0.0, Point2::new(10.0, 0.0))));
        let c = correspond_vertices(&l, &g).unwrap();
        for i in 0..6 {
            let (lp, gp) = c.pairs[i];
            assert!((gp - lp).distance(&Point2::new(10.0, 0.0)) < 1e-12);
        }
        let v = &l.vertices;
        let w = &g.vertices;
        let p = c.perm;
        assert!(side_product(v[0], v[1], v[2], w[p[0]], w[p[1]], w[p[2]]) > 0.0);
        assert!(c.residual < 1e-9);
    }

    #[test]
    fn rotated_star_preserves_edge_lengths() {
        let pts = star_points();
        let l = center_star(&pts);
        let g = center_star(&moved(&pts, RigidTransform2D::new(PI / 2.0, Point2::new(0.0, 0.0))));
        let c = correspond_vertices(&l, &g).unwrap();
        id_pairing_holds(&c);
        for i in 0..6 {
            for j in i + 1..6 {
                let dl = c.pairs[i].0.distance(&c.pairs[j].0);
                let dg = c.pairs[i].1.distance(&c.pairs[j].1);
                assert!((dl - dg).abs() < 1e-9);
            }
        }
        assert!((c.transform.theta - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn mirrored_triangle_flips_side_product() {
        let (a, b, c) = (Point2::new(0.0, 0.0), Point2::new(4.0, 0.5), Point2::new(1.5, 3.0));
        let mirror = |p: Point2| Point2::new(p.x, -p.y);
        let shift = |p: Point2| p + Point2::new(10.0, 0.0);
        let local = [a, b, c];

        // Labels M, N, H are the images of A, B, C.
        let translated = [shift(a), shift(b), shift(c)];
        assert!(side_product(a, b, c, translated[0], translated[1], translated[2]) > 0.0);
        assert_eq!(pair_remaining(&local, &translated, (0, 1, 2), (0, 1, 2)), [(1, 1), (2, 2)]);

        let mirrored = [mirror(a), mirror(b), mirror(c)];
        let s = side_product(a, b, c, mirrored[0], mirrored[1], mirrored[2]);
        // Direct evaluation: (CA × CB) = 11.25, (HM × HN) = -11.25.
        assert!((s - (-11.25 * 11.25)).abs() < 1e-9);
        assert_eq!(pair_remaining(&local, &mirrored, (0, 1, 2), (0, 1, 2)), [(1, 2), (2, 1)]);
    }

    #[test]
    fn identity_transform() {
        let pts = star_points();
        let l = center_star(&pts);
        let est = estimate_transform(&[0, 1, 2, 3, 4, 5], &l.vertices, &l.vertices).unwrap();
        assert!(est.transform.theta.abs() < 1e-12);
        assert!(est.transform.t.norm() < 1e-12);
    }

    #[test]
    fn recovers_rotation_about_centroid_and_shift() {
        let pts = star_points();
        let l = center_star(&pts);
        let c = centroid(&l.vertices).unwrap();
        let th = 30f64.to_radians();
        let global: [Point2; 6] = l.vertices.map(|p| (p - c).rotated(th) + c + Point2::new(5.0, -2.0));
        let est = estimate_transform(&[0, 1, 2, 3, 4, 5], &l.vertices, &global).unwrap();
        assert!((est.transform.theta - th).abs() < 1e-6);
        // Expected translation: rotate about c then shift.
        let expect = RigidTransform2D::new(th, c + Point2::new(5.0, -2.0) - c.rotated(th));
        assert!(est.transform.t.distance(&expect.t) < 1e-6);
        for b in est.betas.iter().flatten() {
            assert!((b - th).abs() < 1e-9);
        }
    }

    #[test]
    fn quarter_turn_sign_convention() {
        let a = Point2::new(1.0, 0.0);
        let b = Point2::new(0.0, 1.0);
        assert_eq!(a.perp().dot(&b).signum(), 1.0);
        assert_eq!(b.perp().dot(&a).signum(), -1.0);
    }

    #[test]
    fn degenerate_star_geometry() {
        let z = [Point2::new(1.0, 1.0); 6];
        assert!(matches!(
            estimate_transform(&[0, 1, 2, 3, 4, 5], &z, &z),
            Err(Error::DegenerateStar)
        ));
    }

    #[test]
    fn one_centered_vector_excluded() {
        // Vertex 0 sits on the centroid on the local side.
        let local = [
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(-2.0, 0.0),
            Point2::new(0.0, 3.0),
            Point2::new(0.0, -3.0),
            Point2::new(0.0, 0.0),
        ];
        let t = RigidTransform2D::new(0.4, Point2::new(1.0, 2.0));
        let global = local.map(|p| t.apply(p));
        let est = estimate_transform(&[0, 1, 2, 3, 4, 5], &local, &global).unwrap();
        assert!(est.betas[0].is_none() && est.betas[5].is_none());
        assert!((est.transform.theta - 0.4).abs() < 1e-12);
    }

    #[test]
    fn symmetric_star_is_ambiguous() {
        // Equilateral center with congruent neighbors at each edge: every
        // rotation fits equally well.
        let r = 3.0;
        let mut pts = Vec::new();
        for k in 0..3 {
            let a = 2.0 * PI * k as f64 / 3.0 + 0.1;
            pts.push(Point2::new(r * a.cos(), r * a.sin()));
        }
        for k in 0..3 {
            let a = 2.0 * PI * k as f64 / 3.0 + 0.1 + PI / 3.0;
            pts.push(Point2::new(2.2 * r * a.cos(), 2.2 * r * a.sin()));
        }
        for k in 0..6 {
            let a = 2.0 * PI * k as f64 / 6.0 + 0.37;
            pts.push(Point2::new(6.0 * r * a.cos(), 6.0 * r * a.sin()));
        }
        let g = DTGraph::from_points(pts).unwrap();
        let t = (0..g.num_triangles())
            .find(|&t| {
                let mut v = g.triangles()[t];
                v.sort();
                v == [0, 1, 2]
            })
            .unwrap();
        let s = g.star(t).unwrap();
        assert!(matches!(correspond_vertices(&s, &s), Err(Error::AmbiguousCorrespondence)));
    }
}
