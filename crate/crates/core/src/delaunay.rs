//! Incremental Delaunay triangulation.
//!
//! Points are inserted in lexicographic `(x, y)` order, so every new point
//! lies outside the hull of the points already inserted and can be attached
//! to the chain of hull edges it sees. Lawson flips then restore the empty
//! circumcircle property. Orientation and in-circle tests use adaptive exact
//! arithmetic. Cocircular configurations are left unflipped, which makes the
//! result depend only on point coordinates, never on input order.

use std::cmp::Ordering;

use robust::Coord;

use crate::error::{Error, Result};
use crate::geometry::Point2;

const NONE: usize = usize::MAX;

fn coord(p: &Point2) -> Coord<f64> {
    Coord { x: p.x, y: p.y }
}

/// Positive when `a, b, c` turn counter-clockwise, zero when collinear.
pub fn orient2d(a: &Point2, b: &Point2, c: &Point2) -> f64 {
    robust::orient2d(coord(a), coord(b), coord(c))
}

/// Positive when `d` lies strictly inside the circle through the
/// counter-clockwise triangle `a, b, c`.
pub fn incircle(a: &Point2, b: &Point2, c: &Point2, d: &Point2) -> f64 {
    robust::incircle(coord(a), coord(b), coord(c), coord(d))
}

/// Raw triangulation: counter-clockwise vertex triples plus the hull cycle
/// (counter-clockwise, including collinear boundary vertices).
#[derive(Clone, Debug)]
pub(crate) struct Triangulation {
    pub triangles: Vec<[usize; 3]>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub hull: Vec<usize>,
}

fn lex_cmp(a: &Point2, b: &Point2) -> Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

struct Builder<'a> {
    pts: &'a [Point2],
    tri: Vec<usize>,
    opp: Vec<usize>,
    hull_next: Vec<usize>,
    hull_prev: Vec<usize>,
    /// Half-edge starting at each hull vertex and running along the hull.
    hull_edge: Vec<usize>,
    stack: Vec<usize>,
}

impl<'a> Builder<'a> {
    fn new(pts: &'a [Point2]) -> Self {
        let n = pts.len();
        Builder {
            pts,
            tri: Vec::with_capacity(6 * n),
            opp: Vec::with_capacity(6 * n),
            hull_next: vec![NONE; n],
            hull_prev: vec![NONE; n],
            hull_edge: vec![NONE; n],
            stack: Vec::new(),
        }
    }

    fn add_triangle(&mut self, a: usize, b: usize, c: usize) -> usize {
        let t = self.tri.len();
        self.tri.extend_from_slice(&[a, b, c]);
        self.opp.extend_from_slice(&[NONE, NONE, NONE]);
        t
    }

    fn link(&mut self, a: usize, b: usize) {
        self.opp[a] = b;
        if b != NONE {
            self.opp[b] = a;
        }
    }

    fn orient(&self, a: usize, b: usize, c: usize) -> f64 {
        orient2d(&self.pts[a], &self.pts[b], &self.pts[c])
    }

    /// Fan over a collinear prefix `0..k` with apex `k`.
    fn seed(&mut self, k: usize) {
        let ccw = self.orient(0, 1, k) > 0.0;
        let mut prev_spoke = NONE;
        for i in 0..k - 1 {
            let t = if ccw {
                self.add_triangle(i, i + 1, k)
            } else {
                self.add_triangle(i + 1, i, k)
            };
            // Spoke toward the previous fan triangle and the next one.
            let (to_prev, to_next) = if ccw { (t + 2, t + 1) } else { (t + 1, t + 2) };
            self.link(to_prev, prev_spoke);
            prev_spoke = to_next;
        }
        let order: Vec<usize> = if ccw {
            (0..=k).collect()
        } else {
            std::iter::once(0).chain((1..=k).rev()).collect()
        };
        for w in 0..order.len() {
            let (v, nv) = (order[w], order[(w + 1) % order.len()]);
            self.hull_next[v] = nv;
            self.hull_prev[nv] = v;
        }
        // Hull half-edges are the ones without a twin.
        for e in 0..self.tri.len() {
            if self.opp[e] == NONE {
                self.hull_edge[self.tri[e]] = e;
            }
        }
    }

    fn insert(&mut self, p: usize, last: usize) -> Result<()> {
        let mut start = last;
        while self.orient(self.hull_prev[start], start, p) < 0.0 {
            start = self.hull_prev[start];
            if start == last {
                break;
            }
        }
        let mut end = last;
        while self.orient(end, self.hull_next[end], p) < 0.0 {
            end = self.hull_next[end];
            if end == start {
                break;
            }
        }
        if start == end {
            return Err(Error::DegeneratePointSet);
        }

        let mut v = start;
        let mut prev_spoke = NONE;
        let mut first = NONE;
        let mut fresh = Vec::new();
        while v != end {
            let w = self.hull_next[v];
            let t = self.add_triangle(w, v, p);
            let old = self.hull_edge[v];
            self.link(t, old);
            // t + 1 = v -> p, t + 2 = p -> w
            self.link(t + 1, prev_spoke);
            prev_spoke = t + 2;
            if first == NONE {
                first = t;
            }
            fresh.push(t);
            if v != start {
                self.hull_next[v] = NONE;
                self.hull_prev[v] = NONE;
                self.hull_edge[v] = NONE;
            }
            v = w;
        }
        self.hull_next[start] = p;
        self.hull_prev[p] = start;
        self.hull_next[p] = end;
        self.hull_prev[end] = p;
        self.hull_edge[start] = first + 1;
        self.hull_edge[p] = prev_spoke;

        for t in fresh {
            self.legalize(t);
        }
        Ok(())
    }

    fn legalize(&mut self, e: usize) {
        self.stack.push(e);
        while let Some(a) = self.stack.pop() {
            let b = self.opp[a];
            if b == NONE {
                continue;
            }
            let a0 = a - a % 3;
            let b0 = b - b % 3;
            let al = a0 + (a + 1) % 3;
            let ar = a0 + (a + 2) % 3;
            let bl = b0 + (b + 2) % 3;
            let br = b0 + (b + 1) % 3;

            let p0 = self.tri[ar];
            let pr = self.tri[a];
            let pl = self.tri[al];
            let p1 = self.tri[bl];
            let inside = incircle(&self.pts[p0], &self.pts[pr], &self.pts[pl], &self.pts[p1]) > 0.0;
            if !inside {
                continue;
            }

            self.tri[a] = p1;
            self.tri[b] = p0;
            let hbl = self.opp[bl];
            let har = self.opp[ar];
            if hbl == NONE && self.hull_edge[p1] == bl {
                self.hull_edge[p1] = a;
            }
            if har == NONE && self.hull_edge[p0] == ar {
                self.hull_edge[p0] = b;
            }
            self.link(a, hbl);
            self.link(b, har);
            self.link(ar, bl);

            self.stack.push(a);
            self.stack.push(br);
        }
    }
}

/// Delaunay triangulation of distinct points.
pub(crate) fn triangulate_points(points: &[Point2]) -> Result<Triangulation> {
    if points.len() < 3 {
        return Err(Error::DegeneratePointSet);
    }
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(&points[a], &points[b]));
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            let p = points[w[0]];
            return Err(Error::DuplicateLandmark { x: p.x, y: p.y });
        }
    }
    let sorted: Vec<Point2> = order.iter().map(|&i| points[i]).collect();

    let k = (2..sorted.len())
        .find(|&k| orient2d(&sorted[0], &sorted[1], &sorted[k]) != 0.0)
        .ok_or(Error::DegeneratePointSet)?;

    let mut b = Builder::new(&sorted);
    b.seed(k);
    let mut last = k;
    // Points skipped over while searching for the apex are already in the fan;
    // everything after `k` is lexicographically beyond the current hull.
    for p in k + 1..sorted.len() {
        b.insert(p, last)?;
        last = p;
    }

    let triangles = b
        .tri
        .chunks_exact(3)
        .map(|t| [order[t[0]], order[t[1]], order[t[2]]])
        .collect();
    let mut hull = Vec::new();
    let mut v = 0;
    loop {
        hull.push(order[v]);
        v = b.hull_next[v];
        if v == 0 {
            break;
        }
    }
    Ok(Triangulation { triangles, hull })
}
