//! Delaunay graph over trunk landmarks, triangle descriptors and triangle
//! stars.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::delaunay::{orient2d, triangulate_points};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::trunk::TrunkMap;

/// Triangles below this area (m²) never take part in matching.
pub const MIN_TRIANGLE_AREA: f64 = 1e-6;

/// Area and squared perimeter of a triangle, both in m².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangleDescriptor {
    pub area: f64,
    pub perimeter_sq: f64,
}

impl TriangleDescriptor {
    /// Bitwise independent of the order in which the vertices are given.
    pub fn of(a: Point2, b: Point2, c: Point2) -> Self {
        let mut v = [a, b, c];
        v.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
        let [a, b, c] = v;
        let area = 0.5 * ((b - a).cross(&(c - a))).abs();
        let perimeter = a.distance(&b) + b.distance(&c) + c.distance(&a);
        TriangleDescriptor {
            area,
            perimeter_sq: perimeter * perimeter,
        }
    }
}

/// `|ΔA| + |Δl|` between two triangle descriptors.
pub fn dissimilarity(d1: &TriangleDescriptor, d2: &TriangleDescriptor) -> f64 {
    (d2.area - d1.area).abs() + (d2.perimeter_sq - d1.perimeter_sq).abs()
}

/// A center triangle with its three edge neighbors.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleStar {
    pub center: usize,
    /// Neighbor triangles, ascending by area, then squared perimeter, then
    /// apex vertex id.
    pub neighbors: [usize; 3],
    /// `[A0, l0, A1, l1, A2, l2, A3, l3]`, center first, then neighbors.
    pub features: [f64; 8],
    /// Center vertices (counter-clockwise) followed by the neighbor apexes in
    /// neighbor order.
    pub vertex_ids: [usize; 6],
    pub vertices: [Point2; 6],
    /// For each neighbor slot, the center slot (0..3) opposite the shared edge.
    pub shared_edge: [usize; 3],
}

impl TriangleStar {
    pub fn center_descriptor(&self) -> TriangleDescriptor {
        self.descriptor(0)
    }

    /// Descriptor of slot `k`: 0 is the center, 1..=3 the neighbors.
    pub fn descriptor(&self, k: usize) -> TriangleDescriptor {
        TriangleDescriptor {
            area: self.features[2 * k],
            perimeter_sq: self.features[2 * k + 1],
        }
    }

    pub fn centroid(&self) -> Point2 {
        crate::geometry::centroid(&self.vertices).unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DTGraph {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    /// `adjacency[t][k]` is the triangle across the edge opposite vertex `k`.
    adjacency: Vec<[Option<usize>; 3]>,
    on_hull: Vec<bool>,
    descriptors: Vec<TriangleDescriptor>,
}

impl DTGraph {
    /// Delaunay triangulation of the landmark positions; vertex ids are
    /// landmark ids.
    pub fn triangulate(trunks: &TrunkMap) -> Result<Self> {
        Self::from_points(trunks.positions())
    }

    pub fn from_points(vertices: Vec<Point2>) -> Result<Self> {
        let tri = triangulate_points(&vertices)?;
        Self::assemble(vertices, tri.triangles)
    }

    /// Builds a graph from explicit counter-clockwise triangles, e.g. when
    /// loading a saved graph. Adjacency, hull and descriptors are derived.
    pub fn from_parts(vertices: Vec<Point2>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        for t in &triangles {
            if t.iter().any(|&v| v >= vertices.len()) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::InvalidParams(format!("bad triangle {t:?}")));
            }
            if orient2d(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]) <= 0.0 {
                return Err(Error::InvalidParams(format!("triangle {t:?} is not counter-clockwise")));
            }
        }
        if triangles.is_empty() {
            return Err(Error::DegeneratePointSet);
        }
        Self::assemble(vertices, triangles)
    }

    fn assemble(vertices: Vec<Point2>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        for t in triangles.iter_mut() {
            let r = (0..3).min_by_key(|&k| t[k]).unwrap_or(0);
            t.rotate_left(r);
        }
        triangles.sort_unstable();

        let mut edge_owner: HashMap<(usize, usize), (usize, usize)> = HashMap::with_capacity(triangles.len() * 3);
        let mut adjacency = vec![[None; 3]; triangles.len()];
        for (ti, t) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (t[(k + 1) % 3], t[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                if let Some((tj, kj)) = edge_owner.remove(&key) {
                    adjacency[ti][k] = Some(tj);
                    adjacency[tj][kj] = Some(ti);
                } else {
                    edge_owner.insert(key, (ti, k));
                }
            }
        }
        let mut on_hull = vec![false; vertices.len()];
        for (a, b) in edge_owner.keys() {
            on_hull[*a] = true;
            on_hull[*b] = true;
        }
        let descriptors = triangles
            .iter()
            .map(|t| TriangleDescriptor::of(vertices[t[0]], vertices[t[1]], vertices[t[2]]))
            .collect();
        Ok(DTGraph {
            vertices,
            triangles,
            adjacency,
            on_hull,
            descriptors,
        })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn vertex(&self, id: usize) -> Point2 {
        self.vertices[id]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> Result<[usize; 3]> {
        self.triangles.get(t).copied().ok_or(Error::UnknownTriangle(t))
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn neighbors(&self, t: usize) -> &[Option<usize>; 3] {
        &self.adjacency[t]
    }

    pub fn is_hull_vertex(&self, v: usize) -> bool {
        self.on_hull[v]
    }

    pub fn hull_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| self.on_hull[v]).collect()
    }

    /// Undirected edges as `(low, high)` vertex id pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn descriptor(&self, t: usize) -> Result<TriangleDescriptor> {
        self.descriptors.get(t).copied().ok_or(Error::UnknownTriangle(t))
    }

    pub fn descriptors(&self) -> &[TriangleDescriptor] {
        &self.descriptors
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    fn apex(&self, t: usize, k: usize) -> Option<(usize, usize)> {
        let n = self.adjacency[t][k]?;
        let a = self.triangles[t][(k + 1) % 3];
        let b = self.triangles[t][(k + 2) % 3];
        let apex = self.triangles[n].iter().copied().find(|&v| v != a && v != b)?;
        Some((n, apex))
    }

    /// Star around `t`, or `None` when `t` lacks a neighbor, touches the
    /// hull, or involves a degenerate triangle.
    pub fn star(&self, t: usize) -> Option<TriangleStar> {
        let center = self.triangles[t];
        if center.iter().any(|&v| self.on_hull[v]) || self.descriptors[t].area < MIN_TRIANGLE_AREA {
            return None;
        }
        let mut slots = Vec::with_capacity(3);
        for k in 0..3 {
            let (n, apex) = self.apex(t, k)?;
            if self.on_hull[apex] || self.descriptors[n].area < MIN_TRIANGLE_AREA {
                return None;
            }
            slots.push((n, apex, k, self.descriptors[n]));
        }
        slots.sort_by(|a, b| {
            a.3.area
                .total_cmp(&b.3.area)
                .then(a.3.perimeter_sq.total_cmp(&b.3.perimeter_sq))
                .then(a.1.cmp(&b.1))
        });
        let d0 = self.descriptors[t];
        let mut features = [d0.area, d0.perimeter_sq, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let mut neighbors = [0; 3];
        let mut shared_edge = [0; 3];
        let mut vertex_ids = [center[0], center[1], center[2], 0, 0, 0];
        for (i, (n, apex, k, d)) in slots.into_iter().enumerate() {
            features[2 + 2 * i] = d.area;
            features[3 + 2 * i] = d.perimeter_sq;
            neighbors[i] = n;
            shared_edge[i] = k;
            vertex_ids[3 + i] = apex;
        }
        Some(TriangleStar {
            center: t,
            neighbors,
            features,
            vertex_ids,
            vertices: vertex_ids.map(|v| self.vertices[v]),
            shared_edge,
        })
    }

    /// Stars around every triangle whose star avoids the hull.
    pub fn select_interior_stars(&self) -> Vec<TriangleStar> {
        (0..self.triangles.len()).filter_map(|t| self.star(t)).collect()
    }
}

/// Total order on stars' center triangles by coordinates; used to compare
/// graphs built from permuted inputs.
pub fn compare_by_center_geometry(a: &TriangleStar, b: &TriangleStar) -> Ordering {
    let key = |s: &TriangleStar| {
        let mut c = [s.vertices[0], s.vertices[1], s.vertices[2]];
        c.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
        c
    };
    let (ka, kb) = (key(a), key(b));
    ka.iter()
        .zip(kb.iter())
        .map(|(p, q)| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}
