//! Plain-text formats: `.xyz` clouds, trunk CSV, graph JSON and pose CSV.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Point3, PointCloud3, RigidTransform2D};
use crate::graph::DTGraph;
use crate::trunk::{Landmark, TrunkMap};

/// Reads whitespace-separated `x y z` lines; blank lines and lines starting
/// with `#` are skipped, extra columns are ignored.
pub fn read_xyz<R: Read>(reader: R) -> Result<PointCloud3> {
    let mut points = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut fields = text.split_whitespace().map(str::parse::<f64>);
        let mut next = || -> Result<f64> {
            match fields.next() {
                Some(Ok(v)) if v.is_finite() => Ok(v),
                Some(Ok(_)) => Err(Error::Parse { line: i + 1, msg: "non-finite coordinate".into() }),
                Some(Err(e)) => Err(Error::Parse { line: i + 1, msg: e.to_string() }),
                None => Err(Error::Parse { line: i + 1, msg: "expected three coordinates".into() }),
            }
        };
        points.push(Point3::new(next()?, next()?, next()?));
    }
    Ok(PointCloud3::new(points))
}

pub fn write_xyz<W: Write>(writer: W, cloud: &PointCloud3) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for p in cloud.iter() {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_xyz(path: &Path) -> Result<PointCloud3> {
    read_xyz(File::open(path)?)
}

pub fn save_xyz(path: &Path, cloud: &PointCloud3) -> Result<()> {
    write_xyz(File::create(path)?, cloud)
}

#[derive(Serialize, Deserialize)]
struct TrunkRow {
    id: usize,
    x: String,
    y: String,
    support: Option<usize>,
}

/// Writes `id,x,y,support` rows with nine decimals.
pub fn write_trunks<W: Write>(writer: W, map: &TrunkMap) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for l in &map.landmarks {
        w.serialize(TrunkRow {
            id: l.id,
            x: format!("{:.9}", l.position.x),
            y: format!("{:.9}", l.position.y),
            support: l.support,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trunk CSV; ids must be `0..n` in order.
pub fn read_trunks<R: Read>(reader: R) -> Result<TrunkMap> {
    let mut r = csv::Reader::from_reader(reader);
    let mut landmarks = Vec::new();
    for (i, row) in r.deserialize::<TrunkRow>().enumerate() {
        let row = row?;
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line: i + 2, msg: format!("bad coordinate {s:?}") })
        };
        if row.id != i {
            return Err(Error::Parse { line: i + 2, msg: format!("expected id {i}, found {}", row.id) });
        }
        landmarks.push(Landmark {
            id: row.id,
            position: Point2::new(parse(&row.x)?, parse(&row.y)?),
            support: row.support,
        });
    }
    Ok(TrunkMap { landmarks })
}

pub fn load_trunks(path: &Path) -> Result<TrunkMap> {
    read_trunks(File::open(path)?)
}

pub fn save_trunks(path: &Path, map: &TrunkMap) -> Result<()> {
    write_trunks(File::create(path)?, map)
}

/// Serialized graph; triangle ids are positions in the `triangles` list.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct GraphFile {
    pub vertices: Vec<(usize, f64, f64)>,
    pub triangles: Vec<(usize, usize, usize, usize)>,
    pub descriptors: Vec<(usize, f64, f64)>,
}

impl GraphFile {
    pub fn from_graph(g: &DTGraph) -> Self {
        GraphFile {
            vertices: g.vertices().iter().enumerate().map(|(i, p)| (i, p.x, p.y)).collect(),
            triangles: g.triangles().iter().enumerate().map(|(i, t)| (i, t[0], t[1], t[2])).collect(),
            descriptors: g
                .descriptors()
                .iter()
                .enumerate()
                .map(|(i, d)| (i, d.area, d.perimeter_sq))
                .collect(),
        }
    }

    /// Rebuilds the graph; descriptors are recomputed from the vertices.
    pub fn into_graph(self) -> Result<DTGraph> {
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for (k, (id, x, y)) in self.vertices.into_iter().enumerate() {
            if id != k {
                return Err(Error::Parse { line: 0, msg: format!("vertex ids must be 0..n, found {id} at {k}") });
            }
            vertices.push(Point2::new(x, y));
        }
        let triangles = self.triangles.into_iter().map(|(_, a, b, c)| [a, b, c]).collect();
        DTGraph::from_parts(vertices, triangles)
    }
}

pub fn write_graph<W: Write>(writer: W, g: &DTGraph) -> Result<()> {
    let mut w = BufWriter::new(writer);
    serde_json::to_writer(&mut w, &GraphFile::from_graph(g))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_graph<R: Read>(reader: R) -> Result<DTGraph> {
    let file: GraphFile = serde_json::from_reader(BufReader::new(reader))?;
    file.into_graph()
}

pub fn load_graph(path: &Path) -> Result<DTGraph> {
    read_graph(File::open(path)?)
}

pub fn save_graph(path: &Path, g: &DTGraph) -> Result<()> {
    write_graph(File::create(path)?, g)
}

#[derive(Debug, Serialize, Deserialize)]
struct PoseRow {
    site_id: usize,
    x: f64,
    y: f64,
    theta_deg: f64,
}

/// One `site_id,x,y,theta_deg` row per pose.
pub fn write_poses<W: Write>(writer: W, poses: &[(usize, RigidTransform2D)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (site_id, p) in poses {
        w.serialize(PoseRow {
            site_id: *site_id,
            x: p.t.x,
            y: p.t.y,
            theta_deg: p.heading_deg(),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_poses<R: Read>(reader: R) -> Result<Vec<(usize, RigidTransform2D)>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize::<PoseRow>()
        .map(|row| {
            let row = row?;
            Ok((row.site_id, RigidTransform2D::new(row.theta_deg.to_radians(), Point2::new(row.x, row.y))))
        })
        .collect()
}

pub fn load_poses(path: &Path) -> Result<Vec<(usize, RigidTransform2D)>> {
    read_poses(File::open(path)?)
}

pub fn save_poses(path: &Path, poses: &[(usize, RigidTransform2D)]) -> Result<()> {
    write_poses(File::create(path)?, poses)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xyz_comments_and_blank_lines() {
        let text = "# header\n1 2 3\n\n  4.5 -1 0 extra\n#tail\n";
        let cloud = read_xyz(text.as_bytes()).unwrap();
        assert_eq!(cloud.points, vec![Point3::new(1.0, 2.0, 3.0), Point3::new(4.5, -1.0, 0.0)]);
    }

    #[test]
    fn xyz_errors_name_the_line() {
        let err = read_xyz("1 2 3\n1 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = read_xyz("1 2 nan\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn trunk_csv_layout() {
        let mut map = TrunkMap::from_positions([Point2::new(1.0, 2.5), Point2::new(-3.25, 0.0)]);
        map.landmarks[0].support = Some(42);
        let mut buf = Vec::new();
        write_trunks(&mut buf, &map).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "id,x,y,support\n0,1.000000000,2.500000000,42\n1,-3.250000000,0.000000000,\n"
        );
        assert_eq!(read_trunks(buf.as_slice()).unwrap(), map);
    }

    #[test]
    fn graph_json_keys() {
        let g = DTGraph::from_points(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)]).unwrap();
        let mut buf = Vec::new();
        write_graph(&mut buf, &g).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["descriptors", "triangles", "vertices"]);
        assert_eq!(v["triangles"][0], serde_json::json!([0, 0, 1, 2]));
        assert_eq!(read_graph(buf.as_slice()).unwrap(), g);
    }

    #[test]
    fn poses_round_trip() {
        let poses = vec![(0, RigidTransform2D::identity()), (7, RigidTransform2D::new(0.5, Point2::new(1.5, -2.0)))];
        let mut buf = Vec::new();
        write_poses(&mut buf, &poses).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("site_id,x,y,theta_deg\n"));
        let back = read_poses(buf.as_slice()).unwrap();
        for ((s0, p0), (s1, p1)) in poses.iter().zip(&back) {
            assert_eq!(s0, s1);
            assert!((p0.theta - p1.theta).abs() < 1e-12 && p0.t == p1.t);
        }
    }
}
