//! Global localization in forests by matching Delaunay graphs of tree-trunk
//! landmarks.
//!
//! The pipeline runs in three stages:
//!
//! 1. [`trunk`] segments trunk points from a 3D cloud and reduces every trunk
//!    to one 2D landmark.
//! 2. [`graph`] Delaunay-triangulates the landmarks and describes each
//!    interior triangle together with its three neighbors (a *star*).
//! 3. [`matching`] finds map stars similar to local ones, pairs their
//!    vertices, estimates one rigid transform per pair and fuses all of them
//!    into a single pose.
//!
//! [`sim`] generates synthetic forests and lidar scans with known ground
//! truth, and [`bench`] runs the whole chain against them.

pub mod bench;
mod delaunay;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod matching;
pub mod pipeline;
pub mod sim;
pub mod spatial;
pub mod trunk;

pub use delaunay::{incircle, orient2d};
pub use error::{Error, Result, Stage};
pub use geometry::{Point2, Point3, PointCloud3, RigidTransform2D};
pub use graph::{dissimilarity, DTGraph, TriangleDescriptor, TriangleStar};
pub use matching::{localize, LocalizationResult, MapIndex, MatchParams};
pub use spatial::SpatialIndex3;
pub use trunk::{extract_trunk_map, TrunkExtractionParams, TrunkMap};
