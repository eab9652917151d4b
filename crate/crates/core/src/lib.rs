//! K-set isometric decomposition of closed, potato-shaped triangle meshes.
//!
//! The pipeline simplifies an input surface, alternates K-means clustering of
//! triangles (embedded as sorted edge-length triples) with cluster-aware local
//! remeshing until every triangle is close to its class centroid, and turns the
//! result into thickened puzzle parts with connector holes and hinges.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod driver;
pub mod error;
pub mod fabrication;
pub mod fidelity;
pub mod geometry;
pub mod kmeans;
pub mod merge;
pub mod mesh;
pub mod metric;
pub mod pipeline;
pub mod remesh;
pub mod shapes;
pub mod simplify;
pub mod spatial;
pub mod subdivision;

pub use error::{Error, Result};
pub use geometry::Vec3;
pub use mesh::{BoundingBox, HalfedgeMesh};
