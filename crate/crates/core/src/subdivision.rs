//! Loop subdivision into curved patches and their curvature-aware
//! classification.

use std::collections::HashMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{triangle_centroid, Vec3};
use crate::kmeans::{self, InitStrategy, KMeansConfig};
use crate::mesh::{HalfedgeMesh, VertexId};
use crate::metric::{ClusterState, CurvedPatchPoint, ErrorSummary, TrianglePoint};

pub const DEFAULT_LEVELS: u32 = 3;
pub const MAX_LEVELS: u32 = 4;

/// A subdivided mesh. Faces descending from base face `f` occupy the id
/// range `f * 4^levels .. (f + 1) * 4^levels`; base vertices keep their ids.
#[derive(Debug, Clone)]
pub struct Subdivided {
    pub mesh: HalfedgeMesh,
    pub levels: u32,
    pub base_faces: usize,
    /// Corner vertices of every base face, in base orientation.
    pub base_corners: Vec<[VertexId; 3]>,
}

impl Subdivided {
    pub fn faces_per_patch(&self) -> usize {
        4usize.pow(self.levels)
    }

    pub fn patch_faces(&self, f: usize) -> Range<usize> {
        let n = self.faces_per_patch();
        f * n..(f + 1) * n
    }
}

fn loop_beta(n: usize) -> f64 {
    let n = n as f64;
    let c = 3.0 / 8.0 + 0.25 * (2.0 * std::f64::consts::PI / n).cos();
    (5.0 / 8.0 - c * c) / n
}

fn subdivide_once(m: &HalfedgeMesh) -> HalfedgeMesh {
    debug_assert!(m.is_compact());
    let nv = m.n_vertices();
    let mut positions: Vec<Vec3> = (0..nv)
        .map(|v| {
            let ring = m.vertex_neighbors(v);
            let beta = loop_beta(ring.len());
            let sum: Vec3 = ring.iter().map(|&u| m.position(u)).sum();
            m.position(v) * (1.0 - ring.len() as f64 * beta) + sum * beta
        })
        .collect();
    let mut odd = vec![usize::MAX; m.halfedge_capacity()];
    for h in 0..m.halfedge_capacity() {
        if odd[h] != usize::MAX {
            continue;
        }
        let t = m.twin(h);
        let a = m.position(m.origin(h));
        let b = m.position(m.target(h));
        let c = m.position(m.origin(m.prev(h)));
        let d = m.position(m.origin(m.prev(t)));
        odd[h] = positions.len();
        odd[t] = positions.len();
        positions.push((a + b) * (3.0 / 8.0) + (c + d) * (1.0 / 8.0));
    }
    let mut faces = Vec::with_capacity(4 * m.n_faces());
    for f in 0..m.n_faces() {
        let [a, b, c] = m.face_vertices(f);
        let (ab, bc, ca) = (odd[3 * f], odd[3 * f + 1], odd[3 * f + 2]);
        faces.push([a, ab, ca]);
        faces.push([ab, b, bc]);
        faces.push([ca, bc, c]);
        faces.push([ab, bc, ca]);
    }
    HalfedgeMesh::from_triangles(positions, faces).expect("subdivision of a closed manifold is a closed manifold")
}

/// Applies `levels` rounds of Loop subdivision. Level 0 returns a copy.
pub fn loop_subdivide(mesh: &HalfedgeMesh, levels: u32) -> Result<Subdivided> {
    if levels > MAX_LEVELS {
        return Err(Error::Level(format!(
            "subdivision levels must be at most {MAX_LEVELS}, got {levels}"
        )));
    }
    let mut m = mesh.clone();
    if !m.is_compact() {
        m.compact();
    }
    let base_faces = m.n_faces();
    let base_corners = (0..base_faces).map(|f| m.face_vertices(f)).collect();
    for _ in 0..levels {
        m = subdivide_once(&m);
    }
    Ok(Subdivided {
        mesh: m,
        levels,
        base_faces,
        base_corners,
    })
}

/// One subdivided base face.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvedPatch {
    pub parent_face: usize,
    /// Boundary vertices of the patch in the subdivided mesh, counter-clockwise
    /// from the first corner.
    pub boundary: Vec<VertexId>,
    pub faces: Range<usize>,
    pub corners: [Vec3; 3],
    /// Sorted edge lengths of the flat triangle through the corners.
    pub corner: TrianglePoint,
    /// Squared distance between the corner triangle's centroid and the
    /// centroid of the central sub-triangle.
    pub w: f64,
}

impl CurvedPatch {
    pub fn point(&self) -> CurvedPatchPoint {
        CurvedPatchPoint::new(self.w, self.corner)
    }

    /// `w` as a length.
    pub fn w_length(&self) -> f64 {
        self.w.sqrt()
    }
}

/// Curvature descriptor of base face `f`. The central sub-triangle is the
/// last descendant, since the medial child keeps its parent's centroid.
pub fn patch_curvature_w(sub: &Subdivided, f: usize) -> Result<f64> {
    if sub.levels == 0 {
        return Err(Error::Level("an unsubdivided patch has no central sub-triangle".into()));
    }
    if f >= sub.base_faces {
        return Err(Error::Level(format!(
            "patch {f} out of range ({} patches)",
            sub.base_faces
        )));
    }
    let central = sub.patch_faces(f).end - 1;
    let [a, b, c] = sub.base_corners[f].map(|v| sub.mesh.position(v));
    let flat = triangle_centroid(&a, &b, &c);
    Ok((sub.mesh.face_centroid(central) - flat).norm_squared())
}

fn boundary_loop(sub: &Subdivided, f: usize) -> Vec<VertexId> {
    let m = &sub.mesh;
    let range = sub.patch_faces(f);
    let mut next_of: HashMap<VertexId, VertexId> = HashMap::new();
    for g in range.clone() {
        for h in 3 * g..3 * g + 3 {
            if !range.contains(&m.face(m.twin(h))) {
                next_of.insert(m.origin(h), m.target(h));
            }
        }
    }
    let start = sub.base_corners[f][0];
    let mut out = vec![start];
    let mut v = next_of[&start];
    while v != start {
        out.push(v);
        v = next_of[&v];
    }
    out
}

/// Builds the curved patches of a subdivided mesh.
pub fn curved_patches(sub: &Subdivided) -> Result<Vec<CurvedPatch>> {
    if sub.levels == 0 {
        return Err(Error::Level(
            "curved patches need at least one subdivision level".into(),
        ));
    }
    (0..sub.base_faces)
        .into_par_iter()
        .map(|f| {
            let corners = sub.base_corners[f].map(|v| sub.mesh.position(v));
            let corner = crate::metric::embed(&corners[0], &corners[1], &corners[2])?;
            Ok(CurvedPatch {
                parent_face: f,
                boundary: boundary_loop(sub, f),
                faces: sub.patch_faces(f),
                corners,
                corner,
                w: patch_curvature_w(sub, f)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurvedConfig {
    pub levels: u32,
    pub k: usize,
    /// Threshold in percent of the corner triangles' mean edge length.
    pub threshold_pct: f64,
    pub seed: u64,
    pub init_strategy: InitStrategy,
    pub max_kmeans_iters: usize,
}

impl Default for CurvedConfig {
    fn default() -> Self {
        CurvedConfig {
            levels: DEFAULT_LEVELS,
            k: 10,
            threshold_pct: 3.75,
            seed: 0,
            init_strategy: InitStrategy::default(),
            max_kmeans_iters: 200,
        }
    }
}

impl CurvedConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_LEVELS).contains(&self.levels) {
            return Err(Error::Config(format!(
                "levels must lie in 1..={MAX_LEVELS}, got {}",
                self.levels
            )));
        }
        if !(self.threshold_pct > 0.0) {
            return Err(Error::Config(format!(
                "threshold must be positive, got {}",
                self.threshold_pct
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CurvedClassification {
    pub points: Vec<CurvedPatchPoint>,
    pub state: ClusterState<CurvedPatchPoint>,
    pub energy_trace: Vec<f64>,
    /// Mean edge length of the corner triangles.
    pub mean_edge: f64,
    pub threshold_abs: f64,
    pub within_threshold: bool,
}

impl CurvedClassification {
    pub fn errors(&self) -> ErrorSummary {
        self.state.errors(self.mean_edge)
    }
}

/// K-means over the patches' (w, x, y, z) descriptors. Patches are never
/// remeshed; this only reports how well `k` classes fit.
pub fn classify_curved(patches: &[CurvedPatch], cfg: &CurvedConfig) -> Result<CurvedClassification> {
    cfg.validate()?;
    let points: Vec<CurvedPatchPoint> = patches.iter().map(CurvedPatch::point).collect();
    let kcfg = KMeansConfig {
        k: cfg.k,
        max_kmeans_iters: cfg.max_kmeans_iters,
        seed: cfg.seed,
        init_strategy: cfg.init_strategy,
    };
    let run = kmeans::cluster_traced(&points, &kcfg)?;
    let mean_edge = patches.iter().map(|p| p.corner.mean_edge()).sum::<f64>() / patches.len() as f64;
    let threshold_abs = cfg.threshold_pct / 100.0 * mean_edge;
    let within_threshold = run.state.error_max.sqrt() <= threshold_abs;
    Ok(CurvedClassification {
        points,
        state: run.state,
        energy_trace: run.energy_trace,
        mean_edge,
        threshold_abs,
        within_threshold,
    })
}
