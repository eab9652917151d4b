//! Optional grouping of decomposed triangles into convex polygonal patches.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{triangle_cross, Vec3};
use crate::mesh::{HalfedgeId, HalfedgeMesh, VertexId};

pub const GROUP_SIZES: [usize; 4] = [2, 5, 6, 7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchGroup {
    pub faces: Vec<usize>,
    /// Class label of every face, in `faces` order.
    pub classes: Vec<usize>,
    /// Boundary vertex loop, counter-clockwise seen from outside.
    pub boundary: Vec<VertexId>,
}

impl PatchGroup {
    pub fn is_class_homogeneous(&self) -> bool {
        self.classes.windows(2).all(|w| w[0] == w[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grouping {
    pub group_size: usize,
    pub groups: Vec<PatchGroup>,
    /// Group index of every face, `None` for singletons.
    pub group_of: Vec<Option<usize>>,
}

impl Grouping {
    pub fn singletons(&self) -> Vec<usize> {
        (0..self.group_of.len())
            .filter(|&f| self.group_of[f].is_none())
            .collect()
    }

    /// Percentage of faces that belong to a group.
    pub fn coverage_pct(&self) -> f64 {
        let grouped = self.group_of.iter().filter(|g| g.is_some()).count();
        100.0 * grouped as f64 / self.group_of.len().max(1) as f64
    }
}

/// A candidate group: its faces in fan or pair order and its outline.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub faces: Vec<usize>,
    pub outline: Vec<VertexId>,
}

/// Full vertex fans of valence `size` in vertex id order. The outline is
/// the one-ring, counter-clockwise seen from outside.
pub fn fan_candidates(mesh: &HalfedgeMesh, size: usize) -> Vec<Candidate> {
    mesh.vertex_ids()
        .filter(|&v| mesh.valence(v) == size)
        .map(|v| {
            let hs: Vec<HalfedgeId> = mesh.outgoing(v).collect();
            Candidate {
                faces: hs.iter().map(|&h| mesh.face(h)).collect(),
                outline: hs.iter().map(|&h| mesh.target(h)).collect(),
            }
        })
        .collect()
}

/// Edge-adjacent pairs in edge id order, outlined as quads.
pub fn pair_candidates(mesh: &HalfedgeMesh) -> Vec<Candidate> {
    mesh.edge_ids()
        .map(|h| {
            let t = mesh.twin(h);
            let a = mesh.origin(h);
            let b = mesh.target(h);
            let c = mesh.origin(mesh.prev(h));
            let d = mesh.origin(mesh.prev(t));
            Candidate {
                faces: vec![mesh.face(h), mesh.face(t)],
                outline: vec![a, d, b, c],
            }
        })
        .collect()
}

/// True when the outline, projected onto the plane of its area-weighted
/// normal, is a strictly convex polygon.
pub fn is_convex(mesh: &HalfedgeMesh, outline: &[VertexId]) -> bool {
    let pts: Vec<Vec3> = outline.iter().map(|&v| mesh.position(v)).collect();
    let n = pts.len();
    if n < 3 {
        return false;
    }
    let c: Vec3 = pts.iter().sum::<Vec3>() / n as f64;
    let mut normal = Vec3::zeros();
    for i in 0..n {
        normal += triangle_cross(&c, &pts[i], &pts[(i + 1) % n]);
    }
    let len = normal.norm();
    if len == 0.0 {
        return false;
    }
    let normal = normal / len;
    let flat: Vec<Vec3> = pts.iter().map(|p| p - normal * normal.dot(&(p - c))).collect();
    (0..n).all(|i| {
        let a = flat[i];
        let b = flat[(i + 1) % n];
        let d = flat[(i + 2) % n];
        (b - a).cross(&(d - b)).dot(&normal) > 1e-12 * len
    })
}

/// Greedy grouping: candidates are taken in order when all their faces are
/// still free and their outline is convex.
pub fn merge_patches(mesh: &HalfedgeMesh, labels: &[usize], group_size: usize) -> Result<Grouping> {
    if !GROUP_SIZES.contains(&group_size) {
        return Err(Error::Config(format!(
            "group size must be one of {GROUP_SIZES:?}, got {group_size}"
        )));
    }
    if labels.len() != mesh.face_capacity() {
        return Err(Error::Config(format!(
            "{} labels for {} faces",
            labels.len(),
            mesh.face_capacity()
        )));
    }
    let candidates = if group_size == 2 {
        pair_candidates(mesh)
    } else {
        fan_candidates(mesh, group_size)
    };
    let mut group_of = vec![None; mesh.face_capacity()];
    let mut groups = Vec::new();
    for cand in candidates {
        if cand.faces.iter().any(|&f| group_of[f].is_some()) || !is_convex(mesh, &cand.outline) {
            continue;
        }
        for &f in &cand.faces {
            group_of[f] = Some(groups.len());
        }
        groups.push(PatchGroup {
            classes: cand.faces.iter().map(|&f| labels[f]).collect(),
            boundary: boundary_loop(mesh, &cand.faces),
            faces: cand.faces,
        });
    }
    Ok(Grouping {
        group_size,
        groups,
        group_of,
    })
}

/// Boundary of a face set that forms a disk, as a vertex loop.
pub fn boundary_loop(mesh: &HalfedgeMesh, faces: &[usize]) -> Vec<VertexId> {
    let inside = |f: usize| faces.contains(&f);
    let mut next_of: HashMap<VertexId, VertexId> = HashMap::new();
    for &f in faces {
        for h in 3 * f..3 * f + 3 {
            if !inside(mesh.face(mesh.twin(h))) {
                next_of.insert(mesh.origin(h), mesh.target(h));
            }
        }
    }
    let Some(&start) = next_of.keys().min() else {
        return Vec::new();
    };
    let mut out = vec![start];
    let mut v = next_of[&start];
    while v != start && out.len() <= next_of.len() {
        out.push(v);
        v = next_of[&v];
    }
    out
}
