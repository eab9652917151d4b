//! Cluster-aware local remeshing: valence flips, distance-improving collapses
//! and flips, and edge-pressure vertex translation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{triangle_area, triangle_cross, Vec3};
use crate::kmeans::{assign_labels, nearest};
use crate::mesh::{HalfedgeId, HalfedgeMesh, VertexId};
use crate::metric::{distance, embed_face, ClusterState, TrianglePoint};
use crate::simplify::collapse_keeps_orientation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemeshConfig {
    /// Translation limit as a fraction of the mean edge length.
    pub displacement_band: f64,
    pub flip_valence_target: usize,
    pub collapse_enabled: bool,
    /// Vertex translation sweeps per driver iteration.
    pub translation_steps: usize,
}

impl Default for RemeshConfig {
    fn default() -> Self {
        RemeshConfig {
            displacement_band: 0.25,
            flip_valence_target: 6,
            collapse_enabled: true,
            translation_steps: 10,
        }
    }
}

impl RemeshConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.displacement_band > 0.0 && self.displacement_band <= 1.0) {
            return Err(Error::Config(format!(
                "displacement_band must lie in (0, 1], got {}",
                self.displacement_band
            )));
        }
        if self.flip_valence_target < 3 {
            return Err(Error::Config("flip_valence_target must be at least 3".into()));
        }
        if self.translation_steps < 1 {
            return Err(Error::Config("translation_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-face embeddings plus the clustering of those faces. Arrays are
/// indexed by face id of `mesh`, which must be compact between passes.
#[derive(Debug, Clone)]
pub struct Clustered {
    pub points: Vec<TrianglePoint>,
    pub state: ClusterState<TrianglePoint>,
}

impl Clustered {
    /// Embeds every face and assigns it to its nearest centroid.
    pub fn assign(mesh: &HalfedgeMesh, centroids: Vec<TrianglePoint>) -> Self {
        debug_assert!(mesh.is_compact());
        let points: Vec<TrianglePoint> = (0..mesh.face_capacity()).map(|f| embed_face(mesh, f)).collect();
        let labels = assign_labels(&points, &centroids);
        let state = ClusterState::new(&points, centroids, labels);
        Clustered { points, state }
    }

    /// Re-embeds every face, keeping labels and centroids.
    pub fn refresh(&mut self, mesh: &HalfedgeMesh) {
        self.points = (0..mesh.face_capacity()).map(|f| embed_face(mesh, f)).collect();
        self.state.recompute(&self.points);
    }

    /// Energy recomputed from scratch for the current mesh geometry.
    pub fn energy_from_scratch(&self, mesh: &HalfedgeMesh) -> f64 {
        mesh.face_ids()
            .map(|f| distance(&embed_face(mesh, f), &self.state.centroids[self.state.labels[f]]))
            .sum()
    }
}

/// Energy bookkeeping for one flip or collapse pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PassReport {
    pub applied: usize,
    pub energy_before: f64,
    /// Energy after each applied operation (incremental bookkeeping).
    pub energy_steps: Vec<f64>,
    pub energy_after: f64,
    /// Energy of the final geometry recomputed from scratch.
    pub energy_recomputed: f64,
}

fn face_geometry_ok(n_ref: &Vec3, p: [Vec3; 3], eps: f64) -> bool {
    let n = triangle_cross(&p[0], &p[1], &p[2]);
    n.dot(n_ref) > 0.0 && triangle_area(&p[0], &p[1], &p[2]) > eps
}

/// True when the two faces produced by flipping `h` face the same way as
/// both original faces and have non-negligible area.
pub fn flip_geometry_ok(mesh: &HalfedgeMesh, h: HalfedgeId, eps: f64) -> bool {
    let g = mesh.twin(h);
    let [pa, pb, pc] = mesh.face_positions(h / 3);
    let [qa, qb, qc] = mesh.face_positions(g / 3);
    let n0 = triangle_cross(&pa, &pb, &pc);
    let n1 = triangle_cross(&qa, &qb, &qc);
    mesh.flipped_faces(h).iter().all(|t| {
        let p = t.map(|v| mesh.position(v));
        face_geometry_ok(&n0, p, eps) && face_geometry_ok(&n1, p, eps)
    })
}

fn area_eps(mesh: &HalfedgeMesh) -> f64 {
    1e-12 * mesh.bounding_box().diagonal.powi(2)
}

fn valence_deviation(vals: [usize; 4], target: usize) -> usize {
    vals.iter().map(|&v| v.abs_diff(target).pow(2)).sum()
}

/// Flips edges while that strictly lowers the squared deviation of the four
/// affected valences from `target`. Passes repeat until none applies.
pub fn optimize_valence(mesh: &mut HalfedgeMesh, target: usize) -> usize {
    let eps = area_eps(mesh);
    let mut total = 0;
    loop {
        let mut flips = 0;
        let edges: Vec<HalfedgeId> = mesh.edge_ids().collect();
        for h in edges {
            if !mesh.is_flip_topologically_legal(h) {
                continue;
            }
            let a = mesh.origin(h);
            let b = mesh.target(h);
            let c = mesh.origin(mesh.prev(h));
            let d = mesh.origin(mesh.prev(mesh.twin(h)));
            let [va, vb, vc, vd] = [a, b, c, d].map(|v| mesh.valence(v));
            let before = valence_deviation([va, vb, vc, vd], target);
            let after = valence_deviation([va - 1, vb - 1, vc + 1, vd + 1], target);
            if after < before && flip_geometry_ok(mesh, h, eps) {
                mesh.flip_edge(h);
                flips += 1;
            }
        }
        total += flips;
        if flips == 0 || total > 100 * mesh.n_edges() {
            break;
        }
    }
    total
}

/// Flips every edge whose two faces, re-assigned to their nearest
/// centroids, get strictly closer to them in total.
pub fn improve_by_flip(mesh: &mut HalfedgeMesh, c: &mut Clustered) -> PassReport {
    let eps = area_eps(mesh);
    let mut report = PassReport {
        energy_before: c.state.energy,
        ..Default::default()
    };
    let mut energy = c.state.energy;
    let edges: Vec<HalfedgeId> = mesh.edge_ids().collect();
    for h in edges {
        if !mesh.is_flip_topologically_legal(h) || !flip_geometry_ok(mesh, h, eps) {
            continue;
        }
        let f0 = h / 3;
        let f1 = mesh.twin(h) / 3;
        let before = c.state.per_triangle_distance[f0] + c.state.per_triangle_distance[f1];
        let new = mesh.flipped_faces(h).map(|t| {
            let p = t.map(|v| mesh.position(v));
            TrianglePoint::from_lengths((p[1] - p[0]).norm(), (p[2] - p[1]).norm(), (p[0] - p[2]).norm())
        });
        let n0 = nearest(&new[0], &c.state.centroids);
        let n1 = nearest(&new[1], &c.state.centroids);
        if n0.1 + n1.1 >= before {
            continue;
        }
        mesh.flip_edge(h);
        // flip_edge keeps face ids: f0 now holds new[0]'s vertex set
        for f in [f0, f1] {
            let p = embed_face(mesh, f);
            let (l, d) = nearest(&p, &c.state.centroids);
            energy += d - c.state.per_triangle_distance[f];
            c.points[f] = p;
            c.state.labels[f] = l;
            c.state.per_triangle_distance[f] = d;
        }
        report.applied += 1;
        report.energy_steps.push(energy);
    }
    c.state.refresh_aggregates();
    report.energy_after = energy;
    report.energy_recomputed = c.energy_from_scratch(mesh);
    report
}

/// Collapses edges (to their midpoint) where the surviving faces, re-assigned
/// to their nearest centroids, get strictly closer to them in total. Compacts
/// the mesh and the clustering arrays afterwards.
pub fn improve_by_collapse(mesh: &mut HalfedgeMesh, c: &mut Clustered) -> PassReport {
    let eps = area_eps(mesh);
    let mut report = PassReport {
        energy_before: c.state.energy,
        ..Default::default()
    };
    let mut energy = c.state.energy;
    let edges: Vec<(VertexId, VertexId)> = mesh.edge_ids().map(|h| (mesh.origin(h), mesh.target(h))).collect();
    for (a, b) in edges {
        if !mesh.is_vertex_alive(a) || !mesh.is_vertex_alive(b) {
            continue;
        }
        let Some(h) = mesh.find_halfedge(a, b) else {
            continue;
        };
        if !mesh.is_collapse_topologically_legal(h) {
            continue;
        }
        let p = (mesh.position(a) + mesh.position(b)) * 0.5;
        if !collapse_keeps_orientation(mesh, h, &p, eps) {
            continue;
        }
        let removed = [h / 3, mesh.twin(h) / 3];
        let kept = mesh.collapse_affected_faces(h);
        let before: f64 = removed
            .iter()
            .map(|&f| c.state.per_triangle_distance[f])
            .chain(kept.iter().map(|(f, _)| c.state.per_triangle_distance[*f]))
            .sum();
        let after: Vec<(usize, TrianglePoint, usize, f64)> = kept
            .iter()
            .map(|(f, t)| {
                let q = t.map(|v| if v == a { p } else { mesh.position(v) });
                let e = TrianglePoint::from_lengths((q[1] - q[0]).norm(), (q[2] - q[1]).norm(), (q[0] - q[2]).norm());
                let (l, d) = nearest(&e, &c.state.centroids);
                (*f, e, l, d)
            })
            .collect();
        let after_sum: f64 = after.iter().map(|x| x.3).sum();
        let kept_before: f64 = kept.iter().map(|(f, _)| c.state.per_triangle_distance[*f]).sum();
        if after_sum >= kept_before {
            continue;
        }
        mesh.collapse_edge(h, p);
        energy += after_sum - before;
        for f in removed {
            c.state.per_triangle_distance[f] = 0.0;
        }
        for (f, e, l, d) in after {
            c.points[f] = e;
            c.state.labels[f] = l;
            c.state.per_triangle_distance[f] = d;
        }
        report.applied += 1;
        report.energy_steps.push(energy);
    }
    if report.applied > 0 {
        let map = mesh.compact();
        let mut points = Vec::with_capacity(mesh.n_faces());
        let mut labels = Vec::with_capacity(mesh.n_faces());
        for (old, new) in map.faces.iter().enumerate() {
            if new.is_some() {
                points.push(c.points[old]);
                labels.push(c.state.labels[old]);
            }
        }
        c.points = points;
        c.state.labels = labels;
        c.state.recompute(&c.points);
    } else {
        c.state.refresh_aggregates();
    }
    report.energy_after = energy;
    report.energy_recomputed = c.energy_from_scratch(mesh);
    report
}

/// Edge lengths each face asks for: the centroid component whose rank
/// matches the edge's rank within the face. Indexed by halfedge.
pub fn requested_lengths(mesh: &HalfedgeMesh, state: &ClusterState<TrianglePoint>) -> Vec<f64> {
    let mut req = vec![0.0; mesh.halfedge_capacity()];
    for f in mesh.face_ids() {
        let centroid = state.centroids[state.labels[f]];
        let mut hs = [3 * f, 3 * f + 1, 3 * f + 2];
        let len = hs.map(|h| mesh.edge_length(h));
        hs.sort_by(|&x, &y| len[x - 3 * f].total_cmp(&len[y - 3 * f]).then(x.cmp(&y)));
        for (rank, h) in hs.into_iter().enumerate() {
            req[h] = centroid.rank(rank);
        }
    }
    req
}

/// Required length, current length and endpoint targets of one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgePressure {
    pub edge: HalfedgeId,
    pub required_length: f64,
    pub delta: f64,
    /// Targets for the origin and the target vertex of `edge`.
    pub targets: [Vec3; 2],
}

/// Pressure on every edge: the mean of the two faces' requests, split
/// evenly between the endpoints along the edge direction.
pub fn edge_pressures(mesh: &HalfedgeMesh, state: &ClusterState<TrianglePoint>) -> Vec<EdgePressure> {
    let req = requested_lengths(mesh, state);
    mesh.edge_ids()
        .map(|h| {
            let a = mesh.position(mesh.origin(h));
            let b = mesh.position(mesh.target(h));
            let required = 0.5 * (req[h] + req[mesh.twin(h)]);
            let len = (a - b).norm();
            let delta = required - len;
            let u = (a - b) / len;
            EdgePressure {
                edge: h,
                required_length: required,
                delta,
                targets: [a + u * (0.5 * delta), b - u * (0.5 * delta)],
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TranslateReport {
    pub moved: usize,
    pub midpoint: usize,
    pub rejected: usize,
    pub max_displacement: f64,
}

/// Moves every vertex to the mean of its incident edges' targets, subject
/// to the displacement band (with one midpoint retry) and a face-flip
/// guard. Targets come from the pre-move geometry; moves are applied in
/// ascending vertex id. Embeddings and distances in `c` are refreshed.
pub fn translate_vertices(mesh: &mut HalfedgeMesh, c: &mut Clustered, cfg: &RemeshConfig) -> TranslateReport {
    let eps = area_eps(mesh);
    let radius = cfg.displacement_band * mesh.mean_edge_length();
    let pressures = edge_pressures(mesh, &c.state);
    let mut targets: Vec<Vec<Vec3>> = vec![Vec::new(); mesh.vertex_capacity()];
    for e in &pressures {
        targets[mesh.origin(e.edge)].push(e.targets[0]);
        targets[mesh.target(e.edge)].push(e.targets[1]);
    }
    let mut report = TranslateReport::default();
    let ids: Vec<VertexId> = mesh.vertex_ids().collect();
    for v in ids {
        let p = mesh.position(v);
        let full = mean_target(&p, &targets[v]);
        if full == p {
            continue;
        }
        let mut applied = None;
        if let Some((q, mid)) = limit_to_band(&p, &full, radius) {
            if ring_preserved(mesh, v, &q, eps) {
                applied = Some((q, mid));
            } else if !mid {
                let half = (p + full) * 0.5;
                if ring_preserved(mesh, v, &half, eps) {
                    applied = Some((half, true));
                }
            }
        }
        match applied {
            Some((q, mid)) => {
                mesh.set_position(v, q);
                report.moved += 1;
                if mid {
                    report.midpoint += 1;
                }
                report.max_displacement = report.max_displacement.max((q - p).norm());
            }
            None => report.rejected += 1,
        }
    }
    c.refresh(mesh);
    report
}

/// The displacement-band rule: `p_star` if it lies within `radius` of `p`,
/// else the midpoint of `p` and `p_star` if that does, else nothing. The flag
/// reports whether the midpoint was used.
pub fn limit_to_band(p: &Vec3, p_star: &Vec3, radius: f64) -> Option<(Vec3, bool)> {
    if (p_star - p).norm() <= radius {
        return Some((*p_star, false));
    }
    let mid = (p + p_star) * 0.5;
    ((mid - p).norm() <= radius).then_some((mid, true))
}

/// Mean of the per-edge target positions of a vertex at `p`, accumulated as
/// offsets from `p` so that zero pressure leaves it exactly in place.
pub fn mean_target(p: &Vec3, targets: &[Vec3]) -> Vec3 {
    if targets.is_empty() {
        return *p;
    }
    let sum: Vec3 = targets.iter().map(|t| t - p).sum();
    p + sum / targets.len() as f64
}

/// True when moving `v` to `q` flips none of its faces.
fn ring_preserved(mesh: &HalfedgeMesh, v: VertexId, q: &Vec3, eps: f64) -> bool {
    let p = mesh.position(v);
    mesh.outgoing(v).all(|h| {
        let a = mesh.position(mesh.target(h));
        let b = mesh.position(mesh.origin(mesh.prev(h)));
        let n = triangle_cross(&p, &a, &b);
        face_geometry_ok(&n, [*q, a, b], eps)
    })
}
