//! Vertex-budget simplification: shortest-edge decimation followed by
//! Lloyd relaxation with reprojection onto the input surface.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{triangle_area, triangle_cross, Vec3};
use crate::mesh::{HalfedgeMesh, VertexId};
use crate::spatial::TriangleBvh;

/// Smallest budget accepted without `allow_minimal`.
pub const MIN_TARGET_VERTICES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimplifyConfig {
    pub target_vertex_count: usize,
    pub lloyd_iterations: usize,
    /// Accept budgets below [`MIN_TARGET_VERTICES`], down to a tetrahedron.
    pub allow_minimal: bool,
}

impl Default for SimplifyConfig {
    fn default() -> Self {
        SimplifyConfig {
            target_vertex_count: 252,
            lloyd_iterations: 35,
            allow_minimal: false,
        }
    }
}

impl SimplifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lloyd_iterations < 1 {
            return Err(Error::Config("lloyd_iterations must be at least 1".into()));
        }
        if self.target_vertex_count < 4 {
            return Err(Error::Budget(format!(
                "target of {} vertices is below a tetrahedron",
                self.target_vertex_count
            )));
        }
        if self.target_vertex_count < MIN_TARGET_VERTICES && !self.allow_minimal {
            return Err(Error::Budget(format!(
                "target of {} vertices is below the minimum of {MIN_TARGET_VERTICES}",
                self.target_vertex_count
            )));
        }
        Ok(())
    }
}

/// Decimates `mesh` to the vertex budget and relaxes the result. Every
/// output vertex lies on the input surface.
pub fn simplify(mesh: &HalfedgeMesh, cfg: &SimplifyConfig) -> Result<HalfedgeMesh> {
    cfg.validate()?;
    let (reference, _) = TriangleBvh::from_mesh(mesh);
    let mut out = mesh.clone();
    if cfg.target_vertex_count < out.n_vertices() {
        decimate(&mut out, &reference, cfg.target_vertex_count);
    } else if cfg.target_vertex_count > out.n_vertices() {
        warn!(
            "target of {} vertices exceeds input ({}); relaxing only",
            cfg.target_vertex_count,
            out.n_vertices()
        );
    }
    out.compact();
    relax(&mut out, &reference, cfg.lloyd_iterations);
    out.audit()?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct EdgeCandidate {
    length: f64,
    a: VertexId,
    b: VertexId,
}

impl Eq for EdgeCandidate {}

impl Ord for EdgeCandidate {
    // reversed: BinaryHeap pops the shortest edge, ties by vertex ids
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .length
            .total_cmp(&self.length)
            .then(other.a.cmp(&self.a))
            .then(other.b.cmp(&self.b))
    }
}

impl PartialOrd for EdgeCandidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn candidate(mesh: &HalfedgeMesh, a: VertexId, b: VertexId) -> EdgeCandidate {
    let (a, b) = (a.min(b), a.max(b));
    EdgeCandidate {
        length: (mesh.position(a) - mesh.position(b)).norm(),
        a,
        b,
    }
}

/// Collapses shortest edges (midpoint reprojected onto `reference`) until
/// `target` vertices remain or no legal collapse is left.
pub fn decimate(mesh: &mut HalfedgeMesh, reference: &TriangleBvh, target: usize) {
    let mut heap: BinaryHeap<EdgeCandidate> = mesh
        .edge_ids()
        .map(|h| candidate(mesh, mesh.origin(h), mesh.target(h)))
        .collect();
    let eps = 1e-12 * mesh.bounding_box().diagonal.powi(2);
    while mesh.n_vertices() > target {
        let Some(e) = heap.pop() else {
            warn!("decimation stalled at {} vertices (target {target})", mesh.n_vertices());
            break;
        };
        if !mesh.is_vertex_alive(e.a) || !mesh.is_vertex_alive(e.b) {
            continue;
        }
        let Some(h) = mesh.find_halfedge(e.a, e.b) else {
            continue;
        };
        if (mesh.position(e.a) - mesh.position(e.b)).norm() != e.length {
            continue;
        }
        if !mesh.is_collapse_topologically_legal(h) {
            continue;
        }
        let mid = (mesh.position(e.a) + mesh.position(e.b)) * 0.5;
        let p = reference.closest_point(&mid).map_or(mid, |hit| hit.point);
        if !collapse_keeps_orientation(mesh, h, &p, eps) {
            continue;
        }
        mesh.collapse_edge(h, p);
        for n in mesh.vertex_neighbors(e.a) {
            heap.push(candidate(mesh, e.a, n));
        }
    }
    debug!("decimated to {} vertices", mesh.n_vertices());
}

/// True when no face around the collapsed edge flips or degenerates.
pub(crate) fn collapse_keeps_orientation(mesh: &HalfedgeMesh, h: usize, p: &Vec3, eps: f64) -> bool {
    let a = mesh.origin(h);
    for (f, t) in mesh.collapse_affected_faces(h) {
        let before = mesh.face_positions(f);
        let n_before = triangle_cross(&before[0], &before[1], &before[2]);
        let pos = t.map(|v| if v == a { *p } else { mesh.position(v) });
        let n_after = triangle_cross(&pos[0], &pos[1], &pos[2]);
        if n_after.dot(&n_before) <= 0.0 || triangle_area(&pos[0], &pos[1], &pos[2]) <= eps {
            return false;
        }
    }
    true
}

/// Area-weighted centroid of the barycentric cell of `v`.
pub fn barycentric_cell_centroid(mesh: &HalfedgeMesh, v: VertexId) -> Vec3 {
    let p = mesh.position(v);
    let mut sum = Vec3::zeros();
    let mut area = 0.0;
    for h in mesh.outgoing(v) {
        let a = mesh.position(mesh.target(h));
        let b = mesh.position(mesh.origin(mesh.prev(h)));
        let ma = (p + a) * 0.5;
        let mb = (p + b) * 0.5;
        let g = (p + a + b) / 3.0;
        for (x, y) in [(ma, g), (g, mb)] {
            let w = triangle_area(&p, &x, &y);
            sum += (p + x + y) / 3.0 * w;
            area += w;
        }
    }
    if area > 0.0 {
        sum / area
    } else {
        p
    }
}

fn corner_angle(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let u = a - p;
    let w = b - p;
    (u.dot(&w) / (u.norm() * w.norm())).clamp(-1.0, 1.0).acos()
}

fn ring_min_angle(mesh: &HalfedgeMesh, v: VertexId, q: &Vec3) -> f64 {
    let mut min = f64::INFINITY;
    for h in mesh.outgoing(v) {
        let a = mesh.position(mesh.target(h));
        let b = mesh.position(mesh.origin(mesh.prev(h)));
        min = min
            .min(corner_angle(q, &a, &b))
            .min(corner_angle(&a, &b, q))
            .min(corner_angle(&b, q, &a));
    }
    min
}

/// Moving `v` to `q` flips no incident face, keeps their area above `eps`
/// and does not lower the smallest angle of the 1-ring.
fn ring_move_acceptable(mesh: &HalfedgeMesh, v: VertexId, q: &Vec3, eps: f64) -> bool {
    let p = mesh.position(v);
    for h in mesh.outgoing(v) {
        let a = mesh.position(mesh.target(h));
        let b = mesh.position(mesh.origin(mesh.prev(h)));
        let before = triangle_cross(&p, &a, &b);
        let after = triangle_cross(q, &a, &b);
        if after.dot(&before) <= 0.0 || after.norm() * 0.5 <= eps {
            return false;
        }
    }
    ring_min_angle(mesh, v, q) >= ring_min_angle(mesh, v, &p)
}

const BISECTION_STEPS: usize = 6;

/// One Lloyd step: every vertex moves toward its barycentric-cell centroid
/// within its tangent plane (targets from the current snapshot), then is
/// reprojected onto `reference`. A move that would flip an incident face or
/// lower the 1-ring's smallest angle is halved toward the original position a
/// few times and dropped if it still fails. Returns the largest move.
pub fn lloyd_relax_step(mesh: &mut HalfedgeMesh, reference: &TriangleBvh) -> f64 {
    let ids: Vec<VertexId> = mesh.vertex_ids().collect();
    let mut bounds = crate::geometry::Aabb::empty();
    for i in 0..reference.len() {
        for p in reference.triangle(i) {
            bounds.grow(p);
        }
    }
    let eps = 1e-12 * bounds.diagonal().powi(2);
    let targets: Vec<Vec3> = ids
        .iter()
        .map(|&v| {
            let p = mesh.position(v);
            let c = barycentric_cell_centroid(mesh, v);
            match mesh.vertex_normal(v) {
                Ok(n) => c - n * n.dot(&(c - p)),
                Err(_) => p,
            }
        })
        .collect();
    let mut max_move: f64 = 0.0;
    for (&v, target) in ids.iter().zip(&targets) {
        let p = mesh.position(v);
        let mut t = 1.0;
        for _ in 0..BISECTION_STEPS {
            let c = p + (target - p) * t;
            let q = reference.closest_point(&c).map_or(c, |hit| hit.point);
            if ring_move_acceptable(mesh, v, &q, eps) {
                max_move = max_move.max((q - p).norm());
                mesh.set_position(v, q);
                break;
            }
            t *= 0.5;
        }
    }
    max_move
}

/// Runs up to `iterations` Lloyd steps, stopping (and undoing the step) as
/// soon as one makes edge lengths less uniform. Returns the edge-length
/// coefficient of variation before and after every kept step.
pub fn relax(mesh: &mut HalfedgeMesh, reference: &TriangleBvh, iterations: usize) -> Vec<f64> {
    let mut trace = vec![edge_length_cv(mesh)];
    for _ in 0..iterations {
        let snapshot = mesh.positions().to_vec();
        lloyd_relax_step(mesh, reference);
        let cv = edge_length_cv(mesh);
        if cv > *trace.last().expect("non-empty") {
            for (v, p) in snapshot.into_iter().enumerate() {
                mesh.set_position(v, p);
            }
            debug!("relaxation stopped after {} steps", trace.len() - 1);
            break;
        }
        trace.push(cv);
    }
    trace
}

/// Coefficient of variation of the unique edge lengths.
pub fn edge_length_cv(mesh: &HalfedgeMesh) -> f64 {
    let lengths: Vec<f64> = mesh.edge_ids().map(|h| mesh.edge_length(h)).collect();
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<f64>() / n;
    let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Smallest interior angle over all faces, in degrees.
pub fn min_angle_deg(mesh: &HalfedgeMesh) -> f64 {
    let mut min = 180.0f64;
    for f in mesh.face_ids() {
        let p = mesh.face_positions(f);
        for i in 0..3 {
            let u = p[(i + 1) % 3] - p[i];
            let w = p[(i + 2) % 3] - p[i];
            let c = (u.dot(&w) / (u.norm() * w.norm())).clamp(-1.0, 1.0);
            min = min.min(c.acos().to_degrees());
        }
    }
    min
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fidelity::hausdorff;
    use crate::shapes;

    fn max_surface_gap(mesh: &HalfedgeMesh, reference: &TriangleBvh) -> f64 {
        mesh.vertex_ids()
            .map(|v| reference.distance(&mesh.position(v)))
            .fold(0.0, f64::max)
    }

    #[test]
    fn sphere_reaches_budget_close_to_input() {
        let m = shapes::icosphere(5);
        assert_eq!(m.n_vertices(), 10242);
        let cfg = SimplifyConfig {
            target_vertex_count: 252,
            ..Default::default()
        };
        let s = simplify(&m, &cfg).unwrap();
        assert!(s.n_vertices().abs_diff(252) <= 2, "{}", s.n_vertices());
        assert_eq!(s.euler_characteristic(), 2);
        let (bvh, _) = TriangleBvh::from_mesh(&m);
        assert!(max_surface_gap(&s, &bvh) <= 1e-6 * m.bounding_box().diagonal);
        let d = hausdorff(&m, &s, 10.0);
        assert!(d.max_pct_bb <= 1.5, "{}", d.max_pct_bb);
    }

    #[test]
    fn relaxation_only_stays_close() {
        let m = shapes::potato(3, 0.12, 2);
        let cfg = SimplifyConfig {
            target_vertex_count: m.n_vertices(),
            ..Default::default()
        };
        let s = simplify(&m, &cfg).unwrap();
        assert_eq!(s.n_vertices(), m.n_vertices());
        assert!(hausdorff(&m, &s, 10.0).max_pct_bb <= 0.5);
    }

    #[test]
    fn tiny_budgets() {
        let m = shapes::icosphere(2);
        let cfg = SimplifyConfig {
            target_vertex_count: 4,
            ..Default::default()
        };
        assert!(matches!(simplify(&m, &cfg), Err(Error::Budget(_))));
        let s = simplify(
            &m,
            &SimplifyConfig {
                allow_minimal: true,
                ..cfg
            },
        )
        .unwrap();
        assert!(s.n_vertices() >= 4);
        s.audit().unwrap();
        assert!(s.signed_volume() > 0.0);
    }

    #[test]
    fn uniform_grid_interior_vertex_stays_put() {
        let mut m = shapes::grid_cube(4);
        let (bvh, _) = TriangleBvh::from_mesh(&m);
        let interior: Vec<VertexId> = m
            .vertex_ids()
            .filter(|&v| {
                let p = m.position(v);
                (p.z - 1.0).abs() < 1e-12 && p.x > 0.1 && p.x < 0.9 && p.y > 0.1 && p.y < 0.9
            })
            .collect();
        assert!(!interior.is_empty());
        let before: Vec<Vec3> = interior.iter().map(|&v| m.position(v)).collect();
        lloyd_relax_step(&mut m, &bvh);
        for (&v, p) in interior.iter().zip(&before) {
            assert!((m.position(v) - p).norm() < 1e-9);
        }
    }

    #[test]
    fn off_center_vertex_moves_toward_ring_centroid() {
        let mut m = shapes::grid_cube(4);
        let (bvh, _) = TriangleBvh::from_mesh(&m);
        let v = m
            .vertex_ids()
            .find(|&v| {
                let p = m.position(v);
                (p.z - 1.0).abs() < 1e-12 && (p.x - 0.5).abs() < 1e-12 && (p.y - 0.5).abs() < 1e-12
            })
            .unwrap();
        let home = m.position(v);
        let off = home + Vec3::new(0.06, -0.04, 0.0);
        m.set_position(v, off);
        let ring: Vec<Vec3> = m.vertex_neighbors(v).iter().map(|&n| m.position(n)).collect();
        let ring_c = ring.iter().sum::<Vec3>() / ring.len() as f64;
        lloyd_relax_step(&mut m, &bvh);
        assert!((m.position(v) - ring_c).norm() < (off - ring_c).norm());
    }

    #[test]
    fn steps_keep_vertices_on_reference() {
        let m = shapes::potato(3, 0.15, 4);
        let (bvh, _) = TriangleBvh::from_mesh(&m);
        let mut s = m.clone();
        decimate(&mut s, &bvh, 200);
        s.compact();
        for _ in 0..5 {
            lloyd_relax_step(&mut s, &bvh);
            assert!(max_surface_gap(&s, &bvh) <= 1e-6 * m.bounding_box().diagonal);
            s.audit().unwrap();
        }
    }

    #[test]
    fn relaxation_improves_min_angle_over_plain_decimation() {
        for seed in 1..=5 {
            let m = shapes::potato(4, 0.15, seed);
            let (bvh, _) = TriangleBvh::from_mesh(&m);
            let mut naive = m.clone();
            decimate(&mut naive, &bvh, 200);
            naive.compact();
            let relaxed = simplify(
                &m,
                &SimplifyConfig {
                    target_vertex_count: 200,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(min_angle_deg(&relaxed) > min_angle_deg(&naive));
        }
    }

    #[test]
    fn edge_length_spread_does_not_grow_across_steps() {
        for seed in 1..=5 {
            let m = shapes::potato(4, 0.15, seed);
            let (bvh, _) = TriangleBvh::from_mesh(&m);
            let mut s = m.clone();
            decimate(&mut s, &bvh, 250);
            s.compact();
            let trace = relax(&mut s, &bvh, 35);
            assert!(trace.len() > 5);
            for w in trace.windows(2) {
                assert!(w[1] <= w[0]);
            }
            assert_eq!(*trace.last().unwrap(), edge_length_cv(&s));
        }
    }
}
