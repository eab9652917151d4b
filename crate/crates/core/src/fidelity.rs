//! Sampled symmetric Hausdorff distance between two surfaces.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::mesh::HalfedgeMesh;
use crate::spatial::TriangleBvh;

pub const DEFAULT_SAMPLES_PER_TRIANGLE: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HausdorffResult {
    pub mean_distance: f64,
    pub max_distance: f64,
    pub mean_pct_bb: f64,
    pub max_pct_bb: f64,
    pub sample_count: usize,
}

// plastic-number (R2) low-discrepancy offsets
const R2_A1: f64 = 0.754_877_666_246_692_8;
const R2_A2: f64 = 0.569_840_290_998_053_3;

/// Low-discrepancy points on each triangle, `ceil(density * area / mean_area)`
/// per triangle, plus every vertex. Point `j` of a triangle does not depend on
/// the density, so denser sample sets contain sparser ones.
pub fn sample_surface(mesh: &HalfedgeMesh, density: f64) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = mesh.vertex_ids().map(|v| mesh.position(v)).collect();
    for (_, pts) in face_samples(mesh, density) {
        out.extend(pts);
    }
    out
}

fn face_samples(mesh: &HalfedgeMesh, density: f64) -> Vec<(usize, Vec<Vec3>)> {
    let nf = mesh.n_faces();
    let mean_area = mesh.total_area() / nf.max(1) as f64;
    mesh.face_ids()
        .map(|f| {
            let [a, b, c] = mesh.face_positions(f);
            let ratio = if mean_area > 0.0 {
                mesh.face_area(f) / mean_area
            } else {
                1.0
            };
            let n = ((density * ratio).ceil() as usize).max(1);
            let pts = (0..n)
                .map(|j| {
                    let mut u = (0.5 + R2_A1 * j as f64).fract();
                    let mut v = (0.5 + R2_A2 * j as f64).fract();
                    if u + v > 1.0 {
                        u = 1.0 - u;
                        v = 1.0 - v;
                    }
                    a + (b - a) * u + (c - a) * v
                })
                .collect();
            (f, pts)
        })
        .collect()
}

type TriangleKey = [[u64; 3]; 3];

fn triangle_key(mesh: &HalfedgeMesh, f: usize) -> TriangleKey {
    let mut k = mesh
        .face_positions(f)
        .map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]);
    k.sort_unstable();
    k
}

/// Distances from each sample of `from` to the surface of `to`. Samples on a
/// triangle that `to` also contains are at distance zero exactly.
fn one_sided(from: &HalfedgeMesh, to: &HalfedgeMesh, to_bvh: &TriangleBvh, density: f64) -> Vec<f64> {
    let shared: HashSet<TriangleKey> = to.face_ids().map(|f| triangle_key(to, f)).collect();
    let mut samples: Vec<(Vec3, bool)> = from.vertex_ids().map(|v| (from.position(v), false)).collect();
    for (f, pts) in face_samples(from, density) {
        let on_shared = shared.contains(&triangle_key(from, f));
        samples.extend(pts.into_iter().map(|p| (p, on_shared)));
    }
    samples
        .par_iter()
        .map(|(p, on_shared)| if *on_shared { 0.0 } else { to_bvh.distance(p) })
        .collect()
}

/// Symmetric sampled Hausdorff distance, normalized by `a`'s bounding-box
/// diagonal. `samples_per_triangle` is the sample count of an average-area
/// triangle.
pub fn hausdorff(a: &HalfedgeMesh, b: &HalfedgeMesh, samples_per_triangle: f64) -> HausdorffResult {
    let (bvh_a, _) = TriangleBvh::from_mesh(a);
    let (bvh_b, _) = TriangleBvh::from_mesh(b);
    let mut d = one_sided(a, b, &bvh_b, samples_per_triangle);
    d.extend(one_sided(b, a, &bvh_a, samples_per_triangle));
    let n = d.len();
    let max = d.iter().copied().fold(0.0, f64::max);
    let mean = if n == 0 { 0.0 } else { d.iter().sum::<f64>() / n as f64 };
    let diag = a.bounding_box().diagonal;
    let pct = |x: f64| if diag > 0.0 { x / diag * 100.0 } else { 0.0 };
    HausdorffResult {
        mean_distance: mean,
        max_distance: max,
        mean_pct_bb: pct(mean),
        max_pct_bb: pct(max),
        sample_count: n,
    }
}
