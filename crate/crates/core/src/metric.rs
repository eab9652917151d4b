//! Triangle shape space: sorted edge lengths, squared distances, centroids,
//! clustering energy and clustering errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{triangle_area, Vec3};
use crate::mesh::HalfedgeMesh;

/// A point in a shape space. Coordinates beyond `DIM` are ignored.
pub trait ShapePoint: Copy + PartialEq + std::fmt::Debug + Send + Sync {
    const DIM: usize;

    fn coords(&self) -> [f64; 4];

    /// Builds a point from averaged coordinates, restoring any ordering
    /// invariant the averaging may have broken.
    fn from_mean(coords: [f64; 4]) -> Self;

    /// Squared Euclidean distance.
    #[inline]
    fn distance(&self, other: &Self) -> f64 {
        let a = self.coords();
        let b = other.coords();
        let mut s = 0.0;
        for i in 0..Self::DIM {
            let d = a[i] - b[i];
            s += d * d;
        }
        s
    }
}

/// Sorted edge lengths `x <= y <= z` of a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrianglePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl TrianglePoint {
    pub fn from_lengths(a: f64, b: f64, c: f64) -> Self {
        let mut l = [a, b, c];
        sort3(&mut l);
        TrianglePoint {
            x: l[0],
            y: l[1],
            z: l[2],
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Component of the given rank (0 = shortest).
    pub fn rank(&self, r: usize) -> f64 {
        self.as_array()[r]
    }

    pub fn mean_edge(&self) -> f64 {
        (self.x + self.y + self.z) / 3.0
    }
}

#[inline]
fn sort3(l: &mut [f64; 3]) {
    if l[0] > l[1] {
        l.swap(0, 1);
    }
    if l[1] > l[2] {
        l.swap(1, 2);
    }
    if l[0] > l[1] {
        l.swap(0, 1);
    }
}

impl ShapePoint for TrianglePoint {
    const DIM: usize = 3;

    #[inline]
    fn coords(&self) -> [f64; 4] {
        [self.x, self.y, self.z, 0.0]
    }

    fn from_mean(c: [f64; 4]) -> Self {
        TrianglePoint::from_lengths(c[0], c[1], c[2])
    }
}

/// Curved-patch descriptor: curvature offset `w` plus the sorted edge lengths
/// of the patch's corner triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvedPatchPoint {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CurvedPatchPoint {
    pub fn new(w: f64, corner: TrianglePoint) -> Self {
        CurvedPatchPoint {
            w,
            x: corner.x,
            y: corner.y,
            z: corner.z,
        }
    }

    pub fn corner(&self) -> TrianglePoint {
        TrianglePoint {
            x: self.x,
            y: self.y,
            z: self.z,
        }
    }
}

impl ShapePoint for CurvedPatchPoint {
    const DIM: usize = 4;

    #[inline]
    fn coords(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    fn from_mean(c: [f64; 4]) -> Self {
        CurvedPatchPoint::new(c[0].max(0.0), TrianglePoint::from_lengths(c[1], c[2], c[3]))
    }
}

/// Embeds a positive-area triangle as its sorted edge lengths.
pub fn embed(a: &Vec3, b: &Vec3, c: &Vec3) -> Result<TrianglePoint> {
    let ab = (b - a).norm();
    let bc = (c - b).norm();
    let ca = (a - c).norm();
    let scale = ab.max(bc).max(ca);
    let area = triangle_area(a, b, c);
    if !(area > 1e-12 * scale * scale) {
        return Err(Error::Degenerate(format!("triangle has area {area:e}")));
    }
    Ok(TrianglePoint::from_lengths(ab, bc, ca))
}

/// Sorted edge lengths of a face, without the area check.
pub fn embed_face(mesh: &HalfedgeMesh, f: usize) -> TrianglePoint {
    let [a, b, c] = mesh.face_positions(f);
    TrianglePoint::from_lengths((b - a).norm(), (c - b).norm(), (a - c).norm())
}

/// Embeddings of all faces, indexed by face id (dead slots hold zeros).
pub fn embed_mesh(mesh: &HalfedgeMesh) -> Vec<TrianglePoint> {
    let mut out = vec![TrianglePoint::from_lengths(0.0, 0.0, 0.0); mesh.face_capacity()];
    for f in mesh.face_ids() {
        out[f] = embed_face(mesh, f);
    }
    out
}

#[inline]
pub fn distance(a: &TrianglePoint, b: &TrianglePoint) -> f64 {
    ShapePoint::distance(a, b)
}

#[inline]
pub fn distance_curved(a: &CurvedPatchPoint, b: &CurvedPatchPoint) -> f64 {
    ShapePoint::distance(a, b)
}

/// Componentwise mean of the members.
pub fn centroid<P: ShapePoint>(members: &[P]) -> Result<P> {
    let mut acc = MeanAccumulator::default();
    for m in members {
        acc.add(m);
    }
    acc.mean().ok_or(Error::EmptyCluster)
}

/// Running componentwise mean, accumulated as offsets from the first point
/// so that identical members reproduce that point exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAccumulator {
    pivot: [f64; 4],
    offset: [f64; 4],
    count: usize,
}

impl MeanAccumulator {
    pub fn add<P: ShapePoint>(&mut self, p: &P) {
        let c = p.coords();
        if self.count == 0 {
            self.pivot = c;
        }
        for i in 0..4 {
            self.offset[i] += c[i] - self.pivot[i];
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean<P: ShapePoint>(&self) -> Option<P> {
        if self.count == 0 {
            return None;
        }
        let n = self.count as f64;
        let mut m = [0.0; 4];
        for i in 0..4 {
            m[i] = self.pivot[i] + self.offset[i] / n;
        }
        Some(P::from_mean(m))
    }
}

/// Labels, centroids and the per-triangle squared distances that make up the
/// clustering energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState<P> {
    pub labels: Vec<usize>,
    pub centroids: Vec<P>,
    pub per_triangle_distance: Vec<f64>,
    /// Sum of `per_triangle_distance`.
    pub energy: f64,
    /// Largest per-triangle squared distance.
    pub error_max: f64,
    /// Mean per-triangle squared distance.
    pub error_mean: f64,
}

impl<P: ShapePoint> ClusterState<P> {
    pub fn new(points: &[P], centroids: Vec<P>, labels: Vec<usize>) -> Self {
        let mut s = ClusterState {
            labels,
            centroids,
            per_triangle_distance: Vec::new(),
            energy: 0.0,
            error_max: 0.0,
            error_mean: 0.0,
        };
        s.recompute(points);
        s
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Recomputes distances and aggregates for the current labels/centroids.
    pub fn recompute(&mut self, points: &[P]) {
        self.per_triangle_distance = points
            .iter()
            .zip(&self.labels)
            .map(|(p, &l)| p.distance(&self.centroids[l]))
            .collect();
        self.refresh_aggregates();
    }

    /// Recomputes energy and errors from `per_triangle_distance`.
    pub fn refresh_aggregates(&mut self) {
        let n = self.per_triangle_distance.len();
        self.energy = self.per_triangle_distance.iter().sum();
        self.error_max = self.per_triangle_distance.iter().copied().fold(0.0, f64::max);
        self.error_mean = if n == 0 { 0.0 } else { self.energy / n as f64 };
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == cluster)
            .map(|(i, _)| i)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// True when every non-empty cluster's centroid is the mean of its members.
    pub fn is_consistent(&self, points: &[P], rel_tol: f64) -> bool {
        for c in 0..self.k() {
            let members: Vec<P> = self.members(c).map(|i| points[i]).collect();
            if members.is_empty() {
                continue;
            }
            let mean = centroid(&members).expect("non-empty");
            let scale = mean.coords().iter().fold(1e-300f64, |m, v| m.max(v.abs()));
            if mean.distance(&self.centroids[c]).sqrt() > rel_tol * scale {
                return false;
            }
        }
        true
    }

    /// Largest squared distance among members of `cluster`.
    pub fn cluster_error_max(&self, cluster: usize) -> f64 {
        self.members(cluster)
            .map(|i| self.per_triangle_distance[i])
            .fold(0.0, f64::max)
    }

    pub fn error_abs(&self, i: usize) -> f64 {
        self.per_triangle_distance[i].sqrt()
    }

    pub fn errors(&self, mean_edge: f64) -> ErrorSummary {
        errors(self, mean_edge)
    }
}

/// Sum of per-triangle squared distances to the assigned centroids.
pub fn energy<P: ShapePoint>(points: &[P], state: &ClusterState<P>) -> f64 {
    points
        .iter()
        .zip(&state.labels)
        .map(|(p, &l)| p.distance(&state.centroids[l]))
        .sum()
}

/// Clustering errors in squared units, in length units, and as a percentage
/// of `mean_edge`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub max_sq: f64,
    pub mean_sq: f64,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub max_pct: f64,
    pub mean_pct: f64,
}

pub fn errors<P: ShapePoint>(state: &ClusterState<P>, mean_edge: f64) -> ErrorSummary {
    let n = state.per_triangle_distance.len();
    let max_sq = state.per_triangle_distance.iter().copied().fold(0.0, f64::max);
    let mean_sq = if n == 0 {
        0.0
    } else {
        state.per_triangle_distance.iter().sum::<f64>() / n as f64
    };
    let mean_abs = if n == 0 {
        0.0
    } else {
        state.per_triangle_distance.iter().map(|d| d.sqrt()).sum::<f64>() / n as f64
    };
    let max_abs = max_sq.sqrt();
    let pct = |v: f64| if mean_edge > 0.0 { v / mean_edge * 100.0 } else { 0.0 };
    ErrorSummary {
        max_sq,
        mean_sq,
        max_abs,
        mean_abs,
        max_pct: pct(max_abs),
        mean_pct: pct(mean_abs),
    }
}

/// Mean of all coordinates of the given triangle points (equals the mean
/// unique-edge length on a closed mesh, where every edge has two faces).
pub fn mean_edge_of(points: &[TrianglePoint]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    points.iter().map(|p| p.x + p.y + p.z).sum::<f64>() / (3 * points.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tp(x: f64, y: f64, z: f64) -> TrianglePoint {
        TrianglePoint { x, y, z }
    }

    #[test]
    fn right_triangle_embeds_as_345() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(3.0, 0.0, 0.0);
        let c = Vec3::new(0.0, 4.0, 0.0);
        let orders = [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]];
        for o in orders {
            assert_eq!(embed(&o[0], &o[1], &o[2]).unwrap(), tp(3.0, 4.0, 5.0));
        }
    }

    #[test]
    fn equilateral_embeds_uniformly() {
        let s = 2.5;
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(s, 0.0, 0.0);
        let c = Vec3::new(s / 2.0, s * 3f64.sqrt() / 2.0, 0.0);
        let p = embed(&a, &b, &c).unwrap();
        for v in p.as_array() {
            assert!((v - s).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(1.0, 0.0, 0.0);
        let c = Vec3::new(2.0, 0.0, 0.0);
        assert!(matches!(embed(&a, &b, &c), Err(Error::Degenerate(_))));
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&tp(3.0, 4.0, 5.0), &tp(3.0, 4.0, 5.0)), 0.0);
        assert_eq!(distance(&tp(3.0, 4.0, 5.0), &tp(3.0, 4.0, 6.0)), 1.0);
        assert_eq!(distance(&tp(1.0, 1.0, 1.0), &tp(2.0, 2.0, 2.0)), 3.0);

        let c = |w, x, y, z| CurvedPatchPoint { w, x, y, z };
        assert_eq!(distance_curved(&c(1.0, 1.0, 2.0, 3.0), &c(1.0, 1.0, 2.0, 3.0)), 0.0);
        assert_eq!(distance_curved(&c(0.0, 1.0, 2.0, 3.0), &c(2.0, 1.0, 2.0, 3.0)), 4.0);
        assert_eq!(distance_curved(&c(0.0, 1.0, 2.0, 3.0), &c(1.0, 1.0, 2.0, 4.0)), 2.0);
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(
            centroid(&[tp(3.0, 4.0, 5.0), tp(5.0, 6.0, 7.0)]).unwrap(),
            tp(4.0, 5.0, 6.0)
        );
        assert_eq!(centroid(&[tp(1.5, 2.0, 3.0)]).unwrap(), tp(1.5, 2.0, 3.0));
        assert_eq!(
            centroid(&[tp(1.0, 2.0, 3.0), tp(1.0, 2.0, 3.0), tp(4.0, 5.0, 6.0)]).unwrap(),
            tp(2.0, 3.0, 4.0)
        );
        assert!(matches!(centroid::<TrianglePoint>(&[]), Err(Error::EmptyCluster)));
    }

    #[test]
    fn single_cluster_energy_and_errors() {
        let pts = [tp(3.0, 4.0, 5.0), tp(3.0, 4.0, 7.0)];
        let c = centroid(&pts).unwrap();
        assert_eq!(c, tp(3.0, 4.0, 6.0));
        let st = ClusterState::new(&pts, vec![c], vec![0, 0]);
        assert_eq!(st.energy, 2.0);
        assert_eq!(st.error_max, 1.0);
        let mean_edge = mean_edge_of(&pts);
        assert!((mean_edge - 26.0 / 6.0).abs() < 1e-12);
        let e = st.errors(mean_edge);
        assert_eq!(e.max_abs, 1.0);
        // hand check: 1 / 4.3333 * 100
        assert!((e.max_pct - 23.076923076923077).abs() < 1e-9);
    }

    #[test]
    fn congruent_triangles_have_zero_energy() {
        let pts = vec![tp(1.0, 1.2, 1.4); 10];
        let st = ClusterState::new(&pts, vec![centroid(&pts).unwrap()], vec![0; 10]);
        assert_eq!(st.energy, 0.0);
        assert_eq!(st.error_max, 0.0);
    }

    mod props {
        use super::*;
        use nalgebra::{Rotation3, Unit};
        use proptest::prelude::*;

        fn vec3() -> impl Strategy<Value = Vec3> {
            (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(a, b, c)| Vec3::new(a, b, c))
        }

        proptest! {
            #[test]
            fn embedding_is_rigid_invariant(a in vec3(), b in vec3(), c in vec3(), axis in vec3(),
                                            angle in -3.1..3.1f64, t in vec3(), perm in 0usize..6) {
                prop_assume!(triangle_area(&a, &b, &c) > 1e-3);
                prop_assume!(axis.norm() > 1e-3);
                let p = embed(&a, &b, &c).unwrap();
                let r = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
                let m = |v: &Vec3| r * v + t;
                let refl = |v: &Vec3| Vec3::new(-v.x, v.y, v.z);
                let tri = [m(&a), m(&b), m(&c)];
                let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
                let o = orders[perm];
                let q = embed(&tri[o[0]], &tri[o[1]], &tri[o[2]]).unwrap();
                let qr = embed(&refl(&tri[o[0]]), &refl(&tri[o[1]]), &refl(&tri[o[2]])).unwrap();
                for (u, v) in p.as_array().iter().zip(q.as_array()) {
                    prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
                }
                for (u, v) in p.as_array().iter().zip(qr.as_array()) {
                    prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
                }
            }

            #[test]
            fn distance_is_a_squared_metric(a in (0.1..5.0f64, 0.1..5.0f64, 0.1..5.0f64),
                                            b in (0.1..5.0f64, 0.1..5.0f64, 0.1..5.0f64),
                                            c in (0.1..5.0f64, 0.1..5.0f64, 0.1..5.0f64)) {
                let a = TrianglePoint::from_lengths(a.0, a.1, a.2);
                let b = TrianglePoint::from_lengths(b.0, b.1, b.2);
                let c = TrianglePoint::from_lengths(c.0, c.1, c.2);
                prop_assert!(distance(&a, &b) >= 0.0);
                prop_assert_eq!(distance(&a, &b), distance(&b, &a));
                prop_assert_eq!(distance(&a, &a), 0.0);
                let (ab, bc, ac) = (distance(&a, &b).sqrt(), distance(&b, &c).sqrt(), distance(&a, &c).sqrt());
                prop_assert!(ac <= ab + bc + 1e-12);
            }

            #[test]
            fn mean_centroid_never_increases_energy(seed in 0u64..500, jitter in 0.01..1.0f64) {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let pts: Vec<TrianglePoint> = (0..12)
                    .map(|_| TrianglePoint::from_lengths(rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)))
                    .collect();
                let c = centroid(&pts).unwrap();
                let base = ClusterState::new(&pts, vec![c], vec![0; pts.len()]).energy;
                let moved = TrianglePoint {
                    x: c.x + rng.gen_range(-jitter..jitter),
                    y: c.y + rng.gen_range(-jitter..jitter),
                    z: c.z + rng.gen_range(-jitter..jitter),
                };
                let other = ClusterState::new(&pts, vec![moved], vec![0; pts.len()]).energy;
                prop_assert!(base <= other + 1e-12);
            }
        }
    }
}
