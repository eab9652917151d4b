//! Static axis-aligned bounding-volume hierarchy for exact closest-point
//! queries against a triangle soup.

use crate::geometry::{closest_point_on_triangle, Aabb, Vec3};
use crate::mesh::HalfedgeMesh;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: first index into `order`; inner: index of the left child.
    start: u32,
    /// Leaf: triangle count; inner: 0.
    count: u32,
    /// Inner: index of the right child.
    right: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestHit {
    pub point: Vec3,
    pub distance_squared: f64,
    /// Index of the triangle in the input order.
    pub triangle: usize,
}

#[derive(Debug, Clone)]
pub struct TriangleBvh {
    triangles: Vec<[Vec3; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl TriangleBvh {
    pub fn new(triangles: Vec<[Vec3; 3]>) -> Self {
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let centroids: Vec<Vec3> = triangles.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut bvh = TriangleBvh {
            triangles,
            order: Vec::new(),
            nodes: Vec::new(),
        };
        if !order.is_empty() {
            let n = order.len();
            bvh.build(&mut order, &centroids, 0, n);
        }
        bvh.order = order;
        bvh
    }

    /// Index over the live faces of a mesh; hits report face ids.
    pub fn from_mesh(mesh: &HalfedgeMesh) -> (Self, Vec<usize>) {
        let ids: Vec<usize> = mesh.face_ids().collect();
        let tris = ids.iter().map(|&f| mesh.face_positions(f)).collect();
        (TriangleBvh::new(tris), ids)
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, i: usize) -> &[Vec3; 3] {
        &self.triangles[i]
    }

    fn build(&mut self, order: &mut [u32], centroids: &[Vec3], lo: usize, hi: usize) -> u32 {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &t in &order[lo..hi] {
            for p in &self.triangles[t as usize] {
                bounds.grow(p);
            }
            cbounds.grow(&centroids[t as usize]);
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            bounds,
            start: lo as u32,
            count: (hi - lo) as u32,
            right: 0,
        });
        if hi - lo <= LEAF_SIZE {
            return id;
        }
        let ext = cbounds.max - cbounds.min;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = (lo + hi) / 2;
        // stable tie-break on triangle index keeps the build deterministic
        order[lo..hi].sort_by(|&a, &b| {
            centroids[a as usize][axis]
                .total_cmp(&centroids[b as usize][axis])
                .then(a.cmp(&b))
        });
        let left = self.build(order, centroids, lo, mid);
        let right = self.build(order, centroids, mid, hi);
        let node = &mut self.nodes[id as usize];
        node.start = left;
        node.count = 0;
        node.right = right;
        id
    }

    /// Exact closest point on the triangle soup. Returns `None` when empty.
    pub fn closest_point(&self, p: &Vec3) -> Option<ClosestHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = ClosestHit {
            point: *p,
            distance_squared: f64::INFINITY,
            triangle: usize::MAX,
        };
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if node.bounds.distance_squared(p) > best.distance_squared {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &t in &self.order[s..s + node.count as usize] {
                    let [a, b, c] = &self.triangles[t as usize];
                    let q = closest_point_on_triangle(p, a, b, c);
                    let d = (q - p).norm_squared();
                    if d < best.distance_squared || (d == best.distance_squared && (t as usize) < best.triangle) {
                        best = ClosestHit {
                            point: q,
                            distance_squared: d,
                            triangle: t as usize,
                        };
                    }
                }
            } else {
                let l = node.start;
                let r = node.right;
                let dl = self.nodes[l as usize].bounds.distance_squared(p);
                let dr = self.nodes[r as usize].bounds.distance_squared(p);
                // push the farther child first so the nearer is visited first
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        Some(best)
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        self.closest_point(p)
            .map_or(f64::INFINITY, |h| h.distance_squared.sqrt())
    }
}
