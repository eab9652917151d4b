//! Indexed triangle solids with watertightness and self-intersection checks.

use crate::error::{Error, Result};
use crate::geometry::{segment_hits_triangle, triangles_intersect, Aabb, Vec3};
use crate::mesh::HalfedgeMesh;

#[derive(Debug, Clone, PartialEq)]
pub struct Solid {
    pub positions: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl Solid {
    pub fn new(positions: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Self {
        Solid { positions, faces }
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        self.faces[f].map(|v| self.positions[v])
    }

    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|v| self.positions[v]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn aabb(&self) -> Aabb {
        let mut b = Aabb::empty();
        for p in &self.positions {
            b.grow(p);
        }
        b
    }

    /// Closed, edge-manifold, consistently oriented and vertex-manifold.
    pub fn to_mesh(&self) -> Result<HalfedgeMesh> {
        HalfedgeMesh::from_triangles(self.positions.clone(), self.faces.clone())
    }

    /// Pairs of faces sharing no vertex whose triangles intersect.
    pub fn self_intersections(&self) -> Vec<(usize, usize)> {
        let boxes: Vec<Aabb> = (0..self.faces.len())
            .map(|f| {
                let mut b = Aabb::empty();
                for p in self.triangle(f) {
                    b.grow(&p);
                }
                b
            })
            .collect();
        let mut out = Vec::new();
        for i in 0..self.faces.len() {
            for j in i + 1..self.faces.len() {
                if self.faces[i].iter().any(|v| self.faces[j].contains(v)) || !overlap(&boxes[i], &boxes[j]) {
                    continue;
                }
                let a = self.triangle(i);
                let b = self.triangle(j);
                if triangles_intersect([&a[0], &a[1], &a[2]], [&b[0], &b[1], &b[2]]) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Checks that the solid is a closed, outward-oriented 2-manifold without
    /// self-intersections.
    pub fn validate(&self) -> Result<()> {
        let mesh = self.to_mesh()?;
        mesh.audit()?;
        let vol = self.signed_volume();
        if !(vol > 0.0) {
            return Err(Error::Topology(format!("solid is inward-oriented (volume {vol:e})")));
        }
        if let Some(&(i, j)) = self.self_intersections().first() {
            return Err(Error::Topology(format!("faces {i} and {j} intersect")));
        }
        Ok(())
    }

    /// Point containment by ray parity.
    pub fn contains(&self, p: &Vec3) -> bool {
        let b = self.aabb();
        let dir = Vec3::new(0.577_215_7, 0.293_107_3, 0.754_877_7).normalize();
        let q = p + dir * (4.0 * b.diagonal() + (p - b.center()).norm());
        let hits = (0..self.faces.len())
            .filter(|&f| {
                let [a, b, c] = self.triangle(f);
                segment_hits_triangle(p, &q, &a, &b, &c)
            })
            .count();
        hits % 2 == 1
    }

    /// Mirror image through the plane `x = 0`, with faces re-oriented.
    pub fn mirrored_x(&self) -> Solid {
        Solid {
            positions: self.positions.iter().map(|p| Vec3::new(-p.x, p.y, p.z)).collect(),
            faces: self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect(),
        }
    }
}

fn overlap(a: &Aabb, b: &Aabb) -> bool {
    (0..3).all(|i| a.min[i] <= b.max[i] && b.min[i] <= a.max[i])
}

/// Appends the quad `a b c d` as two triangles.
pub(crate) fn push_quad(faces: &mut Vec<[usize; 3]>, a: usize, b: usize, c: usize, d: usize) {
    faces.push([a, b, c]);
    faces.push([a, c, d]);
}
