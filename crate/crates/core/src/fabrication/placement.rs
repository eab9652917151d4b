//! Canonical class triangles and their rigid placements onto mesh faces.

use nalgebra::Matrix3;

use crate::geometry::Vec3;
use crate::mesh::{HalfedgeMesh, VertexId};
use crate::metric::TrianglePoint;

/// Planar triangle with sorted edge lengths `(x, y, z)` in the XY plane,
/// counter-clockwise seen from `+z`. Corner `i` is opposite the edge of rank
/// `i`: `A` at the origin, `B` on the `+x` axis.
pub fn canonical_triangle(p: &TrianglePoint) -> [Vec3; 3] {
    let (x, y, z) = (p.x, p.y, p.z);
    let cx = (y * y + z * z - x * x) / (2.0 * z);
    let cy = (y * y - cx * cx).max(0.0).sqrt();
    [Vec3::zeros(), Vec3::new(z, 0.0, 0.0), Vec3::new(cx, cy, 0.0)]
}

/// Mirror through the plane `y = 0`, used for reflected placements.
pub fn reflect(p: &Vec3) -> Vec3 {
    Vec3::new(p.x, -p.y, p.z)
}

/// Rigid map from the canonical frame into model space:
/// `q = rotation * (reflected ? reflect(p) : p) + translation`.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub face: usize,
    /// Mesh vertices matched to canonical corners `A`, `B`, `C`.
    pub corners: [VertexId; 3],
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    pub reflected: bool,
}

impl Placement {
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        let q = if self.reflected { reflect(p) } else { *p };
        self.rotation * q + self.translation
    }

    /// Direction in model space of a canonical-frame direction.
    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        let q = if self.reflected { reflect(v) } else { *v };
        self.rotation * q
    }

    /// Canonical-frame position of a model-space point.
    pub fn local_point(&self, q: &Vec3) -> Vec3 {
        self.local_vector(&(q - self.translation))
    }

    /// Canonical-frame direction of a model-space direction.
    pub fn local_vector(&self, v: &Vec3) -> Vec3 {
        let q = self.rotation.transpose() * v;
        if self.reflected {
            reflect(&q)
        } else {
            q
        }
    }
}

/// Face corners ordered by the rank of their opposite edge. Ties keep face
/// order, so the correspondence is stable for each instance.
pub fn rank_corners(positions: [Vec3; 3]) -> [usize; 3] {
    let opposite = |i: usize| (positions[(i + 1) % 3] - positions[(i + 2) % 3]).norm();
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| opposite(a).total_cmp(&opposite(b)));
    order
}

/// Proper rotation and translation minimizing the squared distance from the
/// transformed `src` points to `dst`.
pub fn kabsch(src: &[Vec3], dst: &[Vec3]) -> (Matrix3<f64>, Vec3) {
    let n = src.len() as f64;
    let cs: Vec3 = src.iter().sum::<Vec3>() / n;
    let cd: Vec3 = dst.iter().sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - cs) * (d - cd).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let d = (v_t.transpose() * u.transpose()).determinant().signum();
    let r = v_t.transpose() * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * u.transpose();
    (r, cd - r * cs)
}

/// Places `canonical` (corners `A`, `B`, `C`) onto the face with the given
/// positions. A mirror is used when the rank order runs clockwise.
pub fn place_triangle(face: usize, ids: [VertexId; 3], positions: [Vec3; 3], canonical: &[Vec3; 3]) -> Placement {
    let order = rank_corners(positions);
    let reflected = !matches!(order, [0, 1, 2] | [1, 2, 0] | [2, 0, 1]);
    let src: Vec<Vec3> = canonical
        .iter()
        .map(|p| if reflected { reflect(p) } else { *p })
        .collect();
    let dst: Vec<Vec3> = order.iter().map(|&i| positions[i]).collect();
    let (rotation, translation) = kabsch(&src, &dst);
    Placement {
        face,
        corners: order.map(|i| ids[i]),
        rotation,
        translation,
        reflected,
    }
}

pub fn place_face(mesh: &HalfedgeMesh, f: usize, canonical: &[Vec3; 3]) -> Placement {
    place_triangle(f, mesh.face_vertices(f), mesh.face_positions(f), canonical)
}

/// Largest distance between a placed canonical corner and the mesh vertex it
/// stands for.
pub fn placement_residual(mesh: &HalfedgeMesh, placement: &Placement, canonical: &[Vec3; 3]) -> f64 {
    (0..3)
        .map(|k| (placement.apply(&canonical[k]) - mesh.position(placement.corners[k])).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::embed;
    use nalgebra::{Rotation3, Unit};
    use proptest::prelude::*;

    #[test]
    fn canonical_triangle_has_the_requested_edges() {
        let p = TrianglePoint::from_lengths(3.0, 4.0, 5.0);
        let t = canonical_triangle(&p);
        let q = embed(&t[0], &t[1], &t[2]).unwrap();
        assert!((q.x - 3.0).abs() < 1e-15 && q.y == 4.0 && q.z == 5.0);
        assert!((t[2] - Vec3::new(3.2, 2.4, 0.0)).norm() < 1e-15);
        // A is opposite the shortest edge
        assert!(((t[1] - t[2]).norm() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn kabsch_recovers_a_rotation() {
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(1.0, 2.0, -0.5)), 1.1);
        let t = Vec3::new(0.3, -2.0, 5.0);
        let src = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.2, 0.7, 0.0),
        ];
        let dst: Vec<Vec3> = src.iter().map(|p| r * p + t).collect();
        let (rr, tt) = kabsch(&src, &dst);
        assert!((rr - r.matrix()).norm() < 1e-12);
        assert!((tt - t).norm() < 1e-12);
    }

    #[test]
    fn residual_stays_within_the_class_error() {
        use crate::kmeans::{cluster, KMeansConfig};
        use crate::metric::embed_mesh;
        let m = crate::shapes::potato(2, 0.15, 3);
        for k in [1, 3, 7] {
            let st = cluster(
                &embed_mesh(&m),
                &KMeansConfig {
                    k,
                    ..Default::default()
                },
            )
            .unwrap();
            for f in m.face_ids() {
                let class = st.labels[f];
                let canon = canonical_triangle(&st.centroids[class]);
                let r = placement_residual(&m, &place_face(&m, f, &canon), &canon);
                assert!(r <= st.cluster_error_max(class).sqrt() + 1e-12, "k {k} face {f}: {r}");
            }
        }
    }

    proptest! {
        #[test]
        fn congruent_faces_are_placed_exactly(
            a in prop::array::uniform3(-2.0..2.0f64),
            b in prop::array::uniform3(-2.0..2.0f64),
            c in prop::array::uniform3(-2.0..2.0f64),
            flip in any::<bool>(),
        ) {
            let mut pos = [Vec3::from(a), Vec3::from(b), Vec3::from(c)];
            if flip {
                pos.swap(1, 2);
            }
            let area = (pos[1] - pos[0]).cross(&(pos[2] - pos[0])).norm();
            prop_assume!(area > 1e-2);
            let p = embed(&pos[0], &pos[1], &pos[2]).unwrap();
            let canon = canonical_triangle(&p);
            let pl = place_triangle(0, [0, 1, 2], pos, &canon);
            prop_assert!((pl.rotation.determinant() - 1.0).abs() < 1e-9);
            let order = rank_corners(pos);
            for k in 0..3 {
                prop_assert!((pl.apply(&canon[k]) - pos[order[k]]).norm() < 1e-9);
            }
            // the canonical +z side goes to the face's front side
            let n = (pos[1] - pos[0]).cross(&(pos[2] - pos[0]));
            prop_assert!(pl.apply_vector(&Vec3::z()).dot(&n) > 0.0);
            let v = Vec3::new(0.3, -0.2, 0.9);
            prop_assert!((pl.local_vector(&pl.apply_vector(&v)) - v).norm() < 1e-12);
        }
    }
}
