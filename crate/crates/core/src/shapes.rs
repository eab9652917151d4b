//! Deterministic synthetic closed meshes (acceptance corpus and test fixtures).

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::HalfedgeMesh;

/// Largest allowed radial perturbation of a potato, relative to the radius.
pub const MAX_POTATO_AMPLITUDE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TestShape {
    Icosphere { subdivisions: u32 },
    Ellipsoid { subdivisions: u32, radii: [f64; 3] },
    Potato { subdivisions: u32, amplitude: f64 },
}

/// Builds one of the corpus shapes. `seed` only affects the potato.
pub fn gen_testshape(shape: TestShape, seed: u64) -> Result<HalfedgeMesh> {
    match shape {
        TestShape::Icosphere { subdivisions } => {
            check_subdiv(subdivisions)?;
            Ok(icosphere(subdivisions))
        }
        TestShape::Ellipsoid { subdivisions, radii } => {
            check_subdiv(subdivisions)?;
            if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
                return Err(Error::Config(format!(
                    "ellipsoid radii must be positive, got {radii:?}"
                )));
            }
            let mut m = icosphere(subdivisions);
            for v in 0..m.vertex_capacity() {
                let p = m.position(v);
                m.set_position(v, Vec3::new(p.x * radii[0], p.y * radii[1], p.z * radii[2]));
            }
            Ok(m)
        }
        TestShape::Potato {
            subdivisions,
            amplitude,
        } => {
            check_subdiv(subdivisions)?;
            if !(0.0..=MAX_POTATO_AMPLITUDE).contains(&amplitude) {
                return Err(Error::Config(format!(
                    "potato amplitude must lie in [0, {MAX_POTATO_AMPLITUDE}], got {amplitude}"
                )));
            }
            Ok(potato(subdivisions, amplitude, seed))
        }
    }
}

fn check_subdiv(s: u32) -> Result<()> {
    if s > 7 {
        return Err(Error::Config(format!("icosphere subdivision {s} is too large (max 7)")));
    }
    Ok(())
}

fn build(positions: Vec<Vec3>, faces: Vec<[usize; 3]>) -> HalfedgeMesh {
    HalfedgeMesh::from_triangles(positions, faces).expect("generated shape is a closed manifold")
}

pub fn tetrahedron() -> HalfedgeMesh {
    // regular, unit edge length
    let s = 1.0 / (2.0 * 2f64.sqrt());
    let positions = vec![
        Vec3::new(s, s, s),
        Vec3::new(s, -s, -s),
        Vec3::new(-s, s, -s),
        Vec3::new(-s, -s, s),
    ];
    let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    build(positions, faces)
}

pub fn octahedron() -> HalfedgeMesh {
    let positions = vec![
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(-1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, -1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(0.0, 0.0, -1.0),
    ];
    let faces = vec![
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    build(positions, faces)
}

/// Unit-circumradius icosahedron centered at the origin.
pub fn icosahedron() -> HalfedgeMesh {
    let (positions, faces) = icosahedron_raw();
    build(positions, faces)
}

fn icosahedron_raw() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let positions = raw.iter().map(|p| Vec3::new(p[0], p[1], p[2]).normalize()).collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (positions, faces)
}

/// Unit sphere from `subdivisions` rounds of 1-to-4 midpoint splitting of the
/// icosahedron: `10 * 4^s + 2` vertices, `20 * 4^s` faces.
pub fn icosphere(subdivisions: u32) -> HalfedgeMesh {
    let (mut positions, mut faces) = icosahedron_raw();
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, positions: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                positions.push(((positions[a] + positions[b]) * 0.5).normalize());
                positions.len() - 1
            })
        };
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut positions);
            let bc = midpoint(f[1], f[2], &mut positions);
            let ca = midpoint(f[2], f[0], &mut positions);
            next.push([f[0], ab, ca]);
            next.push([ab, f[1], bc]);
            next.push([ca, bc, f[2]]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    build(positions, faces)
}

/// Icosphere with a smooth low-frequency radial displacement
/// `r(u) = 1 + amplitude * sum_j c_j P2(u . d_j)`, `sum |c_j| = 1`.
pub fn potato(subdivisions: u32, amplitude: f64, seed: u64) -> HalfedgeMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs = [Vec3::zeros(); 3];
    let mut coeffs = [0.0f64; 3];
    for j in 0..3 {
        loop {
            let d = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let n = d.norm();
            if n > 0.1 && n <= 1.0 {
                dirs[j] = d / n;
                break;
            }
        }
        coeffs[j] = rng.gen_range(-1.0..1.0);
    }
    let norm: f64 = coeffs.iter().map(|c| c.abs()).sum();
    for c in coeffs.iter_mut() {
        *c /= norm.max(1e-12);
    }
    let mut m = icosphere(subdivisions);
    if amplitude == 0.0 {
        return m;
    }
    for v in 0..m.vertex_capacity() {
        let u = m.position(v);
        let mut disp = 0.0;
        for j in 0..3 {
            let t = u.dot(&dirs[j]);
            disp += coeffs[j] * 0.5 * (3.0 * t * t - 1.0);
        }
        m.set_position(v, u * (1.0 + amplitude * disp));
    }
    m
}

/// Axis-aligned unit cube `[0,1]^3` with each face split into an
/// `n x n` grid, every cell cut along the same diagonal.
pub fn grid_cube(n: usize) -> HalfedgeMesh {
    assert!(n >= 1);
    let mut positions: Vec<Vec3> = Vec::new();
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut faces = Vec::new();
    let scale = n as i64;
    let mut vid = |g: [i64; 3], positions: &mut Vec<Vec3>| -> usize {
        *index.entry(g).or_insert_with(|| {
            positions.push(Vec3::new(
                g[0] as f64 / scale as f64,
                g[1] as f64 / scale as f64,
                g[2] as f64 / scale as f64,
            ));
            positions.len() - 1
        })
    };
    // (normal axis, side, u axis, v axis) with u x v pointing outward
    let sides: [(usize, i64, usize, usize); 6] = [
        (0, 1, 1, 2),
        (0, 0, 2, 1),
        (1, 1, 2, 0),
        (1, 0, 0, 2),
        (2, 1, 0, 1),
        (2, 0, 1, 0),
    ];
    for &(axis, side, ua, va) in &sides {
        for i in 0..scale {
            for j in 0..scale {
                let corner = |di: i64, dj: i64| {
                    let mut g = [0i64; 3];
                    g[axis] = side * scale;
                    g[ua] = i + di;
                    g[va] = j + dj;
                    g
                };
                let p00 = corner(0, 0);
                let p10 = corner(1, 0);
                let p11 = corner(1, 1);
                let p01 = corner(0, 1);
                let a = vid(p00, &mut positions);
                let b = vid(p10, &mut positions);
                let c = vid(p11, &mut positions);
                let d = vid(p01, &mut positions);
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            }
        }
    }
    build(positions, faces)
}

/// Unit cube, 12 triangles.
pub fn cube() -> HalfedgeMesh {
    grid_cube(1)
}

/// Closed square pyramid with apex at `(0, 0, height)` over the square
/// `[-1,1]^2` at `z = 0`.
pub fn square_pyramid(height: f64) -> HalfedgeMesh {
    let positions = vec![
        Vec3::new(-1.0, -1.0, 0.0),
        Vec3::new(1.0, -1.0, 0.0),
        Vec3::new(1.0, 1.0, 0.0),
        Vec3::new(-1.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, height),
    ];
    let faces = vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4], [0, 2, 1], [0, 3, 2]];
    build(positions, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        let m = icosphere(3);
        assert_eq!(m.n_vertices(), 642);
        assert_eq!(m.n_faces(), 1280);
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn potato_with_zero_amplitude_is_icosphere() {
        let a = potato(2, 0.0, 17);
        let b = icosphere(2);
        assert_eq!(a, b);
    }

    #[test]
    fn potato_is_deterministic_and_bounded() {
        let a = potato(3, 0.15, 5);
        let b = potato(3, 0.15, 5);
        assert_eq!(a, b);
        for v in a.vertex_ids() {
            let r = a.position(v).norm();
            assert!((0.85 - 1e-12..=1.15 + 1e-12).contains(&r), "radius {r}");
        }
        let c = potato(3, 0.15, 6);
        assert_ne!(a, c);
    }

    #[test]
    fn grid_cube_is_closed() {
        let m = grid_cube(4);
        m.audit().unwrap();
        assert_eq!(m.euler_characteristic(), 2);
        assert!(m.signed_volume() > 0.99 && m.signed_volume() < 1.01);
    }

    #[test]
    fn fixtures_are_outward() {
        for m in [tetrahedron(), octahedron(), icosahedron(), cube(), square_pyramid(1.0)] {
            m.audit().unwrap();
            assert!(m.signed_volume() > 0.0);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(gen_testshape(
            TestShape::Potato {
                subdivisions: 2,
                amplitude: 0.3
            },
            0
        )
        .is_err());
        assert!(gen_testshape(
            TestShape::Ellipsoid {
                subdivisions: 2,
                radii: [1.0, -1.0, 1.0]
            },
            0
        )
        .is_err());
    }
}
