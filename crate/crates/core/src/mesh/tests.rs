use std::path::Path;

use super::*;
use crate::shapes;

fn write(dir: &Path, name: &str, body: &[u8]) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn tetrahedron_obj_loads_with_twelve_halfedges() {
    let dir = tempfile::tempdir().unwrap();
    let obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 1 4 3\nf 2 3 4\n";
    let p = write(dir.path(), "tet.obj", obj.as_bytes());
    let m = load_mesh(&p, None, None).unwrap();
    assert_eq!(m.n_vertices(), 4);
    assert_eq!(m.n_faces(), 4);
    assert_eq!(m.halfedge_capacity(), 12);
    assert_eq!(m.euler_characteristic(), 2);
    m.audit().unwrap();
}

#[test]
fn icosahedron_stl_welds_to_twelve_vertices() {
    let dir = tempfile::tempdir().unwrap();
    let ico = shapes::icosahedron();
    let p = dir.path().join("ico.stl");
    save_mesh(&ico, &p, MeshFormat::StlBinary).unwrap();
    assert_eq!(std::fs::metadata(&p).unwrap().len(), 84 + 50 * 20);
    let m = load_mesh(&p, None, None).unwrap();
    assert_eq!(m.n_vertices(), 12);
    assert_eq!(m.n_faces(), 20);
    for v in m.vertex_ids() {
        assert_eq!(m.valence(v), 5);
    }
}

#[test]
fn open_boundary_is_a_topology_error() {
    let dir = tempfile::tempdir().unwrap();
    let obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 1 4 3\n";
    let p = write(dir.path(), "open.obj", obj.as_bytes());
    match load_mesh(&p, None, None) {
        Err(Error::Topology(_)) => {}
        other => panic!("expected topology error, got {other:?}"),
    }
}

#[test]
fn inconsistent_orientation_is_a_topology_error() {
    let (pos, mut faces) = shapes::tetrahedron().to_triangles();
    faces[0].swap(0, 1);
    assert!(matches!(
        HalfedgeMesh::from_triangles(pos, faces),
        Err(Error::Topology(_))
    ));
}

#[test]
fn non_manifold_vertex_is_rejected() {
    // two tetrahedra sharing one vertex
    let (mut pos, mut faces) = shapes::tetrahedron().to_triangles();
    let shift = Vec3::new(3.0, 0.0, 0.0);
    let base = pos.len();
    let more: Vec<Vec3> = pos.iter().skip(1).map(|p| p + shift).collect();
    pos.extend(more);
    let extra: Vec<[usize; 3]> = faces
        .iter()
        .map(|f| {
            let m = |v: usize| if v == 0 { 0 } else { base + v - 1 };
            [m(f[0]), m(f[1]), m(f[2])]
        })
        .collect();
    faces.extend(extra);
    assert!(matches!(
        HalfedgeMesh::from_triangles(pos, faces),
        Err(Error::Topology(_))
    ));
}

#[test]
fn malformed_obj_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.obj", b"v 0 0 zero\nf 1 2 3\n");
    assert!(matches!(load_mesh(&p, None, None), Err(Error::Parse { .. })));
    let q = write(
        dir.path(),
        "quad.obj",
        b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n",
    );
    assert!(matches!(load_mesh(&q, None, None), Err(Error::Parse { .. })));
}

#[test]
fn missing_file_is_io_error() {
    let r = load_mesh(Path::new("/nonexistent/really/not/here.obj"), None, None);
    assert!(matches!(r, Err(Error::Io { .. })));
}

#[test]
fn tetrahedron_obj_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let t = shapes::tetrahedron();
    let p = dir.path().join("t.obj");
    save_mesh(&t, &p, MeshFormat::Obj).unwrap();
    let back = load_mesh(&p, None, None).unwrap();
    assert_eq!(back.n_vertices(), 4);
    assert_eq!(back.n_faces(), 4);
    for v in 0..4 {
        assert!((back.position(v) - t.position(v)).norm() < 1e-12);
    }
}

#[test]
fn cube_ascii_stl_has_twelve_facets() {
    let dir = tempfile::tempdir().unwrap();
    let c = shapes::cube();
    let p = dir.path().join("c.stl");
    save_mesh(&c, &p, MeshFormat::StlAscii).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.matches("endfacet").count(), 12);
    let back = load_mesh(&p, Some(MeshFormat::Stl), None).unwrap();
    assert_eq!(back.n_vertices(), 8);
    assert_eq!(back.n_faces(), 12);
}

#[test]
fn ascii_ply_loads() {
    let dir = tempfile::tempdir().unwrap();
    let ply =
        "ply\nformat ascii 1.0\ncomment tet\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n\
               element face 4\nproperty list uchar int vertex_indices\nend_header\n\
               0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";
    let p = write(dir.path(), "t.ply", ply.as_bytes());
    let m = load_mesh(&p, None, None).unwrap();
    assert_eq!(m.n_faces(), 4);
    assert!(m.signed_volume() > 0.0);
}

#[test]
fn binary_ply_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "b.ply",
        b"ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n",
    );
    assert!(matches!(load_mesh(&p, None, None), Err(Error::Parse { .. })));
}

#[test]
fn pyramid_apex_normal_points_up() {
    let m = shapes::square_pyramid(1.0);
    let n = m.vertex_normal(4).unwrap();
    assert!((n - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
}

#[test]
fn icosahedron_normals_are_radial() {
    let m = shapes::icosahedron();
    for v in m.vertex_ids() {
        let n = m.vertex_normal(v).unwrap();
        let p = m.position(v).normalize();
        assert!((n - p).norm() < 1e-12);
    }
}

#[test]
fn planar_fan_vertex_takes_plane_normal() {
    let m = shapes::grid_cube(3);
    // interior vertex of the +z face
    let v = m
        .vertex_ids()
        .find(|&v| {
            let p = m.position(v);
            (p.z - 1.0).abs() < 1e-12 && (p.x - 1.0 / 3.0).abs() < 1e-12 && (p.y - 1.0 / 3.0).abs() < 1e-12
        })
        .unwrap();
    let n = m.vertex_normal(v).unwrap();
    assert!((n - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
}

#[test]
fn metric_queries() {
    let ico = shapes::icosahedron();
    assert!(ico.vertex_ids().all(|v| ico.valence(v) == 5));
    let tet = shapes::tetrahedron();
    assert!((tet.mean_edge_length() - 1.0).abs() < 1e-12);
    let cube = shapes::cube();
    assert!((cube.bounding_box().diagonal - 3f64.sqrt()).abs() < 1e-12);
}

#[test]
fn area_weighted_normals_cancel_on_closed_meshes() {
    for m in [shapes::icosphere(2), shapes::potato(3, 0.15, 3), shapes::grid_cube(3)] {
        let mut s = Vec3::zeros();
        let mut area = 0.0;
        for f in m.face_ids() {
            let [a, b, c] = m.face_positions(f);
            s += crate::geometry::triangle_cross(&a, &b, &c) * 0.5;
            area += m.face_area(f);
        }
        assert!(s.norm() <= 1e-9 * area, "{}", s.norm());
    }
}

#[test]
fn flip_and_collapse_keep_invariants() {
    let mut m = shapes::icosphere(2);
    let n_edges = m.n_edges();
    let mut flips = 0;
    for h in m.edge_ids().collect::<Vec<_>>().into_iter().step_by(7) {
        if m.is_flip_topologically_legal(h) {
            m.flip_edge(h);
            m.audit().unwrap();
            flips += 1;
        }
    }
    assert!(flips > 5);
    assert_eq!(m.n_edges(), n_edges);

    let nv = m.n_vertices();
    let mut collapses = 0;
    for h in (0..m.halfedge_capacity()).step_by(13) {
        if !m.is_face_alive(h / 3) || !m.is_collapse_topologically_legal(h) {
            continue;
        }
        let mid = (m.position(m.origin(h)) + m.position(m.target(h))) * 0.5;
        m.collapse_edge(h, mid);
        m.audit().unwrap();
        collapses += 1;
    }
    assert!(collapses > 5);
    assert_eq!(m.n_vertices(), nv - collapses);
    assert_eq!(m.euler_characteristic(), 2);
    let map = m.compact();
    assert!(m.is_compact());
    m.audit().unwrap();
    assert_eq!(map.faces.iter().filter(|f| f.is_some()).count(), m.n_faces());
}

#[test]
fn flip_matches_predicted_faces() {
    let mut m = shapes::octahedron();
    let h = m.edge_ids().next().unwrap();
    assert!(m.is_flip_topologically_legal(h));
    let predicted = m.flipped_faces(h);
    let (f0, f1) = (h / 3, m.twin(h) / 3);
    m.flip_edge(h);
    let rot = |t: [usize; 3]| {
        let k = (0..3).min_by_key(|&i| t[i]).unwrap();
        [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
    };
    assert_eq!(rot(m.face_vertices(f0)), rot(predicted[0]));
    assert_eq!(rot(m.face_vertices(f1)), rot(predicted[1]));
}

#[test]
fn tetrahedron_refuses_collapse_and_flip() {
    let m = shapes::tetrahedron();
    for h in m.edge_ids() {
        assert!(!m.is_collapse_topologically_legal(h));
        assert!(!m.is_flip_topologically_legal(h));
    }
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn obj_round_trip_preserves_geometry(seed in 0u64..1000, subdiv in 0u32..3) {
            let m = shapes::potato(subdiv, 0.1, seed);
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("m.obj");
            save_mesh(&m, &p, MeshFormat::Obj).unwrap();
            let back = load_mesh(&p, None, None).unwrap();
            prop_assert_eq!(back.n_vertices(), m.n_vertices());
            prop_assert_eq!(back.n_faces(), m.n_faces());
            for v in m.vertex_ids() {
                let a = m.position(v);
                prop_assert!((back.position(v) - a).norm() <= 1e-6 * a.norm().max(1.0));
            }

            let q = dir.path().join("m.stl");
            save_mesh(&m, &q, MeshFormat::StlBinary).unwrap();
            let back = load_mesh(&q, None, None).unwrap();
            prop_assert_eq!(back.n_vertices(), m.n_vertices());
            prop_assert_eq!(back.n_faces(), m.n_faces());
        }
    }
}
