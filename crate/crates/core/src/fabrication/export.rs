//! STL files per canonical part plus a JSON placement manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::hinge::HingeConnector;
use super::patch::ThickenedPatch;
use super::solid::Solid;
use crate::error::{Error, Result};
use crate::mesh::{save_triangles, MeshFormat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformEntry {
    pub face: usize,
    /// Row-major rotation, applied after the optional mirror `y -> -y`.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub reflected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: usize,
    pub count: usize,
    pub stl: String,
    pub transforms: Vec<TransformEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HingeEntry {
    pub count: usize,
    pub stl_a: String,
    pub stl_b: String,
    pub rod_diameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub classes: Vec<ClassEntry>,
    pub hinge: HingeEntry,
    pub total_parts: usize,
}

pub fn write_solid_stl(solid: &Solid, path: &Path) -> Result<()> {
    save_triangles(&solid.positions, &solid.faces, path, MeshFormat::StlBinary)
}

/// Writes `class_<id>.stl` per patch, `hinge_a.stl`, `hinge_b.stl` and
/// `manifest.json`. `hinge_count` is the edge count of the model.
pub fn export_parts(
    patches: &[ThickenedPatch],
    connector: &HingeConnector,
    hinge_count: usize,
    rod_diameter: f64,
    out_dir: &Path,
) -> Result<Manifest> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut classes = Vec::with_capacity(patches.len());
    for p in patches {
        let stl = format!("class_{}.stl", p.class_id);
        write_solid_stl(&p.solid, &out_dir.join(&stl))?;
        let transforms = p
            .placements
            .iter()
            .map(|pl| {
                let r = &pl.rotation;
                TransformEntry {
                    face: pl.face,
                    rotation: std::array::from_fn(|i| r[(i / 3, i % 3)]),
                    translation: [pl.translation.x, pl.translation.y, pl.translation.z],
                    reflected: pl.reflected,
                }
            })
            .collect();
        classes.push(ClassEntry {
            id: p.class_id,
            count: p.count(),
            stl,
            transforms,
        });
    }
    write_solid_stl(&connector.half_a, &out_dir.join("hinge_a.stl"))?;
    write_solid_stl(&connector.half_b, &out_dir.join("hinge_b.stl"))?;
    let manifest = Manifest {
        total_parts: classes.iter().map(|c| c.count).sum(),
        classes,
        hinge: HingeEntry {
            count: hinge_count,
            stl_a: "hinge_a.stl".into(),
            stl_b: "hinge_b.stl".into(),
            rod_diameter,
        },
    };
    let path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabrication::{make_hinge, thicken_class, FabConfig, Placement};
    use crate::geometry::Vec3;
    use crate::kmeans::{cluster, KMeansConfig};
    use crate::metric::embed_mesh;
    use crate::shapes;
    use nalgebra::Matrix3;

    #[test]
    fn manifest_lists_every_face_and_edge() {
        let m = shapes::potato(1, 0.1, 5);
        let st = cluster(
            &embed_mesh(&m),
            &KMeansConfig {
                k: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let cfg = FabConfig::default();
        let patches: Vec<_> = (0..2).map(|c| thicken_class(&m, &st, c, &cfg).unwrap()).collect();
        let hinge = make_hinge(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let man = export_parts(&patches, &hinge, m.n_edges(), cfg.rod_diameter, dir.path()).unwrap();
        assert_eq!(man.total_parts, m.n_faces());
        assert_eq!(man.hinge.count, 3 * m.n_faces() / 2);
        for name in [
            "class_0.stl",
            "class_1.stl",
            "hinge_a.stl",
            "hinge_b.stl",
            "manifest.json",
        ] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        let back: Manifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, man);

        // stored transforms reproduce the placements
        for (c, p) in man.classes.iter().zip(&patches) {
            for (t, pl) in c.transforms.iter().zip(&p.placements) {
                let rebuilt = Placement {
                    face: t.face,
                    corners: pl.corners,
                    rotation: Matrix3::from_row_slice(&t.rotation),
                    translation: Vec3::from(t.translation),
                    reflected: t.reflected,
                };
                let q = Vec3::new(0.1, 0.2, 0.3);
                assert!((rebuilt.apply(&q) - pl.apply(&q)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn export_is_byte_identical() {
        let m = shapes::icosahedron();
        let st = cluster(
            &embed_mesh(&m),
            &KMeansConfig {
                k: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let cfg = FabConfig {
            thickness: 0.1,
            ..Default::default()
        };
        let hinge = make_hinge(&cfg).unwrap();
        let run = || {
            let p = thicken_class(&m, &st, 0, &cfg).unwrap();
            let dir = tempfile::tempdir().unwrap();
            export_parts(&[p], &hinge, 30, cfg.rod_diameter, dir.path()).unwrap();
            ["class_0.stl", "hinge_a.stl", "manifest.json"].map(|n| fs::read(dir.path().join(n)).unwrap())
        };
        assert_eq!(run(), run());
    }
}
