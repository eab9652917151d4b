use std::fs;

use isokit::driver::DecomposeConfig;
use isokit::fabrication::{FabConfig, Manifest};
use isokit::pipeline::{run, write_input, CurvedRunConfig, MergeConfig, ReportConfig, RunConfig, PARTS_DIR};
use isokit::shapes;
use isokit::simplify::SimplifyConfig;
use isokit::subdivision::CurvedConfig;

fn config(dir: &std::path::Path) -> RunConfig {
    let input = write_input(&shapes::potato(3, 0.15, 3), &dir.join("in.obj")).unwrap();
    RunConfig {
        input,
        format: None,
        weld_factor: None,
        simplify: SimplifyConfig {
            target_vertex_count: 80,
            ..Default::default()
        },
        decompose: DecomposeConfig {
            k: 4,
            threshold_pct: 3.0,
            max_iterations: 300,
            ..Default::default()
        },
        fab: Some(FabConfig::default()),
        curved: Some(CurvedRunConfig {
            enabled: true,
            classify: CurvedConfig {
                k: 6,
                ..Default::default()
            },
        }),
        merge: Some(MergeConfig { group_size: 6 }),
        output_dir: dir.join("out"),
        report: ReportConfig {
            record_time: false,
            ..Default::default()
        },
    }
}

#[test]
fn curved_run_exports_one_part_per_class() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let out = run(&cfg).unwrap();
    let faces = out.decomposition.mesh.n_faces();
    let curved = out.curved.as_ref().unwrap();
    assert_eq!(curved.patches, faces);
    assert_eq!(curved.k, 6);

    let man: Manifest =
        serde_json::from_str(&fs::read_to_string(cfg.output_dir.join(PARTS_DIR).join("manifest.json")).unwrap())
            .unwrap();
    assert!(man.classes.len() <= 6);
    assert_eq!(man.total_parts, faces);
    assert_eq!(2 * man.hinge.count, 3 * faces);
    let rows = fs::read_to_string(cfg.output_dir.join("curved.csv")).unwrap();
    assert_eq!(rows.lines().count(), faces + 1);
    assert!(cfg.output_dir.join("mesh_curved.obj").exists());

    let grouping = out.grouping.unwrap();
    assert_eq!(grouping.group_of.len(), faces);
    assert!(grouping.groups.iter().all(|g| g.faces.len() == 6));
}

#[test]
fn disabled_curved_section_gives_planar_parts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.curved.as_mut().unwrap().enabled = false;
    let out = run(&cfg).unwrap();
    assert!(out.curved.is_none());
    assert!(!cfg.output_dir.join("curved.csv").exists());
    assert_eq!(out.manifest.unwrap().total_parts, out.decomposition.mesh.n_faces());
}
