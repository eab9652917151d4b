//! The outer loop: cluster, test the threshold, remesh, repeat.

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity::hausdorff;
use crate::kmeans::{self, KMeansConfig};
use crate::mesh::HalfedgeMesh;
use crate::metric::{embed_mesh, ClusterState, ErrorSummary, TrianglePoint};
use crate::remesh::{self, Clustered, PassReport, RemeshConfig, TranslateReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecomposeConfig {
    pub k: usize,
    /// Threshold T on every triangle's error, in percent of the mean edge.
    pub threshold_pct: f64,
    pub max_iterations: usize,
    /// Re-cluster from the previous centroids. When off, every iteration
    /// re-initializes K-means with the seed offset by the iteration number.
    pub warm_start: bool,
    pub kmeans: KMeansConfig,
    pub remesh: RemeshConfig,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig {
            k: 7,
            threshold_pct: 1.5,
            max_iterations: 10_000,
            warm_start: false,
            kmeans: KMeansConfig::default(),
            remesh: RemeshConfig::default(),
        }
    }
}

impl DecomposeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_pct > 0.0) {
            return Err(Error::Config(format!(
                "threshold must be positive, got {}",
                self.threshold_pct
            )));
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        self.remesh.validate()
    }

    fn kmeans_config(&self) -> KMeansConfig {
        KMeansConfig {
            k: self.k,
            ..self.kmeans
        }
    }
}

/// One row of the iteration trace. Errors are in length units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub error_max: f64,
    pub error_mean: f64,
    pub triangle_count: usize,
    pub below_threshold_count: usize,
}

/// Hooks into the loop, used for diagnostics and invariant checks.
pub trait Observer {
    /// Energies after every centroid update of one K-means solve.
    fn kmeans(&mut self, _iteration: usize, _energy_trace: &[f64]) {}
    /// A flip or collapse pass finished.
    fn pass(&mut self, _iteration: usize, _kind: PassKind, _report: &PassReport) {}
    fn translate(&mut self, _iteration: usize, _report: &TranslateReport) {}
    /// Called after clustering, before the threshold test.
    fn iteration(&mut self, _record: &IterationRecord, _mesh: &HalfedgeMesh, _state: &ClusterState<TrianglePoint>) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PassKind {
    Collapse,
    Flip,
}

/// Observer that ignores everything.
pub struct Silent;

impl Observer for Silent {}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub mesh: HalfedgeMesh,
    pub state: ClusterState<TrianglePoint>,
    pub points: Vec<TrianglePoint>,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
    pub mean_edge: f64,
    /// Threshold in length units for the final mesh.
    pub threshold_abs: f64,
}

impl Decomposition {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn errors(&self) -> ErrorSummary {
        self.state.errors(self.mean_edge)
    }

    /// Per-triangle error in length units.
    pub fn error_abs(&self, f: usize) -> f64 {
        self.state.error_abs(f)
    }
}

pub fn decompose(mesh_s: &HalfedgeMesh, cfg: &DecomposeConfig) -> Result<Decomposition> {
    decompose_observed(mesh_s, cfg, &mut Silent)
}

pub fn decompose_observed(
    mesh_s: &HalfedgeMesh,
    cfg: &DecomposeConfig,
    observer: &mut dyn Observer,
) -> Result<Decomposition> {
    cfg.validate()?;
    let kcfg = cfg.kmeans_config();
    kcfg.validate(mesh_s.n_faces())?;
    let mut mesh = mesh_s.clone();
    if !mesh.is_compact() {
        mesh.compact();
    }
    let mut trace = Vec::new();
    let mut centroids: Option<Vec<TrianglePoint>> = None;
    let mut converged = false;
    let mut last: Option<Clustered> = None;

    for iteration in 1..=cfg.max_iterations {
        let points = embed_mesh(&mesh);
        let run = match (&centroids, cfg.warm_start) {
            (Some(c), true) => kmeans::lloyd(&points, c.clone(), kcfg.max_kmeans_iters),
            _ => {
                let seeded = KMeansConfig {
                    seed: kcfg.seed.wrapping_add(iteration as u64),
                    ..kcfg
                };
                kmeans::cluster_traced(&points, &seeded)?
            }
        };
        observer.kmeans(iteration, &run.energy_trace);
        let state = run.state;
        let mean_edge = mesh.mean_edge_length();
        let t_abs = cfg.threshold_pct / 100.0 * mean_edge;
        let below = state.per_triangle_distance.iter().filter(|d| d.sqrt() <= t_abs).count();
        let summary = state.errors(mean_edge);
        let record = IterationRecord {
            iteration,
            energy: state.energy,
            error_max: summary.max_abs,
            error_mean: summary.mean_abs,
            triangle_count: points.len(),
            below_threshold_count: below,
        };
        observer.iteration(&record, &mesh, &state);
        trace.push(record);
        if iteration == 1 || iteration % 100 == 0 {
            debug!(
                "iteration {iteration}: energy {:.6e}, max error {:.3}% (T {:.3}%), {below}/{} below",
                state.energy,
                summary.max_pct,
                cfg.threshold_pct,
                points.len()
            );
        }
        centroids = Some(state.centroids.clone());
        let mut c = Clustered { points, state };
        if below == c.points.len() {
            converged = true;
            last = Some(c);
            break;
        }
        if iteration == cfg.max_iterations {
            last = Some(c);
            break;
        }

        if iteration == 1 {
            remesh::optimize_valence(&mut mesh, cfg.remesh.flip_valence_target);
            c = Clustered::assign(&mesh, c.state.centroids);
            if cfg.remesh.collapse_enabled {
                let r = remesh::improve_by_collapse(&mut mesh, &mut c);
                observer.pass(iteration, PassKind::Collapse, &r);
            }
            let r = remesh::improve_by_flip(&mut mesh, &mut c);
            observer.pass(iteration, PassKind::Flip, &r);
        }
        let mut r = TranslateReport::default();
        for _ in 0..cfg.remesh.translation_steps {
            r = remesh::translate_vertices(&mut mesh, &mut c, &cfg.remesh);
        }
        observer.translate(iteration, &r);
    }

    let c = last.expect("at least one iteration ran");
    let mean_edge = mesh.mean_edge_length();
    info!(
        "{} after {} iterations (max error {:.4}% of mean edge)",
        if converged { "converged" } else { "not converged" },
        trace.len(),
        c.state.errors(mean_edge).max_pct
    );
    Ok(Decomposition {
        mesh,
        state: c.state,
        points: c.points,
        trace,
        converged,
        mean_edge,
        threshold_abs: cfg.threshold_pct / 100.0 * mean_edge,
    })
}

/// One row of quantitative results for a finished run. Distances are in
/// percent of the bounding-box diagonal, errors in length units and percent
/// of the final mean edge length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub faces_i: usize,
    pub faces_s: usize,
    pub faces_f: usize,
    pub verts_i: usize,
    pub verts_s: usize,
    pub verts_f: usize,
    pub k: usize,
    #[serde(rename = "T_abs")]
    pub t_abs: f64,
    #[serde(rename = "T_pct")]
    pub t_pct: f64,
    pub mean_edge: f64,
    pub err_mean_abs: f64,
    pub err_mean_pct: f64,
    #[serde(rename = "dH_is_mean")]
    pub dh_is_mean: f64,
    #[serde(rename = "dH_is_max")]
    pub dh_is_max: f64,
    #[serde(rename = "dH_sf_mean")]
    pub dh_sf_mean: f64,
    #[serde(rename = "dH_sf_max")]
    pub dh_sf_max: f64,
    #[serde(rename = "dH_if_mean")]
    pub dh_if_mean: f64,
    #[serde(rename = "dH_if_max")]
    pub dh_if_max: f64,
    pub time_s: f64,
    pub iterations: usize,
}

/// Builds the stats row for `d`, the decomposition of `mesh_s`, which was
/// simplified from `mesh_i`.
pub fn report_stats(
    d: &Decomposition,
    mesh_i: &HalfedgeMesh,
    mesh_s: &HalfedgeMesh,
    cfg: &DecomposeConfig,
    time_s: f64,
    samples_per_triangle: f64,
) -> StatsRow {
    let e = d.errors();
    let is = hausdorff(mesh_i, mesh_s, samples_per_triangle);
    let sf = hausdorff(mesh_s, &d.mesh, samples_per_triangle);
    let if_ = hausdorff(mesh_i, &d.mesh, samples_per_triangle);
    StatsRow {
        faces_i: mesh_i.n_faces(),
        faces_s: mesh_s.n_faces(),
        faces_f: d.mesh.n_faces(),
        verts_i: mesh_i.n_vertices(),
        verts_s: mesh_s.n_vertices(),
        verts_f: d.mesh.n_vertices(),
        k: cfg.k,
        t_abs: d.threshold_abs,
        t_pct: cfg.threshold_pct,
        mean_edge: d.mean_edge,
        err_mean_abs: e.mean_abs,
        err_mean_pct: e.mean_abs / d.mean_edge * 100.0,
        dh_is_mean: is.mean_pct_bb,
        dh_is_max: is.max_pct_bb,
        dh_sf_mean: sf.mean_pct_bb,
        dh_sf_max: sf.max_pct_bb,
        dh_if_mean: if_.mean_pct_bb,
        dh_if_max: if_.max_pct_bb,
        time_s,
        iterations: d.iterations(),
    }
}
