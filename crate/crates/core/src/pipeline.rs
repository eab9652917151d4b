//! End-to-end runs from a config file: simplify, decompose, report and
//! optionally classify curved patches, merge triangles and export parts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use crate::driver::{decompose, report_stats, DecomposeConfig, Decomposition, IterationRecord, StatsRow};
use crate::error::{Error, Result};
use crate::fabrication::{
    cut_holes_curved, cut_holes_planar, export_parts, make_hinge, thicken_class, thicken_curved_class, FabConfig,
    Manifest,
};
use crate::fidelity::DEFAULT_SAMPLES_PER_TRIANGLE;
use crate::merge::{merge_patches, Grouping};
use crate::mesh::{load_mesh, save_mesh, HalfedgeMesh, MeshFormat};
use crate::simplify::{simplify, SimplifyConfig};
use crate::subdivision::{classify_curved, curved_patches, loop_subdivide, CurvedClassification, CurvedConfig};

pub const STATS_CSV: &str = "stats.csv";
pub const STATS_JSON: &str = "stats.json";
pub const TRACE_CSV: &str = "trace.csv";
pub const HISTOGRAM_CSV: &str = "histogram.csv";
pub const PARTS_DIR: &str = "parts";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: PathBuf,
    /// Input format; guessed from the extension when absent.
    #[serde(default)]
    pub format: Option<MeshFormat>,
    /// Weld radius as a fraction of the bounding-box diagonal.
    #[serde(default)]
    pub weld_factor: Option<f64>,
    #[serde(default)]
    pub simplify: SimplifyConfig,
    #[serde(default)]
    pub decompose: DecomposeConfig,
    /// Part export; curved parts when `curved.enabled`, planar otherwise.
    #[serde(default)]
    pub fab: Option<FabConfig>,
    #[serde(default)]
    pub curved: Option<CurvedRunConfig>,
    #[serde(default)]
    pub merge: Option<MergeConfig>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub report: ReportConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvedRunConfig {
    #[serde(default = "enabled")]
    pub enabled: bool,
    #[serde(flatten)]
    pub classify: CurvedConfig,
}

fn enabled() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeConfig {
    pub group_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Formats of the stats row.
    pub formats: Vec<ReportFormat>,
    /// Format of the written `mesh_s` and `mesh_f`.
    pub mesh_format: MeshFormat,
    /// Write the wall time; off gives byte-identical stats across runs.
    pub record_time: bool,
    pub hausdorff_samples: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            formats: vec![ReportFormat::Csv, ReportFormat::Json],
            mesh_format: MeshFormat::Obj,
            record_time: true,
            hausdorff_samples: DEFAULT_SAMPLES_PER_TRIANGLE,
        }
    }
}

impl RunConfig {
    /// Reads JSON (`.json`) or TOML (anything else).
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg: RunConfig = if is_json {
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| {
                let line = e.span().map_or(0, |s| text[..s.start].lines().count().max(1));
                Error::parse(path, line, e.message().to_string())
            })?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{name}: {m}")),
                other => other,
            })
        };
        field("simplify", self.simplify.validate())?;
        field("decompose", self.decompose.validate())?;
        if let Some(fab) = &self.fab {
            field("fab", fab.validate())?;
        }
        if let Some(c) = self.curved.filter(|c| c.enabled) {
            field("curved", c.classify.validate())?;
        }
        if let Some(m) = &self.merge {
            if !crate::merge::GROUP_SIZES.contains(&m.group_size) {
                return Err(Error::Config(format!(
                    "merge.group_size must be one of {:?}, got {}",
                    crate::merge::GROUP_SIZES,
                    m.group_size
                )));
            }
        }
        if !(self.report.hausdorff_samples >= 1.0) {
            return Err(Error::Config(format!(
                "report.hausdorff_samples must be at least 1, got {}",
                self.report.hausdorff_samples
            )));
        }
        if self.report.mesh_format == MeshFormat::Ply {
            return Err(Error::Config("report.mesh_format: ply is read-only".into()));
        }
        Ok(())
    }

    fn curved(&self) -> Option<CurvedConfig> {
        self.curved.filter(|c| c.enabled).map(|c| c.classify)
    }
}

/// Per-triangle error of the final decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub triangle: usize,
    pub class: usize,
    pub error_abs: f64,
    pub error_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct TraceRow {
    iteration: usize,
    energy: f64,
    error_max: f64,
    error_mean: f64,
    below_threshold_count: usize,
}

impl From<&IterationRecord> for TraceRow {
    fn from(r: &IterationRecord) -> Self {
        TraceRow {
            iteration: r.iteration,
            energy: r.energy,
            error_max: r.error_max,
            error_mean: r.error_mean,
            below_threshold_count: r.below_threshold_count,
        }
    }
}

/// Per-patch result of the curved classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvedRow {
    pub patch: usize,
    pub class: usize,
    pub w: f64,
    pub error_abs: f64,
    pub error_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvedSummary {
    pub patches: usize,
    pub k: usize,
    pub threshold_abs: f64,
    pub threshold_pct: f64,
    pub error_max_abs: f64,
    pub error_max_pct: f64,
    pub error_mean_pct: f64,
    pub within_threshold: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub converged: bool,
    pub stats: StatsRow,
    pub decomposition: Decomposition,
    pub curved: Option<CurvedSummary>,
    pub grouping: Option<Grouping>,
    pub manifest: Option<Manifest>,
}

impl RunOutcome {
    /// 0 on convergence, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.converged {
            0
        } else {
            2
        }
    }
}

pub fn histogram(d: &Decomposition) -> Vec<HistogramRow> {
    d.mesh
        .face_ids()
        .map(|f| {
            let e = d.error_abs(f);
            HistogramRow {
                triangle: f,
                class: d.state.labels[f],
                error_abs: e,
                error_pct: e / d.mean_edge * 100.0,
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Reads the stats row of a run directory, preferring JSON over CSV.
pub fn load_stats(run_dir: &Path) -> Result<StatsRow> {
    let json = run_dir.join(STATS_JSON);
    if json.exists() {
        let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        return serde_json::from_str(&text).map_err(|e| Error::parse(&json, e.line(), e.to_string()));
    }
    let path = run_dir.join(STATS_CSV);
    let mut r = csv::Reader::from_path(&path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(&path, io),
        other => Error::parse(&path, 0, format!("{other:?}")),
    })?;
    match r.deserialize().next() {
        Some(row) => row.map_err(|e| Error::parse(&path, 2, e.to_string())),
        None => Err(Error::parse(&path, 1, "no stats row")),
    }
}

/// Runs the whole pipeline and writes every artifact into `output_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mesh_i = load_mesh(&cfg.input, cfg.format, cfg.weld_factor)?;
    info!("loaded {}: {} faces", cfg.input.display(), mesh_i.n_faces());
    let start = Instant::now();
    let mesh_s = simplify(&mesh_i, &cfg.simplify)?;
    let d = decompose(&mesh_s, &cfg.decompose)?;
    let elapsed = start.elapsed().as_secs_f64();

    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let ext = match cfg.report.mesh_format {
        MeshFormat::Obj => "obj",
        _ => "stl",
    };
    save_mesh(&mesh_s, &out.join(format!("mesh_s.{ext}")), cfg.report.mesh_format)?;
    save_mesh(&d.mesh, &out.join(format!("mesh_f.{ext}")), cfg.report.mesh_format)?;

    let time_s = if cfg.report.record_time { elapsed } else { 0.0 };
    let stats = report_stats(
        &d,
        &mesh_i,
        &mesh_s,
        &cfg.decompose,
        time_s,
        cfg.report.hausdorff_samples,
    );
    for f in &cfg.report.formats {
        match f {
            ReportFormat::Csv => write_csv(&out.join(STATS_CSV), std::slice::from_ref(&stats))?,
            ReportFormat::Json => write_json(&out.join(STATS_JSON), &stats)?,
        }
    }
    let trace: Vec<TraceRow> = d.trace.iter().map(TraceRow::from).collect();
    write_csv(&out.join(TRACE_CSV), &trace)?;
    write_csv(&out.join(HISTOGRAM_CSV), &histogram(&d))?;

    let grouping = match &cfg.merge {
        Some(m) => {
            let g = merge_patches(&d.mesh, &d.state.labels, m.group_size)?;
            info!(
                "merged {} groups of {}, coverage {:.1}%",
                g.groups.len(),
                m.group_size,
                g.coverage_pct()
            );
            write_json(&out.join("merge.json"), &g)?;
            Some(g)
        }
        None => None,
    };

    let mut curved_summary = None;
    let mut manifest = None;
    match cfg.curved() {
        Some(ccfg) => {
            let sub = loop_subdivide(&d.mesh, ccfg.levels)?;
            save_mesh(
                &sub.mesh,
                &out.join(format!("mesh_curved.{ext}")),
                cfg.report.mesh_format,
            )?;
            let patches = curved_patches(&sub)?;
            let cls = classify_curved(&patches, &ccfg)?;
            let summary = curved_report(&cls, &ccfg);
            let rows: Vec<CurvedRow> = (0..patches.len())
                .map(|p| {
                    let e = cls.state.error_abs(p);
                    CurvedRow {
                        patch: p,
                        class: cls.state.labels[p],
                        w: patches[p].w,
                        error_abs: e,
                        error_pct: e / cls.mean_edge * 100.0,
                    }
                })
                .collect();
            write_csv(&out.join("curved.csv"), &rows)?;
            write_json(&out.join("curved.json"), &summary)?;
            if let Some(fab) = &cfg.fab {
                let mut parts = Vec::new();
                for class in non_empty(&cls.state.cluster_sizes()) {
                    let p = thicken_curved_class(&sub, &patches, &cls, class, fab)?;
                    parts.push(cut_holes_curved(&p, fab)?);
                }
                let hinge = make_hinge(fab)?;
                manifest = Some(export_parts(
                    &parts,
                    &hinge,
                    d.mesh.n_edges(),
                    fab.rod_diameter,
                    &out.join(PARTS_DIR),
                )?);
            }
            curved_summary = Some(summary);
        }
        None => {
            if let Some(fab) = &cfg.fab {
                let mut parts = Vec::new();
                for class in non_empty(&d.state.cluster_sizes()) {
                    let p = thicken_class(&d.mesh, &d.state, class, fab)?;
                    parts.push(cut_holes_planar(&p, fab)?);
                }
                let hinge = make_hinge(fab)?;
                manifest = Some(export_parts(
                    &parts,
                    &hinge,
                    d.mesh.n_edges(),
                    fab.rod_diameter,
                    &out.join(PARTS_DIR),
                )?);
            }
        }
    }

    Ok(RunOutcome {
        converged: d.converged,
        stats,
        decomposition: d,
        curved: curved_summary,
        grouping,
        manifest,
    })
}

fn non_empty(sizes: &[usize]) -> Vec<usize> {
    (0..sizes.len()).filter(|&c| sizes[c] > 0).collect()
}

fn curved_report(cls: &CurvedClassification, cfg: &CurvedConfig) -> CurvedSummary {
    let e = cls.errors();
    CurvedSummary {
        patches: cls.points.len(),
        k: cfg.k,
        threshold_abs: cls.threshold_abs,
        threshold_pct: cfg.threshold_pct,
        error_max_abs: e.max_abs,
        error_max_pct: e.max_pct,
        error_mean_pct: e.mean_pct,
        within_threshold: cls.within_threshold,
    }
}

/// Writes `mesh` in the format implied by the extension, OBJ by default.
pub fn write_input(mesh: &HalfedgeMesh, path: &Path) -> Result<PathBuf> {
    let format = MeshFormat::from_path(path).unwrap_or(MeshFormat::Obj);
    save_mesh(mesh, path, format)?;
    Ok(path.to_path_buf())
}
