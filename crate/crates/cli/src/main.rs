use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use isokit::fidelity::{hausdorff, DEFAULT_SAMPLES_PER_TRIANGLE};
use isokit::mesh::{load_mesh, save_mesh, MeshFormat};
use isokit::pipeline::{load_stats, run, RunConfig};
use isokit::shapes::{gen_testshape, TestShape};

#[derive(Parser)]
#[command(
    name = "isokit",
    version,
    about = "Decompose closed meshes into a few congruent triangle classes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline described by a JSON or TOML config.
    Run { config: PathBuf },
    /// Generate a synthetic test shape.
    Gen {
        kind: Kind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 4)]
        subdivisions: u32,
        /// Potato radial perturbation, as a fraction of the radius.
        #[arg(long, default_value_t = 0.15)]
        amplitude: f64,
        /// Ellipsoid semi-axes.
        #[arg(long, num_args = 3, default_values_t = [1.0, 0.8, 0.6])]
        radii: Vec<f64>,
    },
    /// Symmetric sampled Hausdorff distance between two meshes.
    Hausdorff {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SAMPLES_PER_TRIANGLE)]
        samples: f64,
    },
    /// Print the stats row of a finished run.
    Stats {
        run_dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Icosphere,
    Ellipsoid,
    Potato,
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("ISOKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .with_context(|| format!("ISOKIT_THREADS must be a positive integer, got {v:?}"))?;
    anyhow::ensure!(n > 0, "ISOKIT_THREADS must be a positive integer, got {v:?}");
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn execute(cli: Cli) -> Result<u8> {
    init_threads()?;
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let out = run(&cfg)?;
            let s = &out.stats;
            println!(
                "{} after {} iterations: {} faces, mean error {:.4}% (T {:.4}%), dH(s,f) max {:.3}% bb",
                if out.converged { "converged" } else { "not converged" },
                s.iterations,
                s.faces_f,
                s.err_mean_pct,
                s.t_pct,
                s.dh_sf_max
            );
            println!("outputs in {}", cfg.output_dir.display());
            Ok(out.exit_code() as u8)
        }
        Command::Gen {
            kind,
            seed,
            output,
            subdivisions,
            amplitude,
            radii,
        } => {
            let shape = match kind {
                Kind::Icosphere => TestShape::Icosphere { subdivisions },
                Kind::Ellipsoid => TestShape::Ellipsoid {
                    subdivisions,
                    radii: [radii[0], radii[1], radii[2]],
                },
                Kind::Potato => TestShape::Potato {
                    subdivisions,
                    amplitude,
                },
            };
            let mesh = gen_testshape(shape, seed)?;
            let format = MeshFormat::from_path(&output).unwrap_or(MeshFormat::Obj);
            save_mesh(&mesh, &output, format)?;
            println!(
                "{} faces, {} vertices -> {}",
                mesh.n_faces(),
                mesh.n_vertices(),
                output.display()
            );
            Ok(0)
        }
        Command::Hausdorff { a, b, samples } => {
            anyhow::ensure!(samples >= 1.0, "--samples must be at least 1");
            let ma = load_mesh(&a, None, None)?;
            let mb = load_mesh(&b, None, None)?;
            let h = hausdorff(&ma, &mb, samples);
            println!("mean {:.6} max {:.6} (absolute)", h.mean_distance, h.max_distance);
            println!(
                "mean {:.4}% max {:.4}% of bbox diagonal, {} samples",
                h.mean_pct_bb, h.max_pct_bb, h.sample_count
            );
            Ok(0)
        }
        Command::Stats { run_dir, json } => {
            let row = load_stats(&run_dir)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&row)?);
            } else {
                let value = serde_json::to_value(&row)?;
                for (k, v) in value.as_object().expect("stats row is an object") {
                    println!("{k:>13}  {v}");
                }
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
