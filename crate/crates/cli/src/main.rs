use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, LevelFilter};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gshell::analysis::{manifold_report, sample_winding_field};
use gshell::fit::sphere_init_grid;
use gshell::gradcheck::{run_gradcheck, GradcheckConfig};
use gshell::io;
use gshell::pipeline::{run_pipeline, PipelineSpec};
use gshell::shapes::{sample_shape, shape_grid};
use gshell::tensorize::{decode, encode, extract_with_alpha, read_gsp, write_gsp, Dtype};
use gshell::{chamfer_distance, extract, ChamferTarget, Error, ExtractMode, FitConfig, Result, Shape, TetGridF64};

#[derive(Parser)]
#[command(name = "gshell", version, about = "Watertight and open mesh extraction from SDF/mSDF tetrahedral grids")]
struct Cli {
    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (1 is the bit-reproducible reference mode).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "warn")]
    log_level: LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Sphere,
    Hemisphere,
    OpenCylinder,
    Sheet,
}

impl From<ShapeArg> for Shape {
    fn from(s: ShapeArg) -> Shape {
        match s {
            ShapeArg::Sphere => Shape::Sphere,
            ShapeArg::Hemisphere => Shape::Hemisphere,
            ShapeArg::OpenCylinder => Shape::OpenCylinder,
            ShapeArg::Sheet => Shape::Sheet,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Watertight,
    Gshell,
}

impl From<ModeArg> for ExtractMode {
    fn from(m: ModeArg) -> ExtractMode {
        match m {
            ModeArg::Watertight => ExtractMode::Watertight,
            ModeArg::Gshell => ExtractMode::GShell,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DtypeArg {
    F32,
    F64,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an analytic shape onto a uniform grid.
    Gen {
        #[arg(long, value_enum)]
        shape: ShapeArg,
        #[arg(long = "res")]
        resolution: usize,
        #[arg(long, default_value_t = 0.5)]
        radius: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also write surface samples of the shape (PLY or XYZ by extension).
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long, default_value_t = 50_000)]
        num_points: usize,
    },
    /// Extract a mesh from a grid.
    Extract {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, value_enum, default_value = "gshell")]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        boundary: Option<PathBuf>,
    },
    /// Fit a grid to a point cloud.
    Fit {
        /// Initial grid; a sphere-initialized grid at `--res` when omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long = "res", default_value_t = 32)]
        resolution: usize,
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Chamfer distance between a mesh and a point cloud.
    Metrics {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Topology report of a mesh.
    Check {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Winding numbers at points near a mesh.
    Winding {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0.01)]
        near_surface_band: f64,
        #[arg(long)]
        out: PathBuf,
    },
    #[command(hide = true)]
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        checks: usize,
        #[arg(long = "res", default_value_t = 3)]
        resolution: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode a grid as a dense tensor pack.
    Tensorize {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "f32")]
        dtype: DtypeArg,
    },
    /// Decode a tensor pack back into a grid.
    Detensorize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also extract the mesh described by the stored alpha values.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// Run a multi-stage pipeline described by a TOML or JSON spec.
    Pipeline {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the spec's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Io { .. } => 2,
        Error::NonFiniteField { .. }
        | Error::NonFiniteLoss { .. }
        | Error::Internal(_)
        | Error::PlacementCollision { .. } => 3,
        Error::Format(_) | Error::UnsupportedVersion { .. } | Error::Parse { .. } => 4,
    }
}

fn write_points(path: &Path, points: &[gshell::Vec3F64]) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ply") => io::write_ply(path, points),
        _ => io::write_xyz(path, points),
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Gen { shape, resolution, radius, out, points, num_points } => {
            let shape = Shape::from(shape);
            let grid: TetGridF64 = shape_grid(shape, resolution, radius)?;
            io::write_grid(&out, &grid)?;
            if let Some(path) = points {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                write_points(&path, &sample_shape(shape, radius, num_points, &mut rng))?;
            }
            info!("wrote {} ({} vertices, {} tets)", out.display(), grid.num_vertices(), grid.num_tets());
        }
        Command::Extract { grid, mode, out, boundary } => {
            let grid: TetGridF64 = io::read_grid(&grid)?;
            let mesh = extract(&grid, mode.into());
            io::write_obj(&out, &mesh)?;
            if let Some(path) = boundary {
                io::write_json(&path, &io::BoundaryReport::from_mesh(&mesh))?;
            }
            info!("{} faces, {} boundary edges", mesh.faces.len(), mesh.boundary_edges.len());
        }
        Command::Fit { grid, resolution, points, config, out, report } => {
            let mut cfg: FitConfig = match config {
                Some(path) => io::from_toml(&io::read_to_string(&path)?)?,
                None => FitConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let init: TetGridF64 = match grid {
                Some(path) => io::read_grid(&path)?,
                None => sphere_init_grid(resolution, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?,
            };
            let target = io::read_points(&points)?;
            let (fitted, fit_report) = gshell::fit(&init, &target, &cfg)?;
            io::write_grid(&out, &fitted)?;
            if let Some(path) = report {
                io::write_json(&path, &fit_report)?;
            }
            info!("final chamfer {}", fit_report.final_chamfer.total);
        }
        Command::Metrics { mesh, points, samples, out } => {
            let mesh = io::read_obj::<f64>(&mesh)?;
            let target = ChamferTarget::new(io::read_points(&points)?);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let terms = chamfer_distance(&mesh, &target, samples, &mut rng);
            match out {
                Some(path) => io::write_json(&path, &terms)?,
                None => print!("{}", io::to_json_pretty(&terms)?),
            }
        }
        Command::Check { mesh, out } => {
            let mesh = io::read_obj::<f64>(&mesh)?;
            io::write_json(&out, &manifold_report(&mesh))?;
        }
        Command::Winding { mesh, samples, near_surface_band, out } => {
            if !(near_surface_band >= 0.0 && near_surface_band.is_finite()) {
                return Err(Error::InvalidArgument("--near-surface-band must be non-negative".into()));
            }
            let mesh = io::read_obj::<f64>(&mesh)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows = sample_winding_field(&mesh, samples, near_surface_band, &mut rng);
            let csv = io::csv_string(
                &["x", "y", "z", "winding", "dist_to_surface"],
                rows.iter()
                    .map(|s| vec![s.query.x(), s.query.y(), s.query.z(), s.winding, s.dist_to_surface]),
            );
            io::write_atomic(&out, csv.as_bytes())?;
        }
        Command::Gradcheck { checks, resolution, out } => {
            let cfg = GradcheckConfig { checks, resolution, seed, ..Default::default() };
            let report = run_gradcheck(&cfg)?;
            io::write_json(&out, &report)?;
            info!("max relative error {:.3e} over {} partials", report.max_relative_error, report.total_compared);
        }
        Command::Tensorize { grid, out, dtype } => {
            let grid: TetGridF64 = io::read_grid(&grid)?;
            let dtype = match dtype {
                DtypeArg::F32 => Dtype::F32,
                DtypeArg::F64 => Dtype::F64,
            };
            let mut bytes = Vec::new();
            write_gsp(&encode(&grid)?, dtype, &mut bytes)?;
            io::write_atomic(&out, &bytes)?;
        }
        Command::Detensorize { input, out, mesh } => {
            let file = File::open(&input).map_err(|e| Error::Io { path: input.clone(), source: e })?;
            let (tensor, _) = read_gsp::<f64, _>(BufReader::new(file))?;
            let (grid, table) = decode(&tensor)?;
            io::write_grid(&out, &grid)?;
            if let Some(path) = mesh {
                io::write_obj(&path, &extract_with_alpha(&grid, &table)?)?;
            }
        }
        Command::Pipeline { spec, out_dir } => {
            let mut spec = PipelineSpec::parse(&io::read_to_string(&spec)?)?;
            if let Some(dir) = out_dir {
                spec.output_dir = dir;
            }
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            let manifest = run_pipeline(&spec)?;
            info!("pipeline wrote {} artifacts", manifest.entries.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
