//! Multi-stage runs that write every artifact into one directory together
//! with a manifest of SHA-256 digests.

use std::fmt;
use std::path::{Path, PathBuf};

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{manifold_report, sample_winding_field};
use crate::error::{Error, Result};
use crate::extract::{extract, ExtractMode};
use crate::fit::{fit, sphere_init_grid, FitConfig};
use crate::grid::{Fnv64, TetGrid};
use crate::io;
use crate::mesh::ExtractedMesh;
use crate::shapes::{sample_shape, shape_grid, Shape};
use crate::tensorize::{encode, write_gsp, Dtype};
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Gen,
    Fit,
    Extract,
    Check,
    Winding,
    Tensorize,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Gen,
        Stage::Fit,
        Stage::Extract,
        Stage::Check,
        Stage::Winding,
        Stage::Tensorize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Gen => "gen",
            Stage::Fit => "fit",
            Stage::Extract => "extract",
            Stage::Check => "check",
            Stage::Winding => "winding",
            Stage::Tensorize => "tensorize",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSpec {
    pub stages: Vec<Stage>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub shape: Shape,
    pub resolution: usize,
    pub radius: f64,
    pub mode: ExtractMode,
    /// Points sampled from the shape as the fitting target.
    pub target_points: usize,
    /// The fit seed is replaced by the stage seed.
    pub fit: FitConfig,
    pub winding_samples: usize,
    pub near_surface_band: f64,
    pub dtype: Dtype,
}

impl Default for PipelineSpec {
    fn default() -> Self {
        PipelineSpec {
            stages: Stage::ALL.to_vec(),
            output_dir: PathBuf::from("out"),
            seed: 0,
            shape: Shape::Hemisphere,
            resolution: 32,
            radius: 0.5,
            mode: ExtractMode::GShell,
            target_points: 50_000,
            fit: FitConfig::default(),
            winding_samples: 10_000,
            near_surface_band: 0.01,
            dtype: Dtype::F64,
        }
    }
}

impl PipelineSpec {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| match e.line() {
                0 => Error::Format(e.to_string()),
                line => Error::parse(line, e.to_string()),
            })
        } else {
            io::from_toml(text)
        }
    }

    fn validate(&self) -> Result<()> {
        let mut seen = Vec::new();
        for s in &self.stages {
            if seen.contains(s) {
                return Err(Error::InvalidArgument(format!("stage `{s}` listed twice")));
            }
            seen.push(*s);
        }
        if self.resolution == 0 {
            return Err(Error::InvalidArgument("resolution must be positive".into()));
        }
        if !(self.near_surface_band >= 0.0 && self.near_surface_band.is_finite()) {
            return Err(Error::InvalidArgument("near_surface_band must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub stage: Stage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
    /// Set when a stage failed; `entries` then lists the completed stages only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Independent seed for one stage: SplitMix64 of the run seed mixed with a
/// hash of the stage name, so adding or removing stages leaves the others
/// unchanged.
pub fn stage_seed(seed: u64, stage: Stage) -> u64 {
    let mut h = Fnv64::new();
    h.write_bytes(stage.name().as_bytes());
    let mut z = seed ^ h.finish();
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Run<'a> {
    dir: &'a Path,
    entries: Vec<ManifestEntry>,
}

impl Run<'_> {
    fn emit(&mut self, stage: Stage, name: &str, bytes: &[u8]) -> Result<()> {
        io::write_atomic(&self.dir.join(name), bytes)?;
        self.entries.push(ManifestEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            stage,
        });
        Ok(())
    }
}

fn missing(stage: Stage, what: &str, producer: &str) -> Error {
    Error::InvalidArgument(format!("stage `{stage}` needs {what}; list `{producer}` before it"))
}

/// Runs the stages in order and writes `manifest.json` last. When a stage
/// fails the manifest still lists what was completed, and the error is
/// returned.
pub fn run_pipeline(spec: &PipelineSpec) -> Result<Manifest> {
    spec.validate()?;
    let dir = spec.output_dir.as_path();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut run = Run { dir, entries: Vec::new() };
    let mut state = State::default();
    for &stage in &spec.stages {
        info!("pipeline stage {stage}");
        if let Err(e) = run_stage(spec, stage, &mut state, &mut run) {
            let manifest = Manifest {
                seed: spec.seed,
                entries: run.entries,
                failed_stage: Some(stage),
                error: Some(e.to_string()),
            };
            io::write_json(&dir.join("manifest.json"), &manifest)?;
            return Err(e);
        }
    }
    let manifest = Manifest { seed: spec.seed, entries: run.entries, failed_stage: None, error: None };
    io::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

#[derive(Default)]
struct State {
    grid: Option<TetGrid<f64>>,
    target: Option<Vec<Vec3<f64>>>,
    mesh: Option<ExtractedMesh<f64>>,
}

fn run_stage(spec: &PipelineSpec, stage: Stage, state: &mut State, run: &mut Run) -> Result<()> {
    let seed = stage_seed(spec.seed, stage);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match stage {
        Stage::Gen => {
            let g = shape_grid(spec.shape, spec.resolution, spec.radius)?;
            run.emit(stage, "grid.json", io::grid_to_json(&g)?.as_bytes())?;
            // the target cloud is only an artifact when something consumes it
            if spec.stages.contains(&Stage::Fit) {
                let pts: Vec<Vec3<f64>> = sample_shape(spec.shape, spec.radius, spec.target_points, &mut rng);
                let xyz: String = pts.iter().map(|p| format!("{} {} {}\n", p.x(), p.y(), p.z())).collect();
                run.emit(stage, "target.xyz", xyz.as_bytes())?;
                state.target = Some(pts);
            }
            state.grid = Some(g);
        }
        Stage::Fit => {
            let pts = state.target.as_ref().ok_or_else(|| missing(stage, "a target point cloud", "gen"))?;
            let init: TetGrid<f64> = sphere_init_grid(spec.resolution, &mut rng)?;
            let config = FitConfig { seed, ..spec.fit.clone() };
            let (fitted, report) = fit(&init, pts, &config)?;
            run.emit(stage, "fitted.json", io::grid_to_json(&fitted)?.as_bytes())?;
            run.emit(stage, "fit_report.json", io::to_json_pretty(&report)?.as_bytes())?;
            state.grid = Some(fitted);
        }
        Stage::Extract => {
            let g = state.grid.as_ref().ok_or_else(|| missing(stage, "a grid", "gen"))?;
            let m = extract(g, spec.mode);
            run.emit(stage, "mesh.obj", io::obj_to_string(&m).as_bytes())?;
            if spec.mode == ExtractMode::GShell {
                let boundary = io::BoundaryReport::from_mesh(&m);
                run.emit(stage, "boundary.json", io::to_json_pretty(&boundary)?.as_bytes())?;
            }
            state.mesh = Some(m);
        }
        Stage::Check => {
            let m = state.mesh.as_ref().ok_or_else(|| missing(stage, "a mesh", "extract"))?;
            run.emit(stage, "check.json", io::to_json_pretty(&manifold_report(m))?.as_bytes())?;
        }
        Stage::Winding => {
            let m = state.mesh.as_ref().ok_or_else(|| missing(stage, "a mesh", "extract"))?;
            let samples = sample_winding_field(m, spec.winding_samples, spec.near_surface_band, &mut rng);
            let csv = io::csv_string(
                &["x", "y", "z", "winding", "dist_to_surface"],
                samples
                    .iter()
                    .map(|s| vec![s.query.x(), s.query.y(), s.query.z(), s.winding, s.dist_to_surface]),
            );
            run.emit(stage, "winding.csv", csv.as_bytes())?;
        }
        Stage::Tensorize => {
            let g = state.grid.as_ref().ok_or_else(|| missing(stage, "a grid", "gen"))?;
            let mut bytes = Vec::new();
            write_gsp(&encode(g)?, spec.dtype, &mut bytes)?;
            run.emit(stage, "pack.gsp", &bytes)?;
        }
    }
    Ok(())
}
