//! Fitting a grid to a target point cloud.
//!
//! Each iteration extracts the open surface, evaluates
//!
//! ```text
//! L = g_chamfer * Chamfer
//!   + (g_open * R_open + g_close * R_close) / rho
//!   + g_sdf * R_sdf + g_eik * R_eik
//! ```
//!
//! and takes one Adam step per parameter group (SDF, mSDF, offsets).
//! `rho = (R / 64)^3` when `scale_msdf_reg` is set, so the regularizer weights
//! are given at resolution 64. The mSDF regularizers are
//! pulled back to mSDF values only.

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{manifold_report, ManifoldReport};
use crate::autodiff::{vjp, VjpOptions};
use crate::chamfer::{chamfer_distance, chamfer_with_grad, ChamferTarget, ChamferTerms};
use crate::error::{Error, Result};
use crate::extract::extract_gshell;
use crate::grid::{build_uniform_tet_grid, sample_fields, Aabb, TetGrid};
use crate::losses::{eikonal, msdf_reg_close, msdf_reg_open, sdf_reg};
use crate::optim::{decay_factor, Adam};
use crate::shapes::{Shape, ShapeField};
use crate::vec3::Vec3;
use crate::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub iterations: usize,
    pub lr_sdf: f64,
    pub lr_msdf: f64,
    pub lr_offsets: f64,
    /// Exponent rate of the step-size schedule `10^(-lr_decay * t)`.
    pub lr_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub weight_chamfer: f64,
    pub weight_msdf_reg_open: f64,
    pub weight_msdf_reg_close: f64,
    pub weight_sdf_reg: f64,
    pub weight_eikonal: f64,
    /// Target mSDF value on hole boundaries.
    pub epsilon: f64,
    pub huber_delta: f64,
    /// Divide the mSDF regularizer weights by `(resolution / 64)^3`.
    pub scale_msdf_reg: bool,
    /// Mesh surface samples per iteration.
    pub samples_per_iter: usize,
    /// Target points per iteration; 0 uses the whole cloud.
    pub target_points_per_iter: usize,
    /// Keep mSDF fixed (the watertight ablation when it is +1 everywhere).
    pub freeze_msdf: bool,
    /// Surface samples for the final Chamfer evaluation.
    pub eval_samples: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            iterations: 1000,
            lr_sdf: 3e-3,
            lr_msdf: 1e-2,
            lr_offsets: 1e-2,
            lr_decay: 0.0002,
            adam_beta1: 0.9,
            adam_beta2: 0.99,
            weight_chamfer: 1.0,
            weight_msdf_reg_open: 1e-3,
            weight_msdf_reg_close: 1e-3,
            weight_sdf_reg: 0.0,
            weight_eikonal: 0.0,
            epsilon: 1e-3,
            huber_delta: 1.0,
            scale_msdf_reg: true,
            samples_per_iter: 20_000,
            target_points_per_iter: 20_000,
            freeze_msdf: false,
            eval_samples: 100_000,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("fit config: {what}")));
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if self.samples_per_iter == 0 {
            return bad("samples_per_iter must be positive");
        }
        for (name, v) in [
            ("weight_chamfer", self.weight_chamfer),
            ("weight_msdf_reg_open", self.weight_msdf_reg_open),
            ("weight_msdf_reg_close", self.weight_msdf_reg_close),
            ("weight_sdf_reg", self.weight_sdf_reg),
            ("weight_eikonal", self.weight_eikonal),
            ("lr_sdf", self.lr_sdf),
            ("lr_msdf", self.lr_msdf),
            ("lr_offsets", self.lr_offsets),
            ("lr_decay", self.lr_decay),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.huber_delta > 0.0) {
            return bad("huber_delta must be positive");
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(&format!("{name} must lie in [0, 1)"));
            }
        }
        Ok(())
    }

    /// `gamma_close / gamma_open`, the hole-size trade-off.
    pub fn tau(&self) -> Option<f64> {
        (self.weight_msdf_reg_open > 0.0).then(|| self.weight_msdf_reg_close / self.weight_msdf_reg_open)
    }

    pub fn rho(&self, resolution: usize) -> f64 {
        if self.scale_msdf_reg {
            (resolution as f64 / 64.0).powi(3)
        } else {
            1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub total: f64,
    pub chamfer: f64,
    pub msdf_reg_open: f64,
    pub msdf_reg_close: f64,
    pub sdf_reg: f64,
    pub eikonal: f64,
    pub faces: usize,
    pub boundary_edges: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub config: FitConfig,
    pub rho: f64,
    pub tau: Option<f64>,
    pub iterations: Vec<IterationRecord>,
    /// Iteration whose (sampled) Chamfer estimate was lowest; its grid is returned.
    pub best_iteration: usize,
    pub final_chamfer: ChamferTerms,
    pub manifold: ManifoldReport,
}

struct Snapshot<T> {
    sdf: Vec<T>,
    msdf: Vec<T>,
    offsets: Vec<Vec3<T>>,
}

fn check_finite(value: f64, term: &'static str, iteration: usize) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteLoss { term, iteration })
    }
}

/// Sphere-initialized grid over `[-1, 1]^3`: SDF of a sphere of diameter half
/// the grid extent, mSDF drawn from `U(-0.01, 0.99)`.
pub fn sphere_init_grid<T: Real, R: Rng + ?Sized>(resolution: usize, rng: &mut R) -> Result<TetGrid<T>> {
    let grid = build_uniform_tet_grid(resolution, Aabb::centered_cube(T::one()))?;
    let mut grid = sample_fields(&grid, &ShapeField::new(Shape::Sphere, T::lit(0.5)))?;
    for m in grid.msdf.iter_mut() {
        *m = T::lit(rng.gen_range(-0.01..0.99));
    }
    Ok(grid)
}

/// Fits `grid` to `target` and returns the best grid with the full report.
pub fn fit<T: Real>(grid: &TetGrid<T>, target: &[Vec3<T>], config: &FitConfig) -> Result<(TetGrid<T>, FitReport)> {
    config.validate()?;
    if target.is_empty() {
        return Err(Error::InvalidArgument("fit target has no points".into()));
    }
    let target = ChamferTarget::new(target.to_vec());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut grid = grid.clone();
    let n = grid.num_vertices();
    let rho = config.rho(grid.resolution());
    let w_open = T::lit(config.weight_msdf_reg_open / rho);
    let w_close = T::lit(config.weight_msdf_reg_close / rho);
    let w_chamfer = T::lit(config.weight_chamfer);
    let (b1, b2) = (T::lit(config.adam_beta1), T::lit(config.adam_beta2));
    let mut opt_sdf = Adam::new(n, b1, b2);
    let mut opt_msdf = Adam::new(n, b1, b2);
    let mut opt_off = Adam::new(3 * n, b1, b2);
    let delta = T::lit(config.huber_delta);
    let subset = (config.target_points_per_iter > 0).then_some(config.target_points_per_iter);

    let mut records = Vec::with_capacity(config.iterations);
    let mut best: Option<(f64, usize, Snapshot<T>)> = None;
    for it in 0..config.iterations {
        let mesh = extract_gshell(&grid);
        let ch = chamfer_with_grad(&mesh, &target, subset, config.samples_per_iter, &mut rng);
        let chamfer = check_finite(ch.terms.total, "chamfer", it)?;
        let pos_cot: Vec<Vec3<T>> = ch.position_cot.iter().map(|c| *c * w_chamfer).collect();
        let mut grad = vjp(&grid, &mesh, &pos_cot, None, VjpOptions::default())?;

        let open = msdf_reg_open(&mesh, delta);
        let close = msdf_reg_close(&mesh, T::lit(config.epsilon), delta);
        let reg_open = check_finite(open.value.as_f64(), "msdf_reg_open", it)?;
        let reg_close = check_finite(close.value.as_f64(), "msdf_reg_close", it)?;
        if !config.freeze_msdf && (w_open > T::zero() || w_close > T::zero()) {
            let nu_cot: Vec<T> = open
                .msdf_cot
                .iter()
                .zip(&close.msdf_cot)
                .map(|(a, b)| w_open * *a + w_close * *b)
                .collect();
            let zero = vec![Vec3::zero(); mesh.num_vertices()];
            let g = vjp(&grid, &mesh, &zero, Some(&nu_cot), VjpOptions::msdf_only())?;
            grad.add_scaled(&g, T::one());
        }

        let mut eik_value = 0.0;
        if config.weight_eikonal > 0.0 {
            let e = eikonal(&grid, &mesh);
            eik_value = check_finite(e.value.as_f64(), "eikonal", it)?;
            grad.add_scaled(&e.grad, T::lit(config.weight_eikonal));
        }
        let mut sdf_reg_value = 0.0;
        if config.weight_sdf_reg > 0.0 {
            let (v, g) = sdf_reg(&grid);
            sdf_reg_value = check_finite(v.as_f64(), "sdf_reg", it)?;
            let w = T::lit(config.weight_sdf_reg);
            for (a, b) in grad.sdf.iter_mut().zip(&g) {
                *a += w * *b;
            }
        }

        let total = config.weight_chamfer * chamfer
            + (config.weight_msdf_reg_open * reg_open + config.weight_msdf_reg_close * reg_close) / rho
            + config.weight_sdf_reg * sdf_reg_value
            + config.weight_eikonal * eik_value;
        let total = check_finite(total, "total", it)?;
        records.push(IterationRecord {
            iteration: it,
            total,
            chamfer,
            msdf_reg_open: reg_open,
            msdf_reg_close: reg_close,
            sdf_reg: sdf_reg_value,
            eikonal: eik_value,
            faces: mesh.faces.len(),
            boundary_edges: mesh.boundary_edges.len(),
        });
        if it % 50 == 0 {
            debug!(
                "iter {it}: chamfer {chamfer:.6} open {reg_open:.4} close {reg_close:.3e} faces {} boundary {}",
                mesh.faces.len(),
                mesh.boundary_edges.len()
            );
        }
        if best.as_ref().is_none_or(|(c, _, _)| chamfer < *c) {
            best = Some((
                chamfer,
                it,
                Snapshot {
                    sdf: grid.sdf.clone(),
                    msdf: grid.msdf.clone(),
                    offsets: grid.offsets().to_vec(),
                },
            ));
        }

        let decay = T::lit(decay_factor(config.lr_decay, it));
        opt_sdf.step(&mut grid.sdf, &grad.sdf, T::lit(config.lr_sdf) * decay);
        if !config.freeze_msdf {
            opt_msdf.step(&mut grid.msdf, &grad.msdf, T::lit(config.lr_msdf) * decay);
        }
        let mut flat: Vec<T> = grid.offsets().iter().flat_map(|o| o.0).collect();
        let flat_grad: Vec<T> = grad.offsets.iter().flat_map(|o| o.0).collect();
        opt_off.step(&mut flat, &flat_grad, T::lit(config.lr_offsets) * decay);
        grid.update_offsets(|i, o| *o = Vec3::new(flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]));
    }

    let (_, best_iteration, snap) = best.expect("at least one iteration");
    grid.sdf = snap.sdf;
    grid.msdf = snap.msdf;
    grid.update_offsets(|i, o| *o = snap.offsets[i]);
    let mesh = extract_gshell(&grid);
    let mut eval_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let final_chamfer = chamfer_distance(&mesh, &target, config.eval_samples, &mut eval_rng);
    info!(
        "fit finished: best iteration {best_iteration}, chamfer {:.6}, {} boundary edges",
        final_chamfer.total,
        mesh.boundary_edges.len()
    );
    let report = FitReport {
        config: config.clone(),
        rho,
        tau: config.tau(),
        iterations: records,
        best_iteration,
        final_chamfer,
        manifold: manifold_report(&mesh),
    };
    Ok((grid, report))
}
