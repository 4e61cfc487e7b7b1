//! Analytic test shapes: fields to sample onto grids, uniform surface samples
//! for fitting targets, and exact unsigned distances for error measurement.
//!
//! Every shape is centred at the origin with characteristic size `radius`.
//! Open shapes pair a closed SDF with an mSDF that is positive on the kept
//! part of the zero level set.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_uniform_tet_grid, sample_fields, Aabb, AnalyticField, TetGrid};
use crate::vec3::Vec3;
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// Closed sphere, msdf = +1.
    Sphere,
    /// Sphere SDF with msdf = z: the upper half sphere.
    Hemisphere,
    /// Infinite cylinder around z with msdf = radius - |z|.
    OpenCylinder,
    /// Plane z = 0 with msdf = radius - max(|x|, |y|): a square sheet.
    Sheet,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::Sphere, Shape::Hemisphere, Shape::OpenCylinder, Shape::Sheet];

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Sphere => "sphere",
            Shape::Hemisphere => "hemisphere",
            Shape::OpenCylinder => "open-cylinder",
            Shape::Sheet => "sheet",
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self, Shape::Sphere)
    }

    /// Area of the kept surface.
    pub fn area(&self, radius: f64) -> f64 {
        let r2 = radius * radius;
        match self {
            Shape::Sphere => 4.0 * PI * r2,
            Shape::Hemisphere => 2.0 * PI * r2,
            Shape::OpenCylinder => 4.0 * PI * r2,
            Shape::Sheet => 4.0 * r2,
        }
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL
            .into_iter()
            .find(|shape| shape.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown shape '{s}'")))
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ShapeField<T> {
    pub shape: Shape,
    pub radius: T,
}

impl<T: Real> ShapeField<T> {
    pub fn new(shape: Shape, radius: T) -> Self {
        ShapeField { shape, radius }
    }
}

impl<T: Real> AnalyticField<T> for ShapeField<T> {
    fn sdf(&self, p: &Vec3<T>) -> T {
        match self.shape {
            Shape::Sphere | Shape::Hemisphere => p.norm() - self.radius,
            Shape::OpenCylinder => p.x().hypot(p.y()) - self.radius,
            Shape::Sheet => p.z(),
        }
    }

    fn msdf(&self, p: &Vec3<T>) -> T {
        match self.shape {
            Shape::Sphere => T::one(),
            Shape::Hemisphere => p.z(),
            Shape::OpenCylinder => self.radius - p.z().abs(),
            Shape::Sheet => self.radius - p.x().abs().max(p.y().abs()),
        }
    }
}

/// Grid over `[-1, 1]^3` with `shape` sampled at the vertices.
pub fn shape_grid<T: Real>(shape: Shape, resolution: usize, radius: T) -> Result<TetGrid<T>> {
    if !(radius > T::zero() && radius < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "shape radius must lie in (0, 1), got {radius}"
        )));
    }
    let grid = build_uniform_tet_grid(resolution, Aabb::centered_cube(T::one()))?;
    sample_fields(&grid, &ShapeField::new(shape, radius))
}

/// Uniform-by-area samples of the kept surface.
pub fn sample_shape<T: Real, R: Rng + ?Sized>(
    shape: Shape,
    radius: f64,
    count: usize,
    rng: &mut R,
) -> Vec<Vec3<T>> {
    (0..count)
        .map(|_| {
            let phi = rng.gen_range(0.0..2.0 * PI);
            let p = match shape {
                // Archimedes: z is uniform on spheres and their zones
                Shape::Sphere | Shape::Hemisphere => {
                    let lo = if shape == Shape::Sphere { -1.0 } else { 0.0 };
                    let z: f64 = rng.gen_range(lo..=1.0);
                    let rho = (1.0 - z * z).max(0.0).sqrt();
                    [radius * rho * phi.cos(), radius * rho * phi.sin(), radius * z]
                }
                Shape::OpenCylinder => {
                    let z = rng.gen_range(-radius..=radius);
                    [radius * phi.cos(), radius * phi.sin(), z]
                }
                Shape::Sheet => [
                    rng.gen_range(-radius..=radius),
                    rng.gen_range(-radius..=radius),
                    0.0,
                ],
            };
            Vec3::new(T::lit(p[0]), T::lit(p[1]), T::lit(p[2]))
        })
        .collect()
}

/// Exact unsigned distance from `p` to the kept surface.
pub fn distance_to_shape(shape: Shape, radius: f64, p: &Vec3<f64>) -> f64 {
    let rho = p.x().hypot(p.y());
    match shape {
        Shape::Sphere => (p.norm() - radius).abs(),
        Shape::Hemisphere => {
            if p.z() >= 0.0 {
                (p.norm() - radius).abs()
            } else {
                (rho - radius).hypot(p.z())
            }
        }
        Shape::OpenCylinder => {
            let dz = (p.z().abs() - radius).max(0.0);
            (rho - radius).hypot(dz)
        }
        Shape::Sheet => {
            let dx = (p.x().abs() - radius).max(0.0);
            let dy = (p.y().abs() - radius).max(0.0);
            (dx * dx + dy * dy + p.z() * p.z()).sqrt()
        }
    }
}
