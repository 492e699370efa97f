//! Conductivity phantoms: piecewise-constant inclusions, rasterization and the
//! two randomized generators (thorax organs with lung injuries, and split
//! ellipses).

mod act4;
mod kit4;
mod shape;

pub use act4::{generate_act4_phantom, Act4Draws, InjuryDraw, OrganSpec, OrganTemplate};
pub use kit4::{generate_kit4_phantom, split_offset_limit, Kit4Params};
pub use shape::{is_simple_polygon, point_in_polygon, InclusionSpec, Shape, Split};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SquareGrid;

/// Radius inside which scaled conductivities may differ from 1.
pub const SUPPORT_RADIUS: f64 = 0.95;

/// Real conductivity sampled on a square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityImage {
    grid: SquareGrid,
    values: Vec<f64>,
    sigma_b: f64,
    scaled: bool,
}

impl ConductivityImage {
    /// Unscaled image in physical units with boundary conductivity `sigma_b`.
    pub fn new(grid: SquareGrid, values: Vec<f64>, sigma_b: f64) -> Result<Self> {
        Self::build(grid, values, sigma_b, false)
    }

    pub fn from_fn(grid: SquareGrid, sigma_b: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = grid.points().map(|z| f(z.re, z.im)).collect();
        Self::new(grid, values, sigma_b)
    }

    /// Constant `value` everywhere, with `sigma_b = value`.
    pub fn constant(grid: SquareGrid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()], value)
    }

    fn build(grid: SquareGrid, values: Vec<f64>, sigma_b: f64, scaled: bool) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} conductivity values for a {}x{} grid",
                values.len(),
                grid.n(),
                grid.n()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "conductivity",
                index,
            });
        }
        if let Some(i) = values.iter().position(|&v| v <= 0.0) {
            return Err(Error::Invalid(format!(
                "conductivity must be positive, got {} at node {i}",
                values[i]
            )));
        }
        if !(sigma_b.is_finite() && sigma_b > 0.0) {
            return Err(Error::Invalid(format!(
                "boundary conductivity must be positive, got {sigma_b}"
            )));
        }
        Ok(ConductivityImage {
            grid,
            values,
            sigma_b,
            scaled,
        })
    }

    pub fn grid(&self) -> &SquareGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sigma_b(&self) -> f64 {
        self.sigma_b
    }

    pub fn is_scaled(&self) -> bool {
        self.scaled
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Divides by the boundary conductivity and sets the result to exactly 1
/// outside the support radius.
///
/// Fails if the unscaled image is not equal to `sigma_b` (to 1e-12 relative)
/// on every node outside the support radius.
pub fn scale_to_unit_boundary(phantom: &ConductivityImage) -> Result<ConductivityImage> {
    if phantom.scaled {
        return Err(Error::Invalid("conductivity is already scaled".into()));
    }
    let sb = phantom.sigma_b;
    let mut values = Vec::with_capacity(phantom.values.len());
    for (z, &v) in phantom.grid.points().zip(&phantom.values) {
        let s = v / sb;
        if z.norm() > SUPPORT_RADIUS {
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::Invalid(format!(
                    "conductivity {v} at |z| = {:.3} differs from the boundary value {sb}",
                    z.norm()
                )));
            }
            values.push(1.0);
        } else {
            values.push(s);
        }
    }
    ConductivityImage::build(phantom.grid, values, sb, true)
}

/// A piecewise-constant phantom: background plus inclusions. Later inclusions
/// take precedence where they overlap earlier ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phantom {
    pub background: f64,
    pub inclusions: Vec<InclusionSpec>,
}

impl Phantom {
    pub fn homogeneous(background: f64) -> Self {
        Phantom {
            background,
            inclusions: Vec::new(),
        }
    }

    pub fn value_at(&self, p: [f64; 2]) -> f64 {
        self.inclusions
            .iter()
            .rev()
            .find_map(|inc| inc.value_at(p))
            .unwrap_or(self.background)
    }

    /// Unscaled image with `sigma_b = background`.
    pub fn rasterize(&self, grid: SquareGrid) -> Result<ConductivityImage> {
        rasterize(&self.inclusions, self.background, grid)
    }
}

/// Samples inclusions at grid nodes; nodes outside every inclusion get `background`.
pub fn rasterize(
    specs: &[InclusionSpec],
    background: f64,
    grid: SquareGrid,
) -> Result<ConductivityImage> {
    let values = grid
        .points()
        .map(|z| {
            specs
                .iter()
                .rev()
                .find_map(|inc| inc.value_at([z.re, z.im]))
                .unwrap_or(background)
        })
        .collect();
    ConductivityImage::new(grid, values, background)
}
