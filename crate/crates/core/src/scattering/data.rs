use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexField, SquareGrid};

/// Which transform a [`ScatteringData`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// Beltrami scattering data τ(k).
    Tau,
    /// Schrödinger scattering transform T(k).
    T,
    /// Boundary-data approximation of T.
    Texp,
}

/// Scattering data on a k-grid, zero outside `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringData {
    field: ComplexField,
    radius: f64,
    flavor: Flavor,
}

impl ScatteringData {
    /// Wraps `values`, zeroing every node with `|k| > radius`.
    pub fn new(grid: SquareGrid, values: Vec<Complex64>, radius: f64, flavor: Flavor) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Invalid(format!("truncation radius must be positive, got {radius}")));
        }
        let mut field = ComplexField::new(grid, values)?;
        let zero = Complex64::new(0.0, 0.0);
        for (i, k) in grid.points().enumerate() {
            if k.norm() > radius {
                field.values_mut()[i] = zero;
            }
        }
        Ok(ScatteringData { field, radius, flavor })
    }

    pub fn zeros(grid: SquareGrid, radius: f64, flavor: Flavor) -> Result<Self> {
        Self::new(grid, vec![Complex64::new(0.0, 0.0); grid.len()], radius, flavor)
    }

    pub fn from_fn(
        grid: SquareGrid,
        radius: f64,
        flavor: Flavor,
        f: impl Fn(Complex64) -> Complex64,
    ) -> Result<Self> {
        Self::new(grid, grid.points().map(f).collect(), radius, flavor)
    }

    pub fn grid(&self) -> &SquareGrid {
        self.field.grid()
    }

    pub fn values(&self) -> &[Complex64] {
        self.field.values()
    }

    pub fn field(&self) -> &ComplexField {
        &self.field
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn max_abs(&self) -> f64 {
        self.field.max_abs()
    }

    /// Value at the node nearest to `k` (exact for on-grid points).
    pub fn at(&self, k: Complex64) -> Complex64 {
        let g = self.grid();
        let (r, c) = g.locate(k);
        let (r, c) = (r.round() as isize, c.round() as isize);
        let n = g.n() as isize;
        if r < 0 || c < 0 || r >= n || c >= n {
            return Complex64::new(0.0, 0.0);
        }
        self.values()[g.index(r as usize, c as usize)]
    }
}
