use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[-h, h)²`.
///
/// Node `j` along an axis sits at `-h + j·spacing` with `spacing = 2h/n`, so the
/// origin is always the node `(n/2, n/2)`. Values are stored row-major: the row
/// index runs along the imaginary (second) axis, the column index along the real
/// axis, `index = row·n + col`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquareGrid {
    n: usize,
    half_width: f64,
}

impl SquareGrid {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Invalid(format!(
                "grid size must be a power of two >= 16, got {n}"
            )));
        }
        Self::with_any_size(n, half_width)
    }

    /// Same as [`SquareGrid::new`] but accepts any even `n >= 4`. Used for tiny
    /// oracle problems where a power of two above 16 would be too large.
    pub fn with_any_size(n: usize, half_width: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::Invalid(format!("grid size must be even, got {n}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Invalid(format!(
                "grid half-width must be positive, got {half_width}"
            )));
        }
        Ok(SquareGrid { n, half_width })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn cell_area(&self) -> f64 {
        let s = self.spacing();
        s * s
    }

    /// Coordinate of node `j` along either axis.
    pub fn coord(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    pub fn origin_index(&self) -> usize {
        self.index(self.n / 2, self.n / 2)
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.n + col
    }

    /// Complex coordinate `x + iy` of the node at flat index `idx`.
    pub fn point(&self, idx: usize) -> Complex64 {
        let (row, col) = (idx / self.n, idx % self.n);
        Complex64::new(self.coord(col), self.coord(row))
    }

    pub fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Angular frequency associated with FFT bin `p` (standard wrap-around order).
    pub fn frequency(&self, p: usize) -> f64 {
        let n = self.n as isize;
        let signed = if (p as isize) < n / 2 {
            p as isize
        } else {
            p as isize - n
        };
        std::f64::consts::PI * signed as f64 / self.half_width
    }

    /// Signed displacement represented by wrap-around bin `p`.
    pub fn displacement(&self, p: usize) -> f64 {
        let n = self.n as isize;
        let signed = if (p as isize) < n / 2 {
            p as isize
        } else {
            p as isize - n
        };
        signed as f64 * self.spacing()
    }

    /// Fractional node coordinates of a point, `(row, col)`.
    pub fn locate(&self, z: Complex64) -> (f64, f64) {
        let s = self.spacing();
        (
            (z.im + self.half_width) / s,
            (z.re + self.half_width) / s,
        )
    }

    pub fn same_as(&self, other: &SquareGrid) -> bool {
        self.n == other.n && (self.half_width - other.half_width).abs() <= 1e-12 * self.half_width
    }
}

/// Complex samples, one per node of a [`SquareGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: SquareGrid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: SquareGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.n(),
                grid.n()
            )));
        }
        if let Some(index) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite {
                what: "complex field",
                index,
            });
        }
        Ok(ComplexField { grid, values })
    }

    pub fn zeros(grid: SquareGrid) -> Self {
        ComplexField {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: SquareGrid, f: impl Fn(Complex64) -> Complex64) -> Result<Self> {
        Self::new(grid, grid.points().map(f).collect())
    }

    pub fn grid(&self) -> &SquareGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.values[self.grid.index(row, col)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}
