use num_complex::Complex64;

use super::fft::Fft2;
use super::grid::{ComplexField, SquareGrid};
use crate::error::{Error, Result};

fn check_finite(f: &ComplexField, what: &'static str) -> Result<()> {
    match f
        .values()
        .iter()
        .position(|v| !(v.re.is_finite() && v.im.is_finite()))
    {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

/// Fourier symbol of `∂̄ = ½(∂x + i∂y)` at FFT bin `(row, col)`.
fn dbar_symbol(grid: &SquareGrid, row: usize, col: usize) -> Complex64 {
    let xi1 = grid.frequency(col);
    let xi2 = grid.frequency(row);
    Complex64::new(-0.5 * xi2, 0.5 * xi1)
}

/// Spectral `∂̄f` of a field treated as periodic on the grid torus.
pub fn dbar_derivative(f: &ComplexField) -> Result<ComplexField> {
    check_finite(f, "dbar_derivative input")?;
    let grid = *f.grid();
    let n = grid.n();
    let fft = Fft2::for_size(n);
    let mut data = f.values().to_vec();
    fft.forward(&mut data);
    for row in 0..n {
        for col in 0..n {
            data[row * n + col] *= dbar_symbol(&grid, row, col);
        }
    }
    fft.inverse(&mut data);
    ComplexField::new(grid, data)
}

/// Periodic inverse of [`dbar_derivative`]: divides by the `∂̄` symbol and
/// zeroes the mean mode, so it recovers zero-mean fields.
pub fn dbar_inverse(f: &ComplexField) -> Result<ComplexField> {
    check_finite(f, "dbar_inverse input")?;
    let grid = *f.grid();
    let n = grid.n();
    let fft = Fft2::for_size(n);
    let mut data = f.values().to_vec();
    fft.forward(&mut data);
    for row in 0..n {
        for col in 0..n {
            let s = dbar_symbol(&grid, row, col);
            let v = &mut data[row * n + col];
            *v = if row == 0 && col == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                *v / s
            };
        }
    }
    fft.inverse(&mut data);
    ComplexField::new(grid, data)
}

/// Transform-domain kernel for [`periodic_convolve`].
///
/// Holds `K = FFT(kernel samples)` so that convolution is
/// `cellArea · IFFT(K ⊙ FFT(f))`, i.e. the discrete sum approximating
/// `∫ kernel(z - w) f(w) dw`.
#[derive(Debug, Clone)]
pub struct KernelSpectrum {
    field: ComplexField,
}

impl KernelSpectrum {
    pub fn from_field(field: ComplexField) -> Self {
        KernelSpectrum { field }
    }

    /// Samples `kernel(d)` at every wrap-around displacement `d` of the grid and
    /// transforms. The caller decides the value at `d = 0`.
    pub fn from_kernel(grid: SquareGrid, kernel: impl Fn(Complex64) -> Complex64) -> Self {
        let n = grid.n();
        let mut data = Vec::with_capacity(grid.len());
        for row in 0..n {
            for col in 0..n {
                data.push(kernel(Complex64::new(
                    grid.displacement(col),
                    grid.displacement(row),
                )));
            }
        }
        Fft2::for_size(n).forward(&mut data);
        KernelSpectrum {
            field: ComplexField::new(grid, data).expect("kernel samples must be finite"),
        }
    }

    /// Builds the spectrum from a continuous Fourier multiplier `m(ξ₁, ξ₂)`, so that
    /// convolution applies `m` to the trigonometric interpolant of the input.
    pub fn from_multiplier(grid: SquareGrid, multiplier: impl Fn(f64, f64) -> Complex64) -> Self {
        let n = grid.n();
        let inv_area = 1.0 / grid.cell_area();
        let mut data = Vec::with_capacity(grid.len());
        for row in 0..n {
            for col in 0..n {
                data.push(multiplier(grid.frequency(col), grid.frequency(row)) * inv_area);
            }
        }
        KernelSpectrum {
            field: ComplexField::new(grid, data).expect("multiplier must be finite"),
        }
    }

    pub fn grid(&self) -> &SquareGrid {
        self.field.grid()
    }

    pub fn values(&self) -> &[Complex64] {
        self.field.values()
    }

    /// In-place convolution of raw samples on this kernel's grid.
    pub fn apply_in_place(&self, data: &mut [Complex64]) {
        let grid = self.field.grid();
        let fft = Fft2::for_size(grid.n());
        fft.forward(data);
        let area = grid.cell_area();
        for (v, k) in data.iter_mut().zip(self.field.values()) {
            *v *= k * area;
        }
        fft.inverse(data);
    }
}

/// Periodic convolution of `f` with the kernel whose spectrum is given.
pub fn periodic_convolve(kernel: &KernelSpectrum, f: &ComplexField) -> Result<ComplexField> {
    if !kernel.grid().same_as(f.grid()) {
        return Err(Error::GridMismatch(format!(
            "kernel grid {}x{} on half-width {} vs field grid {}x{} on half-width {}",
            kernel.grid().n(),
            kernel.grid().n(),
            kernel.grid().half_width(),
            f.grid().n(),
            f.grid().n(),
            f.grid().half_width()
        )));
    }
    check_finite(f, "periodic_convolve input")?;
    let mut data = f.values().to_vec();
    kernel.apply_in_place(&mut data);
    ComplexField::new(*f.grid(), data)
}
