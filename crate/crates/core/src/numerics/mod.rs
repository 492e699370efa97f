//! Grids, spectral derivatives, FFT convolution and the real-linear Krylov
//! solver shared by the Beltrami and D-bar solvers.

mod fft;
mod grid;
mod krylov;
mod spectral;

pub use fft::Fft2;
pub use grid::{ComplexField, SquareGrid};
pub use krylov::{solve_real_linear, KrylovConfig, KrylovSolution, RealLinearOperator};
pub use spectral::{dbar_derivative, dbar_inverse, periodic_convolve, KernelSpectrum};

#[cfg(test)]
mod tests;
