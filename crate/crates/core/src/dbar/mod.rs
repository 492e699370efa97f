//! The Schrödinger `∂̄ₖ` equation in integral form,
//!
//! ```text
//! m(z, κ) = 1 + (1/π) ∫ a_z(k)·conj(m(z, k)) / (κ − k) dk,   a_z(k) = T(k)·e(z, −k) / (4π k̄)
//! ```
//!
//! with `e(z, −k) = exp(−2i·Re(kz))`, solved on the k-grid of the data for each
//! image point z. Unknowns are the data nodes with `|k| ≤ R`; the Green kernel
//! `1/(πk)` is sampled on a periodic box of twice the data half-width, which is
//! large enough that every pair of unknowns sees its true separation, and is
//! set to 0 at the origin.


use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{solve_real_linear, Fft2, KernelSpectrum, KrylovConfig, SquareGrid};
use crate::scattering::{Flavor, ScatteringData};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbarSolveConfig {
    pub z_grid: SquareGrid,
    pub krylov: KrylovConfig,
}

impl Default for DbarSolveConfig {
    fn default() -> Self {
        DbarSolveConfig {
            z_grid: SquareGrid::new(64, 1.0).expect("valid default grid"),
            krylov: KrylovConfig::default(),
        }
    }
}

/// `m(z, 0)` for every z node and `σ_DB = σ_b·(Re m)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowPassReconstruction {
    pub grid: SquareGrid,
    pub m0: Vec<Complex64>,
    pub sigma_db: Vec<f64>,
    pub sigma_b: f64,
    /// Nodes whose solve failed; their `σ_DB` is set to `σ_b`.
    pub masked: Vec<usize>,
}

impl LowPassReconstruction {
    /// `max |Im m| / |Re m|` over unmasked nodes.
    pub fn max_imag_ratio(&self) -> f64 {
        self.m0
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.masked.contains(i))
            .map(|(_, m)| m.im.abs() / m.re.abs())
            .fold(0.0, f64::max)
    }

    /// True when some node has `|Im m| > 0.1·|Re m|`.
    pub fn imag_flagged(&self) -> bool {
        self.max_imag_ratio() > 0.1
    }

    /// Number of nodes with `Re m(z, 0) ≤ 0`.
    pub fn nonpositive_count(&self) -> usize {
        self.m0.iter().filter(|m| m.re <= 0.0).count()
    }
}

/// Shared per-T state: the Green kernel spectrum on the padded box and the
/// unknown nodes.
pub struct DbarSolver {
    padded: SquareGrid,
    kernel: KernelSpectrum,
    fft: Fft2,
    /// Padded-grid index of every unknown.
    slots: Vec<usize>,
    k: Vec<Complex64>,
    /// `T(k)/(4π k̄)` at each unknown, 0 at the origin.
    weight: Vec<Complex64>,
    origin: usize,
}

impl DbarSolver {
    pub fn new(t: &ScatteringData) -> Result<Self> {
        if t.flavor() == Flavor::Tau {
            return Err(Error::Invalid(
                "the ∂̄ₖ solve needs T or t^exp data, not τ".into(),
            ));
        }
        let data = *t.grid();
        let n = data.n();
        let padded = SquareGrid::new(2 * n, 2.0 * data.half_width())?;
        let kernel = KernelSpectrum::from_kernel(padded, |d| {
            if d.norm() == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                1.0 / (std::f64::consts::PI * d)
            }
        });
        let shift = n / 2;
        let mut slots = Vec::new();
        let mut k = Vec::new();
        let mut weight = Vec::new();
        let mut origin = None;
        for row in 0..n {
            for col in 0..n {
                let idx = data.index(row, col);
                let kk = data.point(idx);
                if kk.norm() > t.radius() {
                    continue;
                }
                if idx == data.origin_index() {
                    origin = Some(slots.len());
                }
                slots.push(padded.index(row + shift, col + shift));
                k.push(kk);
                weight.push(if kk.norm() == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    t.values()[idx] / (4.0 * std::f64::consts::PI * kk.conj())
                });
            }
        }
        let origin = origin.expect("the origin lies within any positive radius");
        Ok(DbarSolver {
            padded,
            kernel,
            fft: Fft2::for_size(2 * n),
            slots,
            k,
            weight,
            origin,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.slots.len()
    }

    /// Unknown k nodes and their weights `T/(4πk̄)`.
    pub fn nodes(&self) -> (&[Complex64], &[Complex64]) {
        (&self.k, &self.weight)
    }

    /// `a_z(k)` at the unknowns.
    pub fn coefficients(&self, z: Complex64) -> Vec<Complex64> {
        self.k
            .iter()
            .zip(&self.weight)
            .map(|(k, w)| w * Complex64::from_polar(1.0, -2.0 * (k * z).re))
            .collect()
    }

    /// `m(z, ·)` at the unknowns, with iteration count and residual.
    pub fn solve_m(&self, z: Complex64, cfg: &KrylovConfig) -> Result<(Vec<Complex64>, usize, f64)> {
        let a = self.coefficients(z);
        let dim = self.slots.len();
        let rhs = vec![Complex64::new(0.0, 0.0) + 1.0; dim];
        if a.iter().all(|v| v.norm() == 0.0) {
            return Ok((rhs, 0, 0.0));
        }
        let area = self.padded.cell_area();
        let op = (dim, |x: &[Complex64], out: &mut [Complex64]| {
            let mut buf = vec![Complex64::new(0.0, 0.0); self.padded.len()];
            for ((&s, ai), xi) in self.slots.iter().zip(&a).zip(x) {
                buf[s] = ai * xi.conj();
            }
            self.fft.forward(&mut buf);
            for (b, kf) in buf.iter_mut().zip(self.kernel.values()) {
                *b *= kf * area;
            }
            self.fft.inverse(&mut buf);
            for ((o, &s), xi) in out.iter_mut().zip(&self.slots).zip(x) {
                *o = xi - buf[s];
            }
        });
        let sol = solve_real_linear(&op, &rhs, None, cfg)?;
        Ok((sol.x, sol.iterations, sol.residual))
    }

    /// `m(z, 0)`.
    pub fn solve_at(&self, z: Complex64, cfg: &KrylovConfig) -> Result<Complex64> {
        let (m, _, _) = self.solve_m(z, cfg)?;
        Ok(m[self.origin])
    }
}

/// `m(z, 0)` for one image point.
pub fn solve_dbar_at(z: Complex64, t: &ScatteringData, cfg: &DbarSolveConfig) -> Result<Complex64> {
    DbarSolver::new(t)?.solve_at(z, &cfg.krylov)
}

/// Largest tolerated fraction of failed z nodes.
pub const MAX_FAILED_FRACTION: f64 = 0.01;

/// Solves at every node of `cfg.z_grid` (in parallel) and forms
/// `σ_DB = σ_b·(Re m(z, 0))²`.
pub fn reconstruct(t: &ScatteringData, sigma_b: f64, cfg: &DbarSolveConfig) -> Result<LowPassReconstruction> {
    if !(sigma_b.is_finite() && sigma_b > 0.0) {
        return Err(Error::Invalid(format!("σ_b must be positive, got {sigma_b}")));
    }
    let solver = DbarSolver::new(t)?;
    let grid = cfg.z_grid;
    let results: Vec<Result<Complex64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| solver.solve_at(grid.point(i), &cfg.krylov))
        .collect();
    let mut m0 = Vec::with_capacity(grid.len());
    let mut masked = Vec::new();
    let mut first = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(m) => m0.push(m),
            Err(e) => {
                first.get_or_insert_with(|| format!("z = {}: {e}", grid.point(i)));
                masked.push(i);
                m0.push(Complex64::new(1.0, 0.0));
            }
        }
    }
    if masked.len() as f64 > MAX_FAILED_FRACTION * grid.len() as f64 {
        return Err(Error::PartialFailure {
            failed: masked.len(),
            total: grid.len(),
            first: first.unwrap_or_default(),
        });
    }
    let sigma_db = m0.iter().map(|m| sigma_b * m.re * m.re).collect();
    Ok(LowPassReconstruction {
        grid,
        m0,
        sigma_db,
        sigma_b,
        masked,
    })
}
