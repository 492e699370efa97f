//! Complex geometric optics solutions of the Beltrami equation
//! `∂̄f = ±μ·conj(∂f)` with `f = e^{ikz}M`, `M = 1 + O(1/|z|)`, and the
//! scattering data τ(k) built from them.
//!
//! The unknown is `ω = ∂̄M`, so `M = 1 + Cω` and `∂M = Sω` with the Cauchy
//! and Beurling transforms `C`, `S`. Substituting gives the real-linear equation
//!
//! ```text
//! ω ∓ μ·e₋ₖ·conj((S + ik·C) ω) = ∓ i·k̄·μ·e₋ₖ,      e₋ₖ(z) = exp(−2i·Re(kz))
//! ```
//!
//! Since ω vanishes where μ does, the unknowns live on the support nodes only.
//! `C` and `S` use kernels truncated to `|z| ≤ D` with `D` the box half-width;
//! for a support of radius ρ with `2ρ < D` the truncation is invisible on the
//! support and periodic images never reach it, so the FFT application is exact
//! for the trigonometric interpolant.


use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    dbar_derivative, solve_real_linear, ComplexField, Fft2, KrylovConfig, SquareGrid,
};
use crate::phantom::{ConductivityImage, SUPPORT_RADIUS};
use crate::scattering::{Flavor, ScatteringData};

/// Real Beltrami coefficient `μ = (1 − σ)/(1 + σ)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BeltramiCoefficient {
    grid: SquareGrid,
    values: Vec<f64>,
    kappa: f64,
}

impl BeltramiCoefficient {
    pub fn new(grid: SquareGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} coefficient values for a {}x{} grid",
                values.len(),
                grid.n(),
                grid.n()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "Beltrami coefficient",
                index,
            });
        }
        let kappa = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if kappa >= 1.0 {
            return Err(Error::Invalid(format!(
                "Beltrami coefficient must satisfy |μ| < 1, got {kappa}"
            )));
        }
        for (z, &v) in grid.points().zip(&values) {
            if v != 0.0 && z.norm() > SUPPORT_RADIUS {
                return Err(Error::Invalid(format!(
                    "Beltrami coefficient {v} at |z| = {:.3} outside the support radius",
                    z.norm()
                )));
            }
        }
        Ok(BeltramiCoefficient { grid, values, kappa })
    }

    pub fn grid(&self) -> &SquareGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `max |μ|`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `−μ`, the coefficient of `1/σ`.
    pub fn negated(&self) -> Self {
        BeltramiCoefficient {
            grid: self.grid,
            values: self.values.iter().map(|v| -v).collect(),
            kappa: self.kappa,
        }
    }
}

/// `μ = (1 − σ)/(1 + σ)` nodewise; σ must be scaled to a unit boundary value.
pub fn beltrami_coefficient(sigma: &ConductivityImage) -> Result<BeltramiCoefficient> {
    if !sigma.is_scaled() {
        return Err(Error::Invalid(
            "Beltrami coefficient needs a conductivity scaled to boundary value 1".into(),
        ));
    }
    let values = sigma.values().iter().map(|s| (1.0 - s) / (1.0 + s)).collect();
    BeltramiCoefficient::new(*sigma.grid(), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Computational box and solver settings for the CGO solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeltramiConfig {
    pub n: usize,
    pub half_width: f64,
    pub krylov: KrylovConfig,
}

impl Default for BeltramiConfig {
    fn default() -> Self {
        BeltramiConfig {
            n: 128,
            half_width: 2.1,
            krylov: KrylovConfig::default(),
        }
    }
}

impl BeltramiConfig {
    pub fn grid(&self) -> Result<SquareGrid> {
        SquareGrid::new(self.n, self.half_width)
    }
}

/// `M_{±μ}(·, k)` on the whole box together with `ω = ∂̄M`.
#[derive(Debug, Clone)]
pub struct CgoSolution {
    pub k: Complex64,
    pub sign: Sign,
    pub m: ComplexField,
    pub dbar_m: ComplexField,
    pub iterations: usize,
    pub residual: f64,
}

impl CgoSolution {
    /// Mean of `M` over the outermost ring of nodes of the box.
    pub fn boundary_band_mean(&self) -> Complex64 {
        let n = self.m.grid().n();
        let mut sum = Complex64::new(0.0, 0.0);
        let mut count = 0usize;
        for row in 0..n {
            for col in 0..n {
                if row < 2 || col < 2 || row >= n - 2 || col >= n - 2 {
                    sum += self.m.at(row, col);
                    count += 1;
                }
            }
        }
        sum / count as f64
    }
}

/// Fourier multipliers of the Cauchy and Beurling kernels truncated to `|z| ≤ d`,
/// at angular frequency `ξ = ξ₁ + iξ₂`.
pub(crate) fn truncated_multipliers(xi1: f64, xi2: f64, d: f64) -> (Complex64, Complex64) {
    let xi = Complex64::new(xi1, xi2);
    let r = xi.norm();
    if r == 0.0 {
        return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    }
    let x = r * d;
    let j0 = puruspe::Jn(0, x);
    let j1 = puruspe::Jn(1, x);
    let cauchy = Complex64::new(0.0, -2.0) * (1.0 - j0) / xi;
    let beurling = xi.conj() / xi * (1.0 - 2.0 * j1 / x);
    (cauchy, beurling)
}

/// Precomputed kernels and support bookkeeping for one coefficient μ; reused
/// across every `(k, sign)` solve.
pub struct CgoSolver {
    grid: SquareGrid,
    fft: Fft2,
    cauchy: Vec<Complex64>,
    beurling: Vec<Complex64>,
    support: Vec<usize>,
    mu: Vec<f64>,
    points: Vec<Complex64>,
}

impl CgoSolver {
    pub fn new(mu: &BeltramiCoefficient) -> Result<Self> {
        let grid = *mu.grid();
        let support: Vec<usize> = (0..grid.len()).filter(|&i| mu.values[i] != 0.0).collect();
        let rho = support
            .iter()
            .map(|&i| grid.point(i).norm())
            .fold(0.0, f64::max);
        let d = grid.half_width();
        if 2.0 * rho >= d {
            return Err(Error::Invalid(format!(
                "computational box half-width {d} must exceed twice the support radius {rho:.3}"
            )));
        }
        let n = grid.n();
        let mut cauchy = Vec::with_capacity(grid.len());
        let mut beurling = Vec::with_capacity(grid.len());
        for row in 0..n {
            for col in 0..n {
                let (c, s) = truncated_multipliers(grid.frequency(col), grid.frequency(row), d);
                cauchy.push(c);
                beurling.push(s);
            }
        }
        Ok(CgoSolver {
            grid,
            fft: Fft2::for_size(n),
            cauchy,
            beurling,
            mu: support.iter().map(|&i| mu.values[i]).collect(),
            points: support.iter().map(|&i| grid.point(i)).collect(),
            support,
        })
    }

    pub fn grid(&self) -> &SquareGrid {
        &self.grid
    }

    pub fn support_len(&self) -> usize {
        self.support.len()
    }

    /// Support node positions and coefficient values, in unknown order.
    pub fn support(&self) -> (&[Complex64], &[f64]) {
        (&self.points, &self.mu)
    }

    /// Flat grid indices of the support nodes.
    pub fn support_indices(&self) -> &[usize] {
        &self.support
    }

    /// Multiplier of `S + ik·C` at flat FFT bin `i`.
    pub fn q_multiplier(&self, k: Complex64, i: usize) -> Complex64 {
        self.beurling[i] + Complex64::new(0.0, 1.0) * k * self.cauchy[i]
    }

    /// `(S + ikC)ω` restricted to the support, for ω given on the support.
    fn apply_q(&self, k: Complex64, x: &[Complex64], out: &mut [Complex64]) {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (&i, v) in self.support.iter().zip(x) {
            buf[i] = *v;
        }
        self.fft.forward(&mut buf);
        let ik = Complex64::new(0.0, 1.0) * k;
        for ((b, c), s) in buf.iter_mut().zip(&self.cauchy).zip(&self.beurling) {
            *b *= s + ik * c;
        }
        self.fft.inverse(&mut buf);
        for (o, &i) in out.iter_mut().zip(&self.support) {
            *o = buf[i];
        }
    }

    /// `s·μ·e₋ₖ` at each support node.
    fn coefficients(&self, k: Complex64, sign: Sign) -> Vec<Complex64> {
        let s = sign.factor();
        self.points
            .iter()
            .zip(&self.mu)
            .map(|(z, &m)| {
                let phase = -2.0 * (k * z).re;
                Complex64::from_polar(s * m, phase)
            })
            .collect()
    }

    /// Solves for ω on the support.
    pub fn solve_omega(
        &self,
        k: Complex64,
        sign: Sign,
        cfg: &KrylovConfig,
    ) -> Result<(Vec<Complex64>, usize, f64)> {
        let coef = self.coefficients(k, sign);
        let rhs: Vec<Complex64> = coef
            .iter()
            .map(|c| Complex64::new(0.0, -1.0) * k.conj() * c)
            .collect();
        let dim = self.support.len();
        let op = (dim, |x: &[Complex64], out: &mut [Complex64]| {
            self.apply_q(k, x, out);
            for ((o, xi), c) in out.iter_mut().zip(x).zip(&coef) {
                *o = xi - c * o.conj();
            }
        });
        let sol = solve_real_linear(&op, &rhs, None, cfg)?;
        Ok((sol.x, sol.iterations, sol.residual))
    }

    /// Full solution `M = 1 + Cω` on the box.
    pub fn solve(&self, k: Complex64, sign: Sign, cfg: &KrylovConfig) -> Result<CgoSolution> {
        let (omega, iterations, residual) = self.solve_omega(k, sign, cfg)?;
        let mut w = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (&i, v) in self.support.iter().zip(&omega) {
            w[i] = *v;
        }
        let mut m = w.clone();
        self.fft.forward(&mut m);
        for (v, c) in m.iter_mut().zip(&self.cauchy) {
            *v *= c;
        }
        self.fft.inverse(&mut m);
        for v in m.iter_mut() {
            *v += 1.0;
        }
        Ok(CgoSolution {
            k,
            sign,
            m: ComplexField::new(self.grid, m)?,
            dbar_m: ComplexField::new(self.grid, w)?,
            iterations,
            residual,
        })
    }

    /// `τ(k)` from `conj τ = (1/2π) ∫ ∂̄(M₊ − M₋)`, with the integral taken over
    /// `|z| ≤ D/2` where the spectral `∂̄` of the truncated Cauchy transform
    /// reproduces ω.
    pub fn tau(&self, k: Complex64, cfg: &KrylovConfig) -> Result<Complex64> {
        if self.support.is_empty() || k.norm() == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let plus = self.solve(k, Sign::Plus, cfg)?;
        let minus = self.solve(k, Sign::Minus, cfg)?;
        let diff: Vec<Complex64> = plus
            .m
            .values()
            .iter()
            .zip(minus.m.values())
            .map(|(a, b)| a - b)
            .collect();
        let d = dbar_derivative(&ComplexField::new(self.grid, diff)?)?;
        let radius = 0.5 * self.grid.half_width();
        let sum: Complex64 = self
            .grid
            .points()
            .zip(d.values())
            .filter(|(z, _)| z.norm() <= radius)
            .map(|(_, v)| *v)
            .sum();
        let conj_tau = sum * self.grid.cell_area() / std::f64::consts::TAU;
        Ok(conj_tau.conj())
    }
}

/// Solves for `M_{±μ}(·, k)` on μ's grid.
pub fn solve_cgo(
    mu: &BeltramiCoefficient,
    k: Complex64,
    sign: Sign,
    cfg: &KrylovConfig,
) -> Result<CgoSolution> {
    if !(k.re.is_finite() && k.im.is_finite()) {
        return Err(Error::Invalid(format!("non-finite frequency {k}")));
    }
    CgoSolver::new(mu)?.solve(k, sign, cfg)
}

/// τ(k) on every node of `k_grid` with `|k|` at most the grid half-width;
/// zero elsewhere. Nodes are solved in parallel.
pub fn beltrami_scattering(
    mu: &BeltramiCoefficient,
    k_grid: SquareGrid,
    cfg: &KrylovConfig,
) -> Result<ScatteringData> {
    let radius = k_grid.half_width();
    let solver = CgoSolver::new(mu)?;
    let results: Vec<Result<Complex64>> = (0..k_grid.len())
        .into_par_iter()
        .map(|i| {
            let k = k_grid.point(i);
            if k.norm() > radius {
                Ok(Complex64::new(0.0, 0.0))
            } else {
                solver.tau(k, cfg)
            }
        })
        .collect();
    let total = results.len();
    let mut values = Vec::with_capacity(total);
    let mut failed = 0;
    let mut first = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => values.push(v),
            Err(e) => {
                failed += 1;
                first.get_or_insert_with(|| format!("k = {}: {e}", k_grid.point(i)));
                values.push(Complex64::new(0.0, 0.0));
            }
        }
    }
    if let Some(first) = first {
        return Err(Error::PartialFailure {
            failed,
            total,
            first,
        });
    }
    ScatteringData::new(k_grid, values, radius, Flavor::Tau)
}
