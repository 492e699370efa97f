//! Forward solver for the conductivity equation on a disc.
//!
//! Cell-centred finite volumes on a polar grid, `Nr` rings by `Nθ` sectors,
//! harmonic-mean face conductivities, Neumann data on the outer ring. The
//! singular system is solved by conjugate gradients on the mean-free subspace,
//! preconditioned by the constant-coefficient polar Laplacian (FFT in angle,
//! tridiagonal solve in radius).

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::layout::ElectrodeLayout;
use super::patterns::CurrentPatternBasis;
use crate::error::{Error, Result};
use crate::phantom::{ConductivityImage, Phantom};

/// Conductivity as a function on the unit disc (physical coordinates divided
/// by the boundary radius).
pub trait ConductivityField: Sync {
    fn conductivity(&self, x: f64, y: f64) -> f64;
}

impl ConductivityField for Phantom {
    fn conductivity(&self, x: f64, y: f64) -> f64 {
        self.value_at([x, y])
    }
}

/// Bilinear interpolation, clamped to the grid.
impl ConductivityField for ConductivityImage {
    fn conductivity(&self, x: f64, y: f64) -> f64 {
        let grid = self.grid();
        let n = grid.n();
        let (r, c) = grid.locate(Complex64::new(x, y));
        let r = r.clamp(0.0, (n - 1) as f64);
        let c = c.clamp(0.0, (n - 1) as f64);
        let (r0, c0) = ((r.floor() as usize).min(n - 2), (c.floor() as usize).min(n - 2));
        let (fr, fc) = (r - r0 as f64, c - c0 as f64);
        let v = self.values();
        let at = |i: usize, j: usize| v[grid.index(i, j)];
        (1.0 - fr) * ((1.0 - fc) * at(r0, c0) + fc * at(r0, c0 + 1))
            + fr * ((1.0 - fc) * at(r0 + 1, c0) + fc * at(r0 + 1, c0 + 1))
    }
}

/// Wraps a closure `(x, y) ↦ σ`.
pub struct FnField<F>(pub F);

impl<F: Fn(f64, f64) -> f64 + Sync> ConductivityField for FnField<F> {
    fn conductivity(&self, x: f64, y: f64) -> f64 {
        (self.0)(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElectrodeModel {
    /// Boundary current density is the trigonometric interpolant of
    /// `I_ℓ/|e_ℓ|` at the electrode centres; voltages are point values of the
    /// interpolated boundary potential. Needs equispaced electrodes.
    Continuum,
    /// Density `I_ℓ/|e_ℓ|` on each electrode arc and zero in the gaps;
    /// voltages are arc averages.
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardConfig {
    pub radial: usize,
    pub angular: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub model: ElectrodeModel,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        ForwardConfig {
            radial: 128,
            angular: 256,
            tol: 1e-10,
            max_iter: 5000,
            model: ElectrodeModel::Continuum,
        }
    }
}

/// Current-driven measurements: column `k` of `voltages` answers column `k`
/// of `currents` (`L × K`, amperes and volts).
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeData {
    pub currents: DMatrix<f64>,
    pub voltages: DMatrix<f64>,
}

struct PolarProblem {
    nr: usize,
    nt: usize,
    radius: f64,
    dr: f64,
    dt: f64,
    /// Radial face coefficient between rings `i` and `i+1`, index `i*nt + j`.
    radial: Vec<f64>,
    /// Angular face coefficient between sectors `j` and `j+1`, index `i*nt + j`.
    angular: Vec<f64>,
    /// Conductivity of the outer ring.
    outer: Vec<f64>,
    /// Neumann data (density per boundary sector) from electrode densities.
    to_density: DMatrix<f64>,
    /// Electrode voltages from boundary potentials.
    to_voltage: DMatrix<f64>,
    precond: Preconditioner,
}

struct Preconditioner {
    nr: usize,
    nt: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    lambda: Vec<f64>,
    shift: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Preconditioner {
    fn new(nr: usize, nt: usize, dr: f64, dt: f64) -> Self {
        let a: Vec<f64> = (0..nr.saturating_sub(1))
            .map(|i| (i as f64 + 1.0) * dr * dt / dr)
            .collect();
        let b: Vec<f64> = (0..nr).map(|i| dr / ((i as f64 + 0.5) * dr * dt)).collect();
        let lambda = (0..nt)
            .map(|m| 2.0 - 2.0 * (TAU * m as f64 / nt as f64).cos())
            .collect();
        let shift = 1e-10 * a.iter().cloned().fold(1.0, f64::max);
        let mut planner = FftPlanner::new();
        Preconditioner {
            nr,
            nt,
            a,
            b,
            lambda,
            shift,
            forward: planner.plan_fft_forward(nt),
            inverse: planner.plan_fft_inverse(nt),
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let (nr, nt) = (self.nr, self.nt);
        let mut data: Vec<Complex64> = r.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for ring in data.chunks_mut(nt) {
            self.forward.process_with_scratch(ring, &mut scratch);
        }
        let mut cp = vec![0.0; nr];
        let mut dp = vec![Complex64::new(0.0, 0.0); nr];
        for m in 0..nt {
            // Thomas algorithm on the radial tridiagonal system of mode m.
            let diag = |i: usize| {
                let mut d = self.lambda[m] * self.b[i];
                if i + 1 < nr {
                    d += self.a[i];
                }
                if i > 0 {
                    d += self.a[i - 1];
                }
                if m == 0 {
                    d += self.shift;
                }
                d
            };
            let mut prev_c = 0.0;
            let mut prev_d = Complex64::new(0.0, 0.0);
            for i in 0..nr {
                let lower = if i > 0 { -self.a[i - 1] } else { 0.0 };
                let upper = if i + 1 < nr { -self.a[i] } else { 0.0 };
                let denom = diag(i) - lower * prev_c;
                cp[i] = upper / denom;
                dp[i] = (data[i * nt + m] - prev_d * lower) / denom;
                prev_c = cp[i];
                prev_d = dp[i];
            }
            let mut next = Complex64::new(0.0, 0.0);
            for i in (0..nr).rev() {
                let v = dp[i] - next * cp[i];
                data[i * nt + m] = v;
                next = v;
            }
        }
        let scratch_len = self.inverse.get_inplace_scratch_len();
        scratch.resize(scratch_len.max(scratch.len()), Complex64::new(0.0, 0.0));
        for ring in data.chunks_mut(nt) {
            self.inverse.process_with_scratch(ring, &mut scratch);
        }
        let scale = 1.0 / nt as f64;
        for (zi, d) in z.iter_mut().zip(&data) {
            *zi = d.re * scale;
        }
        remove_mean(z);
    }
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Dirichlet-kernel weight for trigonometric interpolation from `n`
/// equispaced samples, evaluated at angular offset `d`.
fn dirichlet(n: usize, d: f64) -> f64 {
    let mut s = 1.0;
    let half = n / 2;
    for m in 1..=half {
        let w = if 2 * m == n { 1.0 } else { 2.0 };
        s += w * (m as f64 * d).cos();
    }
    s / n as f64
}

/// Length of the overlap of arcs `[a0, a1]` and `[b0, b1]` on the circle.
fn arc_overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    let mut total = 0.0;
    for shift in [-TAU, 0.0, TAU] {
        let lo = a0.max(b0 + shift);
        let hi = a1.min(b1 + shift);
        if hi > lo {
            total += hi - lo;
        }
    }
    total
}

impl PolarProblem {
    fn new(
        sigma: &dyn ConductivityField,
        layout: &ElectrodeLayout,
        cfg: &ForwardConfig,
    ) -> Result<Self> {
        let radius = layout.circle_radius().ok_or_else(|| {
            Error::Unsupported("the forward solver handles circular boundaries only".into())
        })?;
        if cfg.radial < 4 || cfg.angular < 8 || cfg.angular % 2 != 0 {
            return Err(Error::Invalid(format!(
                "forward grid needs radial >= 4 and even angular >= 8, got {} x {}",
                cfg.radial, cfg.angular
            )));
        }
        if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
            return Err(Error::Invalid("forward solver needs tol > 0 and max_iter > 0".into()));
        }
        let (nr, nt) = (cfg.radial, cfg.angular);
        let dr = radius / nr as f64;
        let dt = TAU / nt as f64;

        let cells: Vec<f64> = (0..nr * nt)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / nt, idx % nt);
                let r = (i as f64 + 0.5) / nr as f64;
                let t = j as f64 * dt;
                sigma.conductivity(r * t.cos(), r * t.sin())
            })
            .collect();
        if let Some(index) = cells.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Invalid(format!(
                "conductivity must be positive and finite, got {} at forward cell {index}",
                cells[index]
            )));
        }

        let mut radial = vec![0.0; nr * nt];
        let mut angular = vec![0.0; nr * nt];
        for i in 0..nr {
            let ri = (i as f64 + 0.5) * dr;
            for j in 0..nt {
                let c = i * nt + j;
                let jn = (j + 1) % nt;
                angular[c] = harmonic(cells[c], cells[i * nt + jn]) * dr / (ri * dt);
                if i + 1 < nr {
                    let face = (i as f64 + 1.0) * dr;
                    radial[c] = harmonic(cells[c], cells[c + nt]) * face * dt / dr;
                }
            }
        }
        let outer = cells[(nr - 1) * nt..].to_vec();

        let l = layout.len();
        let angles: Vec<f64> = layout
            .electrodes()
            .iter()
            .map(|e| e.center / radius)
            .collect();
        let widths: Vec<f64> = layout.widths().iter().map(|w| w / radius).collect();
        let (to_density, to_voltage) = match cfg.model {
            ElectrodeModel::Continuum => {
                let step = TAU / l as f64;
                let equispaced = angles
                    .iter()
                    .enumerate()
                    .all(|(k, a)| (a - angles[0] - k as f64 * step).abs() < 1e-9);
                if !equispaced {
                    return Err(Error::Unsupported(
                        "the continuum electrode model needs equispaced electrodes".into(),
                    ));
                }
                let dens = DMatrix::from_fn(nt, l, |j, e| dirichlet(l, j as f64 * dt - angles[e]));
                let volt = DMatrix::from_fn(l, nt, |e, j| dirichlet(nt, angles[e] - j as f64 * dt));
                (dens, volt)
            }
            ElectrodeModel::Gap => {
                let overlap = DMatrix::from_fn(nt, l, |j, e| {
                    let c = j as f64 * dt;
                    arc_overlap(
                        c - 0.5 * dt,
                        c + 0.5 * dt,
                        angles[e] - 0.5 * widths[e],
                        angles[e] + 0.5 * widths[e],
                    )
                });
                // Density averaged over each sector.
                let dens = overlap.map(|o| o / dt);
                let volt = DMatrix::from_fn(l, nt, |e, j| overlap[(j, e)] / widths[e]);
                (dens, volt)
            }
        };

        Ok(PolarProblem {
            nr,
            nt,
            radius,
            dr,
            dt,
            radial,
            angular,
            outer,
            to_density,
            to_voltage,
            precond: Preconditioner::new(nr, nt, dr, dt),
        })
    }

    fn apply(&self, u: &[f64], y: &mut [f64]) {
        let (nr, nt) = (self.nr, self.nt);
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..nr {
            for j in 0..nt {
                let c = i * nt + j;
                let jn = i * nt + (j + 1) % nt;
                let fa = self.angular[c] * (u[c] - u[jn]);
                y[c] += fa;
                y[jn] -= fa;
                if i + 1 < nr {
                    let fr = self.radial[c] * (u[c] - u[c + nt]);
                    y[c] += fr;
                    y[c + nt] -= fr;
                }
            }
        }
    }

    /// Electrode voltages (mean-free) for electrode densities `I_ℓ/|e_ℓ|`.
    fn solve(&self, density: &[f64], cfg: &ForwardConfig) -> Result<Vec<f64>> {
        let (nr, nt) = (self.nr, self.nt);
        let n = nr * nt;
        let q: Vec<f64> = (0..nt)
            .map(|j| (0..density.len()).map(|e| self.to_density[(j, e)] * density[e]).sum())
            .collect();
        let mut b = vec![0.0; n];
        for j in 0..nt {
            b[(nr - 1) * nt + j] = q[j] * self.radius * self.dt;
        }
        // Removes any net flux left by unequal electrode widths.
        remove_mean(&mut b);
        let bnorm = dot(&b, &b).sqrt();
        let mut u = vec![0.0; n];
        if bnorm > 0.0 {
            let mut r = b.clone();
            let mut z = vec![0.0; n];
            self.precond.apply(&r, &mut z);
            let mut p = z.clone();
            let mut ap = vec![0.0; n];
            let mut rz = dot(&r, &z);
            let mut converged = false;
            let mut iterations = 0;
            let mut rel = 1.0;
            while iterations < cfg.max_iter {
                self.apply(&p, &mut ap);
                let alpha = rz / dot(&p, &ap);
                for k in 0..n {
                    u[k] += alpha * p[k];
                    r[k] -= alpha * ap[k];
                }
                iterations += 1;
                rel = dot(&r, &r).sqrt() / bnorm;
                if rel <= cfg.tol {
                    converged = true;
                    break;
                }
                self.precond.apply(&r, &mut z);
                let rz_new = dot(&r, &z);
                let beta = rz_new / rz;
                rz = rz_new;
                for k in 0..n {
                    p[k] = z[k] + beta * p[k];
                }
            }
            if !converged {
                return Err(Error::NotConverged {
                    iterations,
                    residual: rel,
                });
            }
        }
        // Boundary potential from the outer ring and the Neumann condition.
        let boundary: Vec<f64> = (0..nt)
            .map(|j| u[(nr - 1) * nt + j] + 0.5 * self.dr * q[j] / self.outer[j])
            .collect();
        let mut v: Vec<f64> = (0..self.to_voltage.nrows())
            .map(|e| (0..nt).map(|j| self.to_voltage[(e, j)] * boundary[j]).sum())
            .collect();
        remove_mean(&mut v);
        if let Some(index) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "simulated voltages",
                index,
            });
        }
        Ok(v)
    }
}

/// Simulates current-driven electrode data for `sigma` on a circular layout.
///
/// The currents are the basis patterns themselves (amperes), the voltages are
/// mean-free.
pub fn simulate_electrode_data(
    sigma: &dyn ConductivityField,
    layout: &ElectrodeLayout,
    basis: &CurrentPatternBasis,
    cfg: &ForwardConfig,
) -> Result<ElectrodeData> {
    if basis.electrodes() != layout.len() {
        return Err(Error::Invalid(format!(
            "basis has {} electrodes, layout has {}",
            basis.electrodes(),
            layout.len()
        )));
    }
    let problem = PolarProblem::new(sigma, layout, cfg)?;
    let widths = layout.widths();
    let currents = basis.patterns().clone();
    let columns: Vec<Vec<f64>> = currents
        .column_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|col| {
            let density: Vec<f64> = col.iter().zip(&widths).map(|(i, w)| i / w).collect();
            problem.solve(&density, cfg)
        })
        .collect::<Result<_>>()?;
    let voltages = DMatrix::from_fn(layout.len(), columns.len(), |r, c| columns[c][r]);
    Ok(ElectrodeData { currents, voltages })
}

/// Voltage-driven data from the same discrete model: returns the measured
/// currents (`L × K`) for each applied voltage column. Uses linearity of the
/// current-driven model over a full trigonometric basis.
pub fn simulate_voltage_driven(
    sigma: &dyn ConductivityField,
    layout: &ElectrodeLayout,
    applied: &DMatrix<f64>,
    cfg: &ForwardConfig,
) -> Result<DMatrix<f64>> {
    let full = CurrentPatternBasis::trigonometric(layout.len())?;
    let data = simulate_electrode_data(sigma, layout, &full, cfg)?;
    let mut target = applied.clone();
    for mut col in target.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let svd = data.voltages.clone().svd(true, true);
    let coeffs = svd
        .solve(&target, 0.0)
        .map_err(|e| Error::Singular(e.to_string()))?;
    Ok(data.currents * coeffs)
}
