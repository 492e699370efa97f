use num_complex::Complex64;

use super::data::{Flavor, ScatteringData};
use crate::error::{Error, Result};
use crate::numerics::SquareGrid;

/// Default componentwise cutoff on T.
pub const DEFAULT_THRESHOLD: f64 = 24.0;

/// `T(k) = −4πi·k̄·τ(k)`.
pub fn tau_to_t(tau: &ScatteringData) -> Result<ScatteringData> {
    if tau.flavor() != Flavor::Tau {
        return Err(Error::Invalid(format!(
            "tau_to_t expects τ data, got {:?}",
            tau.flavor()
        )));
    }
    let factor = Complex64::new(0.0, -4.0 * std::f64::consts::PI);
    let grid = *tau.grid();
    let values = grid
        .points()
        .zip(tau.values())
        .map(|(k, t)| factor * k.conj() * t)
        .collect();
    ScatteringData::new(grid, values, tau.radius(), Flavor::T)
}

/// Inverse of [`tau_to_t`] away from `k = 0`; the origin maps to 0.
pub fn t_to_tau(t: &ScatteringData) -> Result<ScatteringData> {
    if t.flavor() == Flavor::Tau {
        return Err(Error::Invalid("t_to_tau expects T data".into()));
    }
    let factor = Complex64::new(0.0, -4.0 * std::f64::consts::PI);
    let grid = *t.grid();
    let values = grid
        .points()
        .zip(t.values())
        .map(|(k, v)| {
            if k.norm() == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                v / (factor * k.conj())
            }
        })
        .collect();
    ScatteringData::new(grid, values, t.radius(), Flavor::Tau)
}

/// Zeroes nodes with `|Re T| > thresh`, `|Im T| > thresh` or `|k| > radius`.
pub fn truncate_threshold(t: &ScatteringData, radius: f64, thresh: f64) -> Result<ScatteringData> {
    if !(radius > 0.0 && radius <= t.radius()) {
        return Err(Error::Invalid(format!(
            "truncation radius {radius} must lie in (0, {}]",
            t.radius()
        )));
    }
    if !(thresh > 0.0) {
        return Err(Error::Invalid(format!("threshold must be positive, got {thresh}")));
    }
    let values = t
        .values()
        .iter()
        .map(|v| {
            if v.re.abs() > thresh || v.im.abs() > thresh {
                Complex64::new(0.0, 0.0)
            } else {
                *v
            }
        })
        .collect();
    ScatteringData::new(*t.grid(), values, radius, t.flavor())
}

/// Bilinear interpolation of real and imaginary parts onto `new_grid`. Points
/// outside the source node range read as 0.
pub fn resample(t: &ScatteringData, new_grid: SquareGrid) -> Result<ScatteringData> {
    let src = t.grid();
    let n = src.n();
    let zero = Complex64::new(0.0, 0.0);
    let values = new_grid
        .points()
        .map(|k| {
            let (r, c) = src.locate(k);
            let last = (n - 1) as f64;
            let eps = 1e-9;
            if r < -eps || c < -eps || r > last + eps || c > last + eps {
                return zero;
            }
            let (r, c) = (r.clamp(0.0, last), c.clamp(0.0, last));
            let (r0, c0) = ((r.floor() as usize).min(n - 2), (c.floor() as usize).min(n - 2));
            let (fr, fc) = (r - r0 as f64, c - c0 as f64);
            let v = |rr: usize, cc: usize| t.values()[src.index(rr, cc)];
            v(r0, c0) * ((1.0 - fr) * (1.0 - fc))
                + v(r0, c0 + 1) * ((1.0 - fr) * fc)
                + v(r0 + 1, c0) * (fr * (1.0 - fc))
                + v(r0 + 1, c0 + 1) * (fr * fc)
        })
        .collect();
    let radius = t.radius().min(new_grid.half_width());
    ScatteringData::new(new_grid, values, radius, t.flavor())
}
