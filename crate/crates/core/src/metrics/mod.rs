//! SSIM, relative ℓ1/ℓ2 image errors and truth images built from region
//! outlines with measured conductivities.

mod truth;

pub use truth::{act4_truth_spec, build_truth_image, RegionValue, TruthRegion, TruthSpec, TruthSplit};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SquareGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    /// Side of the square Gaussian window (odd).
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range `L`; the truth image's `max − min` when absent.
    pub dynamic_range: Option<f64>,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    /// Every node of the square image.
    Full,
    /// Nodes with `|z| ≤ 1`.
    Disc,
}

impl std::str::FromStr for MaskKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(MaskKind::Full),
            "disc" => Ok(MaskKind::Disc),
            other => Err(format!("unknown mask '{other}' (expected full or disc)")),
        }
    }
}

impl MaskKind {
    pub fn nodes(self, grid: &SquareGrid) -> Vec<bool> {
        match self {
            MaskKind::Full => vec![true; grid.len()],
            MaskKind::Disc => grid.points().map(|z| z.norm() <= 1.0).collect(),
        }
    }
}

fn check_pair(a: &[f64], b: &[f64], n: usize) -> Result<()> {
    if a.len() != n * n || b.len() != n * n {
        return Err(Error::GridMismatch(format!(
            "images must be {n}x{n}, got {} and {} values",
            a.len(),
            b.len()
        )));
    }
    if let Some(index) = a.iter().chain(b).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "image",
            index: index % (n * n),
        });
    }
    Ok(())
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let mut w: Vec<f64> = (0..size * size)
        .map(|i| {
            let (r, s) = ((i / size) as f64 - c, (i % size) as f64 - c);
            (-(r * r + s * s) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Dynamic range used when none is given: the truth's `max − min`, falling
/// back to its largest magnitude (or 1) for a constant image.
pub fn default_dynamic_range(truth: &[f64]) -> f64 {
    let max = truth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = truth.iter().cloned().fold(f64::INFINITY, f64::min);
    if max > min {
        max - min
    } else if max.abs() > 0.0 {
        max.abs()
    } else {
        1.0
    }
}

/// Mean local SSIM of `recon` against `truth` (both `n × n`, row-major) over
/// all fully-contained windows whose centre lies in `mask`.
pub fn ssim(recon: &[f64], truth: &[f64], n: usize, params: &SsimParams, mask: Option<&[bool]>) -> Result<f64> {
    check_pair(recon, truth, n)?;
    let w = params.window;
    if w == 0 || w % 2 == 0 || w > n || !(params.sigma > 0.0) {
        return Err(Error::Invalid(format!(
            "SSIM window must be odd and at most {n}, got {w} (sigma {})",
            params.sigma
        )));
    }
    if let Some(m) = mask {
        if m.len() != n * n {
            return Err(Error::GridMismatch(format!("mask has {} entries, expected {}", m.len(), n * n)));
        }
    }
    let l = params.dynamic_range.unwrap_or_else(|| default_dynamic_range(truth));
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::Invalid(format!("dynamic range must be positive, got {l}")));
    }
    let c1 = (params.k1 * l).powi(2);
    let c2 = (params.k2 * l).powi(2);
    let kernel = gaussian_window(w, params.sigma);
    let half = w / 2;
    let (mut total, mut count) = (0.0, 0usize);
    for r in half..n - half {
        for c in half..n - half {
            if let Some(m) = mask {
                if !m[r * n + c] {
                    continue;
                }
            }
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..w {
                for j in 0..w {
                    let k = kernel[i * w + j];
                    let idx = (r + i - half) * n + (c + j - half);
                    let (x, y) = (recon[idx], truth[idx]);
                    ma += k * x;
                    mb += k * y;
                    saa += k * x * x;
                    sbb += k * y * y;
                    sab += k * x * y;
                }
            }
            let va = (saa - ma * ma).max(0.0);
            let vb = (sbb - mb * mb).max(0.0);
            let cov = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Invalid("mask leaves no SSIM window".into()));
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
}

/// `100·‖a − b‖_p / ‖b‖_p` over the masked nodes; `b` is the truth.
pub fn rel_error(a: &[f64], b: &[f64], norm: Norm, mask: Option<&[bool]>) -> Result<f64> {
    if a.len() != b.len() || mask.is_some_and(|m| m.len() != a.len()) {
        return Err(Error::GridMismatch(format!(
            "image lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let keep = |i: usize| mask.is_none_or(|m| m[i]);
    let (mut num, mut den) = (0.0, 0.0);
    for i in (0..a.len()).filter(|&i| keep(i)) {
        let (d, t) = (a[i] - b[i], b[i]);
        match norm {
            Norm::L1 => {
                num += d.abs();
                den += t.abs();
            }
            Norm::L2 => {
                num += d * d;
                den += t * t;
            }
        }
    }
    if norm == Norm::L2 {
        num = num.sqrt();
        den = den.sqrt();
    }
    if !(den > 0.0 && den.is_finite() && num.is_finite()) {
        return Err(Error::Invalid("truth image has zero or non-finite norm on the mask".into()));
    }
    Ok(100.0 * num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ssim: f64,
    /// Percent.
    pub rel_l1: f64,
    /// Percent.
    pub rel_l2: f64,
    pub mask: MaskKind,
    pub ssim_params: SsimParams,
    /// Dynamic range actually used.
    pub dynamic_range: f64,
}

impl EvalReport {
    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        format!(
            "ssim: {:.6}\nrel_l1: {:.4}\nrel_l2: {:.4}\nmask: {}\nwindow: {}\nwindow_sigma: {}\nk1: {}\nk2: {}\ndynamic_range: {}\n",
            self.ssim,
            self.rel_l1,
            self.rel_l2,
            match self.mask {
                MaskKind::Full => "full",
                MaskKind::Disc => "disc",
            },
            self.ssim_params.window,
            self.ssim_params.sigma,
            self.ssim_params.k1,
            self.ssim_params.k2,
            self.dynamic_range
        )
    }

    pub const ROW_HEADER: &'static str = "name,ssim,rel_l1,rel_l2,mask";

    /// One CSV row matching [`EvalReport::ROW_HEADER`].
    pub fn to_row(&self, name: &str) -> String {
        format!(
            "{name},{:.6},{:.4},{:.4},{}",
            self.ssim,
            self.rel_l1,
            self.rel_l2,
            match self.mask {
                MaskKind::Full => "full",
                MaskKind::Disc => "disc",
            }
        )
    }
}

/// SSIM and relative errors of `recon` against `truth` on the `n × n` image
/// grid over `[-1, 1)²`.
pub fn evaluate(recon: &[f64], truth: &[f64], n: usize, mask: MaskKind, params: &SsimParams) -> Result<EvalReport> {
    check_pair(recon, truth, n)?;
    let grid = SquareGrid::with_any_size(n, 1.0)?;
    let nodes = mask.nodes(&grid);
    let m = match mask {
        MaskKind::Full => None,
        MaskKind::Disc => Some(nodes.as_slice()),
    };
    let dynamic_range = params.dynamic_range.unwrap_or_else(|| default_dynamic_range(truth));
    let used = SsimParams {
        dynamic_range: Some(dynamic_range),
        ..*params
    };
    Ok(EvalReport {
        ssim: ssim(recon, truth, n, &used, m)?,
        rel_l1: rel_error(recon, truth, Norm::L1, m)?,
        rel_l2: rel_error(recon, truth, Norm::L2, m)?,
        mask,
        ssim_params: *params,
        dynamic_range,
    })
}

#[cfg(test)]
mod tests;
