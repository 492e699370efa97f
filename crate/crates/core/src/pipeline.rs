//! Electrode data to conductivity image, and simulated tank measurements.

use serde::{Deserialize, Serialize};

use crate::dataset::{GridSpec, Style, TrainingPair};
use crate::dbar::{reconstruct, DbarSolveConfig, LowPassReconstruction};
use crate::eit_data::{
    build_nd_matrix, fit_sigma0, invert_nd, scale_to_unit, simulate_electrode_data, simulate_nd,
    CurrentPatternBasis, ElectrodeData, ElectrodeLayout, FnField, ForwardConfig, MeasurementFile,
    PatternKind,
};
use crate::error::{Error, Result};
use crate::numerics::{KrylovConfig, SquareGrid};
use crate::phantom::Phantom;
use crate::scattering::{texp_from_dn, ScatteringData};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma0Mode {
    /// Least-squares fit against the simulated homogeneous ND matrix of the
    /// same layout (circular tanks only).
    Fit,
    Given(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredConfig {
    /// Truncation radius of the scattering data.
    pub radius: f64,
    /// Nodes per side of the k-grid on `[-radius, radius)`.
    pub k_nodes: usize,
    /// Image grid on `[-1, 1)` in units of `r0`.
    pub z_nodes: usize,
    pub sigma0: Sigma0Mode,
    /// Scaling length; the layout's maximal radius when absent.
    pub r0: Option<f64>,
    /// Used for the σ₀ fit.
    pub forward: ForwardConfig,
    pub dbar: KrylovConfig,
}

impl Default for MeasuredConfig {
    fn default() -> Self {
        MeasuredConfig {
            radius: 4.0,
            k_nodes: 32,
            z_nodes: 64,
            sigma0: Sigma0Mode::Fit,
            r0: None,
            forward: ForwardConfig::default(),
            dbar: KrylovConfig::default(),
        }
    }
}

impl MeasuredConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::Invalid(format!("radius must be positive, got {}", self.radius)));
        }
        if let Sigma0Mode::Given(s) = self.sigma0 {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Invalid(format!("sigma0 must be positive, got {s}")));
            }
        }
        SquareGrid::new(self.k_nodes, self.radius)?;
        SquareGrid::new(self.z_nodes, 1.0)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MeasuredReconstruction {
    pub recon: LowPassReconstruction,
    pub texp: ScatteringData,
    pub sigma0: f64,
    pub r0: f64,
    /// Relative asymmetry of the raw ND matrix.
    pub asymmetry: f64,
}

impl MeasuredReconstruction {
    /// Packs the image as a measured-style pair. `truth` is NaN when unknown.
    pub fn to_pair(&self, truth: Option<Vec<f64>>) -> Result<TrainingPair> {
        let n = self.recon.grid.n();
        let pair = TrainingPair {
            style: Style::Measured,
            n,
            truth: truth.unwrap_or_else(|| vec![f64::NAN; n * n]),
            recon: self.recon.sigma_db.clone(),
            m0_imag: self.recon.m0.iter().map(|m| m.im).collect(),
            seed: 0,
            radius: self.texp.radius(),
            sigma_b: self.sigma0,
        };
        pair.check()?;
        Ok(pair)
    }
}

fn pattern_basis(kind: PatternKind, electrodes: usize) -> Result<CurrentPatternBasis> {
    match kind {
        PatternKind::Trigonometric => CurrentPatternBasis::trigonometric(electrodes),
        PatternKind::Adjacent => CurrentPatternBasis::adjacent(electrodes),
        PatternKind::Custom => Err(Error::Invalid(
            "custom patterns need explicit current vectors".into(),
        )),
    }
}

/// ND → scaling → DN → t^exp → D-bar image.
pub fn reconstruct_measurement(
    layout: &ElectrodeLayout,
    data: &ElectrodeData,
    cfg: &MeasuredConfig,
) -> Result<MeasuredReconstruction> {
    cfg.validate()?;
    let nd = build_nd_matrix(&data.currents, &data.voltages, layout)?;
    let asymmetry = nd.asymmetry();
    let sigma0 = match cfg.sigma0 {
        Sigma0Mode::Given(s) => s,
        Sigma0Mode::Fit => {
            let basis = CurrentPatternBasis::custom(data.currents.clone())?;
            let unit = FnField(|_: f64, _: f64| 1.0);
            let reference = simulate_nd(&unit, layout, &basis, &cfg.forward)?;
            fit_sigma0(&nd, &reference)?
        }
    };
    let r0 = cfg.r0.unwrap_or_else(|| layout.r0());
    let unit = scale_to_unit(&nd, Some(r0), sigma0)?;
    let dn = invert_nd(&unit)?;
    let texp = texp_from_dn(&dn, SquareGrid::new(cfg.k_nodes, cfg.radius)?, cfg.radius)?;
    let dbar = DbarSolveConfig {
        z_grid: SquareGrid::new(cfg.z_nodes, 1.0)?,
        krylov: cfg.dbar,
    };
    let recon = reconstruct(&texp, sigma0, &dbar)?;
    Ok(MeasuredReconstruction {
        recon,
        texp,
        sigma0,
        r0,
        asymmetry,
    })
}

/// Simulated tank data for a unit-disc phantom stretched to fill a circular
/// tank.
pub fn simulate_measurement(
    phantom: &Phantom,
    layout: &ElectrodeLayout,
    patterns: PatternKind,
    forward: &ForwardConfig,
) -> Result<MeasurementFile> {
    if layout.circle_radius().is_none() {
        return Err(Error::Unsupported("tank simulation needs a circular boundary".into()));
    }
    let basis = pattern_basis(patterns, layout.len())?;
    let data = simulate_electrode_data(phantom, layout, &basis, forward)?;
    Ok(MeasurementFile::new(layout, patterns, &data))
}

/// Truth image of a unit-disc phantom on the `z_nodes`-grid used by
/// [`reconstruct_measurement`].
pub fn phantom_truth(phantom: &Phantom, z_nodes: usize) -> Result<Vec<f64>> {
    let grid = GridSpec {
        n: z_nodes,
        half_width: 1.0,
    }
    .grid()?;
    Ok(phantom.rasterize(grid)?.into_values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{rel_error, Norm};
    use crate::phantom::{InclusionSpec, Shape};

    fn fast_forward() -> ForwardConfig {
        ForwardConfig {
            radial: 64,
            angular: 128,
            ..ForwardConfig::default()
        }
    }

    #[test]
    fn homogeneous_tank_gives_flat_image() {
        let layout = ElectrodeLayout::circle(0.15, 32, 0.0125).unwrap();
        let file = simulate_measurement(&Phantom::homogeneous(0.4), &layout, PatternKind::Trigonometric, &fast_forward())
            .unwrap();
        let (layout, data) = file.resolve(std::path::Path::new("mem"), None).unwrap();
        let cfg = MeasuredConfig {
            z_nodes: 32,
            forward: fast_forward(),
            ..MeasuredConfig::default()
        };
        let out = reconstruct_measurement(&layout, &data, &cfg).unwrap();
        assert!((out.sigma0 - 0.4).abs() < 1e-6, "sigma0 {}", out.sigma0);
        let dev = out
            .recon
            .sigma_db
            .iter()
            .map(|v| (v / 0.4 - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(dev < 0.05, "max deviation {dev}");
        let pair = out.to_pair(None).unwrap();
        assert!(pair.truth.iter().all(|v| v.is_nan()));
    }

    #[test]
    fn inclusion_tank_is_close_to_truth() {
        let phantom = Phantom {
            background: 0.3,
            inclusions: vec![InclusionSpec {
                label: "disc".into(),
                shape: Shape::Ellipse {
                    center: [0.3, 0.1],
                    semi_axes: [0.25, 0.25],
                    rotation: 0.0,
                },
                conductivity: 0.6,
                split: None,
            }],
        };
        let layout = ElectrodeLayout::circle(0.15, 32, 0.0125).unwrap();
        let file = simulate_measurement(&phantom, &layout, PatternKind::Trigonometric, &fast_forward()).unwrap();
        let (layout, data) = file.resolve(std::path::Path::new("mem"), None).unwrap();
        let cfg = MeasuredConfig {
            z_nodes: 32,
            sigma0: Sigma0Mode::Given(0.3),
            ..MeasuredConfig::default()
        };
        let out = reconstruct_measurement(&layout, &data, &cfg).unwrap();
        let truth = phantom_truth(&phantom, 32).unwrap();
        let err = rel_error(&out.recon.sigma_db, &truth, Norm::L2, None).unwrap();
        let flat = rel_error(&vec![0.3; truth.len()], &truth, Norm::L2, None).unwrap();
        assert!(err < 0.75 * flat, "relative l2 {err}% vs {flat}% for a flat image");
        let peak = out.recon.sigma_db.iter().cloned().fold(0.0, f64::max);
        assert!(peak > 0.4, "peak {peak}");
    }

    #[test]
    fn rejects_custom_pattern_simulation_and_bad_radius() {
        let layout = ElectrodeLayout::circle(1.0, 8, 0.1).unwrap();
        assert!(simulate_measurement(&Phantom::homogeneous(1.0), &layout, PatternKind::Custom, &fast_forward()).is_err());
        let cfg = MeasuredConfig {
            radius: -1.0,
            ..MeasuredConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
