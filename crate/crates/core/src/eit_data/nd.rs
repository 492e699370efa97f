use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::layout::ElectrodeLayout;
use super::patterns::CurrentPatternBasis;
use crate::error::{Error, Result};

/// Largest accepted condition number for matrix inversions.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Scaling {
    /// Physical units of the measurement.
    Raw,
    /// Rescaled to a domain of unit radius and unit background conductivity.
    Unit { r0: f64, sigma0: f64 },
}

/// Basis functions and boundary geometry shared by ND and DN matrices.
///
/// `basis` holds the boundary current densities of the orthonormalised
/// patterns sampled at the electrode centres (`L × K`); they are orthonormal
/// under the quadrature `⟨f, g⟩ = Σ_ℓ Δs_ℓ f_ℓ g_ℓ` with `Δs_ℓ` the boundary
/// arclength attributed to electrode `ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternFrame {
    basis: DMatrix<f64>,
    layout: ElectrodeLayout,
    scaling: Scaling,
}

/// Boundary geometry in the units of the current scaling state.
#[derive(Debug, Clone)]
pub struct BoundaryGeometry {
    pub positions: Vec<[f64; 2]>,
    pub normals: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub basis: DMatrix<f64>,
}

impl PatternFrame {
    pub fn layout(&self) -> &ElectrodeLayout {
        &self.layout
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn geometry(&self) -> BoundaryGeometry {
        let r = match self.scaling {
            Scaling::Raw => 1.0,
            Scaling::Unit { r0, .. } => r0,
        };
        BoundaryGeometry {
            positions: self
                .layout
                .centers()
                .iter()
                .map(|p| [p[0] / r, p[1] / r])
                .collect(),
            normals: self.layout.normals().to_vec(),
            weights: self.layout.spacing().iter().map(|s| s / r).collect(),
            basis: &self.basis * r.sqrt(),
        }
    }
}

/// Neumann-to-Dirichlet map in an orthonormal current basis (`K × K`).
#[derive(Debug, Clone, PartialEq)]
pub struct NdMatrix {
    entries: DMatrix<f64>,
    frame: PatternFrame,
}

/// Dirichlet-to-Neumann map on the same basis as the ND matrix it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DnMatrix {
    entries: DMatrix<f64>,
    frame: PatternFrame,
}

macro_rules! matrix_accessors {
    ($t:ty) => {
        impl $t {
            pub fn entries(&self) -> &DMatrix<f64> {
                &self.entries
            }

            pub fn frame(&self) -> &PatternFrame {
                &self.frame
            }

            pub fn layout(&self) -> &ElectrodeLayout {
                &self.frame.layout
            }

            pub fn scaling(&self) -> Scaling {
                self.frame.scaling
            }

            pub fn dim(&self) -> usize {
                self.entries.nrows()
            }

            /// Largest `|A − Aᵀ|` entry relative to the largest `|A|` entry.
            pub fn asymmetry(&self) -> f64 {
                let scale = self.entries.abs().max();
                if scale == 0.0 {
                    return 0.0;
                }
                (&self.entries - self.entries.transpose()).abs().max() / scale
            }
        }
    };
}

matrix_accessors!(NdMatrix);
matrix_accessors!(DnMatrix);

fn check_block(name: &'static str, m: &DMatrix<f64>, rows: usize) -> Result<()> {
    if m.nrows() != rows {
        return Err(Error::Invalid(format!(
            "{name} has {} rows but the layout has {rows} electrodes",
            m.nrows()
        )));
    }
    if let Some(index) = m.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: name, index });
    }
    Ok(())
}

fn condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

impl NdMatrix {
    /// Wraps an already assembled matrix; `basis` as in [`PatternFrame`].
    pub fn from_parts(
        entries: DMatrix<f64>,
        basis: DMatrix<f64>,
        layout: ElectrodeLayout,
        scaling: Scaling,
    ) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() != basis.ncols() {
            return Err(Error::Invalid(format!(
                "ND matrix {}x{} does not match a basis with {} patterns",
                entries.nrows(),
                entries.ncols(),
                basis.ncols()
            )));
        }
        check_block("ND basis", &basis, layout.len())?;
        if let Some(index) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "ND matrix",
                index,
            });
        }
        Ok(NdMatrix {
            entries,
            frame: PatternFrame {
                basis,
                layout,
                scaling,
            },
        })
    }
}

/// Assembles the ND matrix from current-driven data.
///
/// `currents` and `voltages` are `L × K`, one column per applied pattern, with
/// total electrode currents and electrode voltages. The patterns are
/// re-orthonormalised as boundary current densities (`I_ℓ/|e_ℓ|`) and the same
/// transformation is applied to the voltages, which are mean-subtracted
/// first. Entry `(m, n)` is `Σ_ℓ Δs_ℓ j^m_ℓ v^n_ℓ`.
pub fn build_nd_matrix(
    currents: &DMatrix<f64>,
    voltages: &DMatrix<f64>,
    layout: &ElectrodeLayout,
) -> Result<NdMatrix> {
    let l = layout.len();
    check_block("currents", currents, l)?;
    check_block("voltages", voltages, l)?;
    let k = currents.ncols();
    if k == 0 || k >= l || voltages.ncols() != k {
        return Err(Error::Invalid(format!(
            "need 0 < K < L patterns with matching voltages, got K={k} voltages={} L={l}",
            voltages.ncols()
        )));
    }
    for (j, col) in currents.column_iter().enumerate() {
        let scale = col.abs().max();
        if scale == 0.0 {
            return Err(Error::Singular(format!("current pattern {j} is zero")));
        }
        if col.sum().abs() > 1e-8 * scale * l as f64 {
            return Err(Error::Invalid(format!(
                "current pattern {j} does not sum to zero (sum {})",
                col.sum()
            )));
        }
    }
    let widths = layout.widths();
    let ds = layout.spacing();
    let dens = DMatrix::from_fn(l, k, |r, c| currents[(r, c)] / widths[r]);
    let weighted = DMatrix::from_fn(l, k, |r, c| dens[(r, c)] * ds[r]);
    let gram = dens.transpose() * &weighted;
    if condition(&gram) > MAX_CONDITION {
        return Err(Error::Singular("current patterns are rank deficient".into()));
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("current pattern Gram matrix is not positive definite".into()))?;
    // T = L^{-T}, so that (J T)ᵀ W (J T) = I.
    let t = chol
        .l()
        .transpose()
        .try_inverse()
        .ok_or_else(|| Error::Singular("current pattern Gram factor is singular".into()))?;
    let mut v = voltages.clone();
    for mut col in v.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let basis = &dens * &t;
    let v = v * &t;
    let wb = DMatrix::from_fn(l, k, |r, c| basis[(r, c)] * ds[r]);
    let entries = wb.transpose() * v;
    NdMatrix::from_parts(entries, basis, layout.clone(), Scaling::Raw)
}

/// Rescales a raw ND matrix to the unit-radius, unit-conductivity problem:
/// `R_unit = (σ₀/r₀)·R`. `r0` defaults to the layout's maximal radius.
pub fn scale_to_unit(nd: &NdMatrix, r0: Option<f64>, sigma0: f64) -> Result<NdMatrix> {
    if nd.scaling() != Scaling::Raw {
        return Err(Error::Invalid("ND matrix is already scaled".into()));
    }
    let r0 = r0.unwrap_or_else(|| nd.layout().r0());
    if !(r0 > 0.0 && r0.is_finite() && sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::Invalid(format!(
            "scaling needs positive finite r0 and sigma0, got r0={r0} sigma0={sigma0}"
        )));
    }
    let mut out = nd.clone();
    out.entries *= sigma0 / r0;
    out.frame.scaling = Scaling::Unit { r0, sigma0 };
    Ok(out)
}

/// Best-fit homogeneous conductivity: `σ₀ = 1/a` with `a` minimising
/// `‖R_meas − a·R_ref‖_F`, where `R_ref` is the raw ND matrix of the same
/// layout and patterns at unit conductivity.
pub fn fit_sigma0(measured: &NdMatrix, unit_reference: &NdMatrix) -> Result<f64> {
    if measured.scaling() != Scaling::Raw || unit_reference.scaling() != Scaling::Raw {
        return Err(Error::Invalid("sigma0 fit needs raw ND matrices".into()));
    }
    if measured.entries.shape() != unit_reference.entries.shape() {
        return Err(Error::Invalid(format!(
            "ND shapes differ: {:?} vs {:?}",
            measured.entries.shape(),
            unit_reference.entries.shape()
        )));
    }
    let denom = unit_reference.entries.norm_squared();
    let a = measured.entries.dot(&unit_reference.entries) / denom;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Singular(format!(
            "homogeneous fit gave a non-positive scale {a}"
        )));
    }
    Ok(1.0 / a)
}

/// DN matrix as the inverse of the ND matrix.
pub fn invert_nd(nd: &NdMatrix) -> Result<DnMatrix> {
    let cond = condition(&nd.entries);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Singular(format!(
            "ND matrix condition number {cond:.3e} exceeds {MAX_CONDITION:.0e}"
        )));
    }
    let entries = nd
        .entries
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("ND matrix is not invertible".into()))?;
    Ok(DnMatrix {
        entries,
        frame: nd.frame.clone(),
    })
}

/// Re-expresses voltage-driven data as current-driven pairs.
///
/// `applied` voltages and `measured` currents are `L × K`. By linearity any
/// combination `A` of the experiments is again an experiment; `A` is chosen
/// so that the resulting currents best match `target` in least squares; the
/// default target is the applied patterns themselves, mean-subtracted and
/// orthonormalised. The returned `(currents, voltages)` feed
/// [`build_nd_matrix`].
pub fn voltage_to_current_basis(
    applied: &DMatrix<f64>,
    measured: &DMatrix<f64>,
    target: Option<&DMatrix<f64>>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let l = applied.nrows();
    check_block("applied voltages", applied, l)?;
    check_block("measured currents", measured, l)?;
    let target = match target {
        Some(t) => {
            check_block("target patterns", t, l)?;
            t.clone()
        }
        None => CurrentPatternBasis::custom(applied.clone())?.patterns().clone(),
    };
    if measured.ncols() != applied.ncols() || measured.ncols() == 0 {
        return Err(Error::Invalid(format!(
            "applied ({}) and measured ({}) pattern counts differ",
            applied.ncols(),
            measured.ncols()
        )));
    }
    if let Some(j) = measured.column_iter().position(|c| c.abs().max() == 0.0) {
        return Err(Error::Singular(format!("measured currents of pattern {j} are all zero")));
    }
    let cond = condition(measured);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Singular(format!(
            "measured currents are rank deficient (condition {cond:.3e})"
        )));
    }
    let svd = measured.clone().svd(true, true);
    let a = svd
        .solve(&target, 0.0)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let currents = measured * &a;
    let mut voltages = applied * &a;
    for mut col in voltages.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    Ok((currents, voltages))
}

