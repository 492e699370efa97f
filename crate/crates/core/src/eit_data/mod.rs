//! Electrode layouts, current patterns, ND/DN matrices and a forward solver
//! for simulated measurements.

mod forward;
mod layout;
mod measurement;
mod nd;
mod patterns;

pub use forward::{
    simulate_electrode_data, simulate_voltage_driven, ConductivityField, ElectrodeData,
    ElectrodeModel, FnField, ForwardConfig,
};
pub use layout::{Boundary, Electrode, ElectrodeLayout, ElectrodePlacement, LayoutSpec};
pub use measurement::MeasurementFile;
pub use nd::{
    build_nd_matrix, fit_sigma0, invert_nd, scale_to_unit, voltage_to_current_basis,
    BoundaryGeometry, DnMatrix, NdMatrix, PatternFrame, Scaling, MAX_CONDITION,
};
pub use patterns::{CurrentPatternBasis, PatternKind};

/// ND matrix of the current-driven data for `sigma` (raw units).
pub fn simulate_nd(
    sigma: &dyn ConductivityField,
    layout: &ElectrodeLayout,
    basis: &CurrentPatternBasis,
    cfg: &ForwardConfig,
) -> crate::Result<NdMatrix> {
    let data = simulate_electrode_data(sigma, layout, basis, cfg)?;
    build_nd_matrix(&data.currents, &data.voltages, layout)
}
