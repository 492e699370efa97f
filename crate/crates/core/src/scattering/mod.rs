//! Scattering data on k-grids: τ → T conversion, truncation, resampling, and the
//! boundary-data transform t^exp.

mod data;
mod ops;
mod texp;

pub use data::{Flavor, ScatteringData};
pub use ops::{resample, t_to_tau, tau_to_t, truncate_threshold, DEFAULT_THRESHOLD};
pub use texp::texp_from_dn;

#[cfg(test)]
mod tests;
