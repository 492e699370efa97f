pub mod beltrami;
pub mod dataset;
pub mod dbar;
pub mod eit_data;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod phantom;
pub mod pipeline;
pub mod render;
pub mod scattering;

pub use error::{Error, Result};
