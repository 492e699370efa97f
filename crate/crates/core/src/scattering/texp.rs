use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use super::data::{Flavor, ScatteringData};
use crate::eit_data::{DnMatrix, Scaling};
use crate::error::{Error, Result};
use crate::numerics::SquareGrid;

/// Scattering transform from a unit-scaled DN matrix:
/// `t(k) = Σ_ℓ Δs_ℓ e^{i k̄ z̄_ℓ} [(L e_k)(z_ℓ) − i k ν_ℓ e^{i k z_ℓ}]`.
///
/// `e^{ikz}` is expanded in the DN matrix's orthonormal basis, mapped by the
/// matrix and re-synthesised at the electrode centres; `ν_ℓ` is the outward
/// normal as a complex number. Nodes with `|k| > radius` and `k = 0` are zero.
pub fn texp_from_dn(dn: &DnMatrix, k_grid: SquareGrid, radius: f64) -> Result<ScatteringData> {
    if !matches!(dn.scaling(), Scaling::Unit { .. }) {
        return Err(Error::Invalid(
            "t^exp needs a DN matrix scaled to the unit problem".into(),
        ));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Invalid(format!("truncation radius must be positive, got {radius}")));
    }
    let geom = dn.frame().geometry();
    let l = geom.positions.len();
    let z: Vec<Complex64> = geom.positions.iter().map(|p| Complex64::new(p[0], p[1])).collect();
    let nu: Vec<Complex64> = geom.normals.iter().map(|n| Complex64::new(n[0], n[1])).collect();
    let w = &geom.weights;
    let basis = geom.basis.map(|v| Complex64::new(v, 0.0));
    let wbt = {
        let mut m = basis.transpose();
        for (c, wc) in w.iter().enumerate() {
            m.column_mut(c).scale_mut(*wc);
        }
        m
    };
    let op = &basis * dn.entries().map(|v| Complex64::new(v, 0.0)) * wbt;
    let i = Complex64::i();

    let values: Vec<Complex64> = k_grid
        .points()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| {
            if k.norm() > radius || k.norm() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let f = DVector::from_iterator(l, z.iter().map(|zl| (i * k * zl).exp()));
            let lf = &op * &f;
            (0..l)
                .map(|e| {
                    let weight = (i * k.conj() * z[e].conj()).exp();
                    weight * (lf[e] - i * k * nu[e] * f[e]) * w[e]
                })
                .sum()
        })
        .collect();
    if let Some(index) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite {
            what: "t^exp",
            index,
        });
    }
    ScatteringData::new(k_grid, values, radius, Flavor::Texp)
}
