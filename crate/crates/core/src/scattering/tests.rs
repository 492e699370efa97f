use num_complex::Complex64;
use proptest::prelude::*;

use super::*;
use crate::numerics::SquareGrid;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn kgrid() -> SquareGrid {
    SquareGrid::new(32, 4.0).unwrap()
}

#[test]
fn zero_tau_gives_zero_t() {
    let tau = ScatteringData::zeros(kgrid(), 4.0, Flavor::Tau).unwrap();
    assert_eq!(tau_to_t(&tau).unwrap().max_abs(), 0.0);
}

#[test]
fn tau_to_t_formula() {
    let tau = ScatteringData::from_fn(kgrid(), 4.0, Flavor::Tau, |_| c(1.0, 0.0)).unwrap();
    let t = tau_to_t(&tau).unwrap();
    let four_pi = 4.0 * std::f64::consts::PI;
    assert!((t.at(c(1.0, 0.0)) - c(0.0, -four_pi)).norm() < 1e-12);
    assert!((t.at(c(0.0, 1.0)) - c(-four_pi, 0.0)).norm() < 1e-12);
    assert_eq!(t.flavor(), Flavor::T);
    assert_eq!(t.radius(), 4.0);
    assert!(tau_to_t(&t).is_err());
}

#[test]
fn data_is_zero_outside_radius() {
    let d = ScatteringData::from_fn(kgrid(), 2.5, Flavor::T, |_| c(1.0, 1.0)).unwrap();
    for (k, v) in d.grid().points().zip(d.values()) {
        assert_eq!(*v == c(0.0, 0.0), k.norm() > 2.5);
    }
}

#[test]
fn threshold_rules() {
    let g = kgrid();
    let d = ScatteringData::from_fn(g, 4.0, Flavor::T, |k| c(k.re, k.im)).unwrap();
    assert_eq!(truncate_threshold(&d, 4.0, 24.0).unwrap(), d);
    let big = ScatteringData::from_fn(g, 4.0, Flavor::T, |k| {
        if k == c(1.0, 0.0) { c(25.0, 0.0) } else { c(1.0, -24.0) }
    })
    .unwrap();
    let cut = truncate_threshold(&big, 4.0, DEFAULT_THRESHOLD).unwrap();
    assert_eq!(cut.at(c(1.0, 0.0)), c(0.0, 0.0));
    assert_eq!(cut.at(c(0.5, 0.0)), c(1.0, -24.0));
    let r = truncate_threshold(&d, 2.0, 24.0).unwrap();
    assert_eq!(r.at(c(2.0, 0.25)), c(0.0, 0.0));
    assert_eq!(r.at(c(2.0, 0.0)), c(2.0, 0.0));
    assert!(truncate_threshold(&d, 5.0, 24.0).is_err());
}

#[test]
fn identity_resample() {
    let g = kgrid();
    let d = ScatteringData::from_fn(g, 4.0, Flavor::T, |k| c(k.re.sin(), k.im * k.re)).unwrap();
    let r = resample(&d, g).unwrap();
    for (a, b) in r.values().iter().zip(d.values()) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn constant_and_linear_fields_resample_exactly() {
    let src = SquareGrid::new(32, 5.0).unwrap();
    let dst = SquareGrid::new(64, 3.7).unwrap();
    let konst = ScatteringData::from_fn(src, 5.0, Flavor::T, |_| c(2.0, -1.0)).unwrap();
    let lin = ScatteringData::from_fn(src, 5.0, Flavor::T, |k| c(1.0 + 2.0 * k.re - k.im, 0.5 * k.im)).unwrap();
    let rk = resample(&konst, dst).unwrap();
    let rl = resample(&lin, dst).unwrap();
    assert_eq!(rk.radius(), 3.7);
    for (i, k) in dst.points().enumerate() {
        if k.norm() <= 3.7 {
            assert!((rk.values()[i] - c(2.0, -1.0)).norm() < 1e-12);
            assert!((rl.values()[i] - c(1.0 + 2.0 * k.re - k.im, 0.5 * k.im)).norm() < 1e-10);
        }
    }
}

#[test]
fn resample_converges_at_second_order() {
    let f = |k: Complex64| c((0.7 * k.re).sin() * (0.4 * k.im).cos(), (0.3 * k.re * k.im).sin());
    let dst = SquareGrid::new(64, 2.9).unwrap();
    let err = |n: usize| {
        let src = SquareGrid::new(n, 4.0).unwrap();
        let d = ScatteringData::from_fn(src, 4.0, Flavor::T, f).unwrap();
        let r = resample(&d, dst).unwrap();
        dst.points()
            .zip(r.values())
            .filter(|(k, _)| k.norm() <= 2.9)
            .map(|(k, v)| (v - f(k)).norm())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(16), err(32));
    assert!((e1 / e2).log2() >= 1.8, "{e1} {e2}");
}

proptest! {
    #[test]
    fn tau_t_round_trip(re in -5.0f64..5.0, im in -5.0f64..5.0) {
        let tau = ScatteringData::from_fn(kgrid(), 4.0, Flavor::Tau, |k| c(re + k.im, im - k.re)).unwrap();
        let back = t_to_tau(&tau_to_t(&tau).unwrap()).unwrap();
        for ((k, a), b) in kgrid().points().zip(back.values()).zip(tau.values()) {
            if k.norm() > 0.0 {
                prop_assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()));
            }
        }
    }

    #[test]
    fn threshold_is_idempotent(scale in 0.1f64..20.0, radius in 0.5f64..4.0) {
        let d = ScatteringData::from_fn(kgrid(), 4.0, Flavor::T, |k| c(scale * k.re * k.im, scale * k.norm_sqr())).unwrap();
        let once = truncate_threshold(&d, radius, 24.0).unwrap();
        let twice = truncate_threshold(&once, radius, 24.0).unwrap();
        prop_assert_eq!(once, twice);
    }
}

mod texp {
    use nalgebra::DMatrix;

    use super::*;
    use crate::eit_data::{
        invert_nd, scale_to_unit, simulate_nd, CurrentPatternBasis, ElectrodeLayout, FnField,
        ForwardConfig, NdMatrix, Scaling,
    };

    fn annulus(a: f64, s_in: f64) -> FnField<impl Fn(f64, f64) -> f64 + Sync> {
        FnField(move |x: f64, y: f64| if x.hypot(y) < a { s_in } else { 1.0 })
    }

    /// Separation of variables for σ = s_in on r < a, 1 outside.
    fn annulus_eigenvalue(n: usize, a: f64, s_in: f64) -> f64 {
        let a2n = a.powi(2 * n as i32);
        ((1.0 + s_in) + a2n * (1.0 - s_in)) / ((1.0 + s_in) - a2n * (1.0 - s_in)) / n as f64
    }

    fn unit_nd(sigma: &dyn crate::eit_data::ConductivityField, layout: &ElectrodeLayout) -> NdMatrix {
        let basis = CurrentPatternBasis::trigonometric(layout.len()).unwrap();
        let nd = simulate_nd(sigma, layout, &basis, &ForwardConfig::default()).unwrap();
        scale_to_unit(&nd, None, 1.0).unwrap()
    }

    fn texp_of(nd: &NdMatrix, radius: f64) -> ScatteringData {
        texp_from_dn(&invert_nd(nd).unwrap(), SquareGrid::new(32, 5.0).unwrap(), radius).unwrap()
    }

    #[test]
    fn homogeneous_disc_nearly_cancels() {
        let layout = ElectrodeLayout::circle(0.15, 32, 0.025).unwrap();
        let homog = texp_of(&unit_nd(&FnField(|_: f64, _: f64| 1.0), &layout), 4.0);
        let inhom = texp_of(&unit_nd(&annulus(0.5, 2.0), &layout), 4.0);
        assert!(
            homog.max_abs() <= 0.05 * inhom.max_abs(),
            "{} vs {}",
            homog.max_abs(),
            inhom.max_abs()
        );
        assert_eq!(homog.at(c(0.0, 0.0)), c(0.0, 0.0));
        assert_eq!(homog.flavor(), Flavor::Texp);
    }

    #[test]
    fn annulus_matches_analytic_dn() {
        let layout = ElectrodeLayout::circle(1.0, 32, 0.15).unwrap();
        let (a, s_in) = (0.5, 3.0);
        let simulated = unit_nd(&annulus(a, s_in), &layout);
        let k = simulated.dim();
        let diag: Vec<f64> = (0..k).map(|p| annulus_eigenvalue(p / 2 + 1, a, s_in)).collect();
        let analytic = NdMatrix::from_parts(
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)),
            simulated.frame().basis().clone(),
            layout.clone(),
            simulated.scaling(),
        )
        .unwrap();
        let t_sim = texp_of(&simulated, 3.0);
        let t_ref = texp_of(&analytic, 3.0);
        let num: f64 = t_sim
            .values()
            .iter()
            .zip(t_ref.values())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum();
        let den: f64 = t_ref.values().iter().map(|y| y.norm_sqr()).sum();
        let rel = (num / den).sqrt();
        assert!(rel < 0.05, "relative difference {rel}");
        // Radial σ gives a radial transform.
        let (v1, v2) = (t_ref.at(c(2.0, 0.0)), t_ref.at(c(0.0, 2.0)));
        assert!((v1 - v2).norm() < 1e-6 * v1.norm().max(1e-12));
    }

    #[test]
    fn rotation_of_electrode_indexing_is_stable() {
        let base = ElectrodeLayout::circle(1.0, 16, 0.2).unwrap();
        let spacing = base.perimeter() / 16.0;
        let rotated = ElectrodeLayout::from_spec(crate::eit_data::LayoutSpec {
            id: "rotated".into(),
            boundary: crate::eit_data::Boundary::Circle { radius: 1.0 },
            electrodes: crate::eit_data::ElectrodePlacement::Equispaced {
                count: 16,
                width: 0.2,
                offset: 3.0 * spacing,
            },
        })
        .unwrap();
        let sigma = annulus(0.4, 0.5);
        let t1 = texp_of(&unit_nd(&sigma, &base), 4.0).max_abs();
        let t2 = texp_of(&unit_nd(&sigma, &rotated), 4.0).max_abs();
        assert!(t1.is_finite() && t1 > 0.0);
        assert!((t1 - t2).abs() <= 0.02 * t1, "{t1} vs {t2}");
    }

    #[test]
    fn raw_dn_is_rejected() {
        let layout = ElectrodeLayout::circle(1.0, 8, 0.2).unwrap();
        let basis = CurrentPatternBasis::trigonometric(8).unwrap();
        let nd = simulate_nd(&FnField(|_: f64, _: f64| 1.0), &layout, &basis, &ForwardConfig::default())
            .unwrap();
        assert_eq!(nd.scaling(), Scaling::Raw);
        let dn = invert_nd(&nd).unwrap();
        assert!(texp_from_dn(&dn, kgrid(), 3.0).is_err());
    }
}
