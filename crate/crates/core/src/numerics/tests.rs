use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// C∞ step: 1 for |t| ≤ a, 0 for |t| ≥ b.
fn smooth_window(t: f64, a: f64, b: f64) -> f64 {
    let t = t.abs();
    if t <= a {
        return 1.0;
    }
    if t >= b {
        return 0.0;
    }
    let s = (t - a) / (b - a);
    let f = |u: f64| if u <= 0.0 { 0.0 } else { (-1.0 / u).exp() };
    f(1.0 - s) / (f(1.0 - s) + f(s))
}

fn window(z: Complex64) -> f64 {
    smooth_window(z.re, 0.5, 2.8) * smooth_window(z.im, 0.5, 2.8)
}

#[test]
fn grid_rejects_bad_sizes() {
    assert!(SquareGrid::new(8, 1.0).is_err());
    assert!(SquareGrid::new(48, 1.0).is_err());
    assert!(SquareGrid::new(64, 0.0).is_err());
    let g = SquareGrid::new(64, 1.0).unwrap();
    assert_eq!(g.spacing(), 2.0 / 64.0);
    assert_eq!(g.point(g.origin_index()), c(0.0, 0.0));
    assert_eq!(g.coord(0), -1.0);
}

#[test]
fn complex_field_rejects_nan() {
    let g = SquareGrid::new(16, 1.0).unwrap();
    let mut v = vec![c(0.0, 0.0); 256];
    v[7] = c(f64::NAN, 0.0);
    assert!(matches!(
        ComplexField::new(g, v),
        Err(Error::NonFinite { index: 7, .. })
    ));
}

#[test]
fn dbar_of_constant_is_zero() {
    let g = SquareGrid::new(32, 1.5).unwrap();
    let f = ComplexField::from_fn(g, |_| c(2.5, -1.0)).unwrap();
    let d = dbar_derivative(&f).unwrap();
    assert!(d.max_abs() < 1e-13);
}

#[test]
fn dbar_of_conj_z_is_one_on_interior() {
    let g = SquareGrid::new(256, 3.0).unwrap();
    let f = ComplexField::from_fn(g, |z| z.conj() * window(z)).unwrap();
    let d = dbar_derivative(&f).unwrap();
    let mut worst = 0.0f64;
    for (i, z) in g.points().enumerate() {
        if z.re.abs() <= 0.5 && z.im.abs() <= 0.5 {
            worst = worst.max((d.values()[i] - c(1.0, 0.0)).norm());
        }
    }
    assert!(worst < 1e-8, "max deviation {worst:e}");
}

#[test]
fn dbar_of_z_is_zero_on_interior() {
    let g = SquareGrid::new(256, 3.0).unwrap();
    let f = ComplexField::from_fn(g, |z| z * window(z)).unwrap();
    let d = dbar_derivative(&f).unwrap();
    let mut worst = 0.0f64;
    for (i, z) in g.points().enumerate() {
        if z.re.abs() <= 0.5 && z.im.abs() <= 0.5 {
            worst = worst.max(d.values()[i].norm());
        }
    }
    assert!(worst < 1e-8, "max deviation {worst:e}");
}

#[test]
fn dbar_inverse_recovers_zero_mean_fields() {
    let g = SquareGrid::new(64, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut v: Vec<Complex64> = (0..g.len())
        .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let mean = v.iter().sum::<Complex64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let f = ComplexField::new(g, v).unwrap();
    let back = dbar_inverse(&dbar_derivative(&f).unwrap()).unwrap();
    let err = f
        .values()
        .iter()
        .zip(back.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(err < 1e-8, "{err:e}");
}

#[test]
fn dbar_rejects_non_finite() {
    let g = SquareGrid::new(16, 1.0).unwrap();
    // Bypass the constructor check through a finite field mutated afterwards.
    let mut f = ComplexField::zeros(g);
    f.values_mut()[3] = c(f64::INFINITY, 0.0);
    assert!(matches!(dbar_derivative(&f), Err(Error::NonFinite { .. })));
}

#[test]
fn identity_kernel_returns_input() {
    let g = SquareGrid::new(32, 1.0).unwrap();
    let k = KernelSpectrum::from_multiplier(g, |_, _| c(1.0, 0.0));
    let f = ComplexField::from_fn(g, |z| c(z.re.sin(), z.im * z.re)).unwrap();
    let out = periodic_convolve(&k, &f).unwrap();
    for (a, b) in out.values().iter().zip(f.values()) {
        assert!((a - b).norm() < 1e-13);
    }
    let zero = periodic_convolve(&k, &ComplexField::zeros(g)).unwrap();
    assert_eq!(zero.max_abs(), 0.0);
}

#[test]
fn convolve_rejects_grid_mismatch() {
    let g1 = SquareGrid::new(32, 1.0).unwrap();
    let g2 = SquareGrid::new(32, 2.0).unwrap();
    let k = KernelSpectrum::from_multiplier(g1, |_, _| c(1.0, 0.0));
    assert!(matches!(
        periodic_convolve(&k, &ComplexField::zeros(g2)),
        Err(Error::GridMismatch(_))
    ));
}

fn gaussian(var: f64) -> impl Fn(Complex64) -> Complex64 {
    move |z| {
        c(
            (-z.norm_sqr() / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var),
            0.0,
        )
    }
}

#[test]
fn gaussian_convolution_adds_variances() {
    let g = SquareGrid::new(128, 4.0).unwrap();
    let (a, b) = (0.05, 0.08);
    let k = KernelSpectrum::from_kernel(g, gaussian(a));
    let f = ComplexField::from_fn(g, gaussian(b)).unwrap();
    let out = periodic_convolve(&k, &f).unwrap();
    let exact = gaussian(a + b);
    let err = g
        .points()
        .zip(out.values())
        .map(|(z, v)| (v - exact(z)).norm())
        .fold(0.0, f64::max);
    assert!(err < 1e-6, "{err:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn convolution_is_real_bilinear(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in 0u64..1000) {
        let g = SquareGrid::new(16, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rand_field = || ComplexField::new(
            g,
            (0..g.len()).map(|_| c(rng.random::<f64>(), rng.random::<f64>())).collect(),
        ).unwrap();
        let (f, h) = (rand_field(), rand_field());
        let k = KernelSpectrum::from_kernel(g, |d| if d.norm() == 0.0 { c(0.0, 0.0) } else { 1.0 / d });
        let combo = ComplexField::new(
            g,
            f.values().iter().zip(h.values()).map(|(x, y)| x * alpha + y * beta).collect(),
        ).unwrap();
        let lhs = periodic_convolve(&k, &combo).unwrap();
        let kf = periodic_convolve(&k, &f).unwrap();
        let kh = periodic_convolve(&k, &h).unwrap();
        for i in 0..g.len() {
            let rhs = kf.values()[i] * alpha + kh.values()[i] * beta;
            prop_assert!((lhs.values()[i] - rhs).norm() < 1e-11);
        }
    }
}

#[test]
fn spectral_ops_are_deterministic() {
    let g = SquareGrid::new(64, 1.0).unwrap();
    let f = ComplexField::from_fn(g, |z| c(z.re.cos(), (3.0 * z.im).sin())).unwrap();
    let a = dbar_derivative(&f).unwrap();
    let b = dbar_derivative(&f).unwrap();
    assert!(a
        .values()
        .iter()
        .zip(b.values())
        .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()));
}

fn tight() -> KrylovConfig {
    KrylovConfig {
        tol: 1e-13,
        restart: 30,
        max_iter: 500,
    }
}

#[test]
fn gmres_identity_and_scaling() {
    let rhs: Vec<Complex64> = (0..10).map(|i| c(i as f64, 1.0 - i as f64)).collect();
    let id = (10usize, |x: &[Complex64], out: &mut [Complex64]| out.copy_from_slice(x));
    let sol = solve_real_linear(&id, &rhs, None, &tight()).unwrap();
    for (a, b) in sol.x.iter().zip(&rhs) {
        assert!((a - b).norm() < 1e-12);
    }
    let twice = (10usize, |x: &[Complex64], out: &mut [Complex64]| {
        for (o, v) in out.iter_mut().zip(x) {
            *o = v * 2.0;
        }
    });
    let sol = solve_real_linear(&twice, &rhs, None, &tight()).unwrap();
    for (a, b) in sol.x.iter().zip(&rhs) {
        assert!((a - b / 2.0).norm() < 1e-12);
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Vec<Complex64>> {
    (0..n)
        .map(|_| {
            (0..n)
                .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * scale)
                .collect()
        })
        .collect()
}

#[test]
fn gmres_matches_dense_real_embedding() {
    let n = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut a1 = random_matrix(&mut rng, n, 1.0);
    for (i, row) in a1.iter_mut().enumerate() {
        row[i] += c(4.0, 0.0);
    }
    let a2 = random_matrix(&mut rng, n, 1.0);
    let b: Vec<Complex64> = (0..n)
        .map(|_| c(rng.random::<f64>(), rng.random::<f64>()))
        .collect();

    // Oracle: x = u + iv, A₁x + A₂x̄ = b as a 16×16 real system.
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let (p, q) = (a1[i][j], a2[i][j]);
            // real part of row i
            m[(i, j)] = p.re + q.re;
            m[(i, n + j)] = -p.im + q.im;
            // imaginary part of row i
            m[(n + i, j)] = p.im + q.im;
            m[(n + i, n + j)] = p.re - q.re;
        }
    }
    let rhs = DVector::from_iterator(2 * n, b.iter().map(|v| v.re).chain(b.iter().map(|v| v.im)));
    let direct = m.lu().solve(&rhs).unwrap();

    let op = (n, |x: &[Complex64], out: &mut [Complex64]| {
        for i in 0..n {
            out[i] = (0..n).map(|j| a1[i][j] * x[j] + a2[i][j] * x[j].conj()).sum();
        }
    });
    let sol = solve_real_linear(&op, &b, None, &tight()).unwrap();
    for i in 0..n {
        assert!((sol.x[i].re - direct[i]).abs() < 1e-10);
        assert!((sol.x[i].im - direct[n + i]).abs() < 1e-10);
    }
}

#[test]
fn gmres_residual_history_is_monotone() {
    let n = 60;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a1 = random_matrix(&mut rng, n, 0.3);
    let a2 = random_matrix(&mut rng, n, 0.3);
    let op = (n, |x: &[Complex64], out: &mut [Complex64]| {
        for i in 0..n {
            out[i] = x[i] * 1.5
                + (0..n)
                    .map(|j| a1[i][j] * x[j] + a2[i][j] * x[j].conj())
                    .sum::<Complex64>();
        }
    });
    let b: Vec<Complex64> = (0..n).map(|i| c(1.0, i as f64 * 0.1)).collect();
    let cfg = KrylovConfig {
        tol: 1e-10,
        restart: 5,
        max_iter: 2000,
    };
    let sol = solve_real_linear(&op, &b, None, &cfg).unwrap();
    assert!(sol.residual <= cfg.tol);
    for w in sol.residual_history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", sol.residual_history);
    }
}

#[test]
fn gmres_reports_non_convergence() {
    let n = 40;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a1 = random_matrix(&mut rng, n, 1.0);
    let op = (n, |x: &[Complex64], out: &mut [Complex64]| {
        for i in 0..n {
            out[i] = (0..n).map(|j| a1[i][j] * x[j]).sum();
        }
    });
    let b = vec![c(1.0, 0.0); n];
    let cfg = KrylovConfig {
        tol: 1e-12,
        restart: 3,
        max_iter: 6,
    };
    match solve_real_linear(&op, &b, None, &cfg) {
        Err(Error::NotConverged {
            iterations,
            residual,
        }) => {
            assert_eq!(iterations, 6);
            assert!(residual > 1e-12 && residual <= 1.0 + 1e-12);
        }
        other => panic!("expected failure, got {other:?}"),
    }
}
