use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::phantom::OrganTemplate;

fn ramp(n: usize) -> Vec<f64> {
    (0..n * n)
        .map(|i| 0.2 + ((i / n) as f64 * 0.37 + (i % n) as f64 * 0.11).sin().abs())
        .collect()
}

#[test]
fn identical_images() {
    let a = ramp(32);
    let p = SsimParams::default();
    assert!((ssim(&a, &a, 32, &p, None).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(rel_error(&a, &a, Norm::L1, None).unwrap(), 0.0);
    assert_eq!(rel_error(&a, &a, Norm::L2, None).unwrap(), 0.0);
}

#[test]
fn doubled_image_is_100_percent() {
    let b = ramp(16);
    let a: Vec<f64> = b.iter().map(|v| 2.0 * v).collect();
    for norm in [Norm::L1, Norm::L2] {
        assert!((rel_error(&a, &b, norm, None).unwrap() - 100.0).abs() < 1e-12);
    }
}

#[test]
fn single_node_bump_norm_arithmetic() {
    let b = ramp(16);
    let l2: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let l1: f64 = b.iter().map(|v| v.abs()).sum();
    let mut a = b.clone();
    a[37] += l2;
    assert!((rel_error(&a, &b, Norm::L2, None).unwrap() - 100.0).abs() < 1e-10);
    let want = 100.0 * l2 / l1;
    assert!((rel_error(&a, &b, Norm::L1, None).unwrap() - want).abs() < 1e-10);
}

#[test]
fn constant_shift_follows_closed_form() {
    // For constant images only the luminance term survives:
    // (2v(v+c) + C1) / (v² + (v+c)² + C1).
    let (n, v, c, l) = (24, 0.3, 0.5, 0.2);
    let a = vec![v; n * n];
    let b = vec![v + c; n * n];
    let p = SsimParams {
        dynamic_range: Some(l),
        ..SsimParams::default()
    };
    let c1 = (0.01f64 * l).powi(2);
    let want = (2.0 * v * (v + c) + c1) / (v * v + (v + c) * (v + c) + c1);
    let got = ssim(&b, &a, n, &p, None).unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    assert!(got < 1.0);
}

#[test]
fn ssim_rejects_mismatched_dims() {
    let a = ramp(16);
    let b = ramp(15);
    assert!(ssim(&a, &b, 16, &SsimParams::default(), None).is_err());
    assert!(rel_error(&a, &b, Norm::L1, None).is_err());
    assert!(rel_error(&a, &vec![0.0; 256], Norm::L2, None).is_err());
}

#[test]
fn disc_mask_restricts_nodes() {
    let grid = SquareGrid::new(32, 1.0).unwrap();
    let mask = MaskKind::Disc.nodes(&grid);
    let inside = mask.iter().filter(|m| **m).count();
    assert!((inside as f64 / 1024.0 - std::f64::consts::PI / 4.0).abs() < 0.03);
    // Errors confined to the corners vanish under the disc mask.
    let b = ramp(32);
    let mut a = b.clone();
    a[0] += 5.0;
    assert_eq!(rel_error(&a, &b, Norm::L2, Some(&mask)).unwrap(), 0.0);
    let r = evaluate(&a, &b, 32, MaskKind::Disc, &SsimParams::default()).unwrap();
    assert_eq!(r.mask, MaskKind::Disc);
    assert!(r.rel_l2 == 0.0 && r.ssim > 0.999);
    let text = r.to_text();
    assert!(text.contains("mask: disc") && text.contains("window: 11"));
    assert_eq!(r.to_row("x").split(',').count(), EvalReport::ROW_HEADER.split(',').count());
}

fn table_values() -> (RegionValue, BTreeMap<String, RegionValue>) {
    let mut m = BTreeMap::new();
    for class in ["heart", "aorta"] {
        m.insert(class.to_string(), RegionValue::Finite(0.67781));
    }
    for class in ["lung", "spine"] {
        m.insert(class.to_string(), RegionValue::Finite(0.056714));
    }
    (RegionValue::Finite(0.3), m)
}

#[test]
fn healthy_thorax_truth_has_measured_values() {
    let (bg, classes) = table_values();
    let spec = act4_truth_spec(&OrganTemplate::builtin(), bg, &classes, None).unwrap();
    let img = build_truth_image(&spec, &SquareGrid::new(64, 1.0).unwrap()).unwrap();
    let mut values: Vec<f64> = img.clone();
    values.sort_by(f64::total_cmp);
    values.dedup();
    assert_eq!(values, vec![0.056714, 0.3, 0.67781]);
}

#[test]
fn injury_fills_lower_right_lung() {
    let (bg, classes) = table_values();
    let spec = act4_truth_spec(&OrganTemplate::builtin(), bg.clone(), &classes, Some(RegionValue::Finite(0.0)))
        .unwrap();
    let grid = SquareGrid::new(64, 1.0).unwrap();
    let img = build_truth_image(&spec, &grid).unwrap();
    let zeros: Vec<_> = grid.points().zip(&img).filter(|(_, v)| **v == 0.0).map(|(z, _)| z).collect();
    assert!(!zeros.is_empty());
    assert!(zeros.iter().all(|z| z.re < 0.0 && z.im < 0.05));

    let copper = act4_truth_spec(
        &OrganTemplate::builtin(),
        bg,
        &classes,
        Some(RegionValue::Named("inf".into())),
    )
    .unwrap();
    assert!(matches!(
        build_truth_image(&copper, &grid),
        Err(crate::Error::Unsupported(_))
    ));
}

#[test]
fn empty_spec_is_constant_background() {
    let spec: TruthSpec = serde_json::from_str(r#"{"background": 0.14, "regions": []}"#).unwrap();
    let img = build_truth_image(&spec, &SquareGrid::new(16, 1.0).unwrap()).unwrap();
    assert!(img.iter().all(|v| *v == 0.14));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ssim_symmetric_and_bounded(
        a in prop::collection::vec(0.0f64..2.0, 256),
        b in prop::collection::vec(0.0f64..2.0, 256),
    ) {
        let p = SsimParams { window: 7, dynamic_range: Some(2.0), ..SsimParams::default() };
        let ab = ssim(&a, &b, 16, &p, None).unwrap();
        let ba = ssim(&b, &a, 16, &p, None).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn rel_error_is_scale_invariant(
        b in prop::collection::vec(0.1f64..2.0, 64),
        d in prop::collection::vec(-0.5f64..0.5, 64),
        c in 0.01f64..100.0,
    ) {
        let a: Vec<f64> = b.iter().zip(&d).map(|(x, y)| x + y).collect();
        let ca: Vec<f64> = a.iter().map(|v| c * v).collect();
        let cb: Vec<f64> = b.iter().map(|v| c * v).collect();
        for norm in [Norm::L1, Norm::L2] {
            let e1 = rel_error(&a, &b, norm, None).unwrap();
            let e2 = rel_error(&ca, &cb, norm, None).unwrap();
            prop_assert!((e1 - e2).abs() <= 1e-9 * e1.max(1e-12));
            prop_assert!(e1 >= 0.0);
        }
    }
}

#[test]
fn phantom_truth_spec_matches_rasterization() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let phantom = crate::phantom::generate_kit4_phantom(&mut rng, &Default::default()).unwrap();
    let grid = crate::numerics::SquareGrid::new(64, 1.0).unwrap();
    let spec = TruthSpec::from(&phantom);
    let text = serde_json::to_string(&spec).unwrap();
    let back: TruthSpec = serde_json::from_str(&text).unwrap();
    let img = build_truth_image(&back, &grid).unwrap();
    assert_eq!(img, phantom.rasterize(grid).unwrap().into_values());
}
