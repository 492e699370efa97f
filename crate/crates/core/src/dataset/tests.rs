use std::path::Path;

use super::*;
use crate::error::Error;

fn small(style: Style) -> DatasetConfig {
    let mut cfg = DatasetConfig::for_style(style).unwrap();
    cfg.count = 3;
    cfg.master_seed = 11;
    cfg.sim_k = GridSpec {
        n: 16,
        half_width: 4.0,
    };
    cfg.radius_range = [2.5, 3.5];
    cfg.out_k = 32;
    cfg.z_grid = 32;
    cfg.beltrami.n = 64;
    cfg
}

fn sample_pair() -> TrainingPair {
    let n = 4;
    TrainingPair {
        style: Style::Kit4,
        n,
        truth: (0..16).map(|i| 0.1 + i as f64 * 0.01).collect(),
        recon: (0..16).map(|i| (i as f64).sin().abs() + 0.05).collect(),
        m0_imag: (0..16).map(|i| -1e-5 * i as f64).collect(),
        seed: 0xDEAD_BEEF_0123_4567,
        radius: 4.25,
        sigma_b: 0.137,
    }
}

#[test]
fn defaults_per_style() {
    let a = DatasetConfig::for_style(Style::Act4).unwrap();
    assert_eq!((a.count, a.sim_k.n, a.sim_k.half_width), (4096, 32, 5.0));
    assert_eq!(a.radius_range, [3.5, 5.0]);
    let k = DatasetConfig::for_style(Style::Kit4).unwrap();
    assert_eq!((k.count, k.sim_k.half_width), (15360, 5.5));
    assert_eq!(k.radius_range, [4.0, 5.5]);
    assert_eq!((k.out_k, k.z_grid, k.thresh), (64, 64, 24.0));
    assert!(DatasetConfig::for_style(Style::Measured).is_err());
    let mut bad = k.clone();
    bad.radius_range = [4.0, 6.0];
    assert!(matches!(bad.validate(), Err(Error::Invalid(_))));
}

#[test]
fn eitp_layout_is_bit_exact() {
    let pair = sample_pair();
    let bytes = eitp::encode(&pair);
    assert_eq!(bytes.len(), eitp::encoded_len(4, 4));
    assert_eq!(&bytes[0..4], b"EITP");
    assert_eq!(&bytes[4..8], &[1, 0, 0, 1]);
    assert_eq!(&bytes[8..16], &[4, 0, 0, 0, 4, 0, 0, 0]);
    assert_eq!(&bytes[16..24], &0.1f64.to_le_bytes());
    let meta = 16 + 3 * 8 * 16;
    assert_eq!(&bytes[meta..meta + 8], &pair.seed.to_le_bytes());
    let crc = crc32fast::hash(&bytes[..bytes.len() - 4]);
    assert_eq!(&bytes[bytes.len() - 4..], &crc.to_le_bytes());
    let back = eitp::decode(&bytes, Path::new("mem")).unwrap();
    assert_eq!(back, pair);
}

#[test]
fn eitp_rejects_damage() {
    let bytes = eitp::encode(&sample_pair());
    let p = Path::new("mem");
    let reject = |b: &[u8]| matches!(eitp::decode(b, p), Err(Error::Format { .. }));
    assert!(reject(&bytes[..bytes.len() - 9]));
    let mut flipped = bytes.clone();
    flipped[100] ^= 0x10;
    assert!(reject(&flipped));
    let mut endian = bytes.clone();
    endian[6] = 1;
    assert!(reject(&endian));
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(reject(&magic));
    let mut version = bytes.clone();
    version[4] = 2;
    assert!(reject(&version));
    let mut dims = bytes.clone();
    dims[8] = 5;
    assert!(reject(&dims));
}

#[test]
fn eitp_file_round_trip_and_atomic_write() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.eitp");
    let pair = sample_pair();
    write_pair(&pair, &path).unwrap();
    let back = read_pair(&path).unwrap();
    for (a, b) in back.recon.iter().zip(&pair.recon) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(back, pair);
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(leftovers.len(), 1);
    let mut short = pair.clone();
    short.truth.pop();
    assert!(write_pair(&short, &path).is_err());
}

#[test]
fn seeds_are_distinct_across_indices_and_attempts() {
    let mut seen = std::collections::HashSet::new();
    for index in 0..200 {
        for attempt in 0..4 {
            assert!(seen.insert(derive_seed(7, index, attempt)));
        }
    }
    assert_ne!(derive_seed(7, 0, 0), derive_seed(8, 0, 0));
}

#[test]
fn homogeneous_phantom_reconstructs_background() {
    let cfg = small(Style::Kit4);
    let phantom = Phantom::homogeneous(0.14);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pair = pair_from_phantom(&phantom, &mut rng, 1, &cfg).unwrap();
    assert!((cfg.radius_range[0]..=cfg.radius_range[1]).contains(&pair.radius));
    for (t, r) in pair.truth.iter().zip(&pair.recon) {
        assert_eq!(*t, 0.14);
        assert!((r - 0.14).abs() < 1e-3 * 0.14, "recon {r}");
    }
}

#[test]
fn pairs_are_deterministic_and_in_range() {
    for style in [Style::Act4, Style::Kit4] {
        let cfg = small(style);
        let a = generate_pair(5, &cfg).unwrap();
        let b = generate_pair(5, &cfg).unwrap();
        assert_eq!(eitp::encode(&a), eitp::encode(&b));
        assert_eq!(a.seed, derive_seed(11, 5, 0));
        assert!(a.recon.iter().all(|v| *v > 0.0));
        let (lo, hi) = match style {
            Style::Act4 => (0.01, 1.5),
            _ => (0.05, 0.34),
        };
        assert!(a.truth.iter().all(|v| (lo..=hi).contains(v)), "{style}");
        assert_eq!(a.style, style);
    }
}

#[test]
fn dataset_generation_resumes_to_identical_bytes() {
    let cfg = small(Style::Kit4);
    let full = tempfile::tempdir().unwrap();
    let m = generate_dataset(&cfg, full.path(), false, |_, _| {}).unwrap();
    assert_eq!(m.pairs.len(), 3);
    assert!(m.missing.is_empty());
    let names: Vec<String> = m.pairs.iter().map(|p| p.file.clone()).collect();
    assert_eq!(names, ["pair_000000.eitp", "pair_000001.eitp", "pair_000002.eitp"]);

    // Simulated interruption: one file missing, one torn, manifest unchanged.
    let part = tempfile::tempdir().unwrap();
    for n in &names {
        std::fs::copy(full.path().join(n), part.path().join(n)).unwrap();
    }
    std::fs::copy(full.path().join(MANIFEST_NAME), part.path().join(MANIFEST_NAME)).unwrap();
    std::fs::remove_file(part.path().join(&names[1])).unwrap();
    let torn = std::fs::read(part.path().join(&names[2])).unwrap();
    std::fs::write(part.path().join(&names[2]), &torn[..torn.len() / 2]).unwrap();
    let mut calls = 0;
    generate_dataset(&cfg, part.path(), true, |_, _| calls += 1).unwrap();
    assert_eq!(calls, 3);
    for n in names.iter().chain([&MANIFEST_NAME.to_string()]) {
        assert_eq!(
            std::fs::read(full.path().join(n)).unwrap(),
            std::fs::read(part.path().join(n)).unwrap(),
            "{n}"
        );
    }

    let mut other = cfg.clone();
    other.radius_range = [2.5, 3.0];
    assert!(matches!(
        generate_dataset(&other, part.path(), true, |_, _| {}),
        Err(Error::Invalid(_))
    ));
    assert_eq!(load_manifest(part.path()).unwrap(), m);
}

#[test]
fn first_index_offsets_seeds() {
    let mut cfg = small(Style::Kit4);
    cfg.first_index = 1_000_000;
    let pair = generate_pair(cfg.first_index, &cfg).unwrap();
    assert_eq!(pair.seed, derive_seed(11, 1_000_000, 0));
}

#[test]
fn style_names_parse() {
    assert_eq!("KIT4".parse::<Style>().unwrap(), Style::Kit4);
    assert_eq!(Style::Act4.to_string(), "act4");
    assert!("foo".parse::<Style>().is_err());
    for s in [Style::Act4, Style::Kit4, Style::Measured] {
        assert_eq!(Style::from_code(s.code()), Some(s));
    }
}
