use std::path::Path;

use gigp_harness::data::idx::{encode_idx_images, encode_idx_labels, parse_idx_images, parse_idx_labels, ImageSet};
use gigp_harness::data::xyz::load_xyz_frames;
use gigp_harness::data::{load_splits, Target};
use gigp_harness::ExperimentConfig;
use proptest::prelude::*;

fn repo() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."))
}

#[test]
fn digit_fixtures_load_with_balanced_labels() {
    let mut config = ExperimentConfig::load(&repo().join("configs/digits.conf")).unwrap();
    config.n_train = usize::MAX;
    config.n_val = usize::MAX;
    config.n_test = usize::MAX;
    let splits = load_splits(&config).unwrap();
    assert_eq!((splits.train.len(), splits.val.len(), splits.test.len()), (2000, 500, 1000));
    let mut counts = [0usize; 10];
    for e in &splits.train {
        match e.target {
            Target::Class(c) => counts[c] += 1,
            Target::Value(_) => panic!("digit labels are classes"),
        }
        assert!(e.cloud.len() <= config.max_points && !e.cloud.is_empty());
    }
    assert_eq!(counts, [200; 10]);
}

#[test]
fn molecule_file_parses_with_targets() {
    let mols = load_xyz_frames(&repo().join("data/molecules/small.xyz")).unwrap();
    assert_eq!(mols.len(), 16);
    assert_eq!(mols[0].comment, "water target=18.015");
    assert!((mols[0].target().unwrap() - 18.015).abs() < 1e-12);
    assert_eq!(mols[0].cloud.feat_dim, 5);
}

proptest! {
    #[test]
    fn idx_roundtrip(rows in 1usize..6, cols in 1usize..6, n in 0usize..5, seed in any::<u64>()) {
        let images: Vec<Vec<f64>> = (0..n).map(|i| (0..rows * cols).map(|j| (seed.wrapping_mul(31).wrapping_add((i * 7 + j) as u64) % 256) as f64 / 255.0).collect()).collect();
        let set = ImageSet { rows, cols, images };
        let bytes = encode_idx_images(&set);
        prop_assert_eq!(&bytes[..4], &[0, 0, 8, 3]);
        prop_assert_eq!(parse_idx_images(&bytes).unwrap(), set);
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        prop_assert_eq!(parse_idx_labels(&encode_idx_labels(&labels)).unwrap(), labels);
    }

    #[test]
    fn truncated_idx_is_rejected(cut in 0usize..20) {
        let set = ImageSet { rows: 2, cols: 2, images: vec![vec![0.0, 1.0, 0.5, 0.25]; 2] };
        let bytes = encode_idx_images(&set);
        prop_assume!(cut < bytes.len());
        prop_assert!(parse_idx_images(&bytes[..cut]).is_err());
    }
}
