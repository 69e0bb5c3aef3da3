mod common;

use common::gaussian_matrix;
use nullspace_unlearn::dataio::{
    decode_dataset, decode_matrix, encode_dataset, encode_matrix, load_bank, load_dataset, load_manifest, load_matrix,
    save_bank, save_dataset, save_manifest, save_matrix, Dtype, SuiteConfig, SyntheticGenConfig,
};
use nullspace_unlearn::linalg::{nullspace_projector, Matrix, DEFAULT_RANK_TOL};
use nullspace_unlearn::{apply_unlearning, Error, FormatError, LabeledEmbeddingSet, UnlearnMode};
use proptest::prelude::*;

fn small_suite() -> nullspace_unlearn::dataio::synthetic::DeskSuite {
    let generator = SyntheticGenConfig { samples_per_cell: 3, seed: 9, ..Default::default() };
    SuiteConfig { generator, ..Default::default() }.build().unwrap()
}

#[test]
fn single_precision_storage_loses_at_most_one_ulp() {
    let m = gaussian_matrix(4, 13, 9);
    let back = decode_matrix(&encode_matrix(&m, Dtype::F32).unwrap()).unwrap();
    for (a, b) in m.data().iter().zip(back.data()) {
        let single = *a as f32;
        let ulp = (f32::from_bits(single.abs().to_bits() + 1) - single.abs()) as f64;
        assert!((a - b).abs() <= ulp, "{a} -> {b}");
    }
}

#[test]
fn files_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let desk = small_suite();
    let s = &desk.suite;

    let mpath = dir.path().join("projection.bin");
    save_matrix(&mpath, &desk.projection, Dtype::F64).unwrap();
    let back = load_matrix(&mpath).unwrap();
    assert!(back.data().iter().zip(desk.projection.data()).all(|(a, b)| a.to_bits() == b.to_bits()));

    let dpath = dir.path().join("data.bin");
    save_dataset(&dpath, &s.data, Dtype::F64).unwrap();
    assert_eq!(load_dataset(&dpath).unwrap(), s.data);
    let bytes = std::fs::read(&dpath).unwrap();
    assert_eq!(encode_dataset(&load_dataset(&dpath).unwrap(), Dtype::F64).unwrap(), bytes);

    // f32 storage is a fixed point after the first rounding
    let f32_bytes = encode_dataset(&s.data, Dtype::F32).unwrap();
    let once = decode_dataset(&f32_bytes).unwrap();
    assert_eq!(encode_dataset(&once, Dtype::F32).unwrap(), f32_bytes);

    let man = dir.path().join("manifest.json");
    save_manifest(&man, &s.manifest).unwrap();
    assert_eq!(load_manifest(&man).unwrap(), s.manifest);

    let p = nullspace_projector(&gaussian_matrix(2, 4, 32), DEFAULT_RANK_TOL).unwrap();
    let projectors = [("sketch".to_string(), p)].into();
    let mode = UnlearnMode::SelectiveDomain(["sketch".to_string()].into());
    let bank = apply_unlearning(&desk.projection, &mode, &s.manifest.domains, &projectors).unwrap();
    save_bank(dir.path().join("bank"), &bank).unwrap();
    assert_eq!(load_bank(dir.path().join("bank")).unwrap(), bank);
}

#[test]
fn malformed_inputs_are_format_errors() {
    let m = Matrix::identity(3);
    let good = encode_matrix(&m, Dtype::F64).unwrap();
    let fmt = |r: nullspace_unlearn::Result<Matrix>| match r {
        Err(Error::Format(e)) => e,
        other => panic!("expected a format error, got {other:?}"),
    };

    let mut bad = good.clone();
    bad[0] = b'X';
    assert_eq!(fmt(decode_matrix(&bad)), FormatError::BadMagic);

    let mut bad = good.clone();
    bad[7] = b'2';
    assert!(matches!(fmt(decode_matrix(&bad)), FormatError::VersionMismatch { .. }));

    assert!(matches!(fmt(decode_matrix(&good[..good.len() - 1])), FormatError::Truncated { .. }));
    assert!(matches!(fmt(decode_matrix(&good[..5])), FormatError::BadMagic));

    let mut bad = good.clone();
    bad.push(0);
    assert_eq!(fmt(decode_matrix(&bad)), FormatError::TrailingBytes(1));

    let mut bad = good.clone();
    bad[8..12].copy_from_slice(&7u32.to_le_bytes());
    assert_eq!(fmt(decode_matrix(&bad)), FormatError::UnsupportedDtype(7));

    let mut bad = good.clone();
    bad[12..20].copy_from_slice(&[0xff; 8]);
    assert!(matches!(fmt(decode_matrix(&bad)), FormatError::DimensionOverflow { .. } | FormatError::Truncated { .. }));

    let mut bad = good.clone();
    bad[20..28].copy_from_slice(&f64::NAN.to_le_bytes());
    assert_eq!(fmt(decode_matrix(&bad)), FormatError::NonFinite);
}

#[test]
fn dataset_labels_must_fit_the_manifest() {
    let data = LabeledEmbeddingSet::new(Matrix::identity(2), vec![0, 5], vec![0, 1]).unwrap();
    assert!(data.check_labels(2, 2).is_err());
}

proptest! {
    #[test]
    fn f64_blocks_round_trip(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
        let m = gaussian_matrix(seed, rows, cols);
        let bytes = encode_matrix(&m, Dtype::F64).unwrap();
        prop_assert_eq!(bytes.len(), 20 + 8 * rows * cols);
        let back = decode_matrix(&bytes).unwrap();
        prop_assert_eq!(back.shape(), m.shape());
        prop_assert!(back.data().iter().zip(m.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn random_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode_matrix(&bytes);
        let _ = decode_dataset(&bytes);
    }
}
