//! Benchmark fixtures; the benchmarks themselves live in `benches/`.

use nullspace_unlearn::dataio::synthetic::DeskSuite;
use nullspace_unlearn::dataio::{SuiteConfig, SyntheticGenConfig};
use nullspace_unlearn::linalg::Matrix;
use nullspace_unlearn::rng::{seeded, standard_normal_vec};

pub fn gaussian(seed: u64, rows: usize, cols: usize) -> Matrix {
    Matrix::new(rows, cols, standard_normal_vec(&mut seeded(seed), rows * cols)).expect("finite draws")
}

/// The default desk-scale suite with `samples` per cell.
pub fn desk(samples: usize) -> DeskSuite {
    let generator = SyntheticGenConfig { samples_per_cell: samples, ..Default::default() };
    SuiteConfig { generator, ..Default::default() }.build().expect("default suite builds")
}
