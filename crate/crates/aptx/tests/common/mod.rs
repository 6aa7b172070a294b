//! Shared helpers for the integration tests: synthetic IDX datasets and
//! MNIST discovery.

use std::path::{Path, PathBuf};

use aptx::mnist::{write_idx_images, write_idx_labels, IMAGE_PIXELS, TEST_IMAGES, TEST_LABELS, TRAIN_IMAGES, TRAIN_LABELS};
use aptx::tensor::Rng;

/// Write a linearly-separable synthetic "digit" split as real IDX
/// files: class k lights up its own block of pixels over mild noise.
pub fn write_synthetic_split(
    dir: &Path,
    images_name: &str,
    labels_name: &str,
    seed: u64,
    samples: usize,
) {
    let classes = 10usize;
    let mut rng = Rng::new(seed);
    let mut pixels = vec![0u8; samples * IMAGE_PIXELS];
    let mut labels = vec![0u8; samples];
    let block = IMAGE_PIXELS / classes;
    for s in 0..samples {
        let class = (rng.next_u64() % classes as u64) as usize;
        labels[s] = class as u8;
        let row = &mut pixels[s * IMAGE_PIXELS..(s + 1) * IMAGE_PIXELS];
        for v in row.iter_mut() {
            *v = (rng.next_u64() % 26) as u8;
        }
        for v in row[class * block..(class + 1) * block].iter_mut() {
            *v = 200 + (rng.next_u64() % 56) as u8;
        }
    }
    write_idx_images(&dir.join(images_name), &pixels).unwrap();
    write_idx_labels(&dir.join(labels_name), &labels).unwrap();
}

/// Full synthetic train+test directory in canonical file names.
pub fn write_synthetic_data_dir(dir: &Path, train_samples: usize, test_samples: usize) {
    write_synthetic_split(dir, TRAIN_IMAGES, TRAIN_LABELS, 1, train_samples);
    write_synthetic_split(dir, TEST_IMAGES, TEST_LABELS, 2, test_samples);
}

/// Directory holding the real MNIST files, if present: $MNIST_DATA_DIR
/// or <workspace>/data.
pub fn mnist_data_dir() -> Option<PathBuf> {
    let candidates = [
        std::env::var_os("MNIST_DATA_DIR").map(PathBuf::from),
        Some(
            Path::new(env!("CARGO_MANIFEST_DIR"))
                .join("../../data")
                .to_path_buf(),
        ),
    ];
    for dir in candidates.into_iter().flatten() {
        let have_all = [TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS]
            .iter()
            .all(|stem| {
                dir.join(stem).exists() || dir.join(format!("{stem}.gz")).exists()
            });
        if have_all {
            return Some(dir);
        }
    }
    None
}
