//! Locating digit datasets: IDX files under `CSNET_DATA_DIR`, otherwise the
//! synthetic generator.

use std::path::{Path, PathBuf};

use super::idx::{load_idx, ImageDataset};
use super::synthetic::synthetic_digits;
use crate::error::Result;

pub const DATA_DIR_ENV: &str = "CSNET_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

/// Where a dataset came from, recorded in run summaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataSource {
    Idx(PathBuf),
    Synthetic { per_class: usize, seed: u64 },
}

impl std::fmt::Display for DataSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DataSource::Idx(p) => write!(f, "idx:{}", p.display()),
            DataSource::Synthetic { per_class, seed } => write!(f, "synthetic:{per_class}x10:seed{seed}"),
        }
    }
}

/// The data directory: explicit argument, else `CSNET_DATA_DIR`.
pub fn data_dir(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
}

/// IDX image/label paths for `split` inside `dir`, if both exist. Accepts
/// the MNIST names with either `-` or `.` before `idx`.
pub fn find_idx(dir: &Path, split: Split) -> Option<(PathBuf, PathBuf)> {
    let p = split.prefix();
    for sep in ["-", "."] {
        let images = dir.join(format!("{p}-images{sep}idx3-ubyte"));
        let labels = dir.join(format!("{p}-labels{sep}idx1-ubyte"));
        if images.is_file() && labels.is_file() {
            return Some((images, labels));
        }
    }
    None
}

/// Loads `split` from the data directory when it holds IDX files,
/// otherwise synthesises `fallback_per_class` samples per class. Train and
/// test fallbacks use different seeds.
pub fn load_digits(
    dir: Option<&Path>,
    split: Split,
    fallback_per_class: usize,
    seed: u64,
) -> Result<(ImageDataset, DataSource)> {
    if let Some((images, labels)) = data_dir(dir).and_then(|d| find_idx(&d, split)) {
        return Ok((load_idx(&images, &labels)?, DataSource::Idx(images)));
    }
    let seed = match split {
        Split::Train => seed.wrapping_mul(2).wrapping_add(0x5eed),
        Split::Test => seed.wrapping_mul(2).wrapping_add(0x5eed + 1),
    };
    Ok((
        synthetic_digits(fallback_per_class, seed),
        DataSource::Synthetic {
            per_class: fallback_per_class,
            seed,
        },
    ))
}
