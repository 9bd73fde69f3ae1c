//! Datasets and task helpers for classification, image fitting and
//! sum-of-digits.

mod classify;
mod deepset;
mod digitsum;
mod idx;
mod nir;
mod partition;
mod source;
mod synthetic;

pub use classify::{argmax, classification_data, one_hot, submodel_accuracy, CLASSES};
pub use deepset::{train_deepset, DeepSet, DeepSetTraining};
pub use digitsum::{build_digit_sum, group_accuracy, DigitEncoder, DigitSumDataset, FEATURE_DIM};
pub use idx::{encode_idx, load_idx, parse_idx, parse_images, parse_labels, write_idx, ImageDataset};
pub use nir::{
    fourier_features, fourier_matrix, nir_fixtures, psnr, NirDataset, RgbImage, FOURIER_FREQUENCIES,
    FOURIER_SCALE, PSNR_CAP,
};
pub use partition::{partition_balanced, SubmodelPartition};
pub use source::{data_dir, find_idx, load_digits, DataSource, Split, DATA_DIR_ENV};
pub use synthetic::{render_digit, synthetic_digits, SIDE};
