//! Big-endian IDX containers as used by MNIST-family datasets.

use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Grayscale images in `[0, 1]`, row-major, with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
    pub labels: Vec<u8>,
}

impl ImageDataset {
    pub fn new(rows: usize, cols: usize, pixels: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 || pixels.len() != rows * cols * labels.len() {
            return Err(Error::Dataset(format!(
                "{} pixels for {} images of {rows}×{cols}",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= 10) {
            return Err(Error::Dataset(format!("label {l} out of range")));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Dataset("pixel outside [0, 1]".into()));
        }
        Ok(Self {
            rows,
            cols,
            pixels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let n = self.image_len();
        &self.pixels[i * n..(i + 1) * n]
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * self.image_len());
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            pixels,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Indices of every class, in dataset order.
    pub fn by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); 10];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(i);
        }
        out
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Idx(format!("truncated header: {} bytes", bytes.len())))
}

fn check_magic(found: u32, expected: u32) -> Result<()> {
    if found != expected {
        return Err(Error::Idx(format!("bad magic {found:#010x}, expected {expected:#010x}")));
    }
    Ok(())
}

fn check_payload(bytes: &[u8], header: usize, expected: usize) -> Result<()> {
    let found = bytes.len() - header;
    if found < expected {
        return Err(Error::Idx(format!("truncated payload: {found} of {expected} bytes")));
    }
    if found > expected {
        return Err(Error::Idx(format!("{} trailing bytes", found - expected)));
    }
    Ok(())
}

/// Parses an image file: returns `(rows, cols, raw pixels)`.
pub fn parse_images(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    check_magic(be_u32(bytes, 0)?, IMAGES_MAGIC)?;
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Idx(format!("image size {rows}×{cols}")));
    }
    let expected = n
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Idx("image count overflows".into()))?;
    check_payload(bytes, 16, expected)?;
    Ok((rows, cols, bytes[16..].to_vec()))
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(be_u32(bytes, 0)?, LABELS_MAGIC)?;
    let n = be_u32(bytes, 4)? as usize;
    check_payload(bytes, 8, n)?;
    Ok(bytes[8..].to_vec())
}

/// Combines parsed image and label payloads, scaling pixels by 1/255.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<ImageDataset> {
    let (rows, cols, raw) = parse_images(images)?;
    let labels = parse_labels(labels)?;
    let n_images = raw.len() / (rows * cols);
    if n_images != labels.len() {
        return Err(Error::Idx(format!("{n_images} images but {} labels", labels.len())));
    }
    if let Some(l) = labels.iter().find(|&&l| l >= 10) {
        return Err(Error::Idx(format!("label {l} out of range")));
    }
    let pixels = raw.iter().map(|&p| f64::from(p) / 255.0).collect();
    ImageDataset::new(rows, cols, pixels, labels)
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<ImageDataset> {
    let images = std::fs::read(images_path)?;
    let labels = std::fs::read(labels_path)?;
    parse_idx(&images, &labels)
}

/// Encodes a dataset as `(image file, label file)` bytes, quantising
/// pixels to `round(255·p)`.
pub fn encode_idx(ds: &ImageDataset) -> (Vec<u8>, Vec<u8>) {
    let n = ds.len() as u32;
    let mut images = Vec::with_capacity(16 + ds.pixels.len());
    for v in [IMAGES_MAGIC, n, ds.rows as u32, ds.cols as u32] {
        images.extend_from_slice(&v.to_be_bytes());
    }
    images.extend(ds.pixels.iter().map(|p| (p * 255.0).round().clamp(0.0, 255.0) as u8));
    let mut labels = Vec::with_capacity(8 + ds.len());
    for v in [LABELS_MAGIC, n] {
        labels.extend_from_slice(&v.to_be_bytes());
    }
    labels.extend_from_slice(&ds.labels);
    (images, labels)
}

pub fn write_idx(ds: &ImageDataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let (images, labels) = encode_idx(ds);
    std::fs::write(images_path, images)?;
    std::fs::write(labels_path, labels)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Four 2×3 images, written out byte by byte.
    fn fixture() -> (Vec<u8>, Vec<u8>) {
        let mut images = vec![0, 0, 8, 3, 0, 0, 0, 4, 0, 0, 0, 2, 0, 0, 0, 3];
        images.extend_from_slice(&[0, 255, 51, 102, 153, 204]);
        images.extend_from_slice(&[255; 6]);
        images.extend_from_slice(&[0; 6]);
        images.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let labels = vec![0, 0, 8, 1, 0, 0, 0, 4, 7, 0, 9, 3];
        (images, labels)
    }

    #[test]
    fn fixture_round_trips() {
        let (images, labels) = fixture();
        let ds = parse_idx(&images, &labels).unwrap();
        assert_eq!((ds.rows, ds.cols, ds.len()), (2, 3, 4));
        assert_eq!(ds.labels, vec![7, 0, 9, 3]);
        assert_eq!(ds.image(0), &[0.0, 1.0, 0.2, 0.4, 0.6, 0.8]);
        assert_eq!(encode_idx(&ds), (images, labels));
    }

    #[test]
    fn files_round_trip() {
        let (images, labels) = fixture();
        let ds = parse_idx(&images, &labels).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i.idx"), dir.path().join("l.idx"));
        write_idx(&ds, &ip, &lp).unwrap();
        assert_eq!(load_idx(&ip, &lp).unwrap(), ds);
    }

    #[test]
    fn empty_payload_is_truncated() {
        let (images, labels) = fixture();
        let err = parse_idx(&images[..16], &labels).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
        assert!(parse_labels(&labels[..8]).is_err());
        assert!(parse_images(&[]).is_err());
    }

    #[test]
    fn count_mismatch() {
        let (images, _) = fixture();
        let labels = vec![0, 0, 8, 1, 0, 0, 0, 3, 1, 2, 3];
        let err = parse_idx(&images, &labels).unwrap_err();
        assert!(err.to_string().contains("labels"), "{err}");
    }

    #[test]
    fn bad_magic() {
        let (images, labels) = fixture();
        assert!(parse_idx(&labels, &images).is_err());
    }

    proptest! {
        #[test]
        fn mutated_headers_are_rejected(pos in 0usize..16, xor in 1u8..=255) {
            let (mut images, labels) = fixture();
            images[pos] ^= xor;
            prop_assert!(parse_idx(&images, &labels).is_err());
        }

        #[test]
        fn mutated_label_headers_are_rejected(pos in 0usize..8, xor in 1u8..=255) {
            let (images, mut labels) = fixture();
            labels[pos] ^= xor;
            prop_assert!(parse_idx(&images, &labels).is_err());
        }

        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = parse_images(&bytes);
            let _ = parse_labels(&bytes);
        }
    }
}
