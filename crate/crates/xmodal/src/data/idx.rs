//! IDX binary format (the MNIST container): big-endian magic and dimension
//! sizes followed by unsigned bytes. The reader is strict — wrong magic,
//! truncated payloads, and trailing bytes are all rejected with errors
//! naming the offending field.

use std::path::Path;

use crate::iofmt;
use crate::numerics::Matrix;
use crate::{Error, Result, Scalar};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, what: &str, field: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::format(
            what,
            format!("file ends inside the {field} field"),
        ));
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

fn check_payload(bytes: &[u8], header: usize, expect: u128, what: &str) -> Result<()> {
    let actual = (bytes.len() - header) as u128;
    if actual < expect {
        return Err(Error::format(
            what,
            format!("payload truncated: expected {expect} data bytes, found {actual}"),
        ));
    }
    if actual > expect {
        return Err(Error::format(
            what,
            format!("trailing garbage: expected {expect} data bytes, found {actual}"),
        ));
    }
    Ok(())
}

/// Load an IDX image/label file pair. Pixels are scaled to `[0, 1]`
/// (byte 255 → 1.0) and images are flattened row-major.
pub fn load_idx<F: Scalar>(images_path: &Path, labels_path: &Path) -> Result<(Matrix<F>, Vec<usize>)> {
    let what_img = "idx image file";
    let img = iofmt::read_bytes(images_path)?;
    let magic = be_u32(&img, 0, what_img, "magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(
            what_img,
            format!("magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"),
        ));
    }
    let n = be_u32(&img, 4, what_img, "image count")? as usize;
    let rows = be_u32(&img, 8, what_img, "row count")? as usize;
    let cols = be_u32(&img, 12, what_img, "column count")? as usize;
    check_payload(&img, 16, n as u128 * rows as u128 * cols as u128, what_img)?;
    if n == 0 || rows == 0 || cols == 0 {
        return Err(Error::format(
            what_img,
            format!("degenerate dimensions {n}x{rows}x{cols}"),
        ));
    }

    let what_lab = "idx label file";
    let lab = iofmt::read_bytes(labels_path)?;
    let lmagic = be_u32(&lab, 0, what_lab, "magic")?;
    if lmagic != LABEL_MAGIC {
        return Err(Error::format(
            what_lab,
            format!("magic {lmagic:#010x}, expected {LABEL_MAGIC:#010x}"),
        ));
    }
    let ln = be_u32(&lab, 4, what_lab, "label count")? as usize;
    check_payload(&lab, 8, ln as u128, what_lab)?;
    if ln != n {
        return Err(Error::format(
            what_lab,
            format!("label count {ln} does not match image count {n}"),
        ));
    }

    let scale = F::of(1.0 / 255.0);
    let entries: Vec<F> = img[16..]
        .iter()
        .map(|&b| F::of(b as f64) * scale)
        .collect();
    let images = Matrix::from_vec(n, rows * cols, entries);
    let labels = lab[8..].iter().map(|&b| b as usize).collect();
    Ok((images, labels))
}

/// Write raw image bytes in IDX format (test and import tooling).
pub fn write_idx_images(path: &Path, n: u32, rows: u32, cols: u32, pixels: &[u8]) -> Result<()> {
    let expect = n as u128 * rows as u128 * cols as u128;
    if pixels.len() as u128 != expect {
        return Err(Error::Dimension(format!(
            "{n}x{rows}x{cols} images need {expect} bytes, got {}",
            pixels.len()
        )));
    }
    let mut bytes = Vec::with_capacity(16 + pixels.len());
    bytes.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&n.to_be_bytes());
    bytes.extend_from_slice(&rows.to_be_bytes());
    bytes.extend_from_slice(&cols.to_be_bytes());
    bytes.extend_from_slice(pixels);
    iofmt::write_atomic(path, &bytes)
}

/// Write labels in IDX format.
pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    iofmt::write_atomic(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_files(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
        let img = dir.join("imgs.idx");
        let lab = dir.join("labs.idx");
        write_idx_images(&img, 2, 2, 2, &[0, 64, 128, 255, 10, 20, 30, 40]).unwrap();
        write_idx_labels(&lab, &[3, 7]).unwrap();
        (img, lab)
    }

    #[test]
    fn load_scales_and_flattens() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = sample_files(dir.path());
        let (m, labels) = load_idx::<f64>(&img, &lab).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.cols(), 4);
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.get(0, 3), 1.0);
        assert!((m.get(0, 1) - 64.0 / 255.0).abs() < 1e-15);
        assert_eq!(labels, vec![3, 7]);
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..=255).cycle().take(3 * 28 * 28).map(|x| x as u8).collect();
        let img = dir.path().join("i.idx");
        write_idx_images(&img, 3, 28, 28, &pixels).unwrap();
        let bytes = std::fs::read(&img).unwrap();
        assert_eq!(&bytes[16..], pixels.as_slice());
        let lab = dir.path().join("l.idx");
        write_idx_labels(&lab, &[0, 1, 2]).unwrap();
        let (m, _) = load_idx::<f64>(&img, &lab).unwrap();
        // Scale back up: every pixel byte survives.
        let back: Vec<u8> = m
            .entries()
            .iter()
            .map(|&v| (v * 255.0).round() as u8)
            .collect();
        assert_eq!(back, pixels);
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = sample_files(dir.path());
        let mut bytes = std::fs::read(&img).unwrap();
        bytes[2] = 9;
        std::fs::write(&img, &bytes).unwrap();
        let err = load_idx::<f64>(&img, &lab).unwrap_err().to_string();
        assert!(err.contains("magic"), "{err}");
    }

    #[test]
    fn rejects_every_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = sample_files(dir.path());
        let full = std::fs::read(&img).unwrap();
        for cut in 0..full.len() {
            std::fs::write(&img, &full[..cut]).unwrap();
            assert!(
                load_idx::<f64>(&img, &lab).is_err(),
                "truncation to {cut} bytes accepted"
            );
        }
        std::fs::write(&img, &full).unwrap();

        let full_lab = std::fs::read(&lab).unwrap();
        for cut in 0..full_lab.len() {
            std::fs::write(&lab, &full_lab[..cut]).unwrap();
            assert!(load_idx::<f64>(&img, &lab).is_err());
        }
    }

    #[test]
    fn rejects_trailing_bytes_and_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = sample_files(dir.path());
        let mut bytes = std::fs::read(&img).unwrap();
        bytes.push(0);
        std::fs::write(&img, &bytes).unwrap();
        assert!(load_idx::<f64>(&img, &lab).is_err());

        let (img, lab) = sample_files(dir.path());
        write_idx_labels(&lab, &[1, 2, 3]).unwrap(); // 3 labels, 2 images
        let err = load_idx::<f64>(&img, &lab).unwrap_err().to_string();
        assert!(err.contains("does not match"), "{err}");
    }

    #[test]
    fn rejects_dimension_overflow() {
        // Header advertises a payload far larger than the file: the u128
        // product must not wrap around and accidentally match.
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("evil.idx");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&u32::MAX.to_be_bytes());
        bytes.extend_from_slice(&u32::MAX.to_be_bytes());
        bytes.extend_from_slice(&u32::MAX.to_be_bytes());
        bytes.extend_from_slice(&[0u8; 64]);
        std::fs::write(&img, &bytes).unwrap();
        let lab = dir.path().join("l.idx");
        write_idx_labels(&lab, &[0]).unwrap();
        assert!(load_idx::<f64>(&img, &lab).is_err());
    }

    #[test]
    fn writer_validates_payload_length() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("i.idx");
        assert!(write_idx_images(&img, 2, 2, 2, &[0; 7]).is_err());
    }
}
