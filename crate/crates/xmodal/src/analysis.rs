//! Post-hoc analysis: 2-D embedding plots, cross-modal reconstruction,
//! and the grayscale image format used to inspect reconstructions.

use std::path::Path;

use crate::detection::PairScorer;
use crate::iofmt;
use crate::numerics::{pca_fit_project, Matrix};
use crate::training::Encoder;
use crate::{Error, Result, Scalar};

/// One plotted sample: PCA coordinates plus its class label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VizPoint<F: Scalar> {
    pub x: F,
    pub y: F,
    pub class_id: usize,
}

/// Embed `features` with the given encoder (evaluation mode, no dropout)
/// and project the embeddings onto their two leading principal components.
/// With a class filter only matching rows are embedded and fitted.
pub fn viz_embeddings<F: Scalar>(
    encoder: &Encoder<F>,
    features: &Matrix<F>,
    labels: &[usize],
    class_filter: Option<&[usize]>,
) -> Result<Vec<VizPoint<F>>> {
    if features.rows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows but {} labels",
            features.rows(),
            labels.len()
        )));
    }
    let keep: Vec<usize> = (0..features.rows())
        .filter(|&i| match class_filter {
            None => true,
            Some(classes) => classes.contains(&labels[i]),
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptySelection(
            "no rows match the class filter".into(),
        ));
    }
    let mut embedded = Matrix::zeros(keep.len(), encoder.output_dim());
    for (row, &i) in keep.iter().enumerate() {
        let z = encoder.embed(features.row(i))?;
        embedded.row_mut(row).copy_from_slice(&z);
    }
    let (_, coords) = pca_fit_project(&embedded, 2)?;
    Ok(keep
        .iter()
        .enumerate()
        .map(|(row, &i)| VizPoint {
            x: coords.get(row, 0),
            y: coords.get(row, 1),
            class_id: labels[i],
        })
        .collect())
}

/// Write plot points as `x,y,class_id` rows.
pub fn write_coords_csv<F: Scalar>(points: &[VizPoint<F>], path: &Path) -> Result<()> {
    let mut out = String::from("x,y,class_id\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            iofmt::fmt_float(p.x),
            iofmt::fmt_float(p.y),
            p.class_id
        ));
    }
    iofmt::write_atomic(path, out.as_bytes())
}

/// Sum of the image rows whose score against `query` strictly exceeds
/// `epsilon` — the reconstruction of `query` in image space. Errors with
/// [`Error::EmptySelection`] when nothing clears the threshold.
pub fn reconstruct<F: Scalar, S: PairScorer<F>>(
    scorer: &S,
    images: &Matrix<F>,
    query: &[F],
    epsilon: F,
) -> Result<Vec<F>> {
    if !epsilon.is_finite() {
        return Err(Error::Argument("epsilon must be finite".into()));
    }
    let mut sum = vec![F::zero(); images.cols()];
    let mut selected = 0usize;
    for i in 0..images.rows() {
        let row = images.row(i);
        if scorer.score(row, query)? > epsilon {
            for (acc, &v) in sum.iter_mut().zip(row) {
                *acc = *acc + v;
            }
            selected += 1;
        }
    }
    if selected == 0 {
        return Err(Error::EmptySelection(format!(
            "no image scored above {epsilon}"
        )));
    }
    Ok(sum)
}

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    /// Build an image from wide pixel values, rejecting anything above 255.
    pub fn new(rows: usize, cols: usize, pixels: Vec<u16>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Argument("image dimensions must be positive".into()));
        }
        if pixels.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} pixels for a {rows}x{cols} image",
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|&&p| p > 255) {
            return Err(Error::Argument(format!("pixel value {p} exceeds 255")));
        }
        Ok(GrayImage {
            rows,
            cols,
            pixels: pixels.into_iter().map(|p| p as u8).collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }
}

/// Min-max normalize values into 0..=255. A constant input has no
/// contrast and maps to all zeros.
pub fn to_gray_image<F: Scalar>(values: &[F], rows: usize, cols: usize) -> Result<GrayImage> {
    if values.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "{} values for a {rows}x{cols} image",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("image values must be finite".into()));
    }
    let mut lo = F::infinity();
    let mut hi = F::neg_infinity();
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    let pixels: Vec<u16> = if span > F::zero() {
        values
            .iter()
            .map(|&v| {
                let scaled = (v - lo) / span * F::of(255.0);
                scaled.round().to_u16().unwrap_or(255)
            })
            .collect()
    } else {
        vec![0; values.len()]
    };
    GrayImage::new(rows, cols, pixels)
}

const PGM_WHAT: &str = "pgm image";

/// Write a binary PGM (`P5`) file.
pub fn write_pgm(image: &GrayImage, path: &Path) -> Result<()> {
    let header = format!("P5\n{} {}\n255\n", image.cols, image.rows);
    let mut out = Vec::with_capacity(header.len() + image.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&image.pixels);
    iofmt::write_atomic(path, &out)
}

/// Read a binary PGM file written by [`write_pgm`].
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = iofmt::read_bytes(path)?;
    let mut pos = 0usize;
    let mut take_line = |expect: &str| -> Result<String> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format(PGM_WHAT, format!("missing {expect} line")))?;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| Error::format(PGM_WHAT, format!("non-text {expect} line")))?;
        pos += end + 1;
        Ok(line.to_string())
    };

    let magic = take_line("magic")?;
    if magic != "P5" {
        return Err(Error::format(PGM_WHAT, format!("bad magic {magic:?}")));
    }
    let dims = take_line("dimension")?;
    let mut parts = dims.split_whitespace();
    let cols = iofmt::parse_usize(parts.next().unwrap_or(""), PGM_WHAT)?;
    let rows = iofmt::parse_usize(parts.next().unwrap_or(""), PGM_WHAT)?;
    if parts.next().is_some() {
        return Err(Error::format(PGM_WHAT, "extra tokens on dimension line"));
    }
    let maxval = take_line("maxval")?;
    if maxval != "255" {
        return Err(Error::format(PGM_WHAT, format!("unsupported maxval {maxval}")));
    }
    let data = &bytes[pos..];
    if data.len() != rows * cols {
        return Err(Error::format(
            PGM_WHAT,
            format!("expected {} pixel bytes, found {}", rows * cols, data.len()),
        ));
    }
    GrayImage::new(rows, cols, data.iter().map(|&b| b as u16).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, Nonlinearity};
    use crate::numerics::RngStream;
    use crate::objective::ContrastiveConfig;
    use crate::training::{train_cmad, TrainConfig};

    /// Scores a pair by the first feature of the image side, ignoring the
    /// query. Lets tests pick the selected subset exactly.
    struct ScoreByFirst;

    impl PairScorer<f64> for ScoreByFirst {
        fn score(&self, x_a: &[f64], _x_b: &[f64]) -> crate::Result<f64> {
            Ok(x_a[0])
        }
    }

    #[test]
    fn pgm_single_black_pixel_golden_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dot.pgm");
        let image = GrayImage::new(1, 1, vec![0]).unwrap();
        write_pgm(&image, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"P5\n1 1\n255\n\0");
    }

    #[test]
    fn pgm_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let pixels: Vec<u16> = (0..12).map(|i| (i * 23) % 256).collect();
        let image = GrayImage::new(3, 4, pixels).unwrap();
        write_pgm(&image, &path).unwrap();
        let back = read_pgm(&path).unwrap();
        assert_eq!(back, image);

        let again = dir.path().join("again.pgm");
        write_pgm(&back, &again).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&again).unwrap()
        );
    }

    #[test]
    fn pgm_rejects_malformed_headers() {
        let dir = tempfile::tempdir().unwrap();
        for (name, bytes) in [
            ("magic", b"P6\n1 1\n255\n\0".to_vec()),
            ("maxval", b"P5\n1 1\n65535\n\0".to_vec()),
            ("short", b"P5\n2 2\n255\n\0\0".to_vec()),
        ] {
            let path = dir.path().join(format!("{name}.pgm"));
            std::fs::write(&path, &bytes).unwrap();
            assert!(read_pgm(&path).is_err(), "{name} accepted");
        }
    }

    #[test]
    fn gray_image_rejects_out_of_range_pixels() {
        let err = GrayImage::new(1, 2, vec![10, 256]).unwrap_err().to_string();
        assert!(err.contains("256"), "{err}");
        assert!(GrayImage::new(1, 2, vec![10]).is_err());
        assert!(GrayImage::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn to_gray_image_normalizes_to_full_range() {
        let img = to_gray_image(&[0.0, 1.0, 2.0], 1, 3).unwrap();
        assert_eq!(img.pixels(), &[0, 128, 255]);
    }

    #[test]
    fn to_gray_image_constant_input_is_black() {
        let img = to_gray_image(&[3.5; 6], 2, 3).unwrap();
        assert_eq!(img.pixels(), &[0; 6]);
    }

    #[test]
    fn to_gray_image_rejects_non_finite() {
        assert!(to_gray_image(&[0.0, f64::NAN], 1, 2).is_err());
        assert!(to_gray_image(&[0.0; 3], 2, 2).is_err());
    }

    #[test]
    fn reconstruct_full_selection_matches_column_mean() {
        let images = Matrix::new(3, 4, vec![
            0.9, 1.0, 2.0, 0.1, //
            0.5, 3.0, 1.0, 0.2, //
            0.2, 2.0, 0.0, 0.9,
        ])
        .unwrap();
        let sum = reconstruct(&ScoreByFirst, &images, &[0.0], -1.1).unwrap();
        // Min-max normalization cancels the count, so the summed image and
        // the mean image rasterize identically.
        let mean = images.column_means();
        assert_eq!(
            to_gray_image(&sum, 2, 2).unwrap(),
            to_gray_image(&mean, 2, 2).unwrap()
        );
    }

    #[test]
    fn reconstruct_empty_selection_is_an_error() {
        let images = Matrix::new(2, 2, vec![0.3, 1.0, 0.8, 2.0]).unwrap();
        match reconstruct(&ScoreByFirst, &images, &[0.0], 1.1) {
            Err(Error::EmptySelection(_)) => {}
            other => panic!("expected empty selection, got {other:?}"),
        }
    }

    #[test]
    fn reconstruct_threshold_is_strict() {
        let images = Matrix::new(2, 2, vec![0.5, 1.0, 0.7, 10.0]).unwrap();
        // Row 0 sits exactly on the threshold and must be excluded.
        let sum = reconstruct(&ScoreByFirst, &images, &[0.0], 0.5).unwrap();
        assert_eq!(sum, vec![0.7, 10.0]);
    }

    #[test]
    fn viz_rejects_mismatched_labels_and_empty_filters() {
        let mut rng = RngStream::new(31);
        let ds = gen_synthetic::<f64>(3, 10, 6, 5, 0.1, Nonlinearity::None, &mut rng).unwrap();
        let mut cfg = TrainConfig::new(vec![6, 4], vec![5, 4], 9);
        cfg.epochs = 0;
        let model = train_cmad(&ds, &cfg).unwrap();
        assert!(viz_embeddings(&model.encoder_a, &ds.mod_a, &ds.labels_a[..5], None).is_err());
        match viz_embeddings(&model.encoder_a, &ds.mod_a, &ds.labels_a, Some(&[99])) {
            Err(Error::EmptySelection(_)) => {}
            other => panic!("expected empty selection, got {other:?}"),
        }
    }

    #[test]
    fn viz_class_filter_restricts_points() {
        let mut rng = RngStream::new(32);
        let ds = gen_synthetic::<f64>(3, 12, 6, 5, 0.1, Nonlinearity::None, &mut rng).unwrap();
        let mut cfg = TrainConfig::new(vec![6, 4], vec![5, 4], 9);
        cfg.epochs = 0;
        let model = train_cmad(&ds, &cfg).unwrap();
        let points =
            viz_embeddings(&model.encoder_a, &ds.mod_a, &ds.labels_a, Some(&[1])).unwrap();
        assert_eq!(points.len(), 12);
        assert!(points.iter().all(|p| p.class_id == 1));
    }

    #[test]
    fn viz_clusters_trained_classes() {
        let mut rng = RngStream::new(33);
        let ds = gen_synthetic::<f64>(3, 40, 8, 6, 0.05, Nonlinearity::None, &mut rng).unwrap();
        let mut cfg = TrainConfig::new(vec![8, 16, 4], vec![6, 16, 4], 77);
        cfg.epochs = 30;
        cfg.batch_size = 32;
        cfg.dropout_rate = 0.0;
        cfg.contrastive = ContrastiveConfig::new(0.3, 1.0, 0.0).unwrap();
        let model = train_cmad(&ds, &cfg).unwrap();
        let points = viz_embeddings(&model.encoder_a, &ds.mod_a, &ds.labels_a, None).unwrap();

        let mut centroids = vec![(0.0, 0.0, 0usize); 3];
        for p in &points {
            let c = &mut centroids[p.class_id];
            c.0 += p.x;
            c.1 += p.y;
            c.2 += 1;
        }
        let centroids: Vec<(f64, f64)> = centroids
            .into_iter()
            .map(|(x, y, n)| (x / n as f64, y / n as f64))
            .collect();

        let mut within = 0.0;
        for p in &points {
            let (cx, cy) = centroids[p.class_id];
            within += (p.x - cx).powi(2) + (p.y - cy).powi(2);
        }
        let spread = (within / points.len() as f64).sqrt();

        let mut min_sep = f64::MAX;
        for i in 0..3 {
            for j in i + 1..3 {
                let d = ((centroids[i].0 - centroids[j].0).powi(2)
                    + (centroids[i].1 - centroids[j].1).powi(2))
                .sqrt();
                min_sep = min_sep.min(d);
            }
        }
        assert!(
            min_sep / spread >= 3.0,
            "separation {min_sep} vs spread {spread}"
        );
    }

    #[test]
    fn coords_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coords.csv");
        let points = vec![
            VizPoint {
                x: 0.5,
                y: -1.25,
                class_id: 2,
            },
            VizPoint {
                x: 0.0,
                y: 3.0,
                class_id: 0,
            },
        ];
        write_coords_csv(&points, &path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "x,y,class_id\n0.5,-1.25,2\n0,3,0\n"
        );
    }
}
