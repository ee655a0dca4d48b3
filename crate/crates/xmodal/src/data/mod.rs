//! Dataset representation, synthetic multi-modal generation, MNIST IDX
//! ingestion, pseudo tag embeddings, anomaly injection, and the on-disk
//! dataset format.

mod idx;

pub use idx::{load_idx, write_idx_images, write_idx_labels};

use std::path::Path;

use crate::iofmt;
use crate::numerics::{Matrix, RngStream};
use crate::{Error, Result, Scalar};

/// Paired modality matrices with per-modality class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F: Scalar> {
    pub mod_a: Matrix<F>,
    pub mod_b: Matrix<F>,
    pub labels_a: Vec<usize>,
    pub labels_b: Vec<usize>,
    pub num_classes: usize,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(
        mod_a: Matrix<F>,
        mod_b: Matrix<F>,
        labels_a: Vec<usize>,
        labels_b: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = mod_a.rows();
        if n == 0 {
            return Err(Error::Argument("dataset needs at least one instance".into()));
        }
        if mod_b.rows() != n || labels_a.len() != n || labels_b.len() != n {
            return Err(Error::Dimension(format!(
                "row counts disagree: mod_a {n}, mod_b {}, labels_a {}, labels_b {}",
                mod_b.rows(),
                labels_a.len(),
                labels_b.len()
            )));
        }
        if mod_a.cols() == 0 || mod_b.cols() == 0 {
            return Err(Error::Dimension("modalities need at least one feature".into()));
        }
        if num_classes == 0 {
            return Err(Error::Argument("num_classes must be positive".into()));
        }
        if labels_a
            .iter()
            .chain(&labels_b)
            .any(|&label| label >= num_classes)
        {
            return Err(Error::Argument(format!(
                "label out of range 0..{num_classes}"
            )));
        }
        Ok(Self {
            mod_a,
            mod_b,
            labels_a,
            labels_b,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.mod_a.rows()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires at least one instance
    }

    /// Restrict to a subset of rows (same order as `indexes`).
    pub fn select(&self, indexes: &[usize]) -> Result<Self> {
        if indexes.iter().any(|&i| i >= self.len()) {
            return Err(Error::Argument("row index out of range".into()));
        }
        Dataset::new(
            self.mod_a.select_rows(indexes),
            self.mod_b.select_rows(indexes),
            indexes.iter().map(|&i| self.labels_a[i]).collect(),
            indexes.iter().map(|&i| self.labels_b[i]).collect(),
            self.num_classes,
        )
    }
}

/// Ground truth of an evaluation pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    Consistent,
    Anomalous,
}

/// A cross-modal test pair: row `index_a` of modality A against row
/// `index_b` of modality B.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalPair {
    pub index_a: usize,
    pub index_b: usize,
    pub truth: Truth,
}

/// Check the pair invariant against a dataset: anomalous ⇔ labels differ.
pub fn validate_pairs<F: Scalar>(dataset: &Dataset<F>, pairs: &[EvalPair]) -> Result<()> {
    for (k, pair) in pairs.iter().enumerate() {
        if pair.index_a >= dataset.len() || pair.index_b >= dataset.len() {
            return Err(Error::Argument(format!(
                "pair {k} references row out of range 0..{}",
                dataset.len()
            )));
        }
        let differs = dataset.labels_a[pair.index_a] != dataset.labels_b[pair.index_b];
        let anomalous = pair.truth == Truth::Anomalous;
        if differs != anomalous {
            return Err(Error::Contract(format!(
                "pair {k} truth tag contradicts the labels"
            )));
        }
    }
    Ok(())
}

/// Cross-modal relationship of the generated modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    None,
    /// Modality B is passed through a fixed random linear mix followed by an
    /// element-wise tanh, making the cross-modal map nonlinear.
    TanhWarp,
}

/// Generate a synthetic two-modality dataset: one Gaussian prototype per
/// class and modality, instances = prototype + noise. Labels agree across
/// modalities (training corpora are all-consistent).
pub fn gen_synthetic<F: Scalar>(
    num_classes: usize,
    per_class: usize,
    d_a: usize,
    d_b: usize,
    noise: F,
    nonlinearity: Nonlinearity,
    rng: &mut RngStream,
) -> Result<Dataset<F>> {
    if num_classes < 2 {
        return Err(Error::Argument("need at least two classes".into()));
    }
    if per_class == 0 {
        return Err(Error::Argument("per_class must be positive".into()));
    }
    if d_a == 0 || d_b == 0 {
        return Err(Error::Argument("feature dims must be positive".into()));
    }
    if !(noise >= F::zero()) {
        return Err(Error::Argument("noise must be >= 0".into()));
    }

    let draw_row = |rng: &mut RngStream, dim: usize| -> Vec<F> {
        (0..dim).map(|_| F::of(rng.next_gaussian())).collect()
    };

    let protos_a: Vec<Vec<F>> = (0..num_classes).map(|_| draw_row(rng, d_a)).collect();
    let protos_b: Vec<Vec<F>> = (0..num_classes).map(|_| draw_row(rng, d_b)).collect();

    // Fixed mixing matrix for the warp, drawn once. The 2/sqrt(d_b) scale
    // puts typical pre-tanh values around ±2, well into the bend.
    let mix = match nonlinearity {
        Nonlinearity::TanhWarp => {
            let gain = F::of(2.0) / F::of(d_b as f64).sqrt();
            let mut m = Matrix::zeros(d_b, d_b);
            for x in m.entries_mut() {
                *x = gain * F::of(rng.next_gaussian());
            }
            Some(m)
        }
        Nonlinearity::None => None,
    };

    let n = num_classes * per_class;
    let mut mod_a = Matrix::zeros(n, d_a);
    let mut mod_b = Matrix::zeros(n, d_b);
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for class in 0..num_classes {
        for _ in 0..per_class {
            for (x, &p) in mod_a.row_mut(row).iter_mut().zip(&protos_a[class]) {
                *x = p + noise * F::of(rng.next_gaussian());
            }
            let mut b: Vec<F> = protos_b[class]
                .iter()
                .map(|&p| p + noise * F::of(rng.next_gaussian()))
                .collect();
            if let Some(mix) = &mix {
                let mixed = mix.vec_mul_t(&b)?;
                b = mixed.iter().map(|&z| z.tanh()).collect();
            }
            mod_b.row_mut(row).copy_from_slice(&b);
            labels.push(class);
            row += 1;
        }
    }
    Dataset::new(mod_a, mod_b, labels.clone(), labels, num_classes)
}

/// Split rows into train/test by a seeded shuffle.
pub fn split_train_test<F: Scalar>(
    dataset: &Dataset<F>,
    test_fraction: f64,
    rng: &mut RngStream,
) -> Result<(Dataset<F>, Dataset<F>)> {
    if !(0.0..1.0).contains(&test_fraction) || test_fraction <= 0.0 {
        return Err(Error::Argument(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n = dataset.len();
    let n_test = ((n as f64) * test_fraction).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::Argument(format!(
            "test fraction {test_fraction} leaves an empty split for {n} rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let test_idx = &order[..n_test];
    let train_idx = &order[n_test..];
    Ok((dataset.select(train_idx)?, dataset.select(test_idx)?))
}

/// Build an evaluation set: `num_anomalies` label-mismatched cross pairs
/// (rejection-sampled) plus an equal count of aligned consistent pairs.
/// Anomalous pairs come first in the returned list.
pub fn inject_anomalies<F: Scalar>(
    dataset: &Dataset<F>,
    num_anomalies: usize,
    rng: &mut RngStream,
) -> Result<Vec<EvalPair>> {
    let n = dataset.len();
    // Feasibility: some (i, j) with differing labels must exist.
    let feasible = dataset
        .labels_b
        .iter()
        .any(|&lb| dataset.labels_a.iter().any(|&la| la != lb));
    if num_anomalies > 0 && !feasible {
        return Err(Error::Infeasible(
            "cannot inject anomalies: all cross-modal label pairs agree".into(),
        ));
    }
    let mut pairs = Vec::with_capacity(num_anomalies * 2);
    for _ in 0..num_anomalies {
        loop {
            let i = rng.next_index(n);
            let j = rng.next_index(n);
            if dataset.labels_a[i] != dataset.labels_b[j] {
                pairs.push(EvalPair {
                    index_a: i,
                    index_b: j,
                    truth: Truth::Anomalous,
                });
                break;
            }
        }
    }
    // Consistent pairs reuse aligned rows; sample without replacement while
    // possible so small test sets cover distinct instances.
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    for k in 0..num_anomalies {
        let i = if k < n { order[k] } else { rng.next_index(n) };
        pairs.push(EvalPair {
            index_a: i,
            index_b: i,
            truth: Truth::Consistent,
        });
    }
    Ok(pairs)
}

/// Deterministic pseudo tag embeddings: one unit-norm Gaussian vector per
/// class; row i is the vector of `labels[i]`'s class.
///
/// Class vectors are redrawn (up to a bounded number of attempts, keeping
/// the most separated set) until all pairwise |cosines| fall below 0.5, so
/// tags of different classes are far apart like distinct word embeddings.
pub fn tag_embed<F: Scalar>(
    labels: &[usize],
    dim: usize,
    rng: &mut RngStream,
) -> Result<Matrix<F>> {
    if dim == 0 {
        return Err(Error::Argument("embedding dim must be positive".into()));
    }
    if labels.is_empty() {
        return Err(Error::Argument("labels must be non-empty".into()));
    }
    let num_classes = labels.iter().max().expect("non-empty") + 1;

    let draw_set = |rng: &mut RngStream| -> Vec<Vec<F>> {
        (0..num_classes)
            .map(|_| {
                let mut v: Vec<F> = (0..dim).map(|_| F::of(rng.next_gaussian())).collect();
                let norm = v.iter().map(|&x| x * x).fold(F::zero(), |s, x| s + x).sqrt();
                if norm > F::zero() {
                    for x in &mut v {
                        *x = *x / norm;
                    }
                } else {
                    v[0] = F::one();
                }
                v
            })
            .collect()
    };
    let worst_cos = |vecs: &[Vec<F>]| -> F {
        let mut worst = F::zero();
        for i in 0..vecs.len() {
            for j in (i + 1)..vecs.len() {
                let dot = vecs[i]
                    .iter()
                    .zip(&vecs[j])
                    .map(|(&a, &b)| a * b)
                    .fold(F::zero(), |s, x| s + x);
                if dot.abs() > worst {
                    worst = dot.abs();
                }
            }
        }
        worst
    };

    let mut best = draw_set(rng);
    let mut best_worst = worst_cos(&best);
    let target = F::of(0.5);
    let mut attempts = 1;
    while best_worst >= target && attempts < 50 {
        let cand = draw_set(rng);
        let cand_worst = worst_cos(&cand);
        if cand_worst < best_worst {
            best = cand;
            best_worst = cand_worst;
        }
        attempts += 1;
    }

    let mut out = Matrix::zeros(labels.len(), dim);
    for (i, &label) in labels.iter().enumerate() {
        out.row_mut(i).copy_from_slice(&best[label]);
    }
    Ok(out)
}

fn parse_labels(text: &str, what: &str, num_classes: usize) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let label = line.trim().parse::<usize>().map_err(|_| {
            Error::format(what, format!("line {}: invalid label {line:?}", idx + 1))
        })?;
        if label >= num_classes {
            return Err(Error::format(
                what,
                format!("line {}: label {label} out of range 0..{num_classes}", idx + 1),
            ));
        }
        labels.push(label);
    }
    Ok(labels)
}

fn parse_feature_csv<F: Scalar>(text: &str, what: &str, n: usize, d: usize) -> Result<Matrix<F>> {
    let mut reader = iofmt::LineReader::new(what, text);
    let mut entries = Vec::with_capacity(n * d);
    for _ in 0..n {
        entries.extend(reader.float_row::<F>(d)?);
    }
    if reader.opt_line().is_some() {
        return Err(Error::format(what, format!("more than {n} data rows")));
    }
    Matrix::new(n, d, entries)
}

/// Write a dataset directory: `manifest.txt`, `mod_a.csv`, `mod_b.csv`,
/// `labels_a.csv`, `labels_b.csv`. All writes are atomic.
pub fn save_dataset<F: Scalar>(dataset: &Dataset<F>, dir: &Path) -> Result<()> {
    let manifest = format!(
        "version=1\nn={}\nd_a={}\nd_b={}\nnum_classes={}\n",
        dataset.len(),
        dataset.mod_a.cols(),
        dataset.mod_b.cols(),
        dataset.num_classes
    );
    iofmt::write_atomic(&dir.join("manifest.txt"), manifest.as_bytes())?;

    let mut buf = String::new();
    iofmt::push_csv_rows(&mut buf, &dataset.mod_a);
    iofmt::write_atomic(&dir.join("mod_a.csv"), buf.as_bytes())?;
    buf.clear();
    iofmt::push_csv_rows(&mut buf, &dataset.mod_b);
    iofmt::write_atomic(&dir.join("mod_b.csv"), buf.as_bytes())?;

    for (name, labels) in [
        ("labels_a.csv", &dataset.labels_a),
        ("labels_b.csv", &dataset.labels_b),
    ] {
        let mut text = String::with_capacity(labels.len() * 2);
        for label in labels {
            text.push_str(&label.to_string());
            text.push('\n');
        }
        iofmt::write_atomic(&dir.join(name), text.as_bytes())?;
    }
    Ok(())
}

/// Load a dataset directory written by [`save_dataset`].
pub fn load_dataset<F: Scalar>(dir: &Path) -> Result<Dataset<F>> {
    let manifest_path = dir.join("manifest.txt");
    let manifest = iofmt::read_to_string(&manifest_path)?;
    let what = "dataset manifest";
    let mut reader = iofmt::LineReader::new(what, &manifest);
    let version = reader.expect_kv("version")?;
    if version != "1" {
        return Err(Error::format(what, format!("unsupported version {version:?}")));
    }
    let n = iofmt::parse_usize(reader.expect_kv("n")?, what)?;
    let d_a = iofmt::parse_usize(reader.expect_kv("d_a")?, what)?;
    let d_b = iofmt::parse_usize(reader.expect_kv("d_b")?, what)?;
    let num_classes = iofmt::parse_usize(reader.expect_kv("num_classes")?, what)?;

    let mod_a = parse_feature_csv(
        &iofmt::read_to_string(&dir.join("mod_a.csv"))?,
        "mod_a.csv",
        n,
        d_a,
    )?;
    let mod_b = parse_feature_csv(
        &iofmt::read_to_string(&dir.join("mod_b.csv"))?,
        "mod_b.csv",
        n,
        d_b,
    )?;
    let labels_a = parse_labels(
        &iofmt::read_to_string(&dir.join("labels_a.csv"))?,
        "labels_a.csv",
        num_classes,
    )?;
    let labels_b = parse_labels(
        &iofmt::read_to_string(&dir.join("labels_b.csv"))?,
        "labels_b.csv",
        num_classes,
    )?;
    if labels_a.len() != n || labels_b.len() != n {
        return Err(Error::format(
            "dataset labels",
            format!(
                "manifest says n={n} but labels_a has {} rows and labels_b has {}",
                labels_a.len(),
                labels_b.len()
            ),
        ));
    }
    Dataset::new(mod_a, mod_b, labels_a, labels_b, num_classes)
}

/// Write an evaluation pair list as `index_a,index_b,truth` CSV.
pub fn save_pairs(pairs: &[EvalPair], path: &Path) -> Result<()> {
    let mut text = String::from("index_a,index_b,truth\n");
    for pair in pairs {
        let tag = match pair.truth {
            Truth::Consistent => "consistent",
            Truth::Anomalous => "anomalous",
        };
        text.push_str(&format!("{},{},{}\n", pair.index_a, pair.index_b, tag));
    }
    iofmt::write_atomic(path, text.as_bytes())
}

/// Read a pair list written by [`save_pairs`].
pub fn load_pairs(path: &Path) -> Result<Vec<EvalPair>> {
    let what = "pairs file";
    let text = iofmt::read_to_string(path)?;
    let mut reader = iofmt::LineReader::new(what, &text);
    let header = reader.next_line()?;
    if header != "index_a,index_b,truth" {
        return Err(Error::format(what, format!("bad header {header:?}")));
    }
    let mut pairs = Vec::new();
    while let Some(line) = reader.opt_line() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(reader.err(format!("expected 3 fields, found {}", fields.len())));
        }
        let index_a = iofmt::parse_usize(fields[0], what)?;
        let index_b = iofmt::parse_usize(fields[1], what)?;
        let truth = match fields[2] {
            "consistent" => Truth::Consistent,
            "anomalous" => Truth::Anomalous,
            other => return Err(reader.err(format!("unknown truth tag {other:?}"))),
        };
        pairs.push(EvalPair {
            index_a,
            index_b,
            truth,
        });
    }
    Ok(pairs)
}
