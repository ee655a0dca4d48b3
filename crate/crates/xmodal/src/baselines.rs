//! Classical cross-modal baselines behind the same scoring interface as
//! the trained encoders: CCA and PLS projections, plus an optional kernel
//! CCA variant (cargo feature `kcca`, on by default).

use std::path::Path;

use crate::detection::PairScorer;
use crate::iofmt;
use crate::numerics::{svd, Matrix};
use crate::objective::cosine_similarity;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Cca,
    Pls,
    #[cfg(feature = "kcca")]
    Kcca,
}

impl BaselineMethod {
    pub fn tag(self) -> &'static str {
        match self {
            BaselineMethod::Cca => "cca",
            BaselineMethod::Pls => "pls",
            #[cfg(feature = "kcca")]
            BaselineMethod::Kcca => "kcca",
        }
    }
}

/// Per-modality projections of a fitted baseline.
#[derive(Debug, Clone, PartialEq)]
enum BaselineCore<F: Scalar> {
    Linear {
        /// d_a × r; applied to mean-subtracted features.
        proj_a: Matrix<F>,
        proj_b: Matrix<F>,
        mean_a: Vec<F>,
        mean_b: Vec<F>,
    },
    #[cfg(feature = "kcca")]
    Kernel(KccaData<F>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearBaselineModel<F: Scalar> {
    pub method: BaselineMethod,
    /// Leading canonical correlations (CCA/KCCA, clipped to [0, 1]) or
    /// cross-covariance singular values (PLS), descending.
    pub correlations: Vec<F>,
    core: BaselineCore<F>,
}

/// Training-set snapshot needed to embed new points in kernel space.
#[cfg(feature = "kcca")]
#[derive(Debug, Clone, PartialEq)]
pub struct KccaData<F: Scalar> {
    /// n × r dual coefficients.
    alpha_a: Matrix<F>,
    alpha_b: Matrix<F>,
    train_a: Matrix<F>,
    train_b: Matrix<F>,
    sigma_a: F,
    sigma_b: F,
    ridge: F,
    /// Column means of the uncentered Gram matrices plus their grand
    /// means, for centering out-of-sample kernel rows.
    row_means_a: Vec<F>,
    row_means_b: Vec<F>,
    grand_a: F,
    grand_b: F,
}

fn check_fit_inputs<F: Scalar>(ma: &Matrix<F>, mb: &Matrix<F>, r: usize) -> Result<()> {
    if ma.rows() != mb.rows() {
        return Err(Error::Dimension(format!(
            "modalities have {} and {} rows",
            ma.rows(),
            mb.rows()
        )));
    }
    if ma.rows() < 2 {
        return Err(Error::Argument("baseline fits need at least 2 rows".into()));
    }
    if r == 0 || r > ma.cols().min(mb.cols()) {
        return Err(Error::Argument(format!(
            "target dim {r} outside 1..={}",
            ma.cols().min(mb.cols())
        )));
    }
    Ok(())
}

/// (AᵀB) / (n - 1) for column-centered inputs.
fn cross_cov<F: Scalar>(a: &Matrix<F>, b: &Matrix<F>) -> Result<Matrix<F>> {
    let n = a.rows();
    Ok(a.matmul_tn(b)?.scale(F::one() / F::of((n - 1) as f64)))
}

fn add_diagonal<F: Scalar>(m: &mut Matrix<F>, value: F) {
    for i in 0..m.rows().min(m.cols()) {
        let x = m.get(i, i) + value;
        m.set(i, i, x);
    }
}

/// Inverse square root of a symmetric positive semidefinite matrix,
/// flooring spectrum entries below `rel_floor` times the largest to zero.
fn inv_sqrt_psd<F: Scalar>(m: &Matrix<F>, rel_floor: F) -> Result<Matrix<F>> {
    let dec = svd(m)?;
    let top = dec.s.first().copied().unwrap_or_else(F::zero);
    let floor = top * rel_floor;
    let mut scaled = dec.u.clone();
    for j in 0..scaled.cols() {
        let f = if dec.s[j] > floor && dec.s[j] > F::zero() {
            F::one() / dec.s[j].sqrt()
        } else {
            F::zero()
        };
        for i in 0..scaled.rows() {
            let x = scaled.get(i, j) * f;
            scaled.set(i, j, x);
        }
    }
    scaled.matmul(&dec.u.transpose())
}

fn first_cols<F: Scalar>(m: &Matrix<F>, r: usize) -> Matrix<F> {
    let mut out = Matrix::zeros(m.rows(), r);
    for i in 0..m.rows() {
        out.row_mut(i).copy_from_slice(&m.row(i)[..r]);
    }
    out
}

fn clip_unit<F: Scalar>(values: &[F]) -> Vec<F> {
    values
        .iter()
        .map(|&s| s.max(F::zero()).min(F::one()))
        .collect()
}

/// Canonical correlation analysis with a ridge term on both covariance
/// blocks: whiten each modality, then take the SVD of the whitened
/// cross-covariance.
pub fn cca_fit<F: Scalar>(
    ma: &Matrix<F>,
    mb: &Matrix<F>,
    r: usize,
    ridge: F,
) -> Result<LinearBaselineModel<F>> {
    check_fit_inputs(ma, mb, r)?;
    if !(ridge >= F::zero()) || !ridge.is_finite() {
        return Err(Error::Argument("ridge must be >= 0".into()));
    }
    let (ac, mean_a) = ma.center_columns();
    let (bc, mean_b) = mb.center_columns();
    let mut caa = cross_cov(&ac, &ac)?;
    let mut cbb = cross_cov(&bc, &bc)?;
    add_diagonal(&mut caa, ridge);
    add_diagonal(&mut cbb, ridge);
    let cab = cross_cov(&ac, &bc)?;

    let floor = F::of(1e-12);
    let wa = inv_sqrt_psd(&caa, floor)?;
    let wb = inv_sqrt_psd(&cbb, floor)?;
    let t = wa.matmul(&cab)?.matmul(&wb)?;
    let dec = svd(&t)?;

    let proj_a = wa.matmul(&first_cols(&dec.u, r))?;
    let proj_b = wb.matmul(&first_cols(&dec.v, r))?;
    Ok(LinearBaselineModel {
        method: BaselineMethod::Cca,
        correlations: clip_unit(&dec.s[..r]),
        core: BaselineCore::Linear {
            proj_a,
            proj_b,
            mean_a,
            mean_b,
        },
    })
}

/// Partial least squares: SVD of the centered cross-covariance. The stored
/// correlations are the raw singular values (covariances, not bounded by 1).
pub fn pls_fit<F: Scalar>(ma: &Matrix<F>, mb: &Matrix<F>, r: usize) -> Result<LinearBaselineModel<F>> {
    check_fit_inputs(ma, mb, r)?;
    let (ac, mean_a) = ma.center_columns();
    let (bc, mean_b) = mb.center_columns();
    let cab = cross_cov(&ac, &bc)?;
    let dec = svd(&cab)?;
    Ok(LinearBaselineModel {
        method: BaselineMethod::Pls,
        correlations: dec.s[..r].to_vec(),
        core: BaselineCore::Linear {
            proj_a: first_cols(&dec.u, r),
            proj_b: first_cols(&dec.v, r),
            mean_a,
            mean_b,
        },
    })
}

/// Bandwidth choice for the RBF kernel.
#[cfg(feature = "kcca")]
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth<F: Scalar> {
    /// Median of the pairwise Euclidean distances.
    Median,
    Fixed(F),
}

#[cfg(feature = "kcca")]
mod kernel {
    use super::*;

    pub(super) enum KernelKind<F: Scalar> {
        Rbf { sigma: F },
        /// Only the oracle tests construct this: with a linear kernel the
        /// dual solution must reproduce primal CCA.
        #[cfg_attr(not(test), allow(dead_code))]
        Linear,
    }

    impl<F: Scalar> KernelKind<F> {
        pub(super) fn eval(&self, x: &[F], y: &[F]) -> F {
            match self {
                KernelKind::Rbf { sigma } => {
                    let mut sq = F::zero();
                    for (&a, &b) in x.iter().zip(y) {
                        let d = a - b;
                        sq = sq + d * d;
                    }
                    (-sq / (F::of(2.0) * *sigma * *sigma)).exp()
                }
                KernelKind::Linear => {
                    let mut dot = F::zero();
                    for (&a, &b) in x.iter().zip(y) {
                        dot = dot + a * b;
                    }
                    dot
                }
            }
        }
    }

    /// Median pairwise Euclidean distance; 1 if the points coincide.
    pub(super) fn median_distance<F: Scalar>(m: &Matrix<F>) -> F {
        let n = m.rows();
        let mut dists = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let mut sq = F::zero();
                for (&a, &b) in m.row(i).iter().zip(m.row(j)) {
                    let d = a - b;
                    sq = sq + d * d;
                }
                dists.push(sq.sqrt());
            }
        }
        dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let mid = dists.len() / 2;
        let median = if dists.len() % 2 == 1 {
            dists[mid]
        } else {
            (dists[mid - 1] + dists[mid]) / F::of(2.0)
        };
        if median > F::zero() {
            median
        } else {
            F::one()
        }
    }

    /// Uncentered Gram matrix.
    pub(super) fn gram<F: Scalar>(m: &Matrix<F>, kind: &KernelKind<F>) -> Matrix<F> {
        let n = m.rows();
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = kind.eval(m.row(i), m.row(j));
                k.set(i, j, v);
                k.set(j, i, v);
            }
        }
        k
    }

    /// Double centering K → HKH plus the statistics needed to center
    /// out-of-sample kernel rows.
    pub(super) fn center_gram<F: Scalar>(k: &Matrix<F>) -> (Matrix<F>, Vec<F>, F) {
        let n = k.rows();
        let inv_n = F::one() / F::of(n as f64);
        let mut col_means = vec![F::zero(); n];
        for i in 0..n {
            for (m, &v) in col_means.iter_mut().zip(k.row(i)) {
                *m = *m + v * inv_n;
            }
        }
        let grand = col_means.iter().copied().sum::<F>() * inv_n;
        let mut centered = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                centered.set(i, j, k.get(i, j) - col_means[i] - col_means[j] + grand);
            }
        }
        (centered, col_means, grand)
    }
}

/// Kernel CCA with an RBF kernel: solve the regularized dual problem on
/// double-centered Gram matrices. The regularizer is scaled so that with a
/// linear kernel the correlations match [`cca_fit`] with the same ridge.
#[cfg(feature = "kcca")]
pub fn kcca_fit<F: Scalar>(
    ma: &Matrix<F>,
    mb: &Matrix<F>,
    r: usize,
    bandwidth: Bandwidth<F>,
    ridge: F,
) -> Result<LinearBaselineModel<F>> {
    let sigma_a = resolve_bandwidth(ma, bandwidth)?;
    let sigma_b = resolve_bandwidth(mb, bandwidth)?;
    kcca_fit_kernels(
        ma,
        mb,
        r,
        kernel::KernelKind::Rbf { sigma: sigma_a },
        kernel::KernelKind::Rbf { sigma: sigma_b },
        sigma_a,
        sigma_b,
        ridge,
    )
}

#[cfg(feature = "kcca")]
fn resolve_bandwidth<F: Scalar>(m: &Matrix<F>, bandwidth: Bandwidth<F>) -> Result<F> {
    match bandwidth {
        Bandwidth::Median => Ok(kernel::median_distance(m)),
        Bandwidth::Fixed(s) => {
            if !(s > F::zero()) || !s.is_finite() {
                return Err(Error::Argument("bandwidth must be > 0".into()));
            }
            Ok(s)
        }
    }
}

/// Fit with explicit kernels; the public entry point always passes RBF.
/// The linear-kernel path exists so tests can check the primal/dual
/// equivalence against [`cca_fit`].
#[cfg(feature = "kcca")]
#[allow(clippy::too_many_arguments)]
fn kcca_fit_kernels<F: Scalar>(
    ma: &Matrix<F>,
    mb: &Matrix<F>,
    r: usize,
    kind_a: kernel::KernelKind<F>,
    kind_b: kernel::KernelKind<F>,
    sigma_a: F,
    sigma_b: F,
    ridge: F,
) -> Result<LinearBaselineModel<F>> {
    if ma.rows() != mb.rows() {
        return Err(Error::Dimension(format!(
            "modalities have {} and {} rows",
            ma.rows(),
            mb.rows()
        )));
    }
    let n = ma.rows();
    if n < 2 {
        return Err(Error::Argument("kcca needs at least 2 rows".into()));
    }
    if n > 2000 {
        return Err(Error::Argument(
            "kcca holds a dense n x n kernel; n is capped at 2000".into(),
        ));
    }
    if r == 0 || r > n {
        return Err(Error::Argument(format!("target dim {r} outside 1..={n}")));
    }
    if !(ridge > F::zero()) || !ridge.is_finite() {
        return Err(Error::Argument("kcca ridge must be > 0".into()));
    }

    let (ka, row_means_a, grand_a) = kernel::center_gram(&kernel::gram(ma, &kind_a));
    let (kb, row_means_b, grand_b) = kernel::center_gram(&kernel::gram(mb, &kind_b));

    // Dual constraint blocks K² + κK with κ chosen to match the primal
    // ridge: a linear kernel turns αᵀ(K² + κK)α into the primal
    // uᵀ(Cov + ridge·I)u up to the shared (n-1) scale.
    let kappa = F::of((n - 1) as f64) * ridge;
    let mut ra = ka.matmul(&ka)?;
    let mut rb = kb.matmul(&kb)?;
    for i in 0..n {
        for j in 0..n {
            ra.set(i, j, ra.get(i, j) + kappa * ka.get(i, j));
            rb.set(i, j, rb.get(i, j) + kappa * kb.get(i, j));
        }
    }

    let floor = F::of(1e-10);
    let wa = inv_sqrt_psd(&ra, floor)?;
    let wb = inv_sqrt_psd(&rb, floor)?;
    let t = wa.matmul(&ka.matmul(&kb)?)?.matmul(&wb)?;
    let dec = svd(&t)?;

    let alpha_a = wa.matmul(&first_cols(&dec.u, r))?;
    let alpha_b = wb.matmul(&first_cols(&dec.v, r))?;
    Ok(LinearBaselineModel {
        method: BaselineMethod::Kcca,
        correlations: clip_unit(&dec.s[..r]),
        core: BaselineCore::Kernel(KccaData {
            alpha_a,
            alpha_b,
            train_a: ma.clone(),
            train_b: mb.clone(),
            sigma_a,
            sigma_b,
            ridge,
            row_means_a,
            row_means_b,
            grand_a,
            grand_b,
        }),
    })
}

#[cfg(feature = "kcca")]
impl<F: Scalar> KccaData<F> {
    /// Embed an out-of-sample point: kernel row against the training
    /// snapshot, centered consistently with the training Gram, then
    /// projected through the dual coefficients.
    fn embed(&self, x: &[F], side_a: bool) -> Result<Vec<F>> {
        let (train, sigma, row_means, grand, alpha) = if side_a {
            (
                &self.train_a,
                self.sigma_a,
                &self.row_means_a,
                self.grand_a,
                &self.alpha_a,
            )
        } else {
            (
                &self.train_b,
                self.sigma_b,
                &self.row_means_b,
                self.grand_b,
                &self.alpha_b,
            )
        };
        if x.len() != train.cols() {
            return Err(Error::Dimension(format!(
                "feature length {} does not match training dim {}",
                x.len(),
                train.cols()
            )));
        }
        let kind = kernel::KernelKind::Rbf { sigma };
        let n = train.rows();
        let mut k = Vec::with_capacity(n);
        for i in 0..n {
            k.push(kind.eval(x, train.row(i)));
        }
        let k_mean = k.iter().copied().sum::<F>() / F::of(n as f64);
        for (v, &mu) in k.iter_mut().zip(row_means) {
            *v = *v - k_mean - mu + grand;
        }
        alpha.vec_mul_t(&k)
    }
}

impl<F: Scalar> LinearBaselineModel<F> {
    pub fn r(&self) -> usize {
        match &self.core {
            BaselineCore::Linear { proj_a, .. } => proj_a.cols(),
            #[cfg(feature = "kcca")]
            BaselineCore::Kernel(data) => data.alpha_a.cols(),
        }
    }

    pub fn embed_a(&self, x: &[F]) -> Result<Vec<F>> {
        match &self.core {
            BaselineCore::Linear { proj_a, mean_a, .. } => {
                project_centered(proj_a, mean_a, x)
            }
            #[cfg(feature = "kcca")]
            BaselineCore::Kernel(data) => data.embed(x, true),
        }
    }

    pub fn embed_b(&self, x: &[F]) -> Result<Vec<F>> {
        match &self.core {
            BaselineCore::Linear { proj_b, mean_b, .. } => {
                project_centered(proj_b, mean_b, x)
            }
            #[cfg(feature = "kcca")]
            BaselineCore::Kernel(data) => data.embed(x, false),
        }
    }
}

fn project_centered<F: Scalar>(proj: &Matrix<F>, mean: &[F], x: &[F]) -> Result<Vec<F>> {
    if x.len() != mean.len() {
        return Err(Error::Dimension(format!(
            "feature length {} does not match fitted dim {}",
            x.len(),
            mean.len()
        )));
    }
    let centered: Vec<F> = x.iter().zip(mean).map(|(&v, &m)| v - m).collect();
    proj.vec_mul_t(&centered)
}

/// Cosine similarity of the two projected (mean-subtracted) feature
/// vectors, with the usual zero-norm guard.
pub fn baseline_score<F: Scalar>(
    model: &LinearBaselineModel<F>,
    x_a: &[F],
    x_b: &[F],
) -> Result<F> {
    let za = model.embed_a(x_a)?;
    let zb = model.embed_b(x_b)?;
    cosine_similarity(&za, &zb)
}

impl<F: Scalar> PairScorer<F> for LinearBaselineModel<F> {
    fn score(&self, x_a: &[F], x_b: &[F]) -> Result<F> {
        baseline_score(self, x_a, x_b)
    }
}

const BASELINE_WHAT: &str = "baseline model file";

fn push_row_vec<F: Scalar>(out: &mut String, name: &str, v: &[F]) {
    let m = Matrix::from_vec(1, v.len(), v.to_vec());
    iofmt::push_matrix(out, name, &m);
}

fn parse_row_vec<F: Scalar>(
    reader: &mut iofmt::LineReader,
    name: &str,
) -> Result<Vec<F>> {
    let m = iofmt::parse_matrix::<F>(reader, name)?;
    if m.rows() != 1 {
        return Err(Error::format(
            BASELINE_WHAT,
            format!("tensor {name} must have one row"),
        ));
    }
    Ok(m.entries().to_vec())
}

/// Persist a baseline in the shared model-file scheme, with the method
/// recorded in the header.
pub fn save_baseline<F: Scalar>(model: &LinearBaselineModel<F>, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("version=1\n");
    out.push_str("kind=baseline\n");
    out.push_str(&format!("method={}\n", model.method.tag()));
    out.push_str(&format!("r={}\n", model.r()));
    match &model.core {
        BaselineCore::Linear {
            proj_a,
            proj_b,
            mean_a,
            mean_b,
        } => {
            iofmt::push_matrix(&mut out, "proj_a", proj_a);
            iofmt::push_matrix(&mut out, "proj_b", proj_b);
            push_row_vec(&mut out, "mean_a", mean_a);
            push_row_vec(&mut out, "mean_b", mean_b);
        }
        #[cfg(feature = "kcca")]
        BaselineCore::Kernel(data) => {
            out.push_str(&format!("sigma_a={}\n", iofmt::fmt_float(data.sigma_a)));
            out.push_str(&format!("sigma_b={}\n", iofmt::fmt_float(data.sigma_b)));
            out.push_str(&format!("ridge={}\n", iofmt::fmt_float(data.ridge)));
            out.push_str(&format!("grand_a={}\n", iofmt::fmt_float(data.grand_a)));
            out.push_str(&format!("grand_b={}\n", iofmt::fmt_float(data.grand_b)));
            iofmt::push_matrix(&mut out, "alpha_a", &data.alpha_a);
            iofmt::push_matrix(&mut out, "alpha_b", &data.alpha_b);
            iofmt::push_matrix(&mut out, "train_a", &data.train_a);
            iofmt::push_matrix(&mut out, "train_b", &data.train_b);
            push_row_vec(&mut out, "row_means_a", &data.row_means_a);
            push_row_vec(&mut out, "row_means_b", &data.row_means_b);
        }
    }
    push_row_vec(&mut out, "correlations", &model.correlations);
    iofmt::write_atomic(path, out.as_bytes())
}

/// Load a baseline written by [`save_baseline`].
pub fn load_baseline<F: Scalar>(path: &Path) -> Result<LinearBaselineModel<F>> {
    let text = iofmt::read_to_string(path)?;
    let mut reader = iofmt::LineReader::new(BASELINE_WHAT, &text);
    let version = reader.expect_kv("version")?;
    if version != "1" {
        return Err(Error::format(
            BASELINE_WHAT,
            format!("unsupported version {version:?}"),
        ));
    }
    let kind = reader.expect_kv("kind")?;
    if kind != "baseline" {
        return Err(Error::format(
            BASELINE_WHAT,
            format!("expected kind=baseline, found {kind:?}"),
        ));
    }
    let method_tag = reader.expect_kv("method")?.to_string();
    let r = iofmt::parse_usize(reader.expect_kv("r")?, BASELINE_WHAT)?;

    let (method, core) = match method_tag.as_str() {
        "cca" | "pls" => {
            let proj_a = iofmt::parse_matrix::<F>(&mut reader, "proj_a")?;
            let proj_b = iofmt::parse_matrix::<F>(&mut reader, "proj_b")?;
            let mean_a = parse_row_vec::<F>(&mut reader, "mean_a")?;
            let mean_b = parse_row_vec::<F>(&mut reader, "mean_b")?;
            if proj_a.cols() != r || proj_b.cols() != r {
                return Err(Error::format(
                    BASELINE_WHAT,
                    "projection widths do not match r",
                ));
            }
            if proj_a.rows() != mean_a.len() || proj_b.rows() != mean_b.len() {
                return Err(Error::format(
                    BASELINE_WHAT,
                    "mean lengths do not match the projections",
                ));
            }
            let method = if method_tag == "cca" {
                BaselineMethod::Cca
            } else {
                BaselineMethod::Pls
            };
            (
                method,
                BaselineCore::Linear {
                    proj_a,
                    proj_b,
                    mean_a,
                    mean_b,
                },
            )
        }
        #[cfg(feature = "kcca")]
        "kcca" => {
            let sigma_a: F = iofmt::parse_float(reader.expect_kv("sigma_a")?, BASELINE_WHAT)?;
            let sigma_b: F = iofmt::parse_float(reader.expect_kv("sigma_b")?, BASELINE_WHAT)?;
            let ridge: F = iofmt::parse_float(reader.expect_kv("ridge")?, BASELINE_WHAT)?;
            let grand_a: F = iofmt::parse_float(reader.expect_kv("grand_a")?, BASELINE_WHAT)?;
            let grand_b: F = iofmt::parse_float(reader.expect_kv("grand_b")?, BASELINE_WHAT)?;
            let alpha_a = iofmt::parse_matrix::<F>(&mut reader, "alpha_a")?;
            let alpha_b = iofmt::parse_matrix::<F>(&mut reader, "alpha_b")?;
            let train_a = iofmt::parse_matrix::<F>(&mut reader, "train_a")?;
            let train_b = iofmt::parse_matrix::<F>(&mut reader, "train_b")?;
            let row_means_a = parse_row_vec::<F>(&mut reader, "row_means_a")?;
            let row_means_b = parse_row_vec::<F>(&mut reader, "row_means_b")?;
            if alpha_a.cols() != r
                || alpha_b.cols() != r
                || alpha_a.rows() != train_a.rows()
                || alpha_b.rows() != train_b.rows()
                || row_means_a.len() != train_a.rows()
                || row_means_b.len() != train_b.rows()
            {
                return Err(Error::format(BASELINE_WHAT, "kcca tensor shapes disagree"));
            }
            (
                BaselineMethod::Kcca,
                BaselineCore::Kernel(KccaData {
                    alpha_a,
                    alpha_b,
                    train_a,
                    train_b,
                    sigma_a,
                    sigma_b,
                    ridge,
                    row_means_a,
                    row_means_b,
                    grand_a,
                    grand_b,
                }),
            )
        }
        other => {
            return Err(Error::format(
                BASELINE_WHAT,
                format!("unknown baseline method {other:?}"),
            ))
        }
    };
    let correlations = parse_row_vec::<F>(&mut reader, "correlations")?;
    if correlations.len() != r {
        return Err(Error::format(
            BASELINE_WHAT,
            "correlation count does not match r",
        ));
    }
    Ok(LinearBaselineModel {
        method,
        correlations,
        core,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn rng(seed: u64) -> RngStream {
        RngStream::new(seed)
    }

    fn gaussian_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> Matrix<f64> {
        let mut m = Matrix::zeros(rows, cols);
        for x in m.entries_mut() {
            *x = rng.next_gaussian();
        }
        m
    }

    /// Random orthogonal matrix from the SVD of a Gaussian square matrix.
    fn random_orthogonal(d: usize, rng: &mut RngStream) -> Matrix<f64> {
        let g = gaussian_matrix(d, d, rng);
        svd(&g).unwrap().u
    }

    #[test]
    fn cca_identical_modalities_correlate_fully() {
        let ma = gaussian_matrix(60, 4, &mut rng(1));
        let model = cca_fit(&ma, &ma, 3, 1e-8).unwrap();
        for &c in &model.correlations {
            assert!((c - 1.0).abs() < 1e-6, "correlation {c}");
        }
    }

    #[test]
    fn cca_is_rotation_invariant() {
        let mut r = rng(2);
        let ma = gaussian_matrix(80, 5, &mut r);
        let q = random_orthogonal(5, &mut r);
        let mb = ma.matmul(&q).unwrap();
        let model = cca_fit(&ma, &mb, 5, 1e-8).unwrap();
        for &c in &model.correlations {
            assert!((c - 1.0).abs() < 1e-6, "correlation {c}");
        }
    }

    #[test]
    fn cca_is_invariant_to_invertible_reparameterization() {
        let mut r = rng(3);
        let ma = gaussian_matrix(70, 4, &mut r);
        let mb = gaussian_matrix(70, 3, &mut r);
        // Mix mb into ma a little so there is real correlation to recover.
        let mut ma_mixed = ma.clone();
        for i in 0..ma.rows() {
            for j in 0..3 {
                let v = ma_mixed.get(i, j) + 0.5 * mb.get(i, j);
                ma_mixed.set(i, j, v);
            }
        }
        let base = cca_fit(&ma_mixed, &mb, 3, 1e-10).unwrap();

        // Well-conditioned invertible map on modality A.
        let mut t = Matrix::identity(4);
        for i in 0..4 {
            for j in 0..4 {
                let v = t.get(i, j) + 0.2 * ((i + 2 * j) as f64 / 7.0 - 0.4);
                t.set(i, j, v);
            }
        }
        let transformed = cca_fit(&ma_mixed.matmul(&t).unwrap(), &mb, 3, 1e-10).unwrap();
        for (a, b) in base.correlations.iter().zip(&transformed.correlations) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn cca_independent_modalities_correlate_weakly() {
        let ma = gaussian_matrix(1000, 5, &mut rng(4));
        let mb = gaussian_matrix(1000, 5, &mut rng(5));
        let model = cca_fit(&ma, &mb, 5, 1e-6).unwrap();
        assert!(
            model.correlations[0] < 0.15,
            "spurious correlation {}",
            model.correlations[0]
        );
    }

    #[test]
    fn cca_large_ridge_shrinks_correlations() {
        let ma = gaussian_matrix(60, 4, &mut rng(6));
        let model = cca_fit(&ma, &ma, 2, 10.0).unwrap();
        assert!(model.correlations[0] < 0.999);
    }

    #[test]
    fn cca_correlations_sorted_and_clipped() {
        let ma = gaussian_matrix(50, 4, &mut rng(7));
        let mb = gaussian_matrix(50, 4, &mut rng(8));
        let model = cca_fit(&ma, &mb, 4, 1e-6).unwrap();
        for w in model.correlations.windows(2) {
            assert!(w[0] >= w[1]);
        }
        for &c in &model.correlations {
            assert!((0.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn pls_singular_value_scales_with_modality() {
        let ma = gaussian_matrix(60, 4, &mut rng(9));
        let one = pls_fit(&ma, &ma, 2).unwrap();
        let two = pls_fit(&ma, &ma.scale(2.0), 2).unwrap();
        let ratio = two.correlations[0] / one.correlations[0];
        assert!((ratio - 2.0).abs() < 1e-9, "ratio {ratio}");
    }

    #[test]
    fn pls_rank_one_cross_covariance() {
        // mod_a = t·pᵀ, mod_b = t·qᵀ for a shared latent t: the cross
        // covariance is rank one, so the second singular value vanishes.
        let n = 50;
        let mut r = rng(10);
        let t: Vec<f64> = (0..n).map(|_| r.next_gaussian()).collect();
        let p = [1.0, -2.0, 0.5];
        let q = [0.7, 1.3];
        let mut ma = Matrix::zeros(n, 3);
        let mut mb = Matrix::zeros(n, 2);
        for i in 0..n {
            for (j, &pj) in p.iter().enumerate() {
                ma.set(i, j, t[i] * pj);
            }
            for (j, &qj) in q.iter().enumerate() {
                mb.set(i, j, t[i] * qj);
            }
        }
        let model = pls_fit(&ma, &mb, 2).unwrap();
        assert!(model.correlations[0] > 0.1);
        assert!(
            model.correlations[1].abs() < 1e-10 * model.correlations[0],
            "second value {}",
            model.correlations[1]
        );
    }

    #[test]
    fn pls_first_direction_beats_random_search() {
        let mut r = rng(11);
        let ma = gaussian_matrix(60, 4, &mut r);
        let mb = gaussian_matrix(60, 3, &mut r);
        let model = pls_fit(&ma, &mb, 1).unwrap();
        let (ac, _) = ma.center_columns();
        let (bc, _) = mb.center_columns();
        let cab = cross_cov(&ac, &bc).unwrap();

        let unit = |v: &mut [f64], r: &mut RngStream| {
            let mut norm = 0.0;
            for x in v.iter_mut() {
                *x = r.next_gaussian();
                norm += *x * *x;
            }
            let norm = norm.sqrt();
            for x in v.iter_mut() {
                *x /= norm;
            }
        };
        let mut best = f64::MIN;
        let mut u = vec![0.0; 4];
        let mut v = vec![0.0; 3];
        for _ in 0..100_000 {
            unit(&mut u, &mut r);
            unit(&mut v, &mut r);
            let mut cov = 0.0;
            for i in 0..4 {
                for j in 0..3 {
                    cov += u[i] * cab.get(i, j) * v[j];
                }
            }
            best = best.max(cov.abs());
        }
        assert!(
            model.correlations[0] >= best - 1e-9,
            "svd {} vs search {best}",
            model.correlations[0]
        );
    }

    #[test]
    fn baseline_scores_stay_in_range_and_detect_matches() {
        use crate::detection::{detect, DetectionConfig};
        let mut r = rng(12);
        let ds = crate::data::gen_synthetic::<f64>(
            3,
            15,
            5,
            4,
            0.1,
            crate::data::Nonlinearity::None,
            &mut r,
        )
        .unwrap();
        let model = cca_fit(&ds.mod_a, &ds.mod_b, 3, 1e-6).unwrap();
        let pairs = crate::data::inject_anomalies(&ds, 12, &mut r).unwrap();
        let dets = detect(&model, &ds, &pairs, &DetectionConfig { epsilon: 0.0 }).unwrap();
        for d in &dets {
            assert!(d.score >= -1.0 - 1e-12 && d.score <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn baseline_round_trips_through_model_file() {
        let mut r = rng(13);
        let ma = gaussian_matrix(20, 4, &mut r);
        let mb = gaussian_matrix(20, 3, &mut r);
        let dir = tempfile::tempdir().unwrap();

        for model in [
            cca_fit(&ma, &mb, 2, 1e-6).unwrap(),
            pls_fit(&ma, &mb, 2).unwrap(),
        ] {
            let path = dir.path().join(format!("{}.txt", model.method.tag()));
            save_baseline(&model, &path).unwrap();
            let back: LinearBaselineModel<f64> = load_baseline(&path).unwrap();
            assert_eq!(back, model);
        }
    }

    #[test]
    fn load_baseline_rejects_unknown_method() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        std::fs::write(&path, "version=1\nkind=baseline\nmethod=banana\nr=2\n").unwrap();
        let err = load_baseline::<f64>(&path).unwrap_err().to_string();
        assert!(err.contains("banana"), "{err}");
    }

    #[cfg(feature = "kcca")]
    mod kcca {
        use super::*;

        #[test]
        fn linear_kernel_matches_primal_cca() {
            let mut r = rng(20);
            let ma = gaussian_matrix(40, 3, &mut r);
            let mb = gaussian_matrix(40, 4, &mut r);
            // Mix for genuine correlation.
            let mut mb_mixed = mb.clone();
            for i in 0..40 {
                for j in 0..3 {
                    let v = mb_mixed.get(i, j) + 0.8 * ma.get(i, j);
                    mb_mixed.set(i, j, v);
                }
            }
            let primal = cca_fit(&ma, &mb_mixed, 2, 1e-3).unwrap();
            let dual = kcca_fit_kernels(
                &ma,
                &mb_mixed,
                2,
                kernel::KernelKind::Linear,
                kernel::KernelKind::Linear,
                1.0,
                1.0,
                1e-3,
            )
            .unwrap();
            for (p, d) in primal.correlations.iter().zip(&dual.correlations) {
                assert!((p - d).abs() < 1e-4, "primal {p} vs dual {d}");
            }
        }

        #[test]
        fn median_bandwidth_in_expected_range() {
            // For standard Gaussians the median pairwise distance scales
            // like sqrt(2d).
            let d = 5;
            let ma = gaussian_matrix(100, d, &mut rng(21));
            let sigma = kernel::median_distance(&ma);
            let scale = (d as f64).sqrt();
            assert!(
                sigma > scale && sigma < 2.0 * scale,
                "sigma {sigma} for sqrt(d) {scale}"
            );
        }

        #[test]
        fn identical_modalities_near_full_correlation() {
            let ma = gaussian_matrix(50, 3, &mut rng(22));
            let model = kcca_fit(&ma, &ma, 2, Bandwidth::Median, 1e-4).unwrap();
            assert!(
                model.correlations[0] > 0.99,
                "top correlation {}",
                model.correlations[0]
            );
            for &c in &model.correlations {
                assert!((0.0..=1.0).contains(&c));
            }
        }

        #[test]
        fn out_of_sample_scores_separate_aligned_from_shuffled() {
            let mut r = rng(23);
            let ds = crate::data::gen_synthetic::<f64>(
                3,
                30,
                5,
                5,
                0.05,
                crate::data::Nonlinearity::TanhWarp,
                &mut r,
            )
            .unwrap();
            let (train, test) = crate::data::split_train_test(&ds, 0.25, &mut r).unwrap();
            let model =
                kcca_fit(&train.mod_a, &train.mod_b, 3, Bandwidth::Median, 1e-3).unwrap();
            let mut aligned = 0.0;
            let mut count = 0.0;
            let mut mismatched = 0.0;
            for i in 0..test.len() {
                aligned += baseline_score(&model, test.mod_a.row(i), test.mod_b.row(i)).unwrap();
                count += 1.0;
            }
            let mut pairs_checked = 0.0;
            for i in 0..test.len() {
                for j in 0..test.len() {
                    if test.labels_a[i] != test.labels_b[j] {
                        mismatched +=
                            baseline_score(&model, test.mod_a.row(i), test.mod_b.row(j)).unwrap();
                        pairs_checked += 1.0;
                    }
                }
            }
            let gap = aligned / count - mismatched / pairs_checked;
            assert!(gap > 0.2, "gap {gap}");
        }

        #[test]
        fn kcca_round_trips_through_model_file() {
            let ma = gaussian_matrix(15, 3, &mut rng(24));
            let mb = gaussian_matrix(15, 3, &mut rng(25));
            let model = kcca_fit(&ma, &mb, 2, Bandwidth::Fixed(1.5), 1e-3).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("kcca.txt");
            save_baseline(&model, &path).unwrap();
            let back: LinearBaselineModel<f64> = load_baseline(&path).unwrap();
            assert_eq!(back, model);
        }

        #[test]
        fn kcca_rejects_bad_arguments() {
            let ma = gaussian_matrix(10, 2, &mut rng(26));
            assert!(kcca_fit(&ma, &ma, 2, Bandwidth::Fixed(0.0), 1e-3).is_err());
            assert!(kcca_fit(&ma, &ma, 2, Bandwidth::Median, 0.0).is_err());
            assert!(kcca_fit(&ma, &ma, 11, Bandwidth::Median, 1e-3).is_err());
        }
    }
}
