//! Principal component analysis used for 2-D embedding plots.

use super::{svd, Matrix};
use crate::{Error, Result, Scalar};

/// Fitted PCA basis.
#[derive(Debug, Clone)]
pub struct Pca<F: Scalar> {
    /// Per-column means removed before projection.
    pub means: Vec<F>,
    /// `d x k` matrix whose columns are principal directions.
    pub components: Matrix<F>,
    /// Singular values of the centered data, one per component.
    pub singular_values: Vec<F>,
}

impl<F: Scalar> Pca<F> {
    /// Project rows of `data` onto the fitted components.
    pub fn project(&self, data: &Matrix<F>) -> Result<Matrix<F>> {
        if data.cols() != self.components.rows() {
            return Err(Error::Dimension(format!(
                "pca expects {} features, got {}",
                self.components.rows(),
                data.cols()
            )));
        }
        let mut centered = data.clone();
        for i in 0..centered.rows() {
            for (v, &m) in centered.row_mut(i).iter_mut().zip(&self.means) {
                *v = *v - m;
            }
        }
        centered.matmul(&self.components)
    }
}

/// Fit a `k`-component PCA on `data` (samples as rows) and return the basis
/// together with the projected coordinates.
///
/// Component signs are normalized so the entry of largest magnitude in each
/// direction is positive, making the output independent of the sign
/// ambiguity in the underlying SVD.
pub fn pca_fit_project<F: Scalar>(data: &Matrix<F>, k: usize) -> Result<(Pca<F>, Matrix<F>)> {
    let max_k = data.rows().min(data.cols());
    if k == 0 || k > max_k {
        return Err(Error::Argument(format!(
            "component count {} out of range 1..={} for {}x{} data",
            k,
            max_k,
            data.rows(),
            data.cols()
        )));
    }
    let (centered, means) = data.center_columns();
    let dec = svd(&centered)?;

    let mut components = Matrix::zeros(data.cols(), k);
    for j in 0..k {
        // Sign convention: make the dominant entry positive.
        let mut pivot = 0;
        for i in 1..data.cols() {
            if dec.v.get(i, j).abs() > dec.v.get(pivot, j).abs() {
                pivot = i;
            }
        }
        let flip = if dec.v.get(pivot, j) < F::zero() {
            -F::one()
        } else {
            F::one()
        };
        for i in 0..data.cols() {
            components.set(i, j, dec.v.get(i, j) * flip);
        }
    }

    let pca = Pca {
        means,
        components,
        singular_values: dec.s[..k].to_vec(),
    };
    let coords = pca.project(data)?;
    Ok((pca, coords))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_recover_direction() {
        // Points exactly on y = 2x; first component must be (1,2)/sqrt(5).
        let data = Matrix::new(4, 2, vec![0.0, 0.0, 1.0, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
        let (pca, coords) = pca_fit_project(&data, 2).unwrap();
        let s5 = 5.0_f64.sqrt();
        assert!((pca.components.get(0, 0) - 1.0 / s5).abs() < 1e-12);
        assert!((pca.components.get(1, 0) - 2.0 / s5).abs() < 1e-12);
        // Dominant entry of the second component is positive by convention.
        assert!((pca.components.get(0, 1) - 2.0 / s5).abs() < 1e-12);
        assert!((pca.components.get(1, 1) + 1.0 / s5).abs() < 1e-12);
        // First point is (-1.5,-3) after centering: projection -7.5/sqrt(5).
        assert!((coords.get(0, 0) + 7.5 / s5).abs() < 1e-12);
        // All variance lies on the first axis.
        for i in 0..4 {
            assert!(coords.get(i, 1).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_is_centered_and_variance_preserving() {
        let data = Matrix::new(
            5,
            3,
            vec![
                0.2, 1.0, -0.5, 1.4, -2.0, 0.3, -0.7, 0.4, 2.2, 3.1, 0.9, -1.8, -0.6, 1.5, 0.7,
            ],
        )
        .unwrap();
        let (_, coords): (Pca<f64>, _) = pca_fit_project(&data, 3).unwrap();
        for mean in coords.column_means() {
            assert!(mean.abs() < 1e-12);
        }
        let (centered, _) = data.center_columns();
        let total = centered.frobenius_norm();
        assert!((coords.frobenius_norm() - total).abs() < 1e-10 * total);
    }

    #[test]
    fn components_are_orthonormal() {
        let data = Matrix::new(
            6,
            4,
            (0..24).map(|i| ((i * 7 + 3) % 11) as f64).collect::<Vec<_>>(),
        )
        .unwrap();
        let (pca, _) = pca_fit_project(&data, 2).unwrap();
        let gram = pca.components.matmul_tn(&pca.components).unwrap();
        let err = gram.sub(&Matrix::identity(2)).unwrap().frobenius_norm();
        assert!(err < 1e-10);
    }

    #[test]
    fn rejects_out_of_range_component_count() {
        let data = Matrix::new(3, 2, vec![1.0; 6]).unwrap();
        assert!(pca_fit_project(&data, 0).is_err());
        assert!(pca_fit_project(&data, 3).is_err());
    }

    #[test]
    fn deterministic_signs_across_runs() {
        let data = Matrix::new(4, 3, vec![
            1.0, 0.1, -2.0, 0.4, 2.2, 0.3, -1.1, 0.8, 1.9, 2.5, -0.6, 0.0,
        ])
        .unwrap();
        let (a, _) = pca_fit_project(&data, 2).unwrap();
        let (b, _) = pca_fit_project(&data, 2).unwrap();
        assert_eq!(a.components.entries(), b.components.entries());
    }
}
