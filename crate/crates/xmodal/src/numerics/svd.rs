//! One-sided Jacobi singular value decomposition.
//!
//! Jacobi iteration is slower than blocked bidiagonalization but it is
//! simple, dependency-free, and converges to high relative accuracy, which
//! the downstream whitening and pseudo-inverse steps rely on.

use super::{dot, norm, Matrix};
use crate::{Error, Result, Scalar};

const MAX_SWEEPS: usize = 1000;

/// Thin SVD `A = U·diag(s)·Vᵀ` with `k = min(rows, cols)` columns in `U`
/// and `V` and singular values sorted in descending order.
#[derive(Debug, Clone)]
pub struct Svd<F: Scalar> {
    pub u: Matrix<F>,
    pub s: Vec<F>,
    pub v: Matrix<F>,
}

impl<F: Scalar> Svd<F> {
    /// Recompose `U·diag(s)·Vᵀ`.
    pub fn reconstruct(&self) -> Result<Matrix<F>> {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (value, &sv) in us.row_mut(i).iter_mut().zip(&self.s) {
                *value = *value * sv;
            }
        }
        us.matmul(&self.v.transpose())
    }
}

/// Compute the thin SVD of `a`.
///
/// Errors with [`Error::Decomposition`] if the Jacobi sweeps fail to reach
/// the relative off-diagonal tolerance of `1e-12` within 1000 sweeps.
pub fn svd<F: Scalar>(a: &Matrix<F>) -> Result<Svd<F>> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::Dimension("svd input must be non-empty".into()));
    }
    if a.rows() >= a.cols() {
        svd_tall(a)
    } else {
        // Wide input: decompose the transpose and swap the factors.
        let t = svd_tall(&a.transpose())?;
        Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        })
    }
}

/// Jacobi SVD for `rows >= cols`.
///
/// The working copy holds the columns of `a` as contiguous rows so the
/// inner rotation loops stream through memory.
fn svd_tall<F: Scalar>(a: &Matrix<F>) -> Result<Svd<F>> {
    let m = a.rows();
    let n = a.cols();
    let tol = F::of(1e-12);

    let mut w = a.transpose(); // n x m: row j is column j of a
    let mut vt = Matrix::identity(n); // row j is column j of the accumulated V

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut worst = F::zero();
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let alpha = dot(w.row(p), w.row(p));
                let beta = dot(w.row(q), w.row(q));
                let gamma = dot(w.row(p), w.row(q));
                if alpha == F::zero() || beta == F::zero() {
                    continue;
                }
                let rel = gamma.abs() / (alpha * beta).sqrt();
                if rel > worst {
                    worst = rel;
                }
                if rel <= tol {
                    continue;
                }
                // Rotation angle that orthogonalizes columns p and q.
                let zeta = (beta - alpha) / (F::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (F::one() + zeta * zeta).sqrt());
                let c = F::one() / (F::one() + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut w, p, q, c, s);
                rotate_rows(&mut vt, p, q, c, s);
            }
        }
        if worst <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Decomposition(format!(
            "Jacobi SVD did not converge within {MAX_SWEEPS} sweeps"
        )));
    }

    // Singular values are the column norms; sort descending (ties keep the
    // lower original index first so results are deterministic).
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<F> = (0..n).map(|j| norm(w.row(j))).collect();
    order.sort_by(|&i, &j| {
        norms[j]
            .partial_cmp(&norms[i])
            .expect("finite norms")
            .then(i.cmp(&j))
    });

    let mut s = Vec::with_capacity(n);
    let mut u_cols: Vec<Vec<F>> = Vec::with_capacity(n);
    let mut null_slots = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        let sv = norms[j];
        s.push(sv);
        if sv > F::zero() {
            u_cols.push(w.row(j).iter().map(|&x| x / sv).collect());
        } else {
            u_cols.push(vec![F::zero(); m]);
            null_slots.push(slot);
        }
    }
    for slot in null_slots {
        u_cols[slot] = orthogonal_complement(&u_cols, m);
    }

    let mut u = Matrix::zeros(m, n);
    for (j, col) in u_cols.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            u.set(i, j, x);
        }
    }
    let v = vt.select_rows(&order).transpose();
    Ok(Svd { u, s, v })
}

/// Apply the Givens rotation to rows `p` and `q` in place.
fn rotate_rows<F: Scalar>(m: &mut Matrix<F>, p: usize, q: usize, c: F, s: F) {
    for i in 0..m.cols() {
        let xp = m.get(p, i);
        let xq = m.get(q, i);
        m.set(p, i, c * xp - s * xq);
        m.set(q, i, s * xp + c * xq);
    }
}

/// Unit vector orthogonal to every non-zero column in `cols`, found by
/// Gram-Schmidt over the standard basis. Two projection passes keep the
/// result orthogonal to working precision.
fn orthogonal_complement<F: Scalar>(cols: &[Vec<F>], m: usize) -> Vec<F> {
    let mut best: Option<(F, Vec<F>)> = None;
    for i in 0..m {
        let mut cand = vec![F::zero(); m];
        cand[i] = F::one();
        project_out(&mut cand, cols);
        let r = norm(&cand);
        if best.as_ref().is_none_or(|(b, _)| r > *b) {
            best = Some((r, cand));
        }
    }
    let (_, mut chosen) = best.expect("basis candidates exist");
    project_out(&mut chosen, cols);
    let r = norm(&chosen);
    chosen.iter_mut().for_each(|x| *x = *x / r);
    chosen
}

fn project_out<F: Scalar>(vec: &mut [F], cols: &[Vec<F>]) {
    for col in cols {
        let n2 = dot(col, col);
        if n2 == F::zero() {
            continue;
        }
        let coef = dot(vec, col) / n2;
        for (v, &c) in vec.iter_mut().zip(col) {
            *v = *v - coef * c;
        }
    }
}
