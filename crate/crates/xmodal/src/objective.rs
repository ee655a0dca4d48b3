//! Cross-modal similarity and the contrastive loss terms with their
//! gradients.
//!
//! Consistent pairs are pulled toward cosine 1, inconsistent pairs are
//! pushed below a margin γ by a hinge; the linear model variant adds a
//! Frobenius regularizer on the projection matrices.

use crate::encoders::LinearProjector;
use crate::numerics::{dot, norm, Matrix};
use crate::{Error, Result, Scalar};

/// Norms below this are treated as zero vectors (similarity 0, gradient 0).
/// Dropout or ReLU can produce all-zero embeddings transiently.
pub const NORM_GUARD: f64 = 1e-12;

/// Weights of the contrastive objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastiveConfig<F: Scalar> {
    /// Margin above which a negative pair incurs loss.
    pub gamma: F,
    /// Weight on the negative (hinge) sum.
    pub lambda_neg: F,
    /// Frobenius regularizer weight; linear model only.
    pub lambda_reg: F,
}

impl<F: Scalar> ContrastiveConfig<F> {
    pub fn new(gamma: F, lambda_neg: F, lambda_reg: F) -> Result<Self> {
        if !(gamma >= -F::one() && gamma <= F::one()) {
            return Err(Error::Argument(format!("margin {gamma} outside [-1, 1]")));
        }
        if !(lambda_neg >= F::zero()) || !lambda_neg.is_finite() {
            return Err(Error::Argument("negative-pair weight must be >= 0".into()));
        }
        if !(lambda_reg >= F::zero()) || !lambda_reg.is_finite() {
            return Err(Error::Argument("regularizer weight must be >= 0".into()));
        }
        Ok(Self {
            gamma,
            lambda_neg,
            lambda_reg,
        })
    }
}

impl<F: Scalar> Default for ContrastiveConfig<F> {
    fn default() -> Self {
        Self {
            gamma: F::of(0.3),
            lambda_neg: F::one(),
            lambda_reg: F::of(1e-3),
        }
    }
}

/// Cosine similarity with the zero-norm guard.
pub fn cosine_similarity<F: Scalar>(a: &[F], b: &[F]) -> Result<F> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "cosine of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let na = norm(a);
    let nb = norm(b);
    let guard = F::of(NORM_GUARD);
    if na < guard || nb < guard {
        return Ok(F::zero());
    }
    Ok(dot(a, b) / (na * nb))
}

/// Loss contribution of a consistent pair.
pub fn positive_term<F: Scalar>(f: F) -> F {
    F::one() - f
}

/// Hinge contribution of an inconsistent pair.
pub fn negative_term<F: Scalar>(f: F, gamma: F) -> F {
    (f - gamma).max(F::zero())
}

/// Σ over positives of (1 − cos) plus λ · Σ over negatives of
/// max(0, cos − γ). Summation order is fixed for bit-reproducibility.
pub fn batch_loss<F: Scalar>(
    pos: &[(&[F], &[F])],
    neg: &[(&[F], &[F])],
    cfg: &ContrastiveConfig<F>,
) -> Result<F> {
    let mut total = F::zero();
    for &(a, b) in pos {
        total = total + positive_term(cosine_similarity(a, b)?);
    }
    let mut neg_total = F::zero();
    for &(a, b) in neg {
        neg_total = neg_total + negative_term(cosine_similarity(a, b)?, cfg.gamma);
    }
    Ok(total + cfg.lambda_neg * neg_total)
}

/// Gradients of [`batch_loss`] with respect to every embedding vector,
/// in the order the pairs were given.
#[derive(Debug, Clone)]
pub struct EmbeddingGrads<F: Scalar> {
    pub pos_a: Vec<Vec<F>>,
    pub pos_b: Vec<Vec<F>>,
    pub neg_a: Vec<Vec<F>>,
    pub neg_b: Vec<Vec<F>>,
}

/// Gradient of the cosine w.r.t. both arguments, `None` under the guard.
fn cosine_grad<F: Scalar>(a: &[F], b: &[F]) -> Option<(F, Vec<F>, Vec<F>)> {
    let na = norm(a);
    let nb = norm(b);
    let guard = F::of(NORM_GUARD);
    if na < guard || nb < guard {
        return None;
    }
    let c = dot(a, b) / (na * nb);
    let inv = F::one() / (na * nb);
    let ga = a
        .iter()
        .zip(b)
        .map(|(&ai, &bi)| bi * inv - c * ai / (na * na))
        .collect();
    let gb = a
        .iter()
        .zip(b)
        .map(|(&ai, &bi)| ai * inv - c * bi / (nb * nb))
        .collect();
    Some((c, ga, gb))
}

/// Loss value together with exact gradients. The hinge subgradient at the
/// kink is 0 and guarded zero-norm vectors receive zero gradient.
pub fn batch_loss_grad<F: Scalar>(
    pos: &[(&[F], &[F])],
    neg: &[(&[F], &[F])],
    cfg: &ContrastiveConfig<F>,
) -> Result<(F, EmbeddingGrads<F>)> {
    let mut grads = EmbeddingGrads {
        pos_a: Vec::with_capacity(pos.len()),
        pos_b: Vec::with_capacity(pos.len()),
        neg_a: Vec::with_capacity(neg.len()),
        neg_b: Vec::with_capacity(neg.len()),
    };
    let mut total = F::zero();
    for &(a, b) in pos {
        if a.len() != b.len() {
            return Err(Error::Argument("embedding length mismatch".into()));
        }
        match cosine_grad(a, b) {
            Some((c, ga, gb)) => {
                total = total + positive_term(c);
                // d(1 − c)/dz = −dc/dz.
                grads.pos_a.push(ga.iter().map(|&g| -g).collect());
                grads.pos_b.push(gb.iter().map(|&g| -g).collect());
            }
            None => {
                total = total + F::one();
                grads.pos_a.push(vec![F::zero(); a.len()]);
                grads.pos_b.push(vec![F::zero(); b.len()]);
            }
        }
    }
    let mut neg_total = F::zero();
    for &(a, b) in neg {
        if a.len() != b.len() {
            return Err(Error::Argument("embedding length mismatch".into()));
        }
        match cosine_grad(a, b) {
            Some((c, ga, gb)) if c > cfg.gamma => {
                neg_total = neg_total + (c - cfg.gamma);
                grads
                    .neg_a
                    .push(ga.iter().map(|&g| cfg.lambda_neg * g).collect());
                grads
                    .neg_b
                    .push(gb.iter().map(|&g| cfg.lambda_neg * g).collect());
            }
            _ => {
                grads.neg_a.push(vec![F::zero(); a.len()]);
                grads.neg_b.push(vec![F::zero(); b.len()]);
            }
        }
    }
    Ok((total + cfg.lambda_neg * neg_total, grads))
}

fn gather_pairs<'m, F: Scalar>(
    za: &'m Matrix<F>,
    zb: &'m Matrix<F>,
    pairs: &[(usize, usize)],
) -> Result<Vec<(&'m [F], &'m [F])>> {
    pairs
        .iter()
        .map(|&(i, j)| {
            if i >= za.rows() || j >= zb.rows() {
                return Err(Error::Argument(format!(
                    "pair ({i}, {j}) out of range for {} x {} rows",
                    za.rows(),
                    zb.rows()
                )));
            }
            Ok((za.row(i), zb.row(j)))
        })
        .collect()
}

/// Objective for the linear model: contrastive terms over projected rows
/// plus `lambda_reg · (‖U‖_F² + ‖V‖_F²)`.
pub fn linear_objective<F: Scalar>(
    u: &LinearProjector<F>,
    v: &LinearProjector<F>,
    mod_a: &Matrix<F>,
    mod_b: &Matrix<F>,
    positives: &[(usize, usize)],
    negatives: &[(usize, usize)],
    cfg: &ContrastiveConfig<F>,
) -> Result<F> {
    let za = u.project_rows(mod_a)?;
    let zb = v.project_rows(mod_b)?;
    let pos = gather_pairs(&za, &zb, positives)?;
    let neg = gather_pairs(&za, &zb, negatives)?;
    let contrastive = batch_loss(&pos, &neg, cfg)?;
    Ok(contrastive + cfg.lambda_reg * (u.frobenius_sq() + v.frobenius_sq()))
}

/// Value and full gradient of [`linear_objective`] with respect to both
/// projection matrices; drives the alternating descent fit.
pub fn linear_objective_grad<F: Scalar>(
    u: &LinearProjector<F>,
    v: &LinearProjector<F>,
    mod_a: &Matrix<F>,
    mod_b: &Matrix<F>,
    positives: &[(usize, usize)],
    negatives: &[(usize, usize)],
    cfg: &ContrastiveConfig<F>,
) -> Result<(F, Matrix<F>, Matrix<F>)> {
    let za = u.project_rows(mod_a)?;
    let zb = v.project_rows(mod_b)?;
    let pos = gather_pairs(&za, &zb, positives)?;
    let neg = gather_pairs(&za, &zb, negatives)?;
    let (contrastive, grads) = batch_loss_grad(&pos, &neg, cfg)?;

    let mut gu = Matrix::zeros(u.input_dim(), u.output_dim());
    let mut gv = Matrix::zeros(v.input_dim(), v.output_dim());
    // z = Wᵀx, so dL/dW = x ⊗ dL/dz, accumulated over pairs.
    let add_outer = |g: &mut Matrix<F>, x: &[F], gz: &[F]| {
        for (i, &xi) in x.iter().enumerate() {
            if xi == F::zero() {
                continue;
            }
            for (gij, &gj) in g.row_mut(i).iter_mut().zip(gz) {
                *gij = *gij + xi * gj;
            }
        }
    };
    for (&(i, j), (ga, gb)) in positives
        .iter()
        .zip(grads.pos_a.iter().zip(&grads.pos_b))
    {
        add_outer(&mut gu, mod_a.row(i), ga);
        add_outer(&mut gv, mod_b.row(j), gb);
    }
    for (&(i, j), (ga, gb)) in negatives
        .iter()
        .zip(grads.neg_a.iter().zip(&grads.neg_b))
    {
        add_outer(&mut gu, mod_a.row(i), ga);
        add_outer(&mut gv, mod_b.row(j), gb);
    }
    let two = F::of(2.0);
    for (g, &w) in gu.entries_mut().iter_mut().zip(u.weight().entries()) {
        *g = *g + two * cfg.lambda_reg * w;
    }
    for (g, &w) in gv.entries_mut().iter_mut().zip(v.weight().entries()) {
        *g = *g + two * cfg.lambda_reg * w;
    }
    let value = contrastive + cfg.lambda_reg * (u.frobenius_sq() + v.frobenius_sq());
    Ok((value, gu, gv))
}
