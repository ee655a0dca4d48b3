//! Scoring and flagging of evaluation pairs, confusion metrics, and the
//! threshold/margin sweep.

use std::path::Path;

use crate::data::{validate_pairs, Dataset, EvalPair, Truth};
use crate::iofmt;
use crate::training::{train_cmad, TrainConfig, TrainedModel};
use crate::{Error, Result, Scalar};

/// Anything that turns a raw cross-modal feature pair into a similarity
/// score in [-1, 1].
pub trait PairScorer<F: Scalar> {
    fn score(&self, x_a: &[F], x_b: &[F]) -> Result<F>;
}

impl<F: Scalar> PairScorer<F> for TrainedModel<F> {
    fn score(&self, x_a: &[F], x_b: &[F]) -> Result<F> {
        TrainedModel::score(self, x_a, x_b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig<F: Scalar> {
    /// A pair is flagged anomalous iff its score is strictly below this.
    pub epsilon: F,
}

impl<F: Scalar> DetectionConfig<F> {
    pub fn new(epsilon: F) -> Result<Self> {
        if !epsilon.is_finite() {
            return Err(Error::Argument("epsilon must be finite".into()));
        }
        Ok(Self { epsilon })
    }
}

/// Score plus the thresholding verdict for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection<F: Scalar> {
    pub score: F,
    pub flagged: bool,
}

/// Score every pair and flag the ones strictly below epsilon.
pub fn detect<F: Scalar, S: PairScorer<F>>(
    scorer: &S,
    dataset: &Dataset<F>,
    pairs: &[EvalPair],
    cfg: &DetectionConfig<F>,
) -> Result<Vec<Detection<F>>> {
    let mut out = Vec::with_capacity(pairs.len());
    for pair in pairs {
        if pair.index_a >= dataset.len() || pair.index_b >= dataset.len() {
            return Err(Error::Argument(format!(
                "pair ({}, {}) outside dataset of {} rows",
                pair.index_a,
                pair.index_b,
                dataset.len()
            )));
        }
        let score = scorer.score(
            dataset.mod_a.row(pair.index_a),
            dataset.mod_b.row(pair.index_b),
        )?;
        out.push(Detection {
            score,
            flagged: score < cfg.epsilon,
        });
    }
    Ok(out)
}

/// Confusion counts and the derived rates. Anomalous is the positive
/// class. Rates whose denominator is zero are not-a-number and their
/// `*_defined` flag is false.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics<F: Scalar> {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
    pub precision: F,
    pub recall: F,
    pub accuracy: F,
    pub precision_defined: bool,
    pub recall_defined: bool,
    pub accuracy_defined: bool,
}

/// Build [`Metrics`] from raw confusion counts.
pub fn metrics_from_counts<F: Scalar>(
    true_pos: usize,
    false_pos: usize,
    true_neg: usize,
    false_neg: usize,
) -> Metrics<F> {
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            (F::nan(), false)
        } else {
            (F::of(num as f64) / F::of(den as f64), true)
        }
    };
    let (precision, precision_defined) = ratio(true_pos, true_pos + false_pos);
    let (recall, recall_defined) = ratio(true_pos, true_pos + false_neg);
    let (accuracy, accuracy_defined) = ratio(
        true_pos + true_neg,
        true_pos + false_pos + true_neg + false_neg,
    );
    Metrics {
        true_pos,
        false_pos,
        true_neg,
        false_neg,
        precision,
        recall,
        accuracy,
        precision_defined,
        recall_defined,
        accuracy_defined,
    }
}

/// Tally flags against ground truth.
pub fn confusion_and_metrics<F: Scalar>(flags: &[bool], truths: &[Truth]) -> Result<Metrics<F>> {
    if flags.len() != truths.len() {
        return Err(Error::Argument(format!(
            "{} flags against {} truths",
            flags.len(),
            truths.len()
        )));
    }
    let mut tp = 0;
    let mut fp = 0;
    let mut tn = 0;
    let mut fn_ = 0;
    for (&flag, &truth) in flags.iter().zip(truths) {
        match (flag, truth) {
            (true, Truth::Anomalous) => tp += 1,
            (true, Truth::Consistent) => fp += 1,
            (false, Truth::Consistent) => tn += 1,
            (false, Truth::Anomalous) => fn_ += 1,
        }
    }
    Ok(metrics_from_counts(tp, fp, tn, fn_))
}

/// Margins gamma in {-0.4, -0.3, ..., 0.5}.
pub fn default_gamma_grid<F: Scalar>() -> Vec<F> {
    (0..10).map(|i| F::of((i as f64 - 4.0) / 10.0)).collect()
}

/// Thresholds epsilon in {-0.2, -0.1, ..., 0.7}.
pub fn default_epsilon_grid<F: Scalar>() -> Vec<F> {
    (0..10).map(|i| F::of((i as f64 - 2.0) / 10.0)).collect()
}

/// One grid cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell<F: Scalar> {
    pub gamma: F,
    pub epsilon: F,
    pub flagged: usize,
    pub metrics: Metrics<F>,
}

/// Retrain once per margin value (with a seed derived from the row index),
/// then evaluate every threshold against the scores. Cells come back in
/// row-major order: gamma outer, epsilon inner.
pub fn sweep<F: Scalar>(
    train_data: &Dataset<F>,
    eval_data: &Dataset<F>,
    pairs: &[EvalPair],
    base_cfg: &TrainConfig<F>,
    gamma_grid: &[F],
    epsilon_grid: &[F],
) -> Result<Vec<SweepCell<F>>> {
    if gamma_grid.is_empty() || epsilon_grid.is_empty() {
        return Err(Error::Argument("sweep grids must be non-empty".into()));
    }
    validate_pairs(eval_data, pairs)?;
    let truths: Vec<Truth> = pairs.iter().map(|p| p.truth).collect();
    let mut cells = Vec::with_capacity(gamma_grid.len() * epsilon_grid.len());
    for (row, &gamma) in gamma_grid.iter().enumerate() {
        let mut cfg = base_cfg.clone();
        cfg.contrastive = crate::objective::ContrastiveConfig::new(
            gamma,
            base_cfg.contrastive.lambda_neg,
            base_cfg.contrastive.lambda_reg,
        )?;
        cfg.seed = base_cfg.seed ^ row as u64;
        let model = train_cmad(train_data, &cfg)?;
        let scores: Vec<F> = pairs
            .iter()
            .map(|p| {
                model.score(eval_data.mod_a.row(p.index_a), eval_data.mod_b.row(p.index_b))
            })
            .collect::<Result<_>>()?;
        for &epsilon in epsilon_grid {
            let flags: Vec<bool> = scores.iter().map(|&s| s < epsilon).collect();
            let flagged = flags.iter().filter(|&&f| f).count();
            let metrics = confusion_and_metrics(&flags, &truths)?;
            cells.push(SweepCell {
                gamma,
                epsilon,
                flagged,
                metrics,
            });
        }
    }
    Ok(cells)
}

/// metrics.csv: one row per (gamma, epsilon) configuration.
pub fn write_metrics_csv<F: Scalar>(cells: &[SweepCell<F>], path: &Path) -> Result<()> {
    let mut text = String::from("gamma,epsilon,tp,fp,tn,fn,precision,recall,accuracy\n");
    for cell in cells {
        let m = &cell.metrics;
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            iofmt::fmt_float(cell.gamma),
            iofmt::fmt_float(cell.epsilon),
            m.true_pos,
            m.false_pos,
            m.true_neg,
            m.false_neg,
            iofmt::fmt_float(m.precision),
            iofmt::fmt_float(m.recall),
            iofmt::fmt_float(m.accuracy)
        ));
    }
    iofmt::write_atomic(path, text.as_bytes())
}

/// scores.csv: per-pair score, ground truth, and verdict.
pub fn write_scores_csv<F: Scalar>(
    detections: &[Detection<F>],
    pairs: &[EvalPair],
    path: &Path,
) -> Result<()> {
    if detections.len() != pairs.len() {
        return Err(Error::Argument(format!(
            "{} detections against {} pairs",
            detections.len(),
            pairs.len()
        )));
    }
    let mut text = String::from("pair_index,score,truth,flagged\n");
    for (idx, (det, pair)) in detections.iter().zip(pairs).enumerate() {
        let truth = match pair.truth {
            Truth::Consistent => "consistent",
            Truth::Anomalous => "anomalous",
        };
        text.push_str(&format!(
            "{},{},{},{}\n",
            idx,
            iofmt::fmt_float(det.score),
            truth,
            u8::from(det.flagged)
        ));
    }
    iofmt::write_atomic(path, text.as_bytes())
}
