//! Training loops: pair sampling, the mini-batch Adam optimization of the
//! dual encoders, alternating-descent fitting of the linear model, and
//! model-file persistence.

use std::path::Path;

use crate::data::Dataset;
use crate::encoders::{
    init_params, AdamConfig, AdamState, Layer, LinearProjector, MlpEncoder, MlpGrads,
};
use crate::iofmt;
use crate::numerics::RngStream;
use crate::objective::{
    batch_loss_grad, cosine_similarity, linear_objective, linear_objective_grad,
    ContrastiveConfig,
};
use crate::{Error, Result, Scalar};

/// Everything one training run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<F: Scalar> {
    pub epochs: usize,
    pub batch_size: usize,
    /// Negatives per batch = ceil(neg_ratio × batch_size).
    pub neg_ratio: f64,
    /// Fraction of positives drawn as same-class cross-index pairs instead
    /// of aligned (i, i) pairs.
    pub cross_class_positive_ratio: f64,
    pub contrastive: ContrastiveConfig<F>,
    pub adam: AdamConfig<F>,
    pub arch_a: Vec<usize>,
    pub arch_b: Vec<usize>,
    pub dropout_rate: F,
    pub seed: u64,
}

impl<F: Scalar> TrainConfig<F> {
    /// Defaults for everything except the architectures, which depend on
    /// the dataset dims.
    pub fn new(arch_a: Vec<usize>, arch_b: Vec<usize>, seed: u64) -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            neg_ratio: 1.0,
            cross_class_positive_ratio: 0.25,
            contrastive: ContrastiveConfig::default(),
            adam: AdamConfig::default(),
            arch_a,
            arch_b,
            dropout_rate: F::of(0.5),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Argument("batch_size must be >= 1".into()));
        }
        if !(self.neg_ratio > 0.0) || !self.neg_ratio.is_finite() {
            return Err(Error::Argument("neg_ratio must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.cross_class_positive_ratio) {
            return Err(Error::Argument(
                "cross_class_positive_ratio must lie in [0, 1]".into(),
            ));
        }
        if self.arch_a.len() < 2 || self.arch_b.len() < 2 {
            return Err(Error::Argument(
                "architectures need at least input and output dims".into(),
            ));
        }
        if self.arch_a.last() != self.arch_b.last() {
            return Err(Error::Dimension(format!(
                "encoder output dims differ: {} vs {}",
                self.arch_a.last().expect("non-empty"),
                self.arch_b.last().expect("non-empty")
            )));
        }
        Ok(())
    }

    /// Consensus-space dimension.
    pub fn r(&self) -> usize {
        *self.arch_a.last().expect("validated non-empty")
    }
}

/// One optimization step's sampled pair sets (row indexes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairBatch {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
}

/// Draw one batch: `batch_size` positives (a seeded mix of aligned and
/// same-class cross-index pairs) and `ceil(neg_ratio × batch_size)`
/// label-mismatched negatives, rejection-sampled.
pub fn sample_pairs<F: Scalar>(
    dataset: &Dataset<F>,
    batch_size: usize,
    neg_ratio: f64,
    cross_class_positive_ratio: f64,
    rng: &mut RngStream,
) -> Result<PairBatch> {
    let n = dataset.len();
    let feasible = dataset
        .labels_b
        .iter()
        .any(|&lb| dataset.labels_a.iter().any(|&la| la != lb));
    if !feasible {
        return Err(Error::Infeasible(
            "negative sampling needs at least two classes".into(),
        ));
    }
    // Rows of modality B per class, for cross-index positives.
    let num_classes = dataset.num_classes;
    let mut class_rows_b: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (j, &label) in dataset.labels_b.iter().enumerate() {
        class_rows_b[label].push(j);
    }

    let num_cross = ((cross_class_positive_ratio * batch_size as f64).round() as usize)
        .min(batch_size);
    let mut positives = Vec::with_capacity(batch_size);
    for k in 0..batch_size {
        let i = rng.next_index(n);
        if k < num_cross {
            let rows = &class_rows_b[dataset.labels_a[i]];
            if rows.is_empty() {
                // No B row shares this class; fall back to the aligned pair.
                positives.push((i, i));
                continue;
            }
            let j = loop {
                let j = rows[rng.next_index(rows.len())];
                if j != i || rows.len() == 1 {
                    break j;
                }
            };
            positives.push((i, j));
        } else {
            positives.push((i, i));
        }
    }

    let num_neg = (neg_ratio * batch_size as f64).ceil() as usize;
    let mut negatives = Vec::with_capacity(num_neg);
    for _ in 0..num_neg {
        loop {
            let i = rng.next_index(n);
            let j = rng.next_index(n);
            if dataset.labels_a[i] != dataset.labels_b[j] {
                negatives.push((i, j));
                break;
            }
        }
    }
    Ok(PairBatch {
        positives,
        negatives,
    })
}

/// A frozen per-modality mapping.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoder<F: Scalar> {
    Mlp(MlpEncoder<F>),
    Linear(LinearProjector<F>),
}

impl<F: Scalar> Encoder<F> {
    pub fn embed(&self, x: &[F]) -> Result<Vec<F>> {
        match self {
            Encoder::Mlp(enc) => enc.eval(x),
            Encoder::Linear(proj) => proj.forward(x),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Encoder::Mlp(enc) => enc.input_dim(),
            Encoder::Linear(proj) => proj.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Encoder::Mlp(enc) => enc.output_dim(),
            Encoder::Linear(proj) => proj.output_dim(),
        }
    }
}

/// Per-epoch training trace entry.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats<F: Scalar> {
    pub epoch: usize,
    pub mean_loss: F,
    pub mean_pos_cos: F,
    pub mean_neg_cos: F,
}

/// Frozen encoder pair plus the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<F: Scalar> {
    pub encoder_a: Encoder<F>,
    pub encoder_b: Encoder<F>,
    pub gamma: F,
    pub seed: u64,
    /// Empty after loading from disk; the log lives in train_log.csv.
    pub log: Vec<EpochStats<F>>,
}

impl<F: Scalar> TrainedModel<F> {
    /// Cross-modal score of a raw feature pair (eval mode).
    pub fn score(&self, x_a: &[F], x_b: &[F]) -> Result<F> {
        let za = self.encoder_a.embed(x_a)?;
        let zb = self.encoder_b.embed(x_b)?;
        cosine_similarity(&za, &zb)
    }
}

/// Train the dual encoders: epochs × batches of sample → forward →
/// loss gradient → backprop → Adam. Gradients are means over the batch's
/// pairs so traces are comparable across batch sizes. Fully deterministic
/// given `cfg.seed`.
pub fn train_cmad<F: Scalar>(dataset: &Dataset<F>, cfg: &TrainConfig<F>) -> Result<TrainedModel<F>> {
    cfg.validate()?;
    if cfg.arch_a[0] != dataset.mod_a.cols() {
        return Err(Error::Dimension(format!(
            "arch_a input {} does not match modality A dim {}",
            cfg.arch_a[0],
            dataset.mod_a.cols()
        )));
    }
    if cfg.arch_b[0] != dataset.mod_b.cols() {
        return Err(Error::Dimension(format!(
            "arch_b input {} does not match modality B dim {}",
            cfg.arch_b[0],
            dataset.mod_b.cols()
        )));
    }

    let mut rng = RngStream::new(cfg.seed);
    let mut enc_a = init_params(&cfg.arch_a, cfg.dropout_rate, &mut rng)?;
    let mut enc_b = init_params(&cfg.arch_b, cfg.dropout_rate, &mut rng)?;
    let lens_a: Vec<usize> = enc_a.params_mut().iter().map(|s| s.len()).collect();
    let lens_b: Vec<usize> = enc_b.params_mut().iter().map(|s| s.len()).collect();
    let mut adam_a = AdamState::new(&lens_a, cfg.adam);
    let mut adam_b = AdamState::new(&lens_b, cfg.adam);

    let batches_per_epoch = dataset.len().div_ceil(cfg.batch_size).max(1);
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut loss_sum = F::zero();
        let mut pos_cos_sum = F::zero();
        let mut neg_cos_sum = F::zero();
        let mut pos_count = 0usize;
        let mut neg_count = 0usize;

        for _ in 0..batches_per_epoch {
            let batch = sample_pairs(
                dataset,
                cfg.batch_size,
                cfg.neg_ratio,
                cfg.cross_class_positive_ratio,
                &mut rng,
            )?;

            type Fwd<F> = (
                Vec<F>,
                crate::encoders::ForwardCache<F>,
                Vec<F>,
                crate::encoders::ForwardCache<F>,
            );
            let embed_pair = |pairs: &[(usize, usize)], rng: &mut RngStream| -> Result<Vec<Fwd<F>>> {
                let mut out = Vec::with_capacity(pairs.len());
                for &(i, j) in pairs {
                    let (za, ca) = enc_a.forward_train(dataset.mod_a.row(i), rng)?;
                    let (zb, cb) = enc_b.forward_train(dataset.mod_b.row(j), rng)?;
                    out.push((za, ca, zb, cb));
                }
                Ok(out)
            };
            let pos = embed_pair(&batch.positives, &mut rng)?;
            let neg = embed_pair(&batch.negatives, &mut rng)?;

            let pos_refs: Vec<(&[F], &[F])> = pos
                .iter()
                .map(|(za, _, zb, _)| (za.as_slice(), zb.as_slice()))
                .collect();
            let neg_refs: Vec<(&[F], &[F])> = neg
                .iter()
                .map(|(za, _, zb, _)| (za.as_slice(), zb.as_slice()))
                .collect();
            let (loss, eg) = batch_loss_grad(&pos_refs, &neg_refs, &cfg.contrastive)?;

            for &(za, zb) in &pos_refs {
                pos_cos_sum = pos_cos_sum + cosine_similarity(za, zb)?;
            }
            for &(za, zb) in &neg_refs {
                neg_cos_sum = neg_cos_sum + cosine_similarity(za, zb)?;
            }
            pos_count += pos_refs.len();
            neg_count += neg_refs.len();

            let total_pairs = pos.len() + neg.len();
            let scale = F::one() / F::of(total_pairs as f64);
            loss_sum = loss_sum + loss * scale;

            let mut grads_a = MlpGrads::zeros_like(&enc_a);
            let mut grads_b = MlpGrads::zeros_like(&enc_b);
            for (k, (_, ca, _, cb)) in pos.iter().enumerate() {
                let (ga, _) = enc_a.backward(&eg.pos_a[k], ca)?;
                grads_a.accumulate(&ga);
                let (gb, _) = enc_b.backward(&eg.pos_b[k], cb)?;
                grads_b.accumulate(&gb);
            }
            for (k, (_, ca, _, cb)) in neg.iter().enumerate() {
                let (ga, _) = enc_a.backward(&eg.neg_a[k], ca)?;
                grads_a.accumulate(&ga);
                let (gb, _) = enc_b.backward(&eg.neg_b[k], cb)?;
                grads_b.accumulate(&gb);
            }
            grads_a.scale(scale);
            grads_b.scale(scale);
            adam_a.step(&mut enc_a.params_mut(), &grads_a.flat())?;
            adam_b.step(&mut enc_b.params_mut(), &grads_b.flat())?;
        }

        log.push(EpochStats {
            epoch,
            mean_loss: loss_sum / F::of(batches_per_epoch as f64),
            mean_pos_cos: pos_cos_sum / F::of(pos_count.max(1) as f64),
            mean_neg_cos: neg_cos_sum / F::of(neg_count.max(1) as f64),
        });
    }

    Ok(TrainedModel {
        encoder_a: Encoder::Mlp(enc_a),
        encoder_b: Encoder::Mlp(enc_b),
        gamma: cfg.contrastive.gamma,
        seed: cfg.seed,
        log,
    })
}

/// Result of the alternating-descent linear fit.
#[derive(Debug, Clone)]
pub struct LinearFit<F: Scalar> {
    pub u: LinearProjector<F>,
    pub v: LinearProjector<F>,
    /// Final objective value (the last trace entry).
    pub objective: F,
    pub iterations: usize,
    /// Objective after init and after every accepted iteration.
    pub trace: Vec<F>,
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
}

/// Fit the linear model on all aligned positives plus a seeded sample of
/// `ceil(neg_ratio × N)` negatives, starting from small Gaussian matrices.
pub fn fit_linear<F: Scalar>(dataset: &Dataset<F>, cfg: &TrainConfig<F>) -> Result<LinearFit<F>> {
    cfg.validate()?;
    let r = cfg.r();
    let (d_a, d_b) = (dataset.mod_a.cols(), dataset.mod_b.cols());
    if r > d_a.min(d_b) {
        return Err(Error::Dimension(format!(
            "target dim {r} exceeds min modality dim {}",
            d_a.min(d_b)
        )));
    }
    let mut rng = RngStream::new(cfg.seed);
    let mut init = |d: usize| -> Result<LinearProjector<F>> {
        let scale = F::one() / F::of(d as f64).sqrt();
        let mut w = crate::numerics::Matrix::zeros(d, r);
        for x in w.entries_mut() {
            *x = scale * F::of(rng.next_gaussian());
        }
        LinearProjector::new(w)
    };
    let u0 = init(d_a)?;
    let v0 = init(d_b)?;

    let positives: Vec<(usize, usize)> = (0..dataset.len()).map(|i| (i, i)).collect();
    let num_neg = (cfg.neg_ratio * dataset.len() as f64).ceil() as usize;
    let feasible = dataset
        .labels_b
        .iter()
        .any(|&lb| dataset.labels_a.iter().any(|&la| la != lb));
    if !feasible {
        return Err(Error::Infeasible(
            "negative sampling needs at least two classes".into(),
        ));
    }
    let mut negatives = Vec::with_capacity(num_neg);
    for _ in 0..num_neg {
        loop {
            let i = rng.next_index(dataset.len());
            let j = rng.next_index(dataset.len());
            if dataset.labels_a[i] != dataset.labels_b[j] {
                negatives.push((i, j));
                break;
            }
        }
    }
    fit_linear_from(
        dataset,
        &cfg.contrastive,
        u0,
        v0,
        positives,
        negatives,
        500,
        F::of(1e-6),
    )
}

/// Alternating block descent from an explicit starting point: full
/// gradient step on U with V fixed, then on V with U fixed, each with
/// backtracking halving so the objective never increases. Stops when the
/// relative change drops below `tol` or after `max_iters` iterations.
#[allow(clippy::too_many_arguments)]
pub fn fit_linear_from<F: Scalar>(
    dataset: &Dataset<F>,
    contrastive: &ContrastiveConfig<F>,
    mut u: LinearProjector<F>,
    mut v: LinearProjector<F>,
    positives: Vec<(usize, usize)>,
    negatives: Vec<(usize, usize)>,
    max_iters: usize,
    tol: F,
) -> Result<LinearFit<F>> {
    let ma = &dataset.mod_a;
    let mb = &dataset.mod_b;
    let mut obj = linear_objective(&u, &v, ma, mb, &positives, &negatives, contrastive)?;
    if !obj.is_finite() {
        return Err(Error::Divergence("initial objective is not finite".into()));
    }
    let mut trace = vec![obj];
    let mut step_u = F::one();
    let mut step_v = F::one();
    let mut iterations = 0;

    for _ in 0..max_iters {
        let prev = obj;

        // Block U.
        let (_, gu, _) = linear_objective_grad(&u, &v, ma, mb, &positives, &negatives, contrastive)?;
        step_u = (step_u * F::of(2.0)).min(F::of(1e3));
        let mut halvings = 0;
        loop {
            let trial_w = u.weight().sub(&gu.scale(step_u))?;
            let trial = LinearProjector::new(trial_w)?;
            let trial_obj =
                linear_objective(&trial, &v, ma, mb, &positives, &negatives, contrastive)?;
            if trial_obj.is_finite() && trial_obj <= obj {
                u = trial;
                obj = trial_obj;
                break;
            }
            step_u = step_u / F::of(2.0);
            halvings += 1;
            if halvings > 200 {
                break; // gradient step cannot improve; keep the block as is
            }
        }

        // Block V.
        let (_, _, gv) = linear_objective_grad(&u, &v, ma, mb, &positives, &negatives, contrastive)?;
        step_v = (step_v * F::of(2.0)).min(F::of(1e3));
        let mut halvings = 0;
        loop {
            let trial_w = v.weight().sub(&gv.scale(step_v))?;
            let trial = LinearProjector::new(trial_w)?;
            let trial_obj =
                linear_objective(&u, &trial, ma, mb, &positives, &negatives, contrastive)?;
            if trial_obj.is_finite() && trial_obj <= obj {
                v = trial;
                obj = trial_obj;
                break;
            }
            step_v = step_v / F::of(2.0);
            halvings += 1;
            if halvings > 200 {
                break;
            }
        }

        if !obj.is_finite() {
            return Err(Error::Divergence("objective became non-finite".into()));
        }
        trace.push(obj);
        iterations += 1;
        let change = (prev - obj).abs();
        if change <= tol * prev.abs().max(F::one()) {
            break;
        }
    }

    Ok(LinearFit {
        u,
        v,
        objective: obj,
        iterations,
        trace,
        positives,
        negatives,
    })
}

fn arch_string(dims: &[usize]) -> String {
    dims.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

fn parse_arch(text: &str, what: &str) -> Result<Vec<usize>> {
    text.split('-')
        .map(|tok| iofmt::parse_usize(tok, what))
        .collect()
}

const MODEL_WHAT: &str = "model file";

/// Serialize a trained model to `model.txt`: a key=value header followed
/// by per-layer weight/bias tensor blocks. Floats round-trip losslessly.
pub fn save_model<F: Scalar>(model: &TrainedModel<F>, path: &Path) -> Result<()> {
    let mut out = String::new();
    let (kind, arch_a, arch_b, dropout) = match (&model.encoder_a, &model.encoder_b) {
        (Encoder::Mlp(a), Encoder::Mlp(b)) => (
            "deep",
            arch_string(&a.arch()),
            arch_string(&b.arch()),
            a.dropout_rate(),
        ),
        (Encoder::Linear(a), Encoder::Linear(b)) => (
            "linear",
            format!("{}-{}", a.input_dim(), a.output_dim()),
            format!("{}-{}", b.input_dim(), b.output_dim()),
            F::zero(),
        ),
        _ => {
            return Err(Error::Contract(
                "encoders must both be deep or both linear".into(),
            ))
        }
    };
    out.push_str("version=1\n");
    out.push_str(&format!("kind={kind}\n"));
    out.push_str(&format!("arch_a={arch_a}\n"));
    out.push_str(&format!("arch_b={arch_b}\n"));
    out.push_str(&format!("r={}\n", model.encoder_a.output_dim()));
    out.push_str(&format!("gamma={}\n", iofmt::fmt_float(model.gamma)));
    out.push_str(&format!("seed={}\n", model.seed));
    out.push_str(&format!("dropout={}\n", iofmt::fmt_float(dropout)));

    let push_encoder = |tag: &str, enc: &Encoder<F>, out: &mut String| match enc {
        Encoder::Mlp(mlp) => {
            for (idx, layer) in mlp.layers().iter().enumerate() {
                iofmt::push_matrix(out, &format!("{tag}.w{idx}"), &layer.weight);
                let bias = crate::numerics::Matrix::from_vec(1, layer.bias.len(), layer.bias.clone());
                iofmt::push_matrix(out, &format!("{tag}.b{idx}"), &bias);
            }
        }
        Encoder::Linear(proj) => {
            iofmt::push_matrix(out, &format!("{tag}.w0"), proj.weight());
        }
    };
    push_encoder("a", &model.encoder_a, &mut out);
    push_encoder("b", &model.encoder_b, &mut out);
    iofmt::write_atomic(path, out.as_bytes())
}

fn load_mlp<F: Scalar>(
    reader: &mut iofmt::LineReader,
    tag: &str,
    arch: &[usize],
    dropout: F,
) -> Result<MlpEncoder<F>> {
    let mut layers = Vec::with_capacity(arch.len() - 1);
    for idx in 0..arch.len() - 1 {
        let weight = iofmt::parse_matrix::<F>(reader, &format!("{tag}.w{idx}"))?;
        let bias = iofmt::parse_matrix::<F>(reader, &format!("{tag}.b{idx}"))?;
        if weight.rows() != arch[idx] || weight.cols() != arch[idx + 1] || bias.rows() != 1 {
            return Err(Error::format(
                MODEL_WHAT,
                format!("tensor {tag}.w{idx} does not match the declared architecture"),
            ));
        }
        let activation = if idx + 2 == arch.len() {
            crate::encoders::Activation::Identity
        } else {
            crate::encoders::Activation::Relu
        };
        layers.push(Layer {
            weight,
            bias: bias.entries().to_vec(),
            activation,
        });
    }
    MlpEncoder::from_layers(layers, dropout)
}

/// Load a model written by [`save_model`].
pub fn load_model<F: Scalar>(path: &Path) -> Result<TrainedModel<F>> {
    let text = iofmt::read_to_string(path)?;
    let mut reader = iofmt::LineReader::new(MODEL_WHAT, &text);
    let version = reader.expect_kv("version")?;
    if version != "1" {
        return Err(Error::format(
            MODEL_WHAT,
            format!("unsupported version {version:?}"),
        ));
    }
    let kind = reader.expect_kv("kind")?.to_string();
    let arch_a = parse_arch(reader.expect_kv("arch_a")?, MODEL_WHAT)?;
    let arch_b = parse_arch(reader.expect_kv("arch_b")?, MODEL_WHAT)?;
    let r = iofmt::parse_usize(reader.expect_kv("r")?, MODEL_WHAT)?;
    let gamma: F = iofmt::parse_float(reader.expect_kv("gamma")?, MODEL_WHAT)?;
    let seed: u64 = reader
        .expect_kv("seed")?
        .parse()
        .map_err(|_| Error::format(MODEL_WHAT, "invalid seed"))?;
    let dropout: F = iofmt::parse_float(reader.expect_kv("dropout")?, MODEL_WHAT)?;

    if arch_a.last() != Some(&r) || arch_b.last() != Some(&r) {
        return Err(Error::format(
            MODEL_WHAT,
            "r does not match the architecture output dims",
        ));
    }

    let (encoder_a, encoder_b) = match kind.as_str() {
        "deep" => {
            let a = load_mlp(&mut reader, "a", &arch_a, dropout)?;
            let b = load_mlp(&mut reader, "b", &arch_b, dropout)?;
            (Encoder::Mlp(a), Encoder::Mlp(b))
        }
        "linear" => {
            let wa = iofmt::parse_matrix::<F>(&mut reader, "a.w0")?;
            let wb = iofmt::parse_matrix::<F>(&mut reader, "b.w0")?;
            if [wa.rows(), wa.cols()] != [arch_a[0], r] || [wb.rows(), wb.cols()] != [arch_b[0], r]
            {
                return Err(Error::format(
                    MODEL_WHAT,
                    "projection shapes do not match the header",
                ));
            }
            (
                Encoder::Linear(LinearProjector::new(wa)?),
                Encoder::Linear(LinearProjector::new(wb)?),
            )
        }
        other => {
            return Err(Error::format(
                MODEL_WHAT,
                format!("unknown model kind {other:?}"),
            ))
        }
    };
    Ok(TrainedModel {
        encoder_a,
        encoder_b,
        gamma,
        seed,
        log: Vec::new(),
    })
}

/// Write the per-epoch training trace as CSV.
pub fn write_train_log<F: Scalar>(log: &[EpochStats<F>], path: &Path) -> Result<()> {
    let mut text = String::from("epoch,mean_loss,mean_pos_cos,mean_neg_cos\n");
    for entry in log {
        text.push_str(&format!(
            "{},{},{},{}\n",
            entry.epoch,
            iofmt::fmt_float(entry.mean_loss),
            iofmt::fmt_float(entry.mean_pos_cos),
            iofmt::fmt_float(entry.mean_neg_cos)
        ));
    }
    iofmt::write_atomic(path, text.as_bytes())
}
