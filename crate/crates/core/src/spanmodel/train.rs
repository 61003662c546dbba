use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{enumerate_spans, ModelGrads, SentenceInput, SpanCandidate, SpanModel};
use crate::abbrev::Expansion;
use crate::corpus::Token;
use crate::encoder::{Encoder, EncoderGrads};
use crate::error::{Error, Result};
use crate::matcher::SynonymIndex;

/// A span with its gold label and loss weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSpan {
    pub span: SpanCandidate,
    pub label: usize,
    pub weight: f64,
}

/// One training sentence: tokens, abbreviation expansions and gold spans.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSentence {
    pub doc_id: String,
    pub sentence_index: usize,
    pub tokens: Vec<Token>,
    pub expansions: Vec<Option<Expansion>>,
    /// Gold spans with a resolved concept label.
    pub positives: Vec<(SpanCandidate, usize)>,
    /// Gold spans that could not be labeled; never used as negatives.
    pub excluded: Vec<SpanCandidate>,
}

impl TrainingSentence {
    pub fn input(&self) -> SentenceInput<'_> {
        SentenceInput {
            doc_id: &self.doc_id,
            sentence_index: self.sentence_index,
            tokens: &self.tokens,
            expansions: &self.expansions,
        }
    }

    /// All positives plus up to `ratio · max(1, #positives)` Null spans drawn
    /// without replacement.
    pub fn sample_spans<R: Rng>(
        &self,
        config: &TrainConfig,
        max_width: usize,
        null: usize,
        rng: &mut R,
    ) -> Vec<LabeledSpan> {
        let gold: BTreeSet<SpanCandidate> = self
            .positives
            .iter()
            .map(|&(s, _)| s)
            .chain(self.excluded.iter().copied())
            .collect();
        let mut out: Vec<LabeledSpan> = self
            .positives
            .iter()
            .filter(|(s, _)| s.width() <= max_width)
            .map(|&(span, label)| LabeledSpan {
                span,
                label,
                weight: 1.0,
            })
            .collect();
        let pool: Vec<SpanCandidate> = enumerate_spans(self.tokens.len(), max_width)
            .into_iter()
            .filter(|s| !gold.contains(s))
            .collect();
        let want = ((config.negative_ratio * self.positives.len().max(1) as f64).ceil() as usize)
            .min(pool.len());
        out.extend(pool.choose_multiple(rng, want).map(|&span| LabeledSpan {
            span,
            label: null,
            weight: config.null_weight,
        }));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Null spans sampled per positive span.
    pub negative_ratio: f64,
    /// Loss weight of Null spans.
    pub null_weight: f64,
    /// L2 penalty on the concept weight matrix, added to its gradient.
    pub weight_decay: f64,
    /// Probability of zeroing a token's own embedding during training.
    pub word_dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 10,
            seed: 13,
            negative_ratio: 20.0,
            null_weight: 1.0,
            weight_decay: 0.0,
            word_dropout: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.negative_ratio >= 0.0 && self.negative_ratio.is_finite()) {
            return Err(Error::Config("negative_ratio must be non-negative".into()));
        }
        if !(self.null_weight > 0.0 && self.null_weight.is_finite()) {
            return Err(Error::Config("null_weight must be positive".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.word_dropout) {
            return Err(Error::Config("word_dropout must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Adam state. Embedding table moments are only updated for rows that
/// received a gradient in the step (lazy sparse Adam).
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    table_m: Vec<f64>,
    table_v: Vec<f64>,
    mix_m: Vec<f64>,
    mix_v: Vec<f64>,
}

impl Adam {
    pub fn new(model: &SpanModel, learning_rate: f64) -> Self {
        let m: Vec<Vec<f64>> = model
            .scorer
            .tensors()
            .iter()
            .map(|t| vec![0.0; t.len()])
            .collect();
        let (tn, mn) = match &model.encoder {
            Encoder::Baseline(b) => (b.table.len(), b.mix.len()),
            Encoder::Precomputed(_) => (0, 0),
        };
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            step: 0,
            v: m.clone(),
            m,
            table_m: vec![0.0; tn],
            table_v: vec![0.0; tn],
            mix_m: vec![0.0; mn],
            mix_v: vec![0.0; mn],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Apply one update with gradients already scaled to the batch mean.
    pub fn update(&mut self, model: &mut SpanModel, grads: &ModelGrads) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let lr = self.learning_rate;
        let eps = self.eps;
        let wd = self.weight_decay;
        let apply = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], wd: f64| {
            for i in 0..p.len() {
                let g = g[i] + wd * p[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        };
        let n_tensors = self.m.len();
        for (ti, (((p, g), m), v)) in model
            .scorer
            .tensors_mut()
            .into_iter()
            .zip(grads.scorer.tensors())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
            .enumerate()
        {
            // only the concept weight matrix (the last tensor) is decayed
            let decay = if ti + 1 == n_tensors { wd } else { 0.0 };
            apply(p, g, m, v, decay);
        }
        if let (Encoder::Baseline(enc), Some(eg)) = (&mut model.encoder, grads.encoder.as_ref()) {
            let d = enc.config.dim;
            for (&row, g) in &eg.table {
                let r = row as usize * d..(row as usize + 1) * d;
                apply(
                    &mut enc.table[r.clone()],
                    g,
                    &mut self.table_m[r.clone()],
                    &mut self.table_v[r],
                    0.0,
                );
            }
            if !eg.mix.is_empty() {
                apply(&mut enc.mix, &eg.mix, &mut self.mix_m, &mut self.mix_v, 0.0);
            }
        }
    }
}

/// Losses recorded during training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Mean weighted loss of each batch, measured before its update.
    pub step_losses: Vec<f64>,
    /// Mean weighted loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

fn scale_grads(grads: &mut ModelGrads, factor: f64) {
    for t in grads.scorer.tensors_mut() {
        t.iter_mut().for_each(|x| *x *= factor);
    }
    if let Some(eg) = grads.encoder.as_mut() {
        eg.table
            .values_mut()
            .for_each(|r| r.iter_mut().for_each(|x| *x *= factor));
        eg.mix.iter_mut().for_each(|x| *x *= factor);
    }
}

/// One sentence of a batch: sampled spans and the word-dropout mask.
#[derive(Debug, Clone)]
pub struct BatchItem<'a> {
    pub sentence: &'a TrainingSentence,
    pub spans: Vec<LabeledSpan>,
    pub dropped: Vec<bool>,
}

/// Mean weighted loss and gradients of a batch. Per-sentence work runs in
/// parallel; results are reduced in batch order so the sum is reproducible.
pub fn batch_grads(
    model: &SpanModel,
    index: &SynonymIndex,
    batch: &[BatchItem<'_>],
) -> Result<(f64, ModelGrads)> {
    let parts: Vec<Result<(f64, ModelGrads)>> = batch
        .par_iter()
        .map(|item| {
            let input = item.sentence.input();
            let dicts: Vec<_> = item
                .spans
                .iter()
                .map(|ls| model.span_dict_scores(index, &input, ls.span))
                .collect();
            model.sentence_grads_masked(&input, &item.spans, &dicts, &item.dropped)
        })
        .collect();
    let mut total = 0.0;
    let mut acc = ModelGrads {
        scorer: model.scorer.zeros_like(),
        encoder: model.encoder.is_trainable().then(EncoderGrads::default),
    };
    for part in parts {
        let (loss, g) = part?;
        total += loss;
        acc.add(&g);
    }
    let weight: f64 = batch
        .iter()
        .flat_map(|b| b.spans.iter().map(|l| l.weight))
        .sum();
    if weight == 0.0 {
        return Ok((0.0, acc));
    }
    scale_grads(&mut acc, 1.0 / weight);
    Ok((total / weight, acc))
}

/// Mean weighted loss of a batch without gradients (and without dropout).
pub fn batch_loss(model: &SpanModel, index: &SynonymIndex, batch: &[BatchItem<'_>]) -> Result<f64> {
    let mut total = 0.0;
    let mut weight = 0.0;
    for BatchItem {
        sentence, spans, ..
    } in batch
    {
        let input = sentence.input();
        let dicts: Vec<_> = spans
            .iter()
            .map(|ls| model.span_dict_scores(index, &input, ls.span))
            .collect();
        total += model.sentence_loss(&input, spans, &dicts)?;
        weight += spans.iter().map(|l| l.weight).sum::<f64>();
    }
    Ok(if weight == 0.0 { 0.0 } else { total / weight })
}

/// Train `model` in place. Sentence order and negative samples are redrawn
/// every epoch from a generator seeded with `config.seed`.
pub fn train(
    model: &mut SpanModel,
    index: &SynonymIndex,
    data: &[TrainingSentence],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if index.concept_count() + 1 != model.label_count() {
        return Err(Error::Config(format!(
            "model has {} labels but the dictionary has {} concepts",
            model.label_count(),
            index.concept_count()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(model, config.learning_rate);
    adam.weight_decay = config.weight_decay;
    let mut report = TrainReport::default();
    let null = model.null_label();
    let usable: Vec<&TrainingSentence> = data.iter().filter(|s| !s.tokens.is_empty()).collect();
    if usable.is_empty() {
        return Err(Error::Empty("training set"));
    }
    for epoch in 0..config.epochs {
        let mut order = usable.clone();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<BatchItem<'_>> = chunk
                .iter()
                .map(|s| {
                    let spans = s.sample_spans(config, model.config.max_width, null, &mut rng);
                    let dropped = if config.word_dropout > 0.0 {
                        (0..s.tokens.len())
                            .map(|_| rng.gen_bool(config.word_dropout))
                            .collect()
                    } else {
                        Vec::new()
                    };
                    BatchItem {
                        sentence: s,
                        spans,
                        dropped,
                    }
                })
                .collect();
            let (loss, grads) = batch_grads(model, index, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss at epoch {epoch}")));
            }
            adam.update(model, &grads);
            report.step_losses.push(loss);
            epoch_loss += loss;
            epoch_batches += 1;
        }
        let mean = if epoch_batches == 0 {
            0.0
        } else {
            epoch_loss / epoch_batches as f64
        };
        log::info!("epoch {}: loss {mean:.6}", epoch + 1);
        report.epoch_losses.push(mean);
    }
    Ok(report)
}
