//! Span scoring: enumerate word spans, build span representations from token
//! embeddings, score every label as `context + λ · dictionary`, pick the
//! argmax per span and resolve overlaps.

mod checkpoint;
mod decode;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::abbrev::{matcher_text, Expansion};
use crate::corpus::Token;
use crate::encoder::{BaselineEncoder, EmbeddingSequence, Encoder, EncoderGrads, EncoderTrace};
use crate::error::{Error, Result};
use crate::matcher::SynonymIndex;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use decode::{classify_scores, select_non_overlapping, Classification, Prediction};
pub use train::{
    batch_grads, batch_loss, train, Adam, BatchItem, LabeledSpan, TrainConfig, TrainReport,
    TrainingSentence,
};

/// A word span `[start, end)` of one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpanCandidate {
    pub start: usize,
    pub end: usize,
}

impl SpanCandidate {
    pub fn width(&self) -> usize {
        self.end - self.start
    }

    pub fn overlaps(&self, other: &SpanCandidate) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// All spans of at most `max_width` words, in lexicographic order.
pub fn enumerate_spans(len: usize, max_width: usize) -> Vec<SpanCandidate> {
    let mut out = Vec::new();
    for start in 0..len {
        for end in start + 1..=(start + max_width).min(len) {
            out.push(SpanCandidate { start, end });
        }
    }
    out
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

/// Tanh approximation of GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Attention-weighted average of `rows`: weights are the softmax of
/// `attention · row`. Returns the pooled vector and the weights.
pub fn attention_pool(rows: &[&[f64]], attention: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let logits: Vec<f64> = rows.iter().map(|r| dot(r, attention)).collect();
    let weights = softmax(&logits);
    let mut pooled = vec![0.0; attention.len()];
    for (r, w) in rows.iter().zip(&weights) {
        pooled
            .iter_mut()
            .zip(r.iter())
            .for_each(|(p, x)| *p += w * x);
    }
    (pooled, weights)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Stable `ln Σ exp(x)`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `score(s, c) = context(s, c) + λ · dict(s, c)`.
pub fn combined_score(context: f64, lambda: f64, dict: f64) -> f64 {
    context + lambda * dict
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub max_width: usize,
    /// Width embedding buckets; wider spans share the last bucket.
    pub width_buckets: usize,
    pub width_dim: usize,
    pub hidden_dim: usize,
    /// Fusion weight λ of the dictionary score.
    pub lambda: f64,
    /// Score with the raw concatenated representation instead of the FFNN
    /// output.
    pub score_on_raw_g: bool,
    /// Keep only this many best dictionary candidates per span (0 = all).
    pub dict_top_k: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            max_width: 10,
            width_buckets: 10,
            width_dim: 16,
            hidden_dim: 64,
            lambda: 0.9,
            score_on_raw_g: false,
            dict_top_k: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_width == 0
            || self.width_buckets == 0
            || self.width_dim == 0
            || self.hidden_dim == 0
        {
            return Err(Error::Config(
                "span widths and layer sizes must be positive".into(),
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn repr_dim(&self, embed_dim: usize) -> usize {
        3 * embed_dim + self.width_dim
    }

    pub fn score_dim(&self, embed_dim: usize) -> usize {
        if self.score_on_raw_g {
            self.repr_dim(embed_dim)
        } else {
            self.hidden_dim
        }
    }
}

/// Trainable parameters above the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerParams {
    /// Attention vector for span pooling (`dim`).
    pub attention: Vec<f64>,
    /// `width_buckets × width_dim`.
    pub width_table: Vec<f64>,
    /// `hidden × repr_dim`, row-major.
    pub ffnn_w: Vec<f64>,
    pub ffnn_b: Vec<f64>,
    /// Concept weight matrix, `labels × score_dim`; the Null row is last.
    pub concept_w: Vec<f64>,
}

pub const TENSOR_NAMES: [&str; 5] = ["attention", "width_table", "ffnn_w", "ffnn_b", "concept_w"];

impl ScorerParams {
    pub fn new<R: Rng>(config: &ModelConfig, embed_dim: usize, labels: usize, rng: &mut R) -> Self {
        let gd = config.repr_dim(embed_dim);
        let sd = config.score_dim(embed_dim);
        let mut uniform = |n: usize, bound: f64| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
        };
        let width_table = uniform(config.width_buckets * config.width_dim, 0.1);
        let ffnn_w = uniform(
            config.hidden_dim * gd,
            (6.0 / (gd + config.hidden_dim) as f64).sqrt(),
        );
        let concept_w = uniform(labels * sd, 0.05);
        ScorerParams {
            attention: vec![0.0; embed_dim],
            width_table,
            ffnn_w,
            ffnn_b: vec![0.0; config.hidden_dim],
            concept_w,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |v: &Vec<f64>| vec![0.0; v.len()];
        ScorerParams {
            attention: z(&self.attention),
            width_table: z(&self.width_table),
            ffnn_w: z(&self.ffnn_w),
            ffnn_b: z(&self.ffnn_b),
            concept_w: z(&self.concept_w),
        }
    }

    /// Tensors in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> [&Vec<f64>; 5] {
        [
            &self.attention,
            &self.width_table,
            &self.ffnn_w,
            &self.ffnn_b,
            &self.concept_w,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [
            &mut self.attention,
            &mut self.width_table,
            &mut self.ffnn_w,
            &mut self.ffnn_b,
            &mut self.concept_w,
        ]
    }

    pub fn add(&mut self, other: &ScorerParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn label_count(&self, score_dim: usize) -> usize {
        self.concept_w.len() / score_dim
    }
}

/// Gradients of every trainable parameter of a [`SpanModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub scorer: ScorerParams,
    pub encoder: Option<EncoderGrads>,
}

impl ModelGrads {
    pub fn add(&mut self, other: &ModelGrads) {
        self.scorer.add(&other.scorer);
        if let (Some(a), Some(b)) = (self.encoder.as_mut(), other.encoder.as_ref()) {
            a.add(b);
        }
    }
}

/// Forward values of one span, kept for scoring and backpropagation.
#[derive(Debug, Clone)]
pub struct SpanForward {
    pub span: SpanCandidate,
    /// `[h_start, h_end, pooled, width embedding]`.
    pub g: Vec<f64>,
    pub z: Vec<f64>,
    /// Vector the concept weights are applied to (`GELU(z)` or `g`).
    pub r: Vec<f64>,
    pub attention_weights: Vec<f64>,
    width_bucket: usize,
}

/// Per-label scores of one span.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelScores {
    pub context: Vec<f64>,
    pub combined: Vec<f64>,
    /// Sparse dictionary scores, ascending concept index.
    pub dict: Vec<(usize, f64)>,
}

impl LabelScores {
    pub fn dict_of(&self, label: usize) -> f64 {
        self.dict
            .binary_search_by_key(&label, |&(c, _)| c)
            .map(|i| self.dict[i].1)
            .unwrap_or(0.0)
    }
}

/// A sentence with everything the scorer needs besides parameters.
#[derive(Debug, Clone, Copy)]
pub struct SentenceInput<'a> {
    pub doc_id: &'a str,
    pub sentence_index: usize,
    pub tokens: &'a [Token],
    pub expansions: &'a [Option<Expansion>],
}

/// Encoder, scorer parameters and architecture settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanModel {
    pub config: ModelConfig,
    pub scorer: ScorerParams,
    pub encoder: Encoder,
}

impl SpanModel {
    pub fn new<R: Rng>(
        config: ModelConfig,
        encoder: Encoder,
        labels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if labels == 0 {
            return Err(Error::Config(
                "the label set must contain at least Null".into(),
            ));
        }
        let scorer = ScorerParams::new(&config, encoder.dim(), labels, rng);
        Ok(SpanModel {
            config,
            scorer,
            encoder,
        })
    }

    pub fn embed_dim(&self) -> usize {
        self.encoder.dim()
    }

    pub fn score_dim(&self) -> usize {
        self.config.score_dim(self.embed_dim())
    }

    pub fn label_count(&self) -> usize {
        self.scorer.label_count(self.score_dim())
    }

    pub fn null_label(&self) -> usize {
        self.label_count() - 1
    }

    pub fn encode(&self, input: &SentenceInput<'_>) -> Result<EmbeddingSequence> {
        self.encoder
            .encode(input.doc_id, input.sentence_index, input.tokens)
    }

    fn width_bucket(&self, width: usize) -> usize {
        width.min(self.config.width_buckets) - 1
    }

    /// Build `g` (and the FFNN output) for one span.
    pub fn span_forward(&self, h: &EmbeddingSequence, span: SpanCandidate) -> SpanForward {
        let d = h.dim();
        let wd = self.config.width_dim;
        let rows: Vec<&[f64]> = (span.start..span.end).map(|t| h.row(t)).collect();
        let (pooled, attention_weights) = attention_pool(&rows, &self.scorer.attention);
        let wb = self.width_bucket(span.width());
        let mut g = Vec::with_capacity(3 * d + wd);
        g.extend_from_slice(h.row(span.start));
        g.extend_from_slice(h.row(span.end - 1));
        g.extend_from_slice(&pooled);
        g.extend_from_slice(&self.scorer.width_table[wb * wd..(wb + 1) * wd]);

        let (z, r) = if self.config.score_on_raw_g {
            (Vec::new(), g.clone())
        } else {
            let gd = g.len();
            let z: Vec<f64> = (0..self.config.hidden_dim)
                .map(|j| self.scorer.ffnn_b[j] + dot(&self.scorer.ffnn_w[j * gd..(j + 1) * gd], &g))
                .collect();
            let r = z.iter().map(|&x| gelu(x)).collect();
            (z, r)
        };
        SpanForward {
            span,
            g,
            z,
            r,
            attention_weights,
            width_bucket: wb,
        }
    }

    /// `r · W_c` for one label.
    pub fn context_score(&self, fw: &SpanForward, label: usize) -> f64 {
        let sd = fw.r.len();
        dot(&fw.r, &self.scorer.concept_w[label * sd..(label + 1) * sd])
    }

    /// Sparse dictionary scores of a span (abbreviations expanded), ascending
    /// concept index. Empty when λ = 0.
    pub fn span_dict_scores(
        &self,
        index: &SynonymIndex,
        input: &SentenceInput<'_>,
        span: SpanCandidate,
    ) -> Vec<(usize, f64)> {
        if self.config.lambda == 0.0 {
            return Vec::new();
        }
        let text = matcher_text(input.tokens, span.start, span.end, input.expansions);
        let q = index.vectorize(&text);
        if self.config.dict_top_k == 0 {
            index.concept_scores(&q)
        } else {
            let mut top = index.top_k_vec(&q, self.config.dict_top_k);
            top.sort_by_key(|&(c, _)| c);
            top
        }
    }

    pub fn label_scores(&self, fw: &SpanForward, dict: Vec<(usize, f64)>) -> LabelScores {
        let context: Vec<f64> = (0..self.label_count())
            .map(|c| self.context_score(fw, c))
            .collect();
        let mut combined = context.clone();
        for &(c, s) in &dict {
            combined[c] = combined_score(context[c], self.config.lambda, s);
        }
        LabelScores {
            context,
            combined,
            dict,
        }
    }

    /// Weighted softmax cross-entropy of one span and its gradient with respect
    /// to the combined scores.
    fn span_loss(scores: &[f64], label: usize, weight: f64) -> (f64, Vec<f64>) {
        let lse = log_sum_exp(scores);
        let loss = weight * (lse - scores[label]);
        let mut d: Vec<f64> = scores.iter().map(|s| weight * (s - lse).exp()).collect();
        d[label] -= weight;
        (loss, d)
    }

    fn backward_span(
        &self,
        h: &EmbeddingSequence,
        fw: &SpanForward,
        d_scores: &[f64],
        grads: &mut ScorerParams,
        d_h: &mut [f64],
    ) {
        let d = h.dim();
        let sd = fw.r.len();
        let mut dr = vec![0.0; sd];
        for (c, &ds) in d_scores.iter().enumerate() {
            if ds == 0.0 {
                continue;
            }
            let w = &self.scorer.concept_w[c * sd..(c + 1) * sd];
            let gw = &mut grads.concept_w[c * sd..(c + 1) * sd];
            for k in 0..sd {
                gw[k] += ds * fw.r[k];
                dr[k] += ds * w[k];
            }
        }
        let gd = fw.g.len();
        let dg = if self.config.score_on_raw_g {
            dr
        } else {
            let mut dg = vec![0.0; gd];
            for j in 0..self.config.hidden_dim {
                let dz = dr[j] * gelu_grad(fw.z[j]);
                if dz == 0.0 {
                    continue;
                }
                grads.ffnn_b[j] += dz;
                let u = &self.scorer.ffnn_w[j * gd..(j + 1) * gd];
                let gu = &mut grads.ffnn_w[j * gd..(j + 1) * gd];
                for i in 0..gd {
                    gu[i] += dz * fw.g[i];
                    dg[i] += u[i] * dz;
                }
            }
            dg
        };
        let (s, e) = (fw.span.start, fw.span.end - 1);
        for k in 0..d {
            d_h[s * d + k] += dg[k];
            d_h[e * d + k] += dg[d + k];
        }
        let wd = self.config.width_dim;
        let wrow = &mut grads.width_table[fw.width_bucket * wd..(fw.width_bucket + 1) * wd];
        wrow.iter_mut().zip(&dg[3 * d..]).for_each(|(a, x)| *a += x);

        // pooled = Σ α_t h_t with α = softmax(v · h_t)
        let d_pooled = &dg[2 * d..3 * d];
        let alpha = &fw.attention_weights;
        let d_alpha: Vec<f64> = (fw.span.start..fw.span.end)
            .map(|t| dot(d_pooled, h.row(t)))
            .collect();
        let mean_d: f64 = alpha.iter().zip(&d_alpha).map(|(a, b)| a * b).sum();
        for (i, t) in (fw.span.start..fw.span.end).enumerate() {
            let da = alpha[i] * (d_alpha[i] - mean_d);
            let row = h.row(t);
            for k in 0..d {
                grads.attention[k] += da * row[k];
                d_h[t * d + k] += alpha[i] * d_pooled[k] + da * self.scorer.attention[k];
            }
        }
    }

    /// Summed weighted loss over `spans` of one sentence, with dictionary
    /// scores supplied per span.
    pub fn sentence_loss(
        &self,
        input: &SentenceInput<'_>,
        spans: &[LabeledSpan],
        dicts: &[Vec<(usize, f64)>],
    ) -> Result<f64> {
        let h = self.encode(input)?;
        let mut total = 0.0;
        for (ls, dict) in spans.iter().zip(dicts) {
            let fw = self.span_forward(&h, ls.span);
            let scores = self.label_scores(&fw, dict.clone());
            total += Self::span_loss(&scores.combined, ls.label, ls.weight).0;
        }
        Ok(total)
    }

    /// Loss and gradients of every trainable parameter for one sentence.
    pub fn sentence_grads(
        &self,
        input: &SentenceInput<'_>,
        spans: &[LabeledSpan],
        dicts: &[Vec<(usize, f64)>],
    ) -> Result<(f64, ModelGrads)> {
        self.sentence_grads_masked(input, spans, dicts, &[])
    }

    /// As [`SpanModel::sentence_grads`], with word dropout applied to the
    /// baseline encoder (ignored for precomputed embeddings).
    pub fn sentence_grads_masked(
        &self,
        input: &SentenceInput<'_>,
        spans: &[LabeledSpan],
        dicts: &[Vec<(usize, f64)>],
        dropped: &[bool],
    ) -> Result<(f64, ModelGrads)> {
        let (h, trace): (EmbeddingSequence, Option<EncoderTrace>) = match &self.encoder {
            Encoder::Baseline(b) => {
                let (h, t) = b.forward_masked(input.tokens, dropped)?;
                (h, Some(t))
            }
            Encoder::Precomputed(_) => (self.encode(input)?, None),
        };
        let mut grads = self.scorer.zeros_like();
        let mut d_h = vec![0.0; h.rows() * h.dim()];
        let mut total = 0.0;
        for (ls, dict) in spans.iter().zip(dicts) {
            let fw = self.span_forward(&h, ls.span);
            let scores = self.label_scores(&fw, dict.clone());
            let (loss, d_scores) = Self::span_loss(&scores.combined, ls.label, ls.weight);
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss for {} sentence {} span {}..{}",
                    input.doc_id, input.sentence_index, ls.span.start, ls.span.end
                )));
            }
            total += loss;
            self.backward_span(&h, &fw, &d_scores, &mut grads, &mut d_h);
        }
        let encoder = match (&self.encoder, trace) {
            (Encoder::Baseline(b), Some(trace)) => {
                let mut eg = EncoderGrads::default();
                BaselineEncoder::backward(b, &trace, &d_h, &mut eg);
                Some(eg)
            }
            _ => None,
        };
        Ok((
            total,
            ModelGrads {
                scorer: grads,
                encoder,
            },
        ))
    }

    /// Best label of every enumerated span of a sentence.
    pub fn classify_sentence(
        &self,
        index: &SynonymIndex,
        input: &SentenceInput<'_>,
    ) -> Result<Vec<Classification>> {
        let h = self.encode(input)?;
        let null = self.null_label();
        Ok(enumerate_spans(input.tokens.len(), self.config.max_width)
            .into_iter()
            .map(|span| {
                let fw = self.span_forward(&h, span);
                let scores = self.label_scores(&fw, self.span_dict_scores(index, input, span));
                classify_scores(span, &scores, null)
            })
            .collect())
    }

    /// Non-Null spans of a sentence after greedy overlap resolution.
    pub fn decode_sentence(
        &self,
        index: &SynonymIndex,
        input: &SentenceInput<'_>,
    ) -> Result<Vec<Prediction>> {
        let classified = self.classify_sentence(index, input)?;
        let null = self.null_label();
        let kept =
            select_non_overlapping(classified.into_iter().filter(|c| c.label != null).collect());
        Ok(kept
            .into_iter()
            .map(|c| Prediction {
                char_start: input.tokens[c.span.start].char_start,
                char_end: input.tokens[c.span.end - 1].char_end,
                classification: c,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::BaselineConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn span_counts() {
        assert_eq!(enumerate_spans(3, 10).len(), 6);
        assert_eq!(enumerate_spans(12, 10).len(), 75);
        assert_eq!(
            enumerate_spans(1, 10),
            vec![SpanCandidate { start: 0, end: 1 }]
        );
        let spans = enumerate_spans(5, 2);
        assert!(spans.windows(2).all(|w| w[0] < w[1]));
        assert!(spans.iter().all(|s| s.width() <= 2));
    }

    #[test]
    fn attention_pool_edge_cases() {
        let a = [1.0, -2.0, 0.5];
        let (p, w) = attention_pool(&[&a], &[3.0, 1.0, -1.0]);
        assert_eq!(p, a.to_vec());
        assert_eq!(w, vec![1.0]);
        let (p, _) = attention_pool(&[&a, &a, &a], &[0.7, -0.1, 9.0]);
        for k in 0..3 {
            assert!((p[k] - a[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn combined_score_arithmetic() {
        assert_eq!(combined_score(0.1, 0.9, 1.0), 1.0);
        assert_eq!(combined_score(-0.3, 0.0, 1.0), -0.3);
        assert_eq!(combined_score(0.25, 0.9, 0.0), 0.25);
    }

    #[test]
    fn gelu_values() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.841_191_990_1).abs() < 1e-9);
        let h = 1e-6;
        for x in [-3.0, -0.5, 0.0, 0.7, 2.5] {
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn softmax_loss_is_stable() {
        let scores = [1e3, -1e3, 999.0, 0.0];
        let (loss, d) = SpanModel::span_loss(&scores, 1, 1.0);
        let expected = 2000.0 + (1.0 + (-1.0f64).exp()).ln();
        assert!(loss.is_finite() && (loss - expected).abs() < 1e-9);
        assert!(d.iter().all(|x| x.is_finite()));
        assert!(log_sum_exp(&[1e3, 1e3]).is_finite());
    }

    fn toy_model(config: ModelConfig, labels: usize) -> SpanModel {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let enc = BaselineEncoder::new(
            BaselineConfig {
                dim: 3,
                window: 1,
                buckets: 31,
            },
            &mut rng,
        );
        SpanModel::new(config, Encoder::Baseline(enc), labels, &mut rng).unwrap()
    }

    #[test]
    fn context_score_fixture() {
        let mut model = toy_model(
            ModelConfig {
                hidden_dim: 2,
                ..Default::default()
            },
            2,
        );
        model.scorer.concept_w = vec![0.5, 0.25, 0.0, 0.0];
        let toks = crate::corpus::tokenize("acute hepatitis", 0);
        let h = model.encoder.encode("d", 0, &toks).unwrap();
        let mut fw = model.span_forward(&h, SpanCandidate { start: 0, end: 1 });
        fw.r = vec![1.0, -1.0];
        assert_eq!(model.context_score(&fw, 0), 0.25);
    }

    #[test]
    fn zero_weights_and_identical_rows() {
        let mut model = toy_model(ModelConfig::default(), 3);
        let toks = crate::corpus::tokenize("we report acute hepatitis", 0);
        let h = model.encoder.encode("d", 0, &toks).unwrap();
        let fw = model.span_forward(&h, SpanCandidate { start: 2, end: 4 });
        let sd = model.score_dim();
        let row0 = model.scorer.concept_w[..sd].to_vec();
        model.scorer.concept_w[sd..2 * sd].copy_from_slice(&row0);
        assert_eq!(model.context_score(&fw, 0), model.context_score(&fw, 1));
        model.scorer.concept_w.iter_mut().for_each(|w| *w = 0.0);
        assert!((0..3).all(|c| model.context_score(&fw, c) == 0.0));
    }
}
