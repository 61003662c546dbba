//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use spanlink::corpus::{tokenize, Token};
use spanlink::encoder::{BaselineConfig, BaselineEncoder, Encoder};
use spanlink::spanmodel::{enumerate_spans, LabeledSpan, ModelConfig, SentenceInput, SpanModel};

const WORDS: &[&str] = &[
    "acute",
    "hepatitis",
    "breast",
    "cancer",
    "patients",
    "with",
    "were",
    "the",
    "of",
    "renal",
    "failure",
    "in",
];

/// A random small model, one sentence, labeled spans and sparse dictionary
/// scores.
pub struct GradInstance {
    pub model: SpanModel,
    pub tokens: Vec<Token>,
    pub spans: Vec<LabeledSpan>,
    pub dicts: Vec<Vec<(usize, f64)>>,
}

impl GradInstance {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let dim = rng.gen_range(2..=4);
        let enc = BaselineEncoder {
            config: BaselineConfig {
                dim,
                window: rng.gen_range(0..=2),
                buckets: 11,
            },
            table: (0..11 * dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            mix: (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect(),
        };
        let labels = rng.gen_range(2..=5);
        let config = ModelConfig {
            max_width: 4,
            width_buckets: 3,
            width_dim: 2,
            hidden_dim: rng.gen_range(2..=4),
            lambda: rng.gen_range(0.0..1.5),
            score_on_raw_g: rng.gen_bool(0.2),
            dict_top_k: 0,
        };
        let mut model = SpanModel::new(config, Encoder::Baseline(enc), labels, rng).unwrap();
        // spread the parameters so every nonlinearity is exercised
        for t in model.scorer.tensors_mut() {
            t.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        }
        let n = rng.gen_range(1..=6);
        let text: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
        let tokens = tokenize(&text.join(" "), 0);
        let all = enumerate_spans(tokens.len(), 4);
        let k = rng.gen_range(1..=all.len().min(5));
        let spans: Vec<LabeledSpan> = all
            .choose_multiple(rng, k)
            .map(|&span| LabeledSpan {
                span,
                label: rng.gen_range(0..labels),
                weight: rng.gen_range(0.2..1.5),
            })
            .collect();
        let mut dicts = Vec::new();
        for _ in &spans {
            let mut d = Vec::new();
            for c in 0..labels - 1 {
                if rng.gen_bool(0.5) {
                    d.push((c, rng.gen_range(0.0..1.0)));
                }
            }
            dicts.push(d);
        }
        GradInstance {
            model,
            tokens,
            spans,
            dicts,
        }
    }

    pub fn input(&self) -> SentenceInput<'_> {
        SentenceInput {
            doc_id: "g",
            sentence_index: 0,
            tokens: &self.tokens,
            expansions: &[],
        }
    }

    pub fn loss(&self, model: &SpanModel) -> f64 {
        model
            .sentence_loss(&self.input(), &self.spans, &self.dicts)
            .unwrap()
    }
}

/// Relative error with a small absolute floor so that coordinates whose true
/// gradient is (numerically) zero do not divide by zero.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Fourth-order central finite difference of the instance loss along one
/// coordinate selected by `pick`.
pub fn central_diff(inst: &GradInstance, h: f64, pick: impl Fn(&mut SpanModel) -> &mut f64) -> f64 {
    let at = |delta: f64| {
        let mut m = inst.model.clone();
        *pick(&mut m) += delta;
        inst.loss(&m)
    };
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

/// Largest relative error between analytic and central-difference gradients
/// for each trainable tensor group of one instance.
pub fn max_grad_errors(inst: &GradInstance) -> Vec<(&'static str, f64)> {
    let (_, grads) = inst
        .model
        .sentence_grads(&inst.input(), &inst.spans, &inst.dicts)
        .unwrap();
    let h = 1e-4;
    let mut out = Vec::new();
    for (ti, name) in spanlink::spanmodel::TENSOR_NAMES.iter().enumerate() {
        let analytic = grads.scorer.tensors()[ti].clone();
        let mut worst: f64 = 0.0;
        for (i, &a) in analytic.iter().enumerate() {
            let n = central_diff(inst, h, |m| &mut m.scorer.tensors_mut()[ti][i]);
            worst = worst.max(rel_err(a, n));
        }
        out.push((*name, worst));
    }
    let eg = grads.encoder.expect("baseline encoder has gradients");
    let Encoder::Baseline(enc) = &inst.model.encoder else {
        unreachable!()
    };
    let d = enc.config.dim;
    let mut worst: f64 = 0.0;
    for i in 0..enc.table.len() {
        let a = eg
            .table
            .get(&((i / d) as u32))
            .map(|r| r[i % d])
            .unwrap_or(0.0);
        let n = central_diff(inst, h, |m| match &mut m.encoder {
            Encoder::Baseline(b) => &mut b.table[i],
            _ => unreachable!(),
        });
        worst = worst.max(rel_err(a, n));
    }
    out.push(("encoder_table", worst));
    let mut worst: f64 = 0.0;
    for k in 0..d {
        let a = eg.mix.get(k).copied().unwrap_or(0.0);
        let n = central_diff(inst, h, |m| match &mut m.encoder {
            Encoder::Baseline(b) => &mut b.mix[k],
            _ => unreachable!(),
        });
        worst = worst.max(rel_err(a, n));
    }
    out.push(("encoder_mix", worst));
    out
}
