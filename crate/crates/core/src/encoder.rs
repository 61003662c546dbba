//! Contextual token embeddings behind one contract, with two sources: a
//! small trainable baseline (hashed subword embeddings mixed with a local
//! window average) and a store of precomputed vectors, e.g. from a BERT-family
//! model pooled to words.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng;

use crate::binio::{BinReader, BinWriter};
use crate::corpus::Token;
use crate::error::{Error, Result};

/// `rows × dim` row-major matrix of token embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingSequence {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::Embedding(format!(
                "{} values for a {rows}x{dim} matrix",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Embedding(format!(
                "non-finite value at row {}",
                bad / dim.max(1)
            )));
        }
        Ok(EmbeddingSequence { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineConfig {
    pub dim: usize,
    pub window: usize,
    pub buckets: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            dim: 64,
            window: 2,
            buckets: 1 << 16,
        }
    }
}

/// Hashed-subword embeddings with a learned per-dimension mix between each
/// token and the mean of its window:
/// `h_t = (1 - σ(θ)) ⊙ e_t + σ(θ) ⊙ mean(e_{t-w..=t+w})`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEncoder {
    pub config: BaselineConfig,
    /// `buckets × dim`.
    pub table: Vec<f64>,
    /// θ, one logit per dimension.
    pub mix: Vec<f64>,
}

/// FNV-1a, stable across platforms and runs.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Bucket ids of a token: the whole bracketed word plus its character
/// 3- to 5-grams.
pub fn token_buckets(token: &str, buckets: usize) -> Vec<u32> {
    let word: Vec<char> = std::iter::once('<')
        .chain(token.chars().flat_map(char::to_lowercase))
        .chain(std::iter::once('>'))
        .collect();
    let mut out = Vec::new();
    let whole: String = word.iter().collect();
    out.push((fnv1a(whole.as_bytes()) % buckets as u64) as u32);
    for n in 3..=5 {
        if n >= word.len() {
            break;
        }
        for w in word.windows(n) {
            let g: String = w.iter().collect();
            out.push((fnv1a(g.as_bytes()) % buckets as u64) as u32);
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intermediate values kept from the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct EncoderTrace {
    buckets: Vec<Vec<u32>>,
    base: Vec<f64>,
    means: Vec<f64>,
}

/// Sparse gradient of the baseline encoder: only table rows that were used.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EncoderGrads {
    pub table: BTreeMap<u32, Vec<f64>>,
    pub mix: Vec<f64>,
}

impl EncoderGrads {
    pub fn add(&mut self, other: &EncoderGrads) {
        for (&b, g) in &other.table {
            let row = self.table.entry(b).or_insert_with(|| vec![0.0; g.len()]);
            row.iter_mut().zip(g).for_each(|(a, x)| *a += x);
        }
        if self.mix.is_empty() {
            self.mix = vec![0.0; other.mix.len()];
        }
        self.mix
            .iter_mut()
            .zip(&other.mix)
            .for_each(|(a, x)| *a += x);
    }
}

impl BaselineEncoder {
    /// Table entries uniform in `±sqrt(3 / dim)` (unit variance per row).
    pub fn new<R: Rng>(config: BaselineConfig, rng: &mut R) -> Self {
        Self::with_init_scale(config, (3.0 / config.dim as f64).sqrt(), rng)
    }

    /// Table entries uniform in `±scale`.
    pub fn with_init_scale<R: Rng>(config: BaselineConfig, scale: f64, rng: &mut R) -> Self {
        let table = if scale > 0.0 {
            (0..config.buckets * config.dim)
                .map(|_| rng.gen_range(-scale..scale))
                .collect()
        } else {
            vec![0.0; config.buckets * config.dim]
        };
        BaselineEncoder {
            config,
            table,
            mix: vec![0.0; config.dim],
        }
    }

    fn window(&self, t: usize, len: usize) -> (usize, usize) {
        (
            t.saturating_sub(self.config.window),
            (t + self.config.window).min(len - 1),
        )
    }

    pub fn encode(&self, tokens: &[Token]) -> Result<EmbeddingSequence> {
        Ok(self.forward(tokens)?.0)
    }

    pub fn forward(&self, tokens: &[Token]) -> Result<(EmbeddingSequence, EncoderTrace)> {
        self.forward_masked(tokens, &[])
    }

    /// Forward pass where tokens with `dropped[t] == true` get a zero base
    /// embedding (word dropout). An empty mask drops nothing.
    pub fn forward_masked(
        &self,
        tokens: &[Token],
        dropped: &[bool],
    ) -> Result<(EmbeddingSequence, EncoderTrace)> {
        if tokens.is_empty() {
            return Err(Error::Empty("cannot encode an empty sentence"));
        }
        let d = self.config.dim;
        let n = tokens.len();
        let buckets: Vec<Vec<u32>> = tokens
            .iter()
            .enumerate()
            .map(|(t, tok)| {
                if dropped.get(t).copied().unwrap_or(false) {
                    Vec::new()
                } else {
                    token_buckets(&tok.text, self.config.buckets)
                }
            })
            .collect();
        let mut base = vec![0.0; n * d];
        for (t, bs) in buckets.iter().enumerate() {
            if bs.is_empty() {
                continue;
            }
            let row = &mut base[t * d..(t + 1) * d];
            for &b in bs {
                let e = &self.table[b as usize * d..(b as usize + 1) * d];
                row.iter_mut().zip(e).for_each(|(r, x)| *r += x);
            }
            let inv = 1.0 / bs.len() as f64;
            row.iter_mut().for_each(|r| *r *= inv);
        }
        let mut means = vec![0.0; n * d];
        let mut out = vec![0.0; n * d];
        let m: Vec<f64> = self.mix.iter().map(|&x| sigmoid(x)).collect();
        for t in 0..n {
            let (lo, hi) = self.window(t, n);
            let inv = 1.0 / (hi - lo + 1) as f64;
            for u in lo..=hi {
                for k in 0..d {
                    means[t * d + k] += base[u * d + k];
                }
            }
            for k in 0..d {
                means[t * d + k] *= inv;
                out[t * d + k] = (1.0 - m[k]) * base[t * d + k] + m[k] * means[t * d + k];
            }
        }
        let seq = EmbeddingSequence::new(n, d, out)
            .map_err(|e| Error::Numeric(format!("baseline encoder produced bad output: {e}")))?;
        Ok((
            seq,
            EncoderTrace {
                buckets,
                base,
                means,
            },
        ))
    }

    /// Accumulate parameter gradients given `d_out`, the loss gradient with
    /// respect to every output row (`rows × dim`, row-major).
    pub fn backward(&self, trace: &EncoderTrace, d_out: &[f64], grads: &mut EncoderGrads) {
        let d = self.config.dim;
        let n = trace.buckets.len();
        if grads.mix.is_empty() {
            grads.mix = vec![0.0; d];
        }
        let m: Vec<f64> = self.mix.iter().map(|&x| sigmoid(x)).collect();
        let mut d_base = vec![0.0; n * d];
        for t in 0..n {
            let (lo, hi) = self.window(t, n);
            let inv = 1.0 / (hi - lo + 1) as f64;
            for k in 0..d {
                let g = d_out[t * d + k];
                if g == 0.0 {
                    continue;
                }
                d_base[t * d + k] += (1.0 - m[k]) * g;
                let spread = m[k] * g * inv;
                for u in lo..=hi {
                    d_base[u * d + k] += spread;
                }
                grads.mix[k] +=
                    g * (trace.means[t * d + k] - trace.base[t * d + k]) * m[k] * (1.0 - m[k]);
            }
        }
        for (t, bs) in trace.buckets.iter().enumerate() {
            let inv = 1.0 / bs.len() as f64;
            let src = &d_base[t * d..(t + 1) * d];
            for &b in bs {
                let row = grads.table.entry(b).or_insert_with(|| vec![0.0; d]);
                row.iter_mut().zip(src).for_each(|(a, x)| *a += x * inv);
            }
        }
    }
}

/// Precomputed per-sentence embeddings keyed by `(doc_id, sentence_index)`.
///
/// File layout (little-endian): magic `SLEM`, `u32` version, `u32` dim,
/// `u64` record count, then per record: `u64` length + UTF-8 doc id,
/// `u32` sentence index, `u32` row count, rows × dim `f32` values row-major.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    records: BTreeMap<(String, u32), EmbeddingSequence>,
}

const STORE_MAGIC: &[u8; 4] = b"SLEM";
const STORE_VERSION: u32 = 1;

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            records: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Values are stored as `f32`; they are rounded on insertion so that what
    /// is held in memory is exactly what a write/read cycle returns.
    pub fn insert(
        &mut self,
        doc_id: &str,
        sentence_index: usize,
        rows: usize,
        values: &[f32],
    ) -> Result<()> {
        let data = values.iter().map(|&x| x as f64).collect();
        let seq = EmbeddingSequence::new(rows, self.dim, data)?;
        self.records
            .insert((doc_id.to_string(), sentence_index as u32), seq);
        Ok(())
    }

    /// Stored matrix for a sentence, checked against its token count.
    pub fn load_precomputed(
        &self,
        doc_id: &str,
        sentence_index: usize,
        expected_rows: usize,
    ) -> Result<EmbeddingSequence> {
        let seq = self
            .records
            .get(&(doc_id.to_string(), sentence_index as u32))
            .ok_or_else(|| {
                Error::Embedding(format!(
                    "no embeddings for {doc_id} sentence {sentence_index}"
                ))
            })?;
        if seq.rows() != expected_rows {
            return Err(Error::Embedding(format!(
                "{doc_id} sentence {sentence_index}: {} stored rows but {expected_rows} tokens",
                seq.rows()
            )));
        }
        Ok(seq.clone())
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<W> {
        let mut w = BinWriter::new(w);
        w.bytes(STORE_MAGIC)?;
        w.u32(STORE_VERSION)?;
        w.u32(self.dim as u32)?;
        w.len(self.records.len())?;
        for ((doc, si), seq) in &self.records {
            w.str(doc)?;
            w.u32(*si)?;
            w.u32(seq.rows() as u32)?;
            for &x in seq.as_slice() {
                w.f32(x as f32)?;
            }
        }
        Ok(w.into_inner())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BinReader::new(r, "embedding store");
        r.expect_magic(STORE_MAGIC, STORE_VERSION)?;
        let dim = r.u32()? as usize;
        let n = r.len()?;
        let mut store = EmbeddingStore::new(dim);
        for _ in 0..n {
            let doc = r.str()?;
            let si = r.u32()?;
            let rows = r.u32()? as usize;
            let values = (0..rows * dim)
                .map(|_| r.f32())
                .collect::<Result<Vec<f32>>>()?;
            store.insert(&doc, si as usize, rows, &values)?;
        }
        r.finish()?;
        Ok(store)
    }
}

/// Which embedding source a model uses.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    Baseline(BaselineEncoder),
    Precomputed(EmbeddingStore),
}

impl Encoder {
    pub fn dim(&self) -> usize {
        match self {
            Encoder::Baseline(b) => b.config.dim,
            Encoder::Precomputed(s) => s.dim(),
        }
    }

    pub fn encode(
        &self,
        doc_id: &str,
        sentence_index: usize,
        tokens: &[Token],
    ) -> Result<EmbeddingSequence> {
        match self {
            Encoder::Baseline(b) => b.encode(tokens),
            Encoder::Precomputed(s) => s.load_precomputed(doc_id, sentence_index, tokens.len()),
        }
    }

    pub fn is_trainable(&self) -> bool {
        matches!(self, Encoder::Baseline(_))
    }
}
