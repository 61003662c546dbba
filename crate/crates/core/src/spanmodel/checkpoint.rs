use std::io::{Read, Write};

use super::{ModelConfig, ScorerParams, SpanModel, TENSOR_NAMES};
use crate::binio::{BinReader, BinWriter};
use crate::encoder::{BaselineConfig, BaselineEncoder, EmbeddingStore, Encoder};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SLCK";
const VERSION: u32 = 1;
const ENC_BASELINE: u8 = 0;
const ENC_PRECOMPUTED: u8 = 1;

/// A trained model plus the identity of the dictionary and run configuration
/// it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: SpanModel,
    pub inventory_hash: String,
    /// Canonical run configuration text, echoed for provenance.
    pub run_config: String,
}

impl Checkpoint {
    /// Precomputed-embedding checkpoints do not carry the vectors; attach the
    /// store they were trained with.
    pub fn attach_store(&mut self, store: EmbeddingStore) -> Result<()> {
        match &mut self.model.encoder {
            Encoder::Precomputed(s) if s.dim() == store.dim() => {
                *s = store;
                Ok(())
            }
            Encoder::Precomputed(s) => Err(Error::Embedding(format!(
                "checkpoint expects dimension {}, store has {}",
                s.dim(),
                store.dim()
            ))),
            Encoder::Baseline(_) => {
                Err(Error::Config("checkpoint uses the baseline encoder".into()))
            }
        }
    }
}

pub fn write_checkpoint<W: Write>(ck: &Checkpoint, w: W) -> Result<W> {
    let mut w = BinWriter::new(w);
    w.bytes(MAGIC)?;
    w.u32(VERSION)?;
    w.str(&ck.run_config)?;
    w.str(&ck.inventory_hash)?;
    let c = &ck.model.config;
    for n in [
        c.max_width,
        c.width_buckets,
        c.width_dim,
        c.hidden_dim,
        c.dict_top_k,
    ] {
        w.len(n)?;
    }
    w.f64(c.lambda)?;
    w.u8(c.score_on_raw_g as u8)?;
    match &ck.model.encoder {
        Encoder::Baseline(b) => {
            w.u8(ENC_BASELINE)?;
            w.len(b.config.dim)?;
            w.len(b.config.window)?;
            w.len(b.config.buckets)?;
            w.f64s(&b.table)?;
            w.f64s(&b.mix)?;
        }
        Encoder::Precomputed(s) => {
            w.u8(ENC_PRECOMPUTED)?;
            w.len(s.dim())?;
        }
    }
    w.len(TENSOR_NAMES.len())?;
    for (name, t) in TENSOR_NAMES.iter().zip(ck.model.scorer.tensors()) {
        w.str(name)?;
        w.f64s(t)?;
    }
    Ok(w.into_inner())
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<Checkpoint> {
    let mut r = BinReader::new(r, "checkpoint");
    r.expect_magic(MAGIC, VERSION)?;
    let run_config = r.str()?;
    let inventory_hash = r.str()?;
    let mut dims = [0usize; 5];
    for d in dims.iter_mut() {
        *d = r.len()?;
    }
    let config = ModelConfig {
        max_width: dims[0],
        width_buckets: dims[1],
        width_dim: dims[2],
        hidden_dim: dims[3],
        dict_top_k: dims[4],
        lambda: r.f64()?,
        score_on_raw_g: r.u8()? != 0,
    };
    config.validate()?;
    let encoder = match r.u8()? {
        ENC_BASELINE => {
            let cfg = BaselineConfig {
                dim: r.len()?,
                window: r.len()?,
                buckets: r.len()?,
            };
            let table = r.f64s()?;
            let mix = r.f64s()?;
            if table.len() != cfg.dim * cfg.buckets || mix.len() != cfg.dim {
                return Err(Error::Format(
                    "checkpoint encoder tensors have the wrong size".into(),
                ));
            }
            Encoder::Baseline(BaselineEncoder {
                config: cfg,
                table,
                mix,
            })
        }
        ENC_PRECOMPUTED => Encoder::Precomputed(EmbeddingStore::new(r.len()?)),
        k => {
            return Err(Error::Format(format!(
                "unknown encoder kind {k} in checkpoint"
            )))
        }
    };
    if r.len()? != TENSOR_NAMES.len() {
        return Err(Error::Format(
            "unexpected tensor count in checkpoint".into(),
        ));
    }
    let mut tensors = Vec::with_capacity(TENSOR_NAMES.len());
    for expected in TENSOR_NAMES {
        let name = r.str()?;
        if name != expected {
            return Err(Error::Format(format!(
                "expected tensor {expected}, found {name}"
            )));
        }
        tensors.push(r.f64s()?);
    }
    r.finish()?;
    let mut it = tensors.into_iter();
    let mut next = || it.next().unwrap_or_default();
    let scorer = ScorerParams {
        attention: next(),
        width_table: next(),
        ffnn_w: next(),
        ffnn_b: next(),
        concept_w: next(),
    };
    let d = encoder.dim();
    let sd = config.score_dim(d);
    let ok = scorer.attention.len() == d
        && scorer.width_table.len() == config.width_buckets * config.width_dim
        && scorer.ffnn_w.len() == config.hidden_dim * config.repr_dim(d)
        && scorer.ffnn_b.len() == config.hidden_dim
        && !scorer.concept_w.is_empty()
        && scorer.concept_w.len() % sd == 0;
    if !ok {
        return Err(Error::Format(
            "checkpoint tensor shapes do not match its configuration".into(),
        ));
    }
    Ok(Checkpoint {
        model: SpanModel {
            config,
            scorer,
            encoder,
        },
        inventory_hash,
        run_config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = BaselineEncoder::new(
            BaselineConfig {
                dim: 4,
                window: 1,
                buckets: 17,
            },
            &mut rng,
        );
        let model = SpanModel::new(
            ModelConfig {
                hidden_dim: 5,
                width_dim: 3,
                ..Default::default()
            },
            Encoder::Baseline(enc),
            4,
            &mut rng,
        )
        .unwrap();
        Checkpoint {
            model,
            inventory_hash: "abc".into(),
            run_config: "seed=1\n".into(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let ck = sample();
        let bytes = write_checkpoint(&ck, Vec::new()).unwrap();
        let back = read_checkpoint(&bytes[..]).unwrap();
        assert_eq!(back, ck);
        assert_eq!(write_checkpoint(&back, Vec::new()).unwrap(), bytes);
    }

    #[test]
    fn truncated_and_garbage_rejected() {
        let bytes = write_checkpoint(&sample(), Vec::new()).unwrap();
        assert!(read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_checkpoint(&extra[..]).is_err());
        assert!(read_checkpoint(&b"NOPE\x01\0\0\0"[..]).is_err());
    }
}
