//! Glue between the modules: document preparation, training-set
//! construction, batch prediction and artifact rendering.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::abbrev::{
    expand_mentions, extract_abbreviations, AbbreviationPair, AbbreviationTable, Expansion,
};
use crate::config::{EncoderKind, RunConfig};
use crate::corpus::{
    align_mentions, parse_pubtator, split_sentences, write_pubtator, AlignmentReport, GoldMention,
    PubtatorRecord, Sentence,
};
use crate::encoder::{BaselineEncoder, EmbeddingStore, Encoder};
use crate::error::{Error, Result};
use crate::eval::{evaluate, training_concepts, EvaluationReport, PredictedMention};
use crate::lexicon::{parse_medic, ConceptInventory, UnmappedReport};
use crate::matcher::SynonymIndex;
use crate::spanmodel::{
    train, Prediction, SentenceInput, SpanCandidate, SpanModel, TrainReport, TrainingSentence,
};

/// A document split into sentences with gold alignment and abbreviation
/// expansions.
#[derive(Debug, Clone)]
pub struct PreparedDocument {
    pub record: PubtatorRecord,
    pub sentences: Vec<Sentence>,
    pub expansions: Vec<Vec<Option<Expansion>>>,
    pub alignment: AlignmentReport,
}

impl PreparedDocument {
    pub fn doc_id(&self) -> &str {
        &self.record.document.doc_id
    }

    pub fn input(&self, sentence_index: usize) -> SentenceInput<'_> {
        SentenceInput {
            doc_id: self.doc_id(),
            sentence_index,
            tokens: &self.sentences[sentence_index].tokens,
            expansions: &self.expansions[sentence_index],
        }
    }
}

/// Split, align and detect abbreviations. `external` replaces the built-in
/// abbreviation detector for this document when given.
pub fn prepare_document(
    record: PubtatorRecord,
    external: Option<&[AbbreviationPair]>,
) -> Result<PreparedDocument> {
    let sentences = split_sentences(&record.document);
    let alignment = align_mentions(&sentences, &record.mentions)?;
    let pairs = match external {
        Some(p) => p.to_vec(),
        None => extract_abbreviations(&record.document),
    };
    let table = AbbreviationTable::from_pairs(&pairs);
    let expansions = sentences
        .iter()
        .map(|s| expand_mentions(s, &table))
        .collect();
    Ok(PreparedDocument {
        record,
        sentences,
        expansions,
        alignment,
    })
}

pub fn prepare_documents(
    records: Vec<PubtatorRecord>,
    external: Option<&std::collections::HashMap<String, Vec<AbbreviationPair>>>,
) -> Result<Vec<PreparedDocument>> {
    records
        .into_par_iter()
        .map(|r| {
            let ext = external.map(|m| m.get(&r.document.doc_id).map(Vec::as_slice).unwrap_or(&[]));
            prepare_document(r, ext)
        })
        .collect()
}

/// Build span-level training sentences. Gold spans whose first concept is
/// not in the index are kept out of both positives and negatives.
pub fn training_sentences(
    docs: &[PreparedDocument],
    index: &SynonymIndex,
) -> Vec<TrainingSentence> {
    let mut out = Vec::new();
    for doc in docs {
        let mut per_sentence: Vec<TrainingSentence> = doc
            .sentences
            .iter()
            .enumerate()
            .map(|(si, s)| TrainingSentence {
                doc_id: doc.doc_id().to_string(),
                sentence_index: si,
                tokens: s.tokens.clone(),
                expansions: doc.expansions[si].clone(),
                positives: Vec::new(),
                excluded: Vec::new(),
            })
            .collect();
        for a in &doc.alignment.aligned {
            let span = SpanCandidate {
                start: a.token_start,
                end: a.token_end,
            };
            let label = doc.record.mentions[a.mention_index]
                .primary_concept()
                .and_then(|c| index.resolve_cui(c));
            let ts = &mut per_sentence[a.sentence_index];
            match label {
                Some(l) if !ts.positives.iter().any(|(s, _)| *s == span) => {
                    ts.positives.push((span, l))
                }
                Some(_) => {}
                None => ts.excluded.push(span),
            }
        }
        out.extend(per_sentence.into_iter().filter(|s| !s.tokens.is_empty()));
    }
    out
}

/// One kept prediction with its provenance scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPrediction {
    pub doc_id: String,
    pub sentence_index: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub surface: String,
    pub cui: String,
    pub context: f64,
    pub dict: f64,
    pub combined: f64,
}

impl ScoredPrediction {
    pub fn mention(&self) -> PredictedMention {
        PredictedMention {
            doc_id: self.doc_id.clone(),
            char_start: self.char_start,
            char_end: self.char_end,
            concept_id: self.cui.clone(),
        }
    }
}

fn scored(
    doc: &PreparedDocument,
    si: usize,
    p: Prediction,
    index: &SynonymIndex,
) -> Result<ScoredPrediction> {
    let text = doc.record.document.char_text();
    let surface = text
        .slice(p.char_start, p.char_end)
        .ok_or_else(|| {
            Error::Format(format!(
                "prediction offsets out of range in {}",
                doc.doc_id()
            ))
        })?
        .to_string();
    let c = p.classification;
    Ok(ScoredPrediction {
        doc_id: doc.doc_id().to_string(),
        sentence_index: si,
        char_start: p.char_start,
        char_end: p.char_end,
        surface,
        cui: index
            .concept_cui(c.label)
            .ok_or_else(|| Error::Format(format!("label {} has no concept", c.label)))?
            .to_string(),
        context: c.context,
        dict: c.dict,
        combined: c.score,
    })
}

/// Decode every sentence of every document; documents run in parallel and
/// results keep input order.
pub fn predict_documents(
    model: &SpanModel,
    index: &SynonymIndex,
    docs: &[PreparedDocument],
) -> Result<Vec<ScoredPrediction>> {
    if model.label_count() != index.concept_count() + 1 {
        return Err(Error::Config(format!(
            "model has {} labels but the dictionary has {} concepts",
            model.label_count(),
            index.concept_count()
        )));
    }
    let per_doc: Vec<Result<Vec<ScoredPrediction>>> = docs
        .par_iter()
        .map(|doc| {
            let mut out = Vec::new();
            for (si, s) in doc.sentences.iter().enumerate() {
                if s.tokens.is_empty() {
                    continue;
                }
                for p in model.decode_sentence(index, &doc.input(si))? {
                    out.push(scored(doc, si, p, index)?);
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for d in per_doc {
        all.extend(d?);
    }
    Ok(all)
}

/// Predictions as PubTator records over the original documents.
pub fn predictions_pubtator(docs: &[PreparedDocument], preds: &[ScoredPrediction]) -> String {
    let records: Vec<PubtatorRecord> = docs
        .iter()
        .map(|d| PubtatorRecord {
            document: d.record.document.clone(),
            mentions: preds
                .iter()
                .filter(|p| p.doc_id == d.doc_id())
                .map(|p| GoldMention {
                    doc_id: p.doc_id.clone(),
                    char_start: p.char_start,
                    char_end: p.char_end,
                    surface: p.surface.clone(),
                    concept_ids: BTreeSet::from([p.cui.clone()]),
                    mention_type: "Disease".into(),
                    raw_ids: p.cui.clone(),
                    extra: None,
                })
                .collect(),
        })
        .collect();
    write_pubtator(&records)
}

/// Per-prediction score table with a config-hash header.
pub fn scores_tsv(preds: &[ScoredPrediction], config_hash: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config-hash {config_hash}");
    out.push_str("doc_id\tstart\tend\tsurface\tcui\tcontext\tdict\tcombined\n");
    for p in preds {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{:.17e}\t{:.17e}\t{:.17e}",
            p.doc_id, p.char_start, p.char_end, p.surface, p.cui, p.context, p.dict, p.combined
        );
    }
    out
}

/// Replace alternate ids in gold concept sets by the primary id of the
/// concept they resolve to, so they compare equal to predictions.
pub fn canonical_gold(gold: &[GoldMention], index: &SynonymIndex) -> Vec<GoldMention> {
    gold.iter()
        .map(|g| {
            let mut g = g.clone();
            g.concept_ids = g
                .concept_ids
                .iter()
                .map(|c| {
                    index
                        .resolve_cui(c)
                        .and_then(|i| index.concept_cui(i))
                        .map(String::from)
                        .unwrap_or_else(|| c.clone())
                })
                .collect();
            g
        })
        .collect()
}

pub fn all_gold(records: &[PubtatorRecord]) -> Vec<GoldMention> {
    records
        .iter()
        .flat_map(|r| r.mentions.iter().cloned())
        .collect()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

pub fn load_corpus(path: &Path) -> Result<Vec<PubtatorRecord>> {
    parse_pubtator(&read(path)?, &path.display().to_string())
}

pub fn load_medic(path: &Path) -> Result<ConceptInventory> {
    parse_medic(&read(path)?, &path.display().to_string())
}

fn required<'a>(p: &'a Option<std::path::PathBuf>, key: &str) -> Result<&'a Path> {
    let p = p
        .as_deref()
        .ok_or_else(|| Error::Config(format!("{key} is not set")))?;
    if !p.exists() {
        return Err(Error::Config(format!(
            "{key} {} does not exist",
            p.display()
        )));
    }
    Ok(p)
}

/// Training records per the configuration: train, plus dev when merging.
pub fn load_training_records(config: &RunConfig) -> Result<Vec<PubtatorRecord>> {
    let mut recs = load_corpus(required(&config.train_corpus, "train_corpus")?)?;
    if config.merge_dev_into_train {
        recs.extend(load_corpus(required(&config.dev_corpus, "dev_corpus")?)?);
    }
    Ok(recs)
}

pub fn load_test_records(config: &RunConfig) -> Result<Vec<PubtatorRecord>> {
    load_corpus(required(&config.test_corpus, "test_corpus")?)
}

/// Vocabulary from MEDIC, optionally augmented with training surfaces.
pub fn build_inventory(
    config: &RunConfig,
    training: &[PubtatorRecord],
) -> Result<(ConceptInventory, UnmappedReport)> {
    let mut inv = load_medic(required(&config.medic, "medic")?)?;
    let report = if config.augment_dictionary {
        inv.augment_with_training(training.iter().flat_map(|r| r.mentions.iter()))
    } else {
        UnmappedReport::default()
    };
    Ok((inv, report))
}

pub fn load_external_abbreviations(
    config: &RunConfig,
) -> Result<Option<std::collections::HashMap<String, Vec<AbbreviationPair>>>> {
    match &config.abbreviations {
        None => Ok(None),
        Some(_) => {
            let p = required(&config.abbreviations, "abbreviations")?;
            Ok(Some(crate::abbrev::load_abbreviation_tsv(
                &read(p)?,
                &p.display().to_string(),
            )?))
        }
    }
}

pub fn load_embeddings(config: &RunConfig) -> Result<EmbeddingStore> {
    let p = required(&config.embeddings, "embeddings")?;
    EmbeddingStore::read_from(std::io::BufReader::new(std::fs::File::open(p)?))
}

/// Fresh model for `labels` labels; initialization draws from a generator
/// seeded with the run seed.
pub fn init_model(config: &RunConfig, labels: usize) -> Result<SpanModel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5e_ed0f_5ba7);
    let encoder = match config.encoder {
        EncoderKind::Baseline => {
            let bc = config.baseline_config();
            Encoder::Baseline(BaselineEncoder::new(bc, &mut rng))
        }
        EncoderKind::Precomputed => Encoder::Precomputed(load_embeddings(config)?),
    };
    SpanModel::new(config.model_config(), encoder, labels, &mut rng)
}

/// Everything produced by one in-memory train + predict + evaluate run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub model: SpanModel,
    pub index: SynonymIndex,
    pub train_report: TrainReport,
    pub predictions: Vec<ScoredPrediction>,
    pub report: EvaluationReport,
}

/// Augment the vocabulary (per config), train, decode `test` and score it.
pub fn train_and_evaluate(
    config: &RunConfig,
    mut inventory: ConceptInventory,
    train_records: Vec<PubtatorRecord>,
    test_records: Vec<PubtatorRecord>,
) -> Result<RunOutput> {
    config.validate()?;
    if config.augment_dictionary {
        inventory.augment_with_training(train_records.iter().flat_map(|r| r.mentions.iter()));
    }
    let index = SynonymIndex::from_inventory(&inventory, config.ngram_config())?;
    let train_gold = canonical_gold(&all_gold(&train_records), &index);
    let test_gold = canonical_gold(&all_gold(&test_records), &index);
    let train_docs = prepare_documents(train_records, None)?;
    let test_docs = prepare_documents(test_records, None)?;
    let sentences = training_sentences(&train_docs, &index);
    let mut model = init_model(config, index.concept_count() + 1)?;
    let train_report = train(&mut model, &index, &sentences, &config.train_config())?;
    let predictions = predict_documents(&model, &index, &test_docs)?;
    let mentions: Vec<PredictedMention> =
        predictions.iter().map(ScoredPrediction::mention).collect();
    let report = evaluate(
        &mentions,
        &test_gold,
        &training_concepts(&train_gold),
        test_docs.len(),
        &config.hash(),
    );
    Ok(RunOutput {
        model,
        index,
        train_report,
        predictions,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::NgramConfig;

    const DOC: &str = "1|t|Polyarteritis nodosa (PAN) in adults\n\
1|a|PAN was seen with acute hepatitis.\n\
1\t0\t20\tPolyarteritis nodosa\tDisease\tD010488\n\
1\t22\t25\tPAN\tDisease\tD010488\n\
1\t37\t40\tPAN\tDisease\tD010488\n\
1\t61\t70\thepatitis\tDisease\tD999\n";

    #[test]
    fn training_sentences_label_and_exclude() {
        let recs = parse_pubtator(DOC, "t").unwrap();
        let inv = parse_medic("Polyarteritis Nodosa\tMESH:D010488\n", "m").unwrap();
        let index = SynonymIndex::from_inventory(&inv, NgramConfig::default()).unwrap();
        let docs = prepare_documents(recs, None).unwrap();
        let ts = training_sentences(&docs, &index);
        let pos: usize = ts.iter().map(|s| s.positives.len()).sum();
        let exc: usize = ts.iter().map(|s| s.excluded.len()).sum();
        assert_eq!((pos, exc), (3, 1));
        // the abbreviation is expanded for the matcher
        let d = &docs[0];
        let si = d.alignment.aligned[2].sentence_index;
        let t = d.alignment.aligned[2].token_start;
        assert_eq!(
            d.expansions[si][t].as_ref().unwrap().long_form,
            "Polyarteritis nodosa"
        );
    }
}
