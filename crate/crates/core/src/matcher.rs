//! Dictionary-matching score: TF-IDF over character n-grams, cosine
//! similarity, and the maximum over each concept's synonyms.
//!
//! Queries go through an inverted index over every synonym vector. Dot
//! products are accumulated in ascending feature order both here and in
//! [`SparseVector::dot`], so indexed and direct scores agree bit for bit.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::ops::Range;

use crate::binio::{BinReader, BinWriter};
use crate::corpus::canonicalize_cui;
use crate::error::{Error, Result};
use crate::lexicon::ConceptInventory;
use crate::text::normalize_name;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramConfig {
    /// Character n-gram lengths.
    pub sizes: Vec<usize>,
    /// Boundary character; also stands in for every whitespace run.
    pub pad: char,
    /// Presence instead of raw counts for the term frequency.
    pub binary_tf: bool,
}

impl Default for NgramConfig {
    fn default() -> Self {
        NgramConfig {
            sizes: vec![2, 3],
            pad: '#',
            binary_tf: false,
        }
    }
}

impl NgramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::Config(format!(
                "n-gram sizes must be positive, got {:?}",
                self.sizes
            )));
        }
        if self.pad.is_alphanumeric() {
            return Err(Error::Config(format!(
                "pad character {:?} must not be alphanumeric",
                self.pad
            )));
        }
        Ok(())
    }

    /// All n-grams of the normalized, padded form of `s` (with repeats).
    pub fn ngrams(&self, s: &str) -> Vec<String> {
        let norm = normalize_name(s);
        if norm.is_empty() {
            return Vec::new();
        }
        let padded: Vec<char> = std::iter::once(self.pad)
            .chain(norm.chars().map(|c| if c == ' ' { self.pad } else { c }))
            .chain(std::iter::once(self.pad))
            .collect();
        let mut out = Vec::new();
        for &n in &self.sizes {
            out.extend(padded.windows(n).map(|w| w.iter().collect::<String>()));
        }
        out
    }
}

/// Sparse vector with strictly increasing feature indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Merge-join dot product, summing in ascending feature order.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// Fitted n-gram vocabulary with smoothed inverse document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramVocabulary {
    config: NgramConfig,
    features: HashMap<String, u32>,
    grams: Vec<String>,
    idf: Vec<f64>,
    doc_count: usize,
}

impl NgramVocabulary {
    /// Each distinct normalized name is one document. Feature indices follow
    /// the lexicographic order of the grams.
    pub fn fit<'a>(names: impl IntoIterator<Item = &'a str>, config: NgramConfig) -> Result<Self> {
        config.validate()?;
        let docs: BTreeSet<String> = names
            .into_iter()
            .map(normalize_name)
            .filter(|s| !s.is_empty())
            .collect();
        if docs.is_empty() {
            return Err(Error::Empty("no names to fit the n-gram vocabulary on"));
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for d in &docs {
            let grams: BTreeSet<String> = config.ngrams(d).into_iter().collect();
            for g in grams {
                *df.entry(g).or_default() += 1;
            }
        }
        let n = docs.len() as f64;
        let mut grams = Vec::with_capacity(df.len());
        let mut idf = Vec::with_capacity(df.len());
        for (g, count) in df {
            idf.push(((1.0 + n) / (1.0 + count as f64)).ln() + 1.0);
            grams.push(g);
        }
        Ok(Self::from_parts(config, grams, idf, docs.len()))
    }

    fn from_parts(
        config: NgramConfig,
        grams: Vec<String>,
        idf: Vec<f64>,
        doc_count: usize,
    ) -> Self {
        let features = grams
            .iter()
            .enumerate()
            .map(|(i, g)| (g.clone(), i as u32))
            .collect();
        NgramVocabulary {
            config,
            features,
            grams,
            idf,
            doc_count,
        }
    }

    pub fn config(&self) -> &NgramConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn feature(&self, gram: &str) -> Option<u32> {
        self.features.get(gram).copied()
    }

    pub fn idf(&self, gram: &str) -> Option<f64> {
        self.feature(gram).map(|f| self.idf[f as usize])
    }

    /// L2-normalized TF-IDF vector; grams unseen at fit time are ignored, so a
    /// string with no known gram maps to the empty vector.
    pub fn vectorize(&self, s: &str) -> SparseVector {
        let mut tf: BTreeMap<u32, f64> = BTreeMap::new();
        for g in self.config.ngrams(s) {
            if let Some(f) = self.feature(&g) {
                *tf.entry(f).or_default() += 1.0;
            }
        }
        let mut v = SparseVector {
            indices: Vec::with_capacity(tf.len()),
            values: Vec::with_capacity(tf.len()),
        };
        for (f, count) in tf {
            let tf = if self.config.binary_tf { 1.0 } else { count };
            v.indices.push(f);
            v.values.push(tf * self.idf[f as usize]);
        }
        let norm = v.norm();
        if norm > 0.0 {
            v.values.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynonymEntry {
    pub concept: usize,
    pub text: String,
    pub vector: SparseVector,
}

/// Inverted index over every synonym of every concept.
#[derive(Debug, Clone, PartialEq)]
pub struct SynonymIndex {
    vocab: NgramVocabulary,
    concept_cuis: Vec<String>,
    // synonym ids of each concept are contiguous
    concept_synonyms: Vec<Range<usize>>,
    synonyms: Vec<SynonymEntry>,
    postings: Vec<Vec<(u32, f64)>>,
    // primary and alternate ids
    cui_lookup: HashMap<String, usize>,
    inventory_hash: String,
}

thread_local! {
    static SCRATCH: RefCell<(Vec<f64>, Vec<u32>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

const INDEX_MAGIC: &[u8; 4] = b"SLIX";
const INDEX_VERSION: u32 = 1;

impl SynonymIndex {
    pub fn build(inventory: &ConceptInventory, vocab: NgramVocabulary) -> Self {
        let mut synonyms = Vec::with_capacity(inventory.synonym_count());
        let mut concept_synonyms = Vec::with_capacity(inventory.len());
        for (ci, c) in inventory.concepts().iter().enumerate() {
            let from = synonyms.len();
            for s in &c.synonyms {
                let text = normalize_name(s);
                let vector = vocab.vectorize(&text);
                synonyms.push(SynonymEntry {
                    concept: ci,
                    text,
                    vector,
                });
            }
            concept_synonyms.push(from..synonyms.len());
        }
        let postings = build_postings(vocab.len(), &synonyms);
        let mut cui_lookup = HashMap::new();
        for c in inventory.concepts() {
            for id in std::iter::once(&c.cui).chain(&c.alt_cuis) {
                if let Some(i) = inventory.resolve_cui(id) {
                    cui_lookup.insert(id.clone(), i);
                }
            }
        }
        SynonymIndex {
            vocab,
            concept_cuis: inventory.concepts().iter().map(|c| c.cui.clone()).collect(),
            concept_synonyms,
            synonyms,
            postings,
            cui_lookup,
            inventory_hash: inventory.content_hash(),
        }
    }

    /// Fit the vocabulary on every synonym in the inventory, then index it.
    pub fn from_inventory(inventory: &ConceptInventory, config: NgramConfig) -> Result<Self> {
        let names = inventory
            .concepts()
            .iter()
            .flat_map(|c| c.synonyms.iter().map(String::as_str));
        let vocab = NgramVocabulary::fit(names, config)?;
        Ok(Self::build(inventory, vocab))
    }

    pub fn vocabulary(&self) -> &NgramVocabulary {
        &self.vocab
    }

    pub fn concept_count(&self) -> usize {
        self.concept_cuis.len()
    }

    pub fn null_label(&self) -> usize {
        self.concept_cuis.len()
    }

    pub fn concept_cui(&self, index: usize) -> Option<&str> {
        self.concept_cuis.get(index).map(String::as_str)
    }

    /// Same lookup as [`ConceptInventory::resolve_cui`].
    pub fn resolve_cui(&self, raw: &str) -> Option<usize> {
        self.cui_lookup.get(&canonicalize_cui(raw)).copied()
    }

    pub fn synonyms(&self) -> &[SynonymEntry] {
        &self.synonyms
    }

    pub fn synonyms_of(&self, concept: usize) -> &[SynonymEntry] {
        &self.synonyms[self.concept_synonyms[concept].clone()]
    }

    pub fn inventory_hash(&self) -> &str {
        &self.inventory_hash
    }

    pub fn vectorize(&self, s: &str) -> SparseVector {
        self.vocab.vectorize(s)
    }

    /// Best cosine between the span and any synonym of `concept`; 0 for the
    /// Null label.
    pub fn dict_score(&self, span_text: &str, concept: usize) -> f64 {
        self.dict_score_vec(&self.vectorize(span_text), concept)
    }

    pub fn dict_score_vec(&self, query: &SparseVector, concept: usize) -> f64 {
        if concept == self.null_label() {
            return 0.0;
        }
        assert!(
            concept < self.null_label(),
            "concept index {concept} out of range"
        );
        self.synonyms_of(concept)
            .iter()
            .map(|s| query.dot(&s.vector))
            .fold(0.0, f64::max)
    }

    /// Every concept with a nonzero score, in ascending concept order.
    pub fn concept_scores(&self, query: &SparseVector) -> Vec<(usize, f64)> {
        if query.is_empty() {
            return Vec::new();
        }
        SCRATCH.with(|cell| {
            let (acc, touched) = &mut *cell.borrow_mut();
            if acc.len() < self.synonyms.len() {
                acc.resize(self.synonyms.len(), 0.0);
            }
            for (&f, &q) in query.indices.iter().zip(&query.values) {
                for &(syn, w) in &self.postings[f as usize] {
                    let slot = &mut acc[syn as usize];
                    if *slot == 0.0 {
                        touched.push(syn);
                    }
                    *slot += q * w;
                }
            }
            let mut best: BTreeMap<usize, f64> = BTreeMap::new();
            for &syn in touched.iter() {
                let score = std::mem::take(&mut acc[syn as usize]);
                let e = best
                    .entry(self.synonyms[syn as usize].concept)
                    .or_insert(0.0);
                *e = e.max(score);
            }
            touched.clear();
            best.into_iter().filter(|&(_, s)| s > 0.0).collect()
        })
    }

    /// The `k` best concepts by dictionary score, ties broken by ascending
    /// concept index. Concepts scoring zero are never listed.
    pub fn top_k(&self, span_text: &str, k: usize) -> Vec<(usize, f64)> {
        self.top_k_vec(&self.vectorize(span_text), k)
    }

    pub fn top_k_vec(&self, query: &SparseVector, k: usize) -> Vec<(usize, f64)> {
        let mut scores = self.concept_scores(query);
        rank_scores(&mut scores);
        scores.truncate(k);
        scores
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<W> {
        let mut w = BinWriter::new(w);
        w.bytes(INDEX_MAGIC)?;
        w.u32(INDEX_VERSION)?;
        let cfg = self.vocab.config();
        w.len(cfg.sizes.len())?;
        for &n in &cfg.sizes {
            w.u32(n as u32)?;
        }
        w.u32(cfg.pad as u32)?;
        w.u8(cfg.binary_tf as u8)?;
        w.len(self.vocab.doc_count)?;
        w.str(&self.inventory_hash)?;
        w.len(self.vocab.grams.len())?;
        for (g, idf) in self.vocab.grams.iter().zip(&self.vocab.idf) {
            w.str(g)?;
            w.f64(*idf)?;
        }
        w.len(self.concept_cuis.len())?;
        for (cui, range) in self.concept_cuis.iter().zip(&self.concept_synonyms) {
            w.str(cui)?;
            w.len(range.len())?;
            for s in &self.synonyms[range.clone()] {
                w.str(&s.text)?;
            }
        }
        let mut lookup: Vec<(&String, &usize)> = self.cui_lookup.iter().collect();
        lookup.sort();
        w.len(lookup.len())?;
        for (cui, &i) in lookup {
            w.str(cui)?;
            w.len(i)?;
        }
        for list in &self.postings {
            w.len(list.len())?;
            for &(syn, weight) in list {
                w.u32(syn)?;
                w.f64(weight)?;
            }
        }
        Ok(w.into_inner())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BinReader::new(r, "synonym index");
        r.expect_magic(INDEX_MAGIC, INDEX_VERSION)?;
        let n_sizes = r.len()?;
        let sizes = (0..n_sizes)
            .map(|_| r.u32().map(|n| n as usize))
            .collect::<Result<Vec<_>>>()?;
        let pad = char::from_u32(r.u32()?)
            .ok_or_else(|| Error::Format("synonym index: bad pad character".into()))?;
        let binary_tf = r.u8()? != 0;
        let config = NgramConfig {
            sizes,
            pad,
            binary_tf,
        };
        config.validate()?;
        let doc_count = r.len()?;
        let inventory_hash = r.str()?;
        let n_grams = r.len()?;
        let mut grams = Vec::with_capacity(n_grams);
        let mut idf = Vec::with_capacity(n_grams);
        for _ in 0..n_grams {
            grams.push(r.str()?);
            idf.push(r.f64()?);
        }
        let vocab = NgramVocabulary::from_parts(config, grams, idf, doc_count);
        let n_concepts = r.len()?;
        let mut concept_cuis = Vec::with_capacity(n_concepts);
        let mut concept_synonyms = Vec::with_capacity(n_concepts);
        let mut synonyms = Vec::new();
        for ci in 0..n_concepts {
            concept_cuis.push(r.str()?);
            let n = r.len()?;
            let from = synonyms.len();
            for _ in 0..n {
                synonyms.push(SynonymEntry {
                    concept: ci,
                    text: r.str()?,
                    vector: SparseVector::default(),
                });
            }
            concept_synonyms.push(from..synonyms.len());
        }
        let n_lookup = r.len()?;
        let mut cui_lookup = HashMap::with_capacity(n_lookup);
        for _ in 0..n_lookup {
            let cui = r.str()?;
            let i = r.len()?;
            if i >= n_concepts {
                return Err(Error::Format(format!(
                    "synonym index: {cui} maps to missing concept {i}"
                )));
            }
            cui_lookup.insert(cui, i);
        }
        let mut postings = Vec::with_capacity(vocab.len());
        for f in 0..vocab.len() {
            let n = r.len()?;
            let mut list = Vec::with_capacity(n);
            for _ in 0..n {
                let syn = r.u32()?;
                let weight = r.f64()?;
                let entry = synonyms.get_mut(syn as usize).ok_or_else(|| {
                    Error::Format(format!("synonym index: posting references synonym {syn}"))
                })?;
                entry.vector.indices.push(f as u32);
                entry.vector.values.push(weight);
                list.push((syn, weight));
            }
            postings.push(list);
        }
        r.finish()?;
        Ok(SynonymIndex {
            vocab,
            concept_cuis,
            concept_synonyms,
            synonyms,
            postings,
            cui_lookup,
            inventory_hash,
        })
    }
}

fn build_postings(n_features: usize, synonyms: &[SynonymEntry]) -> Vec<Vec<(u32, f64)>> {
    let mut postings = vec![Vec::new(); n_features];
    for (sid, s) in synonyms.iter().enumerate() {
        for (&f, &w) in s.vector.indices.iter().zip(&s.vector.values) {
            postings[f as usize].push((sid as u32, w));
        }
    }
    postings
}

/// Sort by descending score, then ascending concept index.
pub fn rank_scores(scores: &mut [(usize, f64)]) {
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::Concept;

    fn inventory(rows: &[(&str, &[&str])]) -> ConceptInventory {
        ConceptInventory::from_concepts(rows.iter().map(|(cui, syns)| {
            Concept::new(
                *cui,
                syns[0],
                syns[1..].iter().map(|s| s.to_string()),
                Vec::new(),
            )
            .unwrap()
        }))
        .unwrap()
    }

    #[test]
    fn padded_trigrams() {
        let cfg = NgramConfig {
            sizes: vec![3],
            ..Default::default()
        };
        assert_eq!(cfg.ngrams("ab"), ["#ab", "ab#"]);
        let v = NgramVocabulary::fit(["ab"], cfg).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.doc_count(), 1);
        // df = 1 = N: ln(2/2) + 1
        assert_eq!(v.idf("#ab"), Some(1.0));
        assert_eq!(v.idf("ab#"), Some(1.0));
    }

    #[test]
    fn whitespace_becomes_single_pad() {
        let cfg = NgramConfig::default();
        let g = cfg.ngrams("a  b");
        assert!(g.contains(&"a#b".to_string()));
        assert!(g.contains(&"#a".to_string()));
    }

    #[test]
    fn idf_floor_and_symmetry() {
        let cfg = NgramConfig {
            sizes: vec![2],
            ..Default::default()
        };
        let v = NgramVocabulary::fit(["xa", "ya", "za"], cfg.clone()).unwrap();
        assert_eq!(v.idf("a#"), Some(1.0));
        let v = NgramVocabulary::fit(["abc", "xyz"], cfg).unwrap();
        let idfs: BTreeSet<u64> = ["#a", "ab", "bc", "c#", "#x", "xy", "yz", "z#"]
            .iter()
            .map(|g| v.idf(g).unwrap().to_bits())
            .collect();
        assert_eq!(idfs.len(), 1);
    }

    #[test]
    fn fit_on_nothing_fails() {
        assert!(NgramVocabulary::fit(std::iter::empty(), NgramConfig::default()).is_err());
        assert!(NgramVocabulary::fit(["..."], NgramConfig::default()).is_err());
    }

    #[test]
    fn unit_norm_and_orthogonality() {
        let v =
            NgramVocabulary::fit(["abc", "xyz", "breast cancer"], NgramConfig::default()).unwrap();
        for s in ["abc", "breast cancer", "xyz"] {
            let x = v.vectorize(s);
            assert!((x.dot(&x) - 1.0).abs() < 1e-12);
        }
        assert_eq!(v.vectorize("abc").dot(&v.vectorize("xyz")), 0.0);
        assert!(v.vectorize("qqq").is_empty());
    }

    #[test]
    fn dict_score_contract() {
        let inv = inventory(&[
            ("MESH:D001943", &["Breast Neoplasms", "breast cancer"]),
            (
                "MESH:D018567",
                &["Breast Neoplasms, Male", "male breast cancer"],
            ),
        ]);
        let idx = SynonymIndex::from_inventory(&inv, NgramConfig::default()).unwrap();
        assert!((idx.dict_score("breast cancer", 0) - 1.0).abs() < 1e-12);
        let male = idx.dict_score("breast cancer", 1);
        assert!(male > 0.6 && male < 1.0, "{male}");
        assert_eq!(idx.dict_score("breast cancer", idx.null_label()), 0.0);
        assert_eq!(idx.dict_score("!!", 0), 0.0);
        let top = idx.top_k("breast cancer", 5);
        assert_eq!(top[0].0, 0);
        assert_eq!(top.len(), 2);
    }

    #[test]
    fn top_k_ties_by_index_and_zero_excluded() {
        let inv = inventory(&[("D3", &["zzz"]), ("D1", &["abc"]), ("D2", &["abc"])]);
        let idx = SynonymIndex::from_inventory(&inv, NgramConfig::default()).unwrap();
        let top = idx.top_k("abc", 10);
        assert_eq!(top.iter().map(|t| t.0).collect::<Vec<_>>(), [1, 2]);
        assert_eq!(top[0].1.to_bits(), top[1].1.to_bits());
        assert_eq!(idx.top_k("abc", 1).len(), 1);
    }

    #[test]
    fn indexed_scores_match_direct_bitwise() {
        let inv = inventory(&[
            ("D1", &["acute hepatitis", "hepatitis a"]),
            (
                "D2",
                &["drug induced liver injury", "drug-induced hepatitis"],
            ),
            ("D3", &["renal failure"]),
        ]);
        let idx = SynonymIndex::from_inventory(&inv, NgramConfig::default()).unwrap();
        let q = idx.vectorize("hepatitis");
        for (c, s) in idx.concept_scores(&q) {
            assert_eq!(s.to_bits(), idx.dict_score_vec(&q, c).to_bits());
        }
    }

    #[test]
    fn serialization_round_trip() {
        let inv = inventory(&[
            ("D1", &["Sjögren syndrome", "sicca"]),
            ("D2", &["renal failure"]),
        ]);
        let idx = SynonymIndex::from_inventory(&inv, NgramConfig::default()).unwrap();
        let bytes = idx.write_to(Vec::new()).unwrap();
        let back = SynonymIndex::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, idx);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(SynonymIndex::read_from(bad.as_slice()).is_err());
        assert!(SynonymIndex::read_from(&bytes[..bytes.len() - 3]).is_err());
    }
}
