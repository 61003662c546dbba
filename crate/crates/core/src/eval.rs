//! Entity-level NER F1, abstract-level NEN F1 and the standard / zero-shot
//! decomposition of test mentions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::GoldMention;

/// A predicted mention in character offsets with its concept id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedMention {
    pub doc_id: String,
    pub char_start: usize,
    pub char_end: usize,
    pub concept_id: String,
}

/// Micro-averaged counts and scores. Ratios with a zero denominator are 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }
}

/// Exact `(doc, start, end)` matching; each gold mention matches at most once.
pub fn ner_f1(predictions: &[PredictedMention], gold: &[GoldMention]) -> Prf {
    let mut remaining: HashMap<(&str, usize, usize), usize> = HashMap::new();
    for g in gold {
        *remaining
            .entry((g.doc_id.as_str(), g.char_start, g.char_end))
            .or_default() += 1;
    }
    let mut tp = 0;
    for p in predictions {
        if let Some(n) = remaining.get_mut(&(p.doc_id.as_str(), p.char_start, p.char_end)) {
            if *n > 0 {
                *n -= 1;
                tp += 1;
            }
        }
    }
    Prf::from_counts(tp, predictions.len() - tp, gold.len() - tp)
}

type ConceptSets<'a> = BTreeMap<&'a str, BTreeSet<&'a str>>;

fn nen_counts(pred: &ConceptSets<'_>, gold: &ConceptSets<'_>) -> Prf {
    let empty = BTreeSet::new();
    let docs: BTreeSet<&str> = pred.keys().chain(gold.keys()).copied().collect();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for d in docs {
        let p = pred.get(d).unwrap_or(&empty);
        let g = gold.get(d).unwrap_or(&empty);
        let hit = p.intersection(g).count();
        tp += hit;
        fp += p.len() - hit;
        fn_ += g.len() - hit;
    }
    Prf::from_counts(tp, fp, fn_)
}

fn gold_sets<'a>(gold: impl IntoIterator<Item = &'a GoldMention>) -> ConceptSets<'a> {
    let mut sets: ConceptSets<'a> = BTreeMap::new();
    for g in gold {
        let e = sets.entry(g.doc_id.as_str()).or_default();
        e.extend(g.concept_ids.iter().map(String::as_str));
    }
    sets
}

fn pred_sets<'a>(predictions: impl IntoIterator<Item = &'a PredictedMention>) -> ConceptSets<'a> {
    let mut sets: ConceptSets<'a> = BTreeMap::new();
    for p in predictions {
        sets.entry(p.doc_id.as_str())
            .or_default()
            .insert(p.concept_id.as_str());
    }
    sets
}

/// Per abstract, compare the set of predicted concept ids with the set of gold
/// concept ids (composite mentions contribute every member), then sum counts.
pub fn nen_f1(predictions: &[PredictedMention], gold: &[GoldMention]) -> Prf {
    nen_counts(&pred_sets(predictions), &gold_sets(gold))
}

/// Every concept id that occurs in training gold.
pub fn training_concepts<'a>(
    train_gold: impl IntoIterator<Item = &'a GoldMention>,
) -> BTreeSet<String> {
    train_gold
        .into_iter()
        .flat_map(|g| g.concept_ids.iter().cloned())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    Standard,
    ZeroShot,
}

/// Partition of test mentions into those with a concept seen in training and
/// those without. Unnormalized mentions belong to neither.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroShotSplit {
    pub standard: Vec<usize>,
    pub zero_shot: Vec<usize>,
    pub standard_mentions: usize,
    pub standard_concepts: usize,
    pub zero_shot_mentions: usize,
    pub zero_shot_concepts: usize,
}

impl ZeroShotSplit {
    pub fn indices(&self, subset: Subset) -> &[usize] {
        match subset {
            Subset::Standard => &self.standard,
            Subset::ZeroShot => &self.zero_shot,
        }
    }
}

/// A test mention is zero-shot iff none of its concept ids occurs in
/// training. Concept counts are distinct ids over the subset's mentions.
pub fn zero_shot_split(test: &[GoldMention], training: &BTreeSet<String>) -> ZeroShotSplit {
    let mut split = ZeroShotSplit::default();
    let mut std_c = BTreeSet::new();
    let mut zs_c = BTreeSet::new();
    for (i, m) in test.iter().enumerate() {
        if m.concept_ids.is_empty() {
            continue;
        }
        if m.concept_ids.iter().any(|c| training.contains(c)) {
            split.standard.push(i);
            std_c.extend(m.concept_ids.iter());
        } else {
            split.zero_shot.push(i);
            zs_c.extend(m.concept_ids.iter());
        }
    }
    split.standard_mentions = split.standard.len();
    split.zero_shot_mentions = split.zero_shot.len();
    split.standard_concepts = std_c.len();
    split.zero_shot_concepts = zs_c.len();
    split
}

/// NEN restricted to one subset: gold keeps only the subset's mentions and
/// predictions keep only concept ids inside (standard) or outside (zero-shot)
/// the training concept set.
pub fn subset_nen_f1(
    predictions: &[PredictedMention],
    test: &[GoldMention],
    split: &ZeroShotSplit,
    training: &BTreeSet<String>,
    subset: Subset,
) -> Prf {
    let gold = gold_sets(split.indices(subset).iter().map(|&i| &test[i]));
    let keep =
        |p: &&PredictedMention| training.contains(&p.concept_id) == (subset == Subset::Standard);
    let pred = pred_sets(predictions.iter().filter(keep));
    nen_counts(&pred, &gold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub mentions: usize,
    pub concepts: usize,
    pub nen: Prf,
}

/// Full metrics of one prediction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config_hash: String,
    pub documents: usize,
    pub ner: Prf,
    pub nen: Prf,
    pub standard: SubsetReport,
    pub zero_shot: SubsetReport,
}

pub fn evaluate(
    predictions: &[PredictedMention],
    test: &[GoldMention],
    training: &BTreeSet<String>,
    documents: usize,
    config_hash: &str,
) -> EvaluationReport {
    let split = zero_shot_split(test, training);
    let subset = |s: Subset, mentions, concepts| SubsetReport {
        mentions,
        concepts,
        nen: subset_nen_f1(predictions, test, &split, training, s),
    };
    EvaluationReport {
        config_hash: config_hash.to_string(),
        documents,
        ner: ner_f1(predictions, test),
        nen: nen_f1(predictions, test),
        standard: subset(
            Subset::Standard,
            split.standard_mentions,
            split.standard_concepts,
        ),
        zero_shot: subset(
            Subset::ZeroShot,
            split.zero_shot_mentions,
            split.zero_shot_concepts,
        ),
    }
}

impl EvaluationReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# config-hash {}", self.config_hash);
        let _ = writeln!(
            out,
            "{:<10} {:>9} {:>9} {:>9} {:>7} {:>7} {:>7}",
            "metric", "P", "R", "F1", "TP", "FP", "FN"
        );
        let mut row = |name: &str, m: &Prf| {
            let _ = writeln!(
                out,
                "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>7} {:>7} {:>7}",
                name, m.precision, m.recall, m.f1, m.tp, m.fp, m.fn_
            );
        };
        row("NER", &self.ner);
        row("NEN", &self.nen);
        row("NEN-std", &self.standard.nen);
        row("NEN-zero", &self.zero_shot.nen);
        let _ = writeln!(
            out,
            "standard: {} mentions / {} concepts; zero-shot: {} mentions / {} concepts",
            self.standard.mentions,
            self.standard.concepts,
            self.zero_shot.mentions,
            self.zero_shot.concepts
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_concept_ids;

    fn g(doc: &str, s: usize, e: usize, ids: &str) -> GoldMention {
        GoldMention {
            doc_id: doc.into(),
            char_start: s,
            char_end: e,
            surface: "x".repeat(e - s),
            concept_ids: parse_concept_ids(ids),
            mention_type: "Disease".into(),
            raw_ids: ids.into(),
            extra: None,
        }
    }

    fn p(doc: &str, s: usize, e: usize, id: &str) -> PredictedMention {
        PredictedMention {
            doc_id: doc.into(),
            char_start: s,
            char_end: e,
            concept_id: id.into(),
        }
    }

    #[test]
    fn ner_half() {
        let gold = [g("1", 0, 5, "D1"), g("1", 10, 15, "D2")];
        let m = ner_f1(&[p("1", 0, 5, "MESH:D1"), p("1", 11, 15, "MESH:D2")], &gold);
        assert_eq!((m.precision, m.recall, m.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn nen_partial_and_empty() {
        let gold = [g("1", 0, 5, "D1"), g("1", 10, 15, "D2")];
        let m = nen_f1(&[p("1", 40, 45, "MESH:D1"), p("1", 0, 5, "MESH:D1")], &gold);
        assert_eq!((m.precision, m.recall), (1.0, 0.5));
        let m = nen_f1(&[], &gold);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn split_partitions() {
        let train: BTreeSet<String> = ["MESH:D1".to_string()].into();
        let test = [
            g("1", 0, 1, "D1|D9"),
            g("1", 2, 3, "D9"),
            g("1", 4, 5, "-1"),
        ];
        let s = zero_shot_split(&test, &train);
        assert_eq!(
            (s.standard.as_slice(), s.zero_shot.as_slice()),
            (&[0][..], &[1][..])
        );
        assert_eq!((s.standard_concepts, s.zero_shot_concepts), (2, 1));
    }
}
