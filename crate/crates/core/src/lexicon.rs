//! MEDIC controlled vocabulary and the concept inventory (the label set,
//! including the Null label).

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::corpus::{canonicalize_cui, GoldMention};
use crate::error::{Error, Result};
use crate::text::normalize_name;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub cui: String,
    pub preferred_name: String,
    /// Preferred name first; no two entries share a normalized form.
    pub synonyms: Vec<String>,
    pub alt_cuis: BTreeSet<String>,
}

impl Concept {
    /// Build a concept, dropping synonyms that normalize to nothing or repeat
    /// an earlier one. Returns `None` when the preferred name is unusable.
    pub fn new(
        cui: impl Into<String>,
        preferred_name: impl Into<String>,
        synonyms: impl IntoIterator<Item = String>,
        alt_cuis: impl IntoIterator<Item = String>,
    ) -> Option<Self> {
        let cui = canonicalize_cui(&cui.into());
        let preferred_name = preferred_name.into();
        if normalize_name(&preferred_name).is_empty() {
            return None;
        }
        let mut seen = HashSet::new();
        let synonyms = std::iter::once(preferred_name.clone())
            .chain(synonyms)
            .filter(|s| {
                let key = normalize_name(s);
                !key.is_empty() && seen.insert(key)
            })
            .collect();
        let alt_cuis = alt_cuis
            .into_iter()
            .map(|c| canonicalize_cui(&c))
            .filter(|c| !c.is_empty() && *c != cui)
            .collect();
        Some(Concept {
            cui,
            preferred_name,
            synonyms,
            alt_cuis,
        })
    }
}

/// Dense concept list plus the Null label at index `len()`.
#[derive(Debug, Clone, Default)]
pub struct ConceptInventory {
    concepts: Vec<Concept>,
    cui_index: HashMap<String, usize>,
    synonym_keys: Vec<HashSet<String>>,
}

impl ConceptInventory {
    pub fn from_concepts(concepts: impl IntoIterator<Item = Concept>) -> Result<Self> {
        let mut inv = ConceptInventory::default();
        for c in concepts {
            inv.push(c)?;
        }
        Ok(inv)
    }

    fn push(&mut self, concept: Concept) -> Result<()> {
        let idx = self.concepts.len();
        match self.cui_index.get(&concept.cui) {
            Some(&prev) if self.concepts[prev].cui == concept.cui => {
                return Err(Error::DuplicateConcept(concept.cui));
            }
            // an earlier concept listed this id as an alternate; primary ids win
            _ => {
                self.cui_index.insert(concept.cui.clone(), idx);
            }
        }
        for alt in &concept.alt_cuis {
            match self.cui_index.get(alt) {
                Some(&other) if other != idx => {
                    log::debug!(
                        "alternate id {alt} of {} already maps to {}",
                        concept.cui,
                        self.concepts[other].cui
                    )
                }
                _ => {
                    self.cui_index.insert(alt.clone(), idx);
                }
            }
        }
        self.synonym_keys
            .push(concept.synonyms.iter().map(|s| normalize_name(s)).collect());
        self.concepts.push(concept);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// Index of the Null label (one past the last concept).
    pub fn null_label(&self) -> usize {
        self.concepts.len()
    }

    /// Number of labels including Null.
    pub fn label_count(&self) -> usize {
        self.concepts.len() + 1
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn concept(&self, index: usize) -> Option<&Concept> {
        self.concepts.get(index)
    }

    pub fn synonym_count(&self) -> usize {
        self.concepts.iter().map(|c| c.synonyms.len()).sum()
    }

    /// Canonicalize the prefix, then look up primary and alternate ids.
    pub fn resolve_cui(&self, raw: &str) -> Option<usize> {
        self.cui_index.get(&canonicalize_cui(raw)).copied()
    }

    /// Add `surface` as a synonym of the concept at `index` unless an equal
    /// normalized form is already present. Returns whether it was added.
    pub fn add_synonym(&mut self, index: usize, surface: &str) -> bool {
        let key = normalize_name(surface);
        if key.is_empty() || !self.synonym_keys[index].insert(key) {
            return false;
        }
        self.concepts[index].synonyms.push(surface.to_string());
        true
    }

    /// Merge training mention surfaces into the vocabulary. Composite mentions
    /// contribute to their first listed concept, matching the training label.
    pub fn augment_with_training<'a>(
        &mut self,
        gold: impl IntoIterator<Item = &'a GoldMention>,
    ) -> UnmappedReport {
        let mut report = UnmappedReport::default();
        for m in gold {
            let Some(raw) = m.primary_concept() else {
                continue;
            };
            match self.resolve_cui(raw) {
                Some(idx) => {
                    self.add_synonym(idx, &m.surface);
                }
                None => report.entries.push(UnmappedEntry {
                    doc_id: m.doc_id.clone(),
                    cui: canonicalize_cui(raw),
                    surface: m.surface.clone(),
                }),
            }
        }
        report
    }

    /// Stable digest over ids and normalized synonyms; ties checkpoints to the
    /// dictionary they were trained with.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.concepts {
            h.update(c.cui.as_bytes());
            h.update([0u8]);
            for s in &c.synonyms {
                h.update(normalize_name(s).as_bytes());
                h.update([0x1f]);
            }
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

/// Parse the MEDIC disease vocabulary TSV.
pub fn parse_medic(input: &str, source_name: &str) -> Result<ConceptInventory> {
    let mut inv = ConceptInventory::default();
    let mut skipped = 0usize;
    for (i, line) in input.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 {
            return Err(Error::parse(
                source_name,
                i + 1,
                "expected at least DiseaseName and DiseaseID columns",
            ));
        }
        let name = cols[0].trim();
        let id = cols[1].trim();
        if id.is_empty() {
            return Err(Error::parse(source_name, i + 1, "empty DiseaseID"));
        }
        let pipe_list = |col: usize| -> Vec<String> {
            cols.get(col)
                .map(|s| {
                    s.split('|')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect()
                })
                .unwrap_or_default()
        };
        let Some(concept) = Concept::new(id, name, pipe_list(7), pipe_list(2)) else {
            log::warn!(
                "{source_name}:{}: empty DiseaseName for {id}; row skipped",
                i + 1
            );
            skipped += 1;
            continue;
        };
        inv.push(concept)?;
    }
    if skipped > 0 {
        log::warn!("{source_name}: {skipped} rows skipped");
    }
    Ok(inv)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnmappedEntry {
    pub doc_id: String,
    pub cui: String,
    pub surface: String,
}

/// Training mentions whose concept is absent from the vocabulary.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UnmappedReport {
    pub entries: Vec<UnmappedEntry>,
}

impl UnmappedReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One `doc_id\tcui\tsurface` line per entry.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{}\t{}\t{}", e.doc_id, e.cui, e.surface);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_concept_ids;

    const MEDIC: &str = "# MEDIC excerpt\n\
Polyarteritis Nodosa\tMESH:D010488\t\tA vasculitis\tMESH:D014657\tC14.907\t\tPeriarteritis Nodosa|polyarteritis nodosa|PAN\n\
Breast Neoplasms\tMESH:D001943\tOMIM:114480\t\t\t\t\tBreast Cancer|Cancer of Breast|breast  cancer\n\
\tMESH:D999999\t\t\t\t\t\tOrphan\n";

    fn gold(surface: &str, ids: &str) -> GoldMention {
        GoldMention {
            doc_id: "9".into(),
            char_start: 0,
            char_end: surface.chars().count(),
            surface: surface.into(),
            concept_ids: parse_concept_ids(ids),
            mention_type: "Disease".into(),
            raw_ids: ids.into(),
            extra: None,
        }
    }

    #[test]
    fn parses_rows_and_alt_ids() {
        let inv = parse_medic(MEDIC, "medic").unwrap();
        assert_eq!(inv.len(), 2);
        assert_eq!(inv.null_label(), 2);
        let pan = inv.resolve_cui("MESH:D010488").unwrap();
        assert_eq!(
            inv.concept(pan).unwrap().preferred_name,
            "Polyarteritis Nodosa"
        );
        // case-insensitive dedup removed "polyarteritis nodosa"
        assert_eq!(inv.concept(pan).unwrap().synonyms.len(), 3);
        let bc = inv.resolve_cui("OMIM:114480").unwrap();
        assert_eq!(inv.concept(bc).unwrap().cui, "MESH:D001943");
        // "breast  cancer" collapses onto "Breast Cancer"
        assert_eq!(
            inv.concept(bc).unwrap().synonyms,
            ["Breast Neoplasms", "Breast Cancer", "Cancer of Breast"]
        );
    }

    #[test]
    fn resolve_variants() {
        let inv = parse_medic(MEDIC, "medic").unwrap();
        assert_eq!(inv.resolve_cui("D010488"), Some(0));
        assert_eq!(inv.resolve_cui("114480"), Some(1));
        assert_eq!(inv.resolve_cui("MESH:QQQQ"), None);
        for (i, c) in inv.concepts().iter().enumerate() {
            assert_eq!(inv.resolve_cui(&c.cui), Some(i));
            assert_eq!(c.synonyms[0], c.preferred_name);
        }
    }

    #[test]
    fn empty_stream_has_only_null() {
        let inv = parse_medic("", "medic").unwrap();
        assert!(inv.is_empty());
        assert_eq!(inv.null_label(), 0);
        assert_eq!(inv.label_count(), 1);
    }

    #[test]
    fn duplicate_id_is_error() {
        let input = "A\tMESH:D1\n B\tD1\n";
        assert!(
            matches!(parse_medic(input, "m"), Err(Error::DuplicateConcept(id)) if id == "MESH:D1")
        );
    }

    #[test]
    fn augmentation_adds_and_is_idempotent() {
        let mut inv = parse_medic(MEDIC, "medic").unwrap();
        let before = inv.synonym_count();
        let mentions = vec![
            gold("breast cancer", "D001943"),
            gold("mammary carcinoma", "D001943"),
            gold("mystery syndrome", "D000001"),
        ];
        let report = inv.augment_with_training(&mentions);
        assert_eq!(inv.synonym_count(), before + 1);
        assert!(inv
            .concept(1)
            .unwrap()
            .synonyms
            .contains(&"mammary carcinoma".to_string()));
        assert_eq!(report.entries.len(), 1);
        assert_eq!(report.to_text(), "9\tMESH:D000001\tmystery syndrome\n");

        let hash = inv.content_hash();
        inv.augment_with_training(&mentions);
        assert_eq!(inv.content_hash(), hash);
    }
}
