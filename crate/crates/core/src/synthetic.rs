//! A small generated corpus for checking the zero-shot mechanism: test
//! documents mention ten concepts that never occur in training but are in the
//! vocabulary.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::corpus::{parse_concept_ids, GoldMention, PubtatorRecord, RawDocument};

/// `(id, preferred name, synonyms)`.
type Entry = (&'static str, &'static str, &'static [&'static str]);

const SEEN: &[Entry] = &[
    (
        "MESH:D001943",
        "Breast Neoplasms",
        &["breast cancer", "breast carcinoma"],
    ),
    ("MESH:D006505", "Hepatitis", &["liver inflammation"]),
    ("MESH:D003920", "Diabetes Mellitus", &["diabetes"]),
    ("MESH:D001249", "Asthma", &["bronchial asthma"]),
    ("MESH:D014376", "Tuberculosis", &[]),
    ("MESH:D011014", "Pneumonia", &["lung inflammation"]),
    ("MESH:D008881", "Migraine Disorders", &["migraine"]),
    ("MESH:D011565", "Psoriasis", &[]),
    ("MESH:D004827", "Epilepsy", &["seizure disorder"]),
    ("MESH:D000740", "Anemia", &["anaemia"]),
    (
        "MESH:D003093",
        "Colitis, Ulcerative",
        &["ulcerative colitis"],
    ),
    ("MESH:D010300", "Parkinson Disease", &[]),
    ("MESH:D009393", "Nephritis", &[]),
    (
        "MESH:D001172",
        "Arthritis, Rheumatoid",
        &["rheumatoid arthritis"],
    ),
    ("MESH:D003872", "Dermatitis", &[]),
    ("MESH:D005218", "Fibrosis", &[]),
    ("MESH:D008103", "Liver Cirrhosis", &["cirrhosis"]),
    ("MESH:D013927", "Thrombosis", &[]),
    ("MESH:D007938", "Leukemia", &[]),
    ("MESH:D008223", "Lymphoma", &[]),
    ("MESH:D008545", "Melanoma", &[]),
    ("MESH:D009422", "Nervous System Diseases", &["neuropathy"]),
    ("MESH:D003424", "Crohn Disease", &[]),
    ("MESH:D008193", "Lyme Disease", &[]),
    ("MESH:D012859", "Sjogren's Syndrome", &["sjogren syndrome"]),
    (
        "MESH:D003072",
        "Cognition Disorders",
        &["cognitive impairment"],
    ),
];

const UNSEEN: &[Entry] = &[
    (
        "MESH:D010488",
        "Polyarteritis Nodosa",
        &["periarteritis nodosa"],
    ),
    ("MESH:D012507", "Sarcoidosis", &[]),
    ("MESH:D000686", "Amyloidosis", &[]),
    ("MESH:D009157", "Myasthenia Gravis", &[]),
    (
        "MESH:D009080",
        "Mucocutaneous Lymph Node Syndrome",
        &["kawasaki disease"],
    ),
    (
        "MESH:D012595",
        "Scleroderma, Systemic",
        &["systemic sclerosis"],
    ),
    (
        "MESH:D006432",
        "Hemochromatosis",
        &["iron overload disease"],
    ),
    ("MESH:D007922", "Leptospirosis", &[]),
    ("MESH:D010392", "Pemphigus", &[]),
    ("MESH:D009290", "Narcolepsy", &[]),
];

const DISTRACTORS: &[Entry] = &[
    ("MESH:D005334", "Fever", &["pyrexia"]),
    ("MESH:D006973", "Hypertension", &["high blood pressure"]),
    ("MESH:D009765", "Obesity", &[]),
    ("MESH:D003866", "Depressive Disorder", &["depression"]),
];

/// Seen-concept mentions in the training documents.
const TRAIN_MENTIONS: usize = 56;

/// Sentence frames with one `{}` disease slot.
const FRAMES: &[&str] = &[
    "Patients with {} were enrolled in the trial.",
    "We report a case of {} in a young woman.",
    "The incidence of {} increased in the cohort.",
    "Treatment of {} remains difficult.",
    "Risk factors for {} were assessed.",
    "A man presented with {} after a long delay.",
];

/// Training frames with two slots.
const PAIR_FRAMES: &[&str] = &[
    "Both {} and {} were observed in the cohort.",
    "The overlap between {} and {} was studied.",
    "Cases of {} or {} were excluded.",
    "We compared {} with {} in adults.",
];

const NULL_SENTENCES: &[&str] = &[
    "The study was approved by the ethics committee.",
    "Samples were collected at baseline.",
    "Statistical analysis was performed with standard software.",
    "All participants gave written consent.",
];

/// Generated vocabulary plus train and test documents.
#[derive(Debug, Clone)]
pub struct SyntheticSuite {
    pub train: Vec<PubtatorRecord>,
    pub test: Vec<PubtatorRecord>,
    /// Concept ids that occur in test but never in training.
    pub zero_shot_cuis: Vec<String>,
    medic: String,
}

fn surfaces(e: &Entry) -> Vec<String> {
    std::iter::once(e.1.to_lowercase())
        .chain(e.2.iter().map(|s| s.to_string()))
        .filter(|s| !s.contains(','))
        .collect()
}

/// Fills the slots of `frame` left to right, returning the sentence and
/// the byte offset of each filled surface.
fn sentence(frame: &str, surfaces: &[&str]) -> (String, Vec<usize>) {
    let mut out = String::new();
    let mut at = Vec::new();
    let mut rest = frame;
    for surface in surfaces {
        let i = rest.find("{}").expect("frame has a slot");
        out.push_str(&rest[..i]);
        at.push(out.len());
        out.push_str(surface);
        rest = &rest[i + 2..];
    }
    out.push_str(rest);
    (out, at)
}

struct DocBuilder {
    id: String,
    parts: Vec<String>,
    mentions: Vec<(usize, usize, String, String)>,
}

impl DocBuilder {
    fn new(id: String) -> Self {
        DocBuilder {
            id,
            parts: Vec::new(),
            mentions: Vec::new(),
        }
    }

    fn offset(&self) -> usize {
        // title, one space, abstract sentences joined by single spaces
        self.parts.iter().map(|p| p.len() + 1).sum()
    }

    fn mention_sentence(&mut self, frame: &str, mentions: &[(&str, &str)]) {
        let surfaces: Vec<&str> = mentions.iter().map(|m| m.0).collect();
        let (s, at) = sentence(frame, &surfaces);
        let base = self.offset();
        for ((surface, cui), a) in mentions.iter().zip(at) {
            let start = base + a;
            self.mentions.push((
                start,
                start + surface.len(),
                surface.to_string(),
                cui.to_string(),
            ));
        }
        self.parts.push(s);
    }

    fn null_sentence(&mut self, s: &str) {
        self.parts.push(s.to_string());
    }

    fn build(self) -> PubtatorRecord {
        let title = self.parts[0].clone();
        let abstract_text = self.parts[1..].join(" ");
        let mentions = self
            .mentions
            .into_iter()
            .map(|(s, e, surface, cui)| GoldMention {
                doc_id: self.id.clone(),
                char_start: s,
                char_end: e,
                surface,
                concept_ids: parse_concept_ids(&cui),
                mention_type: "Disease".into(),
                raw_ids: cui,
                extra: None,
            })
            .collect();
        PubtatorRecord {
            document: RawDocument {
                doc_id: self.id,
                title,
                abstract_text,
            },
            mentions,
        }
    }
}

impl SyntheticSuite {
    /// About 60 sentences: 20 training documents of two sentences covering
    /// the seen concepts, then 10 test documents of two sentences, each
    /// mentioning one unseen concept and one seen concept or none.
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut train = Vec::new();
        // every seen concept appears under every surface form at least once
        let mut seen_mentions: Vec<(String, &str)> = Vec::new();
        for e in SEEN {
            for s in surfaces(e) {
                seen_mentions.push((s, e.0));
            }
        }
        let mut i = 0;
        while seen_mentions.len() < TRAIN_MENTIONS {
            let e = &SEEN[i % SEEN.len()];
            seen_mentions.push((surfaces(e)[0].clone(), e.0));
            i += 1;
        }
        seen_mentions.shuffle(&mut rng);
        let mut it = seen_mentions.into_iter();
        let mut next = || it.next().expect("enough mentions");
        for d in 0..20 {
            let mut b = DocBuilder::new(format!("{}", 9_000_100 + d));
            let (s1, c1) = next();
            let (s2, c2) = next();
            b.mention_sentence(
                PAIR_FRAMES.choose(&mut rng).unwrap(),
                &[(&s1, c1), (&s2, c2)],
            );
            if d % 5 == 4 {
                b.null_sentence(NULL_SENTENCES.choose(&mut rng).unwrap());
            } else {
                let (s, c) = next();
                b.mention_sentence(FRAMES.choose(&mut rng).unwrap(), &[(&s, c)]);
            }
            train.push(b.build());
        }

        let mut test = Vec::new();
        for (i, e) in UNSEEN.iter().enumerate() {
            let mut b = DocBuilder::new(format!("{}", 9_000_500 + i));
            let forms = surfaces(e);
            let s = forms[i % forms.len()].clone();
            b.mention_sentence(FRAMES.choose(&mut rng).unwrap(), &[(&s, e.0)]);
            if i % 2 == 0 {
                let se = SEEN.choose(&mut rng).unwrap();
                b.mention_sentence(
                    FRAMES.choose(&mut rng).unwrap(),
                    &[(&surfaces(se)[0], se.0)],
                );
            } else {
                b.null_sentence(NULL_SENTENCES.choose(&mut rng).unwrap());
            }
            test.push(b.build());
        }

        let mut medic = String::from("# DiseaseName\tDiseaseID\tAltDiseaseIDs\tDefinition\tParentIDs\tTreeNumbers\tParentTreeNumbers\tSynonyms\n");
        for e in SEEN.iter().chain(UNSEEN).chain(DISTRACTORS) {
            let _ = writeln!(medic, "{}\t{}\t\t\t\t\t\t{}", e.1, e.0, e.2.join("|"));
        }
        SyntheticSuite {
            train,
            test,
            zero_shot_cuis: UNSEEN.iter().map(|e| e.0.to_string()).collect(),
            medic,
        }
    }

    pub fn medic_tsv(&self) -> &str {
        &self.medic
    }

    pub fn sentence_count(&self) -> usize {
        self.train
            .iter()
            .chain(&self.test)
            .map(|r| crate::corpus::split_sentences(&r.document).len())
            .sum()
    }

    /// A run configuration sized for this corpus: a small encoder with a
    /// wide window and a short, low learning-rate schedule, so that concept
    /// rows never seen in training stay near their initial values. Paths are
    /// left unset.
    pub fn run_config(lambda: f64) -> RunConfig {
        RunConfig {
            lambda,
            embedding_dim: 32,
            window: 3,
            hash_buckets: 1 << 12,
            width_dim: 8,
            hidden_dim: 64,
            batch_size: 8,
            epochs: 10,
            learning_rate: 1e-3,
            weight_decay: 0.1,
            word_dropout: 0.2,
            seed: 7,
            ..RunConfig::default()
        }
    }
}
