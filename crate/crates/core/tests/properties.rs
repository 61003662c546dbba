//! Property tests for invariants that hold on arbitrary inputs.

use std::collections::BTreeSet;

use proptest::prelude::*;

use spanlink::config::RunConfig;
use spanlink::corpus::{parse_concept_ids, tokenize, GoldMention};
use spanlink::encoder::{BaselineConfig, BaselineEncoder};
use spanlink::eval::{nen_f1, ner_f1, zero_shot_split, PredictedMention};
use spanlink::lexicon::parse_medic;
use spanlink::matcher::{NgramConfig, SynonymIndex};
use spanlink::spanmodel::{
    combined_score, enumerate_spans, select_non_overlapping, Classification, SpanCandidate,
};

fn phrase() -> impl Strategy<Value = String> {
    prop::collection::vec("[a-f]{1,6}", 1..=3).prop_map(|w| w.join(" "))
}

fn inventory() -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(prop::collection::vec(phrase(), 1..=3), 1..=12)
}

fn index_of(concepts: &[Vec<String>]) -> SynonymIndex {
    let mut tsv = String::new();
    for (i, syns) in concepts.iter().enumerate() {
        tsv.push_str(&format!(
            "{}\tMESH:C{i:06}\t\t\t\t\t\t{}\n",
            syns[0],
            syns[1..].join("|")
        ));
    }
    SynonymIndex::from_inventory(&parse_medic(&tsv, "prop").unwrap(), NgramConfig::default())
        .unwrap()
}

fn gold_strategy() -> impl Strategy<Value = Vec<GoldMention>> {
    prop::collection::vec(
        (
            0..3usize,
            0..20usize,
            1..5usize,
            prop::sample::select(vec!["D1", "D2", "D3", "D1|D2", "-1"]),
        ),
        0..12,
    )
    .prop_map(|v| {
        v.into_iter()
            .map(|(d, s, w, ids)| GoldMention {
                doc_id: d.to_string(),
                char_start: s,
                char_end: s + w,
                surface: "x".repeat(w),
                concept_ids: parse_concept_ids(ids),
                mention_type: "Disease".into(),
                raw_ids: ids.into(),
                extra: None,
            })
            .collect()
    })
}

fn pred_strategy() -> impl Strategy<Value = Vec<PredictedMention>> {
    prop::collection::vec(
        (
            0..3usize,
            0..20usize,
            1..5usize,
            prop::sample::select(vec!["MESH:D1", "MESH:D2", "MESH:D4"]),
        ),
        0..12,
    )
    .prop_map(|v| {
        v.into_iter()
            .map(|(d, s, w, id)| PredictedMention {
                doc_id: d.to_string(),
                char_start: s,
                char_end: s + w,
                concept_id: id.into(),
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn top_k_is_sorted_positive_and_agrees_with_dict_score(concepts in inventory(), query in phrase(), k in 1usize..20) {
        let index = index_of(&concepts);
        let top = index.top_k(&query, k);
        prop_assert!(top.len() <= k);
        for w in top.windows(2) {
            prop_assert!(w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0));
        }
        for &(c, s) in &top {
            prop_assert!(s > 0.0 && s <= 1.0 + 1e-12);
            prop_assert!((index.dict_score(&query, c) - s).abs() < 1e-12);
        }
        // anything left out scores no better than the last kept concept
        if let Some(&(_, last)) = top.last() {
            let kept: BTreeSet<usize> = top.iter().map(|t| t.0).collect();
            for c in (0..index.concept_count()).filter(|c| !kept.contains(c)) {
                prop_assert!(index.dict_score(&query, c) <= last + 1e-12);
            }
        }
    }

    #[test]
    fn span_count_formula(t in 0usize..80, w in 1usize..15) {
        let n = enumerate_spans(t, w).len();
        let want = if t < w { t * (t + 1) / 2 } else { t * w - w * (w - 1) / 2 };
        prop_assert_eq!(n, want);
    }

    #[test]
    fn metrics_are_permutation_invariant(mut p in pred_strategy(), mut g in gold_strategy(), seed in any::<u64>()) {
        let (ner, nen) = (ner_f1(&p, &g), nen_f1(&p, &g));
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(&mut p[..], &mut rng);
        rand::seq::SliceRandom::shuffle(&mut g[..], &mut rng);
        prop_assert_eq!(ner_f1(&p, &g), ner);
        prop_assert_eq!(nen_f1(&p, &g), nen);
        for m in [ner, nen] {
            prop_assert!((0.0..=1.0).contains(&m.f1));
        }
    }

    #[test]
    fn predicting_gold_scores_one(g in gold_strategy()) {
        prop_assume!(!g.is_empty());
        let spans: Vec<PredictedMention> = g
            .iter()
            .map(|m| PredictedMention {
                doc_id: m.doc_id.clone(),
                char_start: m.char_start,
                char_end: m.char_end,
                concept_id: String::new(),
            })
            .collect();
        prop_assert_eq!(ner_f1(&spans, &g).f1, 1.0);
        let concepts: BTreeSet<(String, String)> =
            g.iter().flat_map(|m| m.concept_ids.iter().map(move |c| (m.doc_id.clone(), c.clone()))).collect();
        prop_assume!(!concepts.is_empty());
        let preds: Vec<PredictedMention> = concepts
            .into_iter()
            .map(|(doc_id, concept_id)| PredictedMention { doc_id, char_start: 0, char_end: 1, concept_id })
            .collect();
        prop_assert_eq!(nen_f1(&preds, &g).f1, 1.0);
    }

    #[test]
    fn zero_shot_split_partitions_normalized_mentions(g in gold_strategy(), train in prop::collection::btree_set(prop::sample::select(vec!["MESH:D1".to_string(), "MESH:D3".to_string()]), 0..3)) {
        let split = zero_shot_split(&g, &train);
        let a: BTreeSet<usize> = split.standard.iter().copied().collect();
        let b: BTreeSet<usize> = split.zero_shot.iter().copied().collect();
        prop_assert!(a.is_disjoint(&b));
        let normalized: BTreeSet<usize> = (0..g.len()).filter(|&i| !g[i].concept_ids.is_empty()).collect();
        prop_assert_eq!(a.union(&b).copied().collect::<BTreeSet<_>>(), normalized);
        for i in a {
            prop_assert!(g[i].concept_ids.iter().any(|c| train.contains(c)));
        }
        for i in b {
            prop_assert!(g[i].concept_ids.iter().all(|c| !train.contains(c)));
        }
    }

    #[test]
    fn greedy_selection_is_non_overlapping(cands in prop::collection::vec((0usize..15, 1usize..5, -5.0f64..5.0), 0..30)) {
        let input: Vec<Classification> = cands
            .iter()
            .map(|&(s, w, score)| Classification { span: SpanCandidate { start: s, end: s + w }, label: 0, score, context: score, dict: 0.0 })
            .collect();
        let kept = select_non_overlapping(input.clone());
        for (i, a) in kept.iter().enumerate() {
            prop_assert!(input.contains(a));
            for b in &kept[i + 1..] {
                prop_assert!(!a.span.overlaps(&b.span));
                prop_assert!(a.span < b.span);
            }
        }
        // the best-scoring candidate always survives
        if let Some(best) = input.iter().map(|c| c.score).reduce(f64::max) {
            prop_assert!(kept.iter().any(|c| c.score == best));
        }
    }

    #[test]
    fn zero_lambda_is_context_only(ctx in -1e3f64..1e3, dict in 0.0f64..1.0) {
        prop_assert_eq!(combined_score(ctx, 0.0, dict).to_bits(), ctx.to_bits());
    }

    #[test]
    fn encoder_rows_depend_only_on_the_window(words in prop::collection::vec("[a-z]{1,5}", 2..10), window in 0usize..3, pick in any::<prop::sample::Index>(), replacement in "[a-z]{1,5}") {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(9);
        let enc = BaselineEncoder::new(BaselineConfig { dim: 4, window, buckets: 97 }, &mut rng);
        let a = tokenize(&words.join(" "), 0);
        let j = pick.index(words.len());
        let mut changed = words.clone();
        changed[j] = replacement;
        let b = tokenize(&changed.join(" "), 0);
        let (ha, hb) = (enc.encode(&a).unwrap(), enc.encode(&b).unwrap());
        for t in 0..words.len() {
            if t.abs_diff(j) > window {
                prop_assert_eq!(ha.row(t), hb.row(t));
            }
        }
    }

    #[test]
    fn config_text_round_trips(lambda in 0.0f64..2.0, lr in 1e-6f64..1.0, seed in any::<u64>(), width in 1usize..20) {
        let c = RunConfig { lambda, learning_rate: lr, seed, max_span_width: width, ..RunConfig::default() };
        let back = RunConfig::from_text(&c.to_text()).unwrap();
        prop_assert_eq!(back.hash(), c.hash());
        prop_assert_eq!(back, c);
    }
}
