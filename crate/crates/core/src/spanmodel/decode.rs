use std::cmp::Ordering;

use super::{LabelScores, SpanCandidate};

/// Winning label of one span together with the scores behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub span: SpanCandidate,
    pub label: usize,
    pub score: f64,
    pub context: f64,
    pub dict: f64,
}

/// A kept span mapped back to character offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub char_start: usize,
    pub char_end: usize,
    pub classification: Classification,
}

/// Argmax over combined scores. Ties go to Null first, then to the lowest
/// concept index, so a span is only tagged when some concept strictly beats
/// Null.
pub fn classify_scores(span: SpanCandidate, scores: &LabelScores, null: usize) -> Classification {
    let mut best = null;
    for (c, &s) in scores.combined.iter().enumerate() {
        if c != null && s > scores.combined[best] {
            best = c;
        }
    }
    Classification {
        span,
        label: best,
        score: scores.combined[best],
        context: scores.context[best],
        dict: scores.dict_of(best),
    }
}

/// Greedy overlap resolution: visit candidates by descending score (ties by
/// start, then end) and keep those that do not overlap an already kept span.
/// The result is sorted by position.
pub fn select_non_overlapping(mut candidates: Vec<Classification>) -> Vec<Classification> {
    candidates.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then(a.span.cmp(&b.span))
    });
    let mut kept: Vec<Classification> = Vec::new();
    for c in candidates {
        if kept.iter().all(|k| !k.span.overlaps(&c.span)) {
            kept.push(c);
        }
    }
    kept.sort_by_key(|c| c.span);
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cls(start: usize, end: usize, score: f64) -> Classification {
        Classification {
            span: SpanCandidate { start, end },
            label: 0,
            score,
            context: score,
            dict: 0.0,
        }
    }

    #[test]
    fn greedy_keeps_best_and_disjoint() {
        let kept = select_non_overlapping(vec![
            cls(0, 2, 1.0),
            cls(1, 3, 2.0),
            cls(3, 4, 0.5),
            cls(0, 1, 0.9),
        ]);
        let spans: Vec<_> = kept.iter().map(|c| (c.span.start, c.span.end)).collect();
        assert_eq!(spans, [(0, 1), (1, 3), (3, 4)]);
    }

    #[test]
    fn ties_prefer_earlier_span() {
        let kept = select_non_overlapping(vec![cls(1, 3, 1.0), cls(0, 2, 1.0)]);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].span, SpanCandidate { start: 0, end: 2 });
    }

    #[test]
    fn null_wins_ties() {
        let scores = LabelScores {
            context: vec![0.5, 0.2, 0.5],
            combined: vec![0.5, 0.2, 0.5],
            dict: vec![],
        };
        assert_eq!(
            classify_scores(SpanCandidate { start: 0, end: 1 }, &scores, 2).label,
            2
        );
        let scores = LabelScores {
            context: vec![0.5, 0.6, 0.6],
            combined: vec![0.5, 0.7, 0.7],
            dict: vec![(1, 0.111)],
        };
        let c = classify_scores(SpanCandidate { start: 0, end: 1 }, &scores, 0);
        assert_eq!((c.label, c.dict), (1, 0.111));
    }
}
