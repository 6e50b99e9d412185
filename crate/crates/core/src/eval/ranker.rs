use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::extract::StopwordFilter;
use crate::lm::TokenId;

/// Scores how well a candidate fits a context. Scores lie in `[0,1]`,
/// higher is better, and equal inputs give equal scores.
pub trait Ranker: Send + Sync {
    fn score(&self, context: &[TokenId], candidate: &[TokenId]) -> f64;
}

/// Adapts a closure into a ranker.
pub struct ScoreFn<F>(pub F);

impl<F> Ranker for ScoreFn<F>
where
    F: Fn(&[TokenId], &[TokenId]) -> f64 + Send + Sync,
{
    fn score(&self, context: &[TokenId], candidate: &[TokenId]) -> f64 {
        (self.0)(context, candidate)
    }
}

/// Jaccard overlap of content tokens, mixed with a saturating length
/// score: `(1-w)·J + w·min(1, len/ideal_len)`.
#[derive(Debug, Clone)]
pub struct LexicalRanker {
    pub filter: StopwordFilter,
    pub length_weight: f64,
    pub ideal_len: usize,
}

impl Default for LexicalRanker {
    fn default() -> Self {
        Self {
            filter: StopwordFilter::none(),
            length_weight: 0.2,
            ideal_len: 8,
        }
    }
}

impl LexicalRanker {
    pub fn with_filter(filter: StopwordFilter) -> Self {
        Self {
            filter,
            ..Self::default()
        }
    }

    pub fn jaccard(&self, a: &[TokenId], b: &[TokenId]) -> f64 {
        let sa: HashSet<TokenId> = a
            .iter()
            .copied()
            .filter(|&t| self.filter.allows(t))
            .collect();
        let sb: HashSet<TokenId> = b
            .iter()
            .copied()
            .filter(|&t| self.filter.allows(t))
            .collect();
        let union = sa.union(&sb).count();
        if union == 0 {
            return 0.0;
        }
        sa.intersection(&sb).count() as f64 / union as f64
    }
}

impl Ranker for LexicalRanker {
    fn score(&self, context: &[TokenId], candidate: &[TokenId]) -> f64 {
        let w = self.length_weight.clamp(0.0, 1.0);
        let len = if self.ideal_len == 0 {
            1.0
        } else {
            (candidate.len() as f64 / self.ideal_len as f64).min(1.0)
        };
        (1.0 - w) * self.jaccard(context, candidate) + w * len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    /// Position in the input candidate list.
    pub index: usize,
    pub score: f64,
}

/// Candidates by descending score; equal scores keep input order. NaN
/// scores rank last.
pub fn rank_candidates<R: Ranker + ?Sized>(
    ranker: &R,
    context: &[TokenId],
    candidates: &[Vec<TokenId>],
) -> Result<Vec<Ranked>, EvalError> {
    if candidates.is_empty() {
        return Err(EvalError::NoCandidates);
    }
    let mut ranked: Vec<Ranked> = candidates
        .iter()
        .enumerate()
        .map(|(index, c)| Ranked {
            index,
            score: ranker.score(context, c),
        })
        .collect();
    let key = |s: f64| if s.is_nan() { f64::NEG_INFINITY } else { s };
    ranked.sort_by(|a, b| key(b.score).total_cmp(&key(a.score)));
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionItem {
    pub context: Vec<TokenId>,
    pub positive: Vec<TokenId>,
    pub negatives: Vec<Vec<TokenId>>,
}

/// Share of items whose top-ranked candidate is the positive. The positive
/// is ranked after the negatives, so a tie counts against it.
pub fn precision_at_1_of_10<R: Ranker + ?Sized>(
    ranker: &R,
    items: &[PrecisionItem],
) -> Result<f64, EvalError> {
    if items.is_empty() {
        return Err(EvalError::EmptyEvalSet);
    }
    let mut hits = 0usize;
    for (i, item) in items.iter().enumerate() {
        if item.negatives.len() != 9 {
            return Err(EvalError::WrongCandidateCount {
                item: i,
                got: item.negatives.len(),
            });
        }
        let mut candidates = item.negatives.clone();
        candidates.push(item.positive.clone());
        let ranked = rank_candidates(ranker, &item.context, &candidates)?;
        if ranked[0].index == 9 {
            hits += 1;
        }
    }
    Ok(hits as f64 / items.len() as f64)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::lm::Vocabulary;

    fn ids(v: &[u32]) -> Vec<TokenId> {
        v.iter().map(|&i| TokenId(i)).collect()
    }

    #[test]
    fn single_candidate() {
        let r = rank_candidates(&LexicalRanker::default(), &[], &[ids(&[1])]).unwrap();
        assert_eq!(r[0].index, 0);
        assert!(rank_candidates(&LexicalRanker::default(), &[], &[]).is_err());
    }

    #[test]
    fn fixed_scores_decide_order() {
        let oracle =
            ScoreFn(|_: &[TokenId], c: &[TokenId]| if c[0] == TokenId(1) { 0.9 } else { 0.1 });
        let r = rank_candidates(&oracle, &[], &[ids(&[0]), ids(&[1])]).unwrap();
        assert_eq!((r[0].index, r[1].index), (1, 0));
    }

    #[test]
    fn overlap_wins() {
        let v = Vocabulary::from_tokens(["swim", "sea", "we", "in", "the", "city", "is", "busy"])
            .unwrap();
        let enc = |s: &str| v.encode(&s.split(' ').collect::<Vec<_>>()).unwrap();
        let ranker = LexicalRanker::default();
        let ctx = enc("swim sea");
        let good = enc("we swim in the sea");
        let bad = enc("the city is busy we");
        // J(good) = |{swim,sea}| / |{swim,sea,we,in,the}| = 2/5, J(bad) = 0
        assert!((ranker.jaccard(&ctx, &good) - 0.4).abs() < 1e-15);
        assert_eq!(ranker.jaccard(&ctx, &bad), 0.0);
        let r = rank_candidates(&ranker, &ctx, &[bad, good]).unwrap();
        assert_eq!(r[0].index, 1);
        assert!((r[0].score - (0.8 * 0.4 + 0.2 * 5.0 / 8.0)).abs() < 1e-12);
    }

    fn item(pos: u32) -> PrecisionItem {
        PrecisionItem {
            context: vec![],
            positive: ids(&[pos]),
            negatives: (0..9).map(|i| ids(&[i])).collect(),
        }
    }

    #[test]
    fn precision_extremes() {
        let oracle =
            ScoreFn(|_: &[TokenId], c: &[TokenId]| if c[0] == TokenId(99) { 1.0 } else { 0.0 });
        let inverted =
            ScoreFn(|_: &[TokenId], c: &[TokenId]| if c[0] == TokenId(99) { 0.0 } else { 1.0 });
        let flat = ScoreFn(|_: &[TokenId], _: &[TokenId]| 0.5);
        let items = vec![item(99), item(99)];
        assert_eq!(precision_at_1_of_10(&oracle, &items).unwrap(), 1.0);
        assert_eq!(precision_at_1_of_10(&inverted, &items).unwrap(), 0.0);
        assert_eq!(precision_at_1_of_10(&flat, &items).unwrap(), 0.0);
        let mut short = item(99);
        short.negatives.pop();
        assert!(matches!(
            precision_at_1_of_10(&oracle, &[short]),
            Err(EvalError::WrongCandidateCount { item: 0, got: 8 })
        ));
        assert!(precision_at_1_of_10(&oracle, &[]).is_err());
    }

    proptest! {
        #[test]
        fn stable_descending(scores in prop::collection::vec(0u8..4, 1..30)) {
            let cands: Vec<Vec<TokenId>> = scores.iter().map(|&s| ids(&[s as u32])).collect();
            let ranker = ScoreFn(|_: &[TokenId], c: &[TokenId]| c[0].0 as f64 / 4.0);
            let r = rank_candidates(&ranker, &[], &cands).unwrap();
            for w in r.windows(2) {
                prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].index < w[1].index));
            }
        }

        #[test]
        fn lexical_score_in_unit_range(a in prop::collection::vec(0u32..20, 0..15), b in prop::collection::vec(0u32..20, 0..15)) {
            let s = LexicalRanker::default().score(&ids(&a), &ids(&b));
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
