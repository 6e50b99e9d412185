use serde::{Deserialize, Serialize};

use super::{
    build_tfidf, importance_scores, CorpusError, ImportanceProfile, KeywordMarker, PosTagger,
    PosWeights,
};
use crate::insertion::is_subsequence;
use crate::lm::{TokenId, Vocabulary};

/// One training example: `coarse` is `fine` with some tokens removed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePair {
    pub coarse: Vec<TokenId>,
    pub fine: Vec<TokenId>,
}

/// Splits a sentence into nested levels by repeatedly dropping the
/// `⌊n/2⌋` least important tokens of the current level (later positions
/// go first on ties). Returns at most `stages` pairs, finest first; stops
/// early once a level can no longer shrink.
pub fn stage_decompose(
    sentence: &[TokenId],
    profile: &ImportanceProfile,
    stages: usize,
) -> Result<Vec<StagePair>, CorpusError> {
    if stages == 0 {
        return Err(CorpusError::InvalidStages);
    }
    if sentence.is_empty() {
        return Err(CorpusError::EmptySentence);
    }
    if profile.scores.len() != sentence.len() {
        return Err(CorpusError::ProfileMismatch {
            profile: profile.scores.len(),
            sentence: sentence.len(),
        });
    }
    let totals = profile.totals();
    let mut level: Vec<usize> = (0..sentence.len()).collect();
    let mut pairs = Vec::new();
    for _ in 0..stages {
        let drop = level.len() / 2;
        if drop == 0 {
            break;
        }
        let mut order = level.clone();
        order.sort_by(|&a, &b| totals[a].total_cmp(&totals[b]).then(b.cmp(&a)));
        let removed: std::collections::HashSet<usize> = order.into_iter().take(drop).collect();
        let coarse: Vec<usize> = level
            .iter()
            .copied()
            .filter(|i| !removed.contains(i))
            .collect();
        let pick = |idx: &[usize]| idx.iter().map(|&i| sentence[i]).collect::<Vec<_>>();
        pairs.push(StagePair {
            coarse: pick(&coarse),
            fine: pick(&level),
        });
        level = coarse;
    }
    Ok(pairs)
}

/// Decomposes every non-empty sentence of `corpus` with one shared tf·idf
/// table. Pairs come out sentence by sentence, finest first within each.
pub fn decompose_corpus(
    corpus: &[Vec<TokenId>],
    tagger: &dyn PosTagger,
    marker: &dyn KeywordMarker,
    weights: &PosWeights,
    stages: usize,
) -> Result<Vec<StagePair>, CorpusError> {
    let table = build_tfidf(corpus)?;
    let mut pairs = Vec::new();
    for sentence in corpus.iter().filter(|s| !s.is_empty()) {
        let profile = importance_scores(sentence, &table, tagger, marker, weights)?;
        pairs.extend(stage_decompose(sentence, &profile, stages)?);
    }
    Ok(pairs)
}

/// On-disk form of a stage pair, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StagePairRecord {
    pub coarse: Vec<String>,
    pub fine: Vec<String>,
}

impl StagePairRecord {
    pub fn encode(&self, vocab: &mut Vocabulary) -> StagePair {
        StagePair {
            coarse: self
                .coarse
                .iter()
                .map(|t| vocab.insert(t.as_str()))
                .collect(),
            fine: self.fine.iter().map(|t| vocab.insert(t.as_str())).collect(),
        }
    }
}

pub fn stage_pairs_to_jsonl(pairs: &[StagePair], vocab: &Vocabulary) -> String {
    let word = |id: &TokenId| vocab.lookup(*id).unwrap_or("<unk>").to_string();
    let mut out = String::new();
    for p in pairs {
        let rec = StagePairRecord {
            coarse: p.coarse.iter().map(word).collect(),
            fine: p.fine.iter().map(word).collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("string vectors serialize"));
        out.push('\n');
    }
    out
}

/// Parses stage-pair JSONL. Blank lines are skipped. Each record must have
/// a non-empty fine side that strictly contains the coarse side as a
/// subsequence.
pub fn parse_stage_pairs(text: &str) -> Result<Vec<StagePairRecord>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| CorpusError::Parse { line: i + 1, msg };
        let rec: StagePairRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if rec.fine.is_empty() {
            return Err(err("fine side is empty".into()));
        }
        if rec.coarse.len() >= rec.fine.len() || !is_subsequence(&rec.coarse, &rec.fine) {
            return Err(err(
                "coarse side is not a strict subsequence of the fine side".into(),
            ));
        }
        out.push(rec);
    }
    Ok(out)
}
