use std::collections::HashMap;

use super::CorpusError;
use crate::lm::TokenId;

pub const NORM_MIN: f64 = 1.0;
pub const NORM_MAX: f64 = 1000.0;

/// Document frequencies of a sentence corpus plus the range of raw
/// per-sentence tf·idf values used for min-max normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfTable {
    pub idf: HashMap<TokenId, f64>,
    pub doc_count: usize,
    pub raw_min: f64,
    pub raw_max: f64,
}

impl TfIdfTable {
    /// `ln(N/df)`; unseen tokens get `ln N`, the largest value any token
    /// can reach.
    pub fn idf_of(&self, id: TokenId) -> f64 {
        self.idf
            .get(&id)
            .copied()
            .unwrap_or_else(|| (self.doc_count as f64).ln())
    }

    /// Raw `tf·idf` of every position, with `tf = count / sentence length`.
    pub fn raw_scores(&self, sentence: &[TokenId]) -> Vec<f64> {
        let counts = term_counts(sentence);
        let len = sentence.len() as f64;
        sentence
            .iter()
            .map(|id| counts[id] as f64 / len * self.idf_of(*id))
            .collect()
    }

    /// Maps a raw score into `[1, 1000]`. Values outside the corpus range
    /// are clamped; a degenerate range maps everything to 1.
    pub fn normalize(&self, raw: f64) -> f64 {
        let span = self.raw_max - self.raw_min;
        // NaN spans land here too.
        if span.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return NORM_MIN;
        }
        let t = ((raw - self.raw_min) / span).clamp(0.0, 1.0);
        NORM_MIN + (NORM_MAX - NORM_MIN) * t
    }

    pub fn normalized_scores(&self, sentence: &[TokenId]) -> Vec<f64> {
        self.raw_scores(sentence)
            .into_iter()
            .map(|r| self.normalize(r))
            .collect()
    }
}

fn term_counts(sentence: &[TokenId]) -> HashMap<TokenId, usize> {
    let mut counts = HashMap::new();
    for &id in sentence {
        *counts.entry(id).or_insert(0) += 1;
    }
    counts
}

/// Each sentence is one document. Empty sentences count as documents but
/// contribute no scores.
pub fn build_tfidf(corpus: &[Vec<TokenId>]) -> Result<TfIdfTable, CorpusError> {
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(CorpusError::EmptyCorpus);
    }
    let n = corpus.len() as f64;
    let mut df: HashMap<TokenId, usize> = HashMap::new();
    for sentence in corpus {
        for id in term_counts(sentence).into_keys() {
            *df.entry(id).or_insert(0) += 1;
        }
    }
    let idf = df
        .into_iter()
        .map(|(id, d)| (id, (n / d as f64).ln()))
        .collect();
    let mut table = TfIdfTable {
        idf,
        doc_count: corpus.len(),
        raw_min: f64::INFINITY,
        raw_max: f64::NEG_INFINITY,
    };
    for sentence in corpus.iter().filter(|s| !s.is_empty()) {
        for r in table.raw_scores(sentence) {
            table.raw_min = table.raw_min.min(r);
            table.raw_max = table.raw_max.max(r);
        }
    }
    Ok(table)
}
