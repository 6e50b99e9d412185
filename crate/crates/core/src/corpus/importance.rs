use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{CorpusError, TfIdfTable};
use crate::lm::{TokenId, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosTag {
    Noun,
    Verb,
    Adjective,
    Adverb,
    Other,
}

/// Reads a tag name. Accepts universal names (`NOUN`, `ADJ`), Penn-style
/// prefixes (`NN`, `VBD`, `JJ`, `RB`) and single-letter codes (`n`, `v`,
/// `a`, `d`). Anything else is `Other`.
pub fn parse_tag(tag: &str) -> PosTag {
    let t = tag.trim().to_ascii_lowercase();
    match t.as_str() {
        "a" | "adj" | "adjective" => PosTag::Adjective,
        "d" | "adv" | "adverb" => PosTag::Adverb,
        "propn" => PosTag::Noun,
        _ if t.starts_with("jj") => PosTag::Adjective,
        _ if t.starts_with("rb") => PosTag::Adverb,
        _ if t.starts_with('n') => PosTag::Noun,
        _ if t.starts_with('v') => PosTag::Verb,
        _ => PosTag::Other,
    }
}

pub trait PosTagger: Send + Sync {
    fn tag(&self, sentence: &[TokenId]) -> Vec<PosTag>;
}

/// Tags everything `Other`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullTagger;

impl PosTagger for NullTagger {
    fn tag(&self, sentence: &[TokenId]) -> Vec<PosTag> {
        vec![PosTag::Other; sentence.len()]
    }
}

/// Word-to-tag lookup loaded from `token<TAB>tag` lines.
#[derive(Debug, Clone, Default)]
pub struct LexiconTagger {
    tags: HashMap<String, PosTag>,
    by_id: HashMap<TokenId, PosTag>,
}

impl LexiconTagger {
    /// Blank lines and lines starting with `#` are skipped. A token listed
    /// twice is an error.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut tags = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let err = |msg: &str| CorpusError::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (token, tag) = line
                .split_once('\t')
                .ok_or_else(|| err("expected token<TAB>tag"))?;
            if token.is_empty() {
                return Err(err("empty token"));
            }
            if tag.contains('\t') {
                return Err(err("more than two fields"));
            }
            if tags.insert(token.to_string(), parse_tag(tag)).is_some() {
                return Err(err(&format!("duplicate token {token:?}")));
            }
        }
        Ok(Self {
            tags,
            by_id: HashMap::new(),
        })
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, PosTag)>) -> Self {
        Self {
            tags: pairs.into_iter().map(|(t, p)| (t.into(), p)).collect(),
            by_id: HashMap::new(),
        }
    }

    /// Resolves the lexicon against `vocab` so sentences of ids can be
    /// tagged. Words missing from the vocabulary are ignored.
    pub fn bind(mut self, vocab: &Vocabulary) -> Self {
        self.by_id = self
            .tags
            .iter()
            .filter_map(|(w, &t)| vocab.id_of(w).map(|id| (id, t)))
            .collect();
        self
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn word_tag(&self, word: &str) -> PosTag {
        self.tags.get(word).copied().unwrap_or(PosTag::Other)
    }
}

impl PosTagger for LexiconTagger {
    fn tag(&self, sentence: &[TokenId]) -> Vec<PosTag> {
        sentence
            .iter()
            .map(|id| self.by_id.get(id).copied().unwrap_or(PosTag::Other))
            .collect()
    }
}

/// Flags the keyword positions of a sentence given the raw per-position
/// tf·idf values.
pub trait KeywordMarker: Send + Sync {
    fn mark(&self, sentence: &[TokenId], raw_tfidf: &[f64]) -> Vec<bool>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoKeywords;

impl KeywordMarker for NoKeywords {
    fn mark(&self, sentence: &[TokenId], _: &[f64]) -> Vec<bool> {
        vec![false; sentence.len()]
    }
}

/// Marks the `⌈n/4⌉` positions with the highest positive tf·idf, earlier
/// positions first on ties. A cheap stand-in for a real keyword extractor.
#[derive(Debug, Clone, Copy, Default)]
pub struct TopQuartileKeywords;

impl KeywordMarker for TopQuartileKeywords {
    fn mark(&self, sentence: &[TokenId], raw: &[f64]) -> Vec<bool> {
        let mut order: Vec<usize> = (0..sentence.len()).filter(|&i| raw[i] > 0.0).collect();
        order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]).then(a.cmp(&b)));
        let mut flags = vec![false; sentence.len()];
        for &i in order.iter().take(sentence.len().div_ceil(4)) {
            flags[i] = true;
        }
        flags
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PosWeights {
    pub noun_verb: f64,
    pub adj_adv: f64,
    pub keyword: f64,
}

impl Default for PosWeights {
    fn default() -> Self {
        Self {
            noun_verb: 200.0,
            adj_adv: 100.0,
            keyword: 300.0,
        }
    }
}

impl PosWeights {
    pub fn pos_score(&self, tag: PosTag) -> f64 {
        match tag {
            PosTag::Noun | PosTag::Verb => self.noun_verb,
            PosTag::Adjective | PosTag::Adverb => self.adj_adv,
            PosTag::Other => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenImportance {
    pub token: TokenId,
    pub tfidf_norm: f64,
    pub pos_score: f64,
    pub keyword: bool,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceProfile {
    pub scores: Vec<TokenImportance>,
}

impl ImportanceProfile {
    pub fn totals(&self) -> Vec<f64> {
        self.scores.iter().map(|s| s.total).collect()
    }
}

pub fn importance_scores(
    sentence: &[TokenId],
    table: &TfIdfTable,
    tagger: &dyn PosTagger,
    marker: &dyn KeywordMarker,
    weights: &PosWeights,
) -> Result<ImportanceProfile, CorpusError> {
    if sentence.is_empty() {
        return Err(CorpusError::EmptySentence);
    }
    let raw = table.raw_scores(sentence);
    let tags = tagger.tag(sentence);
    let flags = marker.mark(sentence, &raw);
    let scores = sentence
        .iter()
        .enumerate()
        .map(|(i, &token)| {
            let tfidf_norm = table.normalize(raw[i]);
            let pos_score = weights.pos_score(tags.get(i).copied().unwrap_or(PosTag::Other));
            let keyword = flags.get(i).copied().unwrap_or(false);
            TokenImportance {
                token,
                tfidf_norm,
                pos_score,
                keyword,
                total: tfidf_norm + pos_score + if keyword { weights.keyword } else { 0.0 },
            }
        })
        .collect();
    Ok(ImportanceProfile { scores })
}
