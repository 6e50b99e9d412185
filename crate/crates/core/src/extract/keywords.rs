use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::Support;
use crate::lm::{SparseDist, TokenId, Vocabulary};

/// Extracted keywords with their averaged marginal probability, in
/// descending probability order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KeywordSet {
    pub keywords: Vec<(TokenId, f64)>,
}

impl KeywordSet {
    pub fn len(&self) -> usize {
        self.keywords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.keywords.iter().map(|&(id, _)| id)
    }

    pub fn contains(&self, id: TokenId) -> bool {
        self.keywords.iter().any(|&(t, _)| t == id)
    }
}

/// Top-`k` tokens of `marginal` that also belong to `support`. Ties go to
/// the lower token id. Returns fewer than `k` when the support is small.
pub fn select_keywords(marginal: &SparseDist, support: &Support, k: usize) -> KeywordSet {
    let members: HashSet<TokenId> = support.tokens.iter().copied().collect();
    let keywords = marginal
        .ranked()
        .into_iter()
        .filter(|(id, _)| members.contains(id))
        .take(k)
        .collect();
    KeywordSet { keywords }
}

pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "if", "of", "to", "in", "on", "at", "by", "for", "with",
    "from", "as", "is", "am", "are", "was", "were", "be", "been", "it", "it's", "its", "this",
    "that", "these", "those", "i", "i'm", "you", "he", "she", "we", "they", "me", "my", "your",
    "our", "their", "so", "do", "does", "did", "not", "no", "will", "can", "just", "too", "very",
    "的", "了", "是", "在", "我", "你", "他", "她", "也", "就", "都", "和", "吗", "呢", "吧", "啊",
];

/// Token filter applied to the marginal before keyword selection.
#[derive(Debug, Clone, Default)]
pub struct StopwordFilter {
    blocked: HashSet<TokenId>,
}

impl StopwordFilter {
    /// Blocks every listed word present in `vocab`, plus (optionally) every
    /// token made only of punctuation or symbols.
    pub fn new<S: AsRef<str>>(vocab: &Vocabulary, words: &[S], punctuation: bool) -> Self {
        let mut blocked: HashSet<TokenId> = words
            .iter()
            .filter_map(|w| vocab.id_of(w.as_ref()))
            .collect();
        if punctuation {
            blocked.extend(
                vocab
                    .ids()
                    .filter(|&id| vocab.lookup(id).is_some_and(is_punctuation)),
            );
        }
        Self { blocked }
    }

    pub fn with_defaults(vocab: &Vocabulary) -> Self {
        Self::new(vocab, DEFAULT_STOPWORDS, true)
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn allows(&self, id: TokenId) -> bool {
        !self.blocked.contains(&id)
    }

    pub fn apply(&self, dist: &SparseDist) -> SparseDist {
        dist.filtered(|id| self.allows(id))
    }
}

/// True for tokens with no alphanumeric character.
pub fn is_punctuation(token: &str) -> bool {
    !token.is_empty() && !token.chars().any(char::is_alphanumeric)
}

/// Pulls ground-truth keywords out of a reference response.
pub trait KeywordExtractor: Send + Sync {
    fn extract(&self, reference: &[TokenId]) -> Vec<TokenId>;
}

/// Unique content tokens of the reference, in order of first appearance.
#[derive(Debug, Clone, Default)]
pub struct ContentWordExtractor {
    pub filter: StopwordFilter,
}

impl KeywordExtractor for ContentWordExtractor {
    fn extract(&self, reference: &[TokenId]) -> Vec<TokenId> {
        let mut seen = HashSet::new();
        reference
            .iter()
            .copied()
            .filter(|&id| self.filter.allows(id) && seen.insert(id))
            .collect()
    }
}
