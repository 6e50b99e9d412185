use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::LmError;

/// Dense index of a token in a [`Vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Ordered token list with a reverse index. Ids are `0..len`, dense and unique.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary from a token list. Duplicates are rejected.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, LmError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::new();
        for t in tokens {
            let t = t.into();
            if vocab.index.contains_key(&t) {
                return Err(LmError::DuplicateToken(t));
            }
            vocab.insert(t);
        }
        Ok(vocab)
    }

    /// Returns the id of `token`, adding it if it is new.
    pub fn insert(&mut self, token: impl Into<String>) -> TokenId {
        let token = token.into();
        if let Some(&id) = self.index.get(&token) {
            return id;
        }
        let id = TokenId(self.tokens.len() as u32);
        self.index.insert(token.clone(), id);
        self.tokens.push(token);
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id_of(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn lookup(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id.index()).map(String::as_str)
    }

    pub fn contains(&self, id: TokenId) -> bool {
        id.index() < self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        (0..self.tokens.len() as u32).map(TokenId)
    }

    /// Maps token strings to ids, failing on the first unknown token.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<TokenId>, LmError> {
        tokens
            .iter()
            .map(|t| {
                self.id_of(t.as_ref())
                    .ok_or_else(|| LmError::UnknownToken(t.as_ref().to_string()))
            })
            .collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Result<Vec<String>, LmError> {
        ids.iter()
            .map(|&id| {
                self.lookup(id)
                    .map(str::to_string)
                    .ok_or(LmError::UnknownTokenId(id))
            })
            .collect()
    }

    /// Fails if any id is outside the vocabulary.
    pub fn check_ids(&self, ids: &[TokenId]) -> Result<(), LmError> {
        match ids.iter().find(|id| !self.contains(**id)) {
            Some(&bad) => Err(LmError::UnknownTokenId(bad)),
            None => Ok(()),
        }
    }
}

/// Splits a line on Unicode whitespace.
pub fn whitespace_tokens(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_string).collect()
}

/// Pluggable tokenizer for corpus ingestion.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<String>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        whitespace_tokens(text)
    }
}
