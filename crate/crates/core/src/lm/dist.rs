use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{LmError, TokenId};

/// Slack allowed on the total mass of a distribution.
pub const MASS_SLACK: f64 = 1e-9;

/// Log-probability used in place of `ln(0)`.
pub const LOG_ZERO: f64 = -1e30;

/// `ln(p)`, with zero (or negative) probabilities mapped to [`LOG_ZERO`].
pub fn safe_ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln().max(LOG_ZERO)
    } else {
        LOG_ZERO
    }
}

/// Sparse probability vector over a vocabulary.
///
/// Entries are sorted by token id, have no duplicates, and every stored
/// probability is in `(0, 1]`. Zero-probability tokens are omitted. The
/// total may fall short of 1 when a backend only reports part of its mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseDist {
    entries: Vec<(TokenId, f64)>,
    vocab_size: usize,
}

impl SparseDist {
    /// Builds a distribution from arbitrary-order entries. Zeros are dropped.
    pub fn new(mut entries: Vec<(TokenId, f64)>, vocab_size: usize) -> Result<Self, LmError> {
        entries.retain(|&(_, p)| p != 0.0);
        entries.sort_by_key(|&(id, _)| id);
        let mut total = 0.0;
        for (i, &(id, p)) in entries.iter().enumerate() {
            if !(p > 0.0 && p <= 1.0) {
                return Err(LmError::InvalidDistribution(format!(
                    "probability {p} for {id} outside (0,1]"
                )));
            }
            if id.index() >= vocab_size {
                return Err(LmError::UnknownTokenId(id));
            }
            if i > 0 && entries[i - 1].0 == id {
                return Err(LmError::InvalidDistribution(format!(
                    "duplicate token {id}"
                )));
            }
            total += p;
        }
        if total > 1.0 + MASS_SLACK {
            return Err(LmError::InvalidDistribution(format!(
                "total mass {total} exceeds 1"
            )));
        }
        Ok(Self {
            entries,
            vocab_size,
        })
    }

    /// Builds from a dense vector indexed by token id.
    pub fn from_dense(probs: &[f64]) -> Result<Self, LmError> {
        let entries = probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (TokenId(i as u32), p))
            .collect();
        Self::new(entries, probs.len())
    }

    pub fn one_hot(id: TokenId, vocab_size: usize) -> Self {
        Self {
            entries: vec![(id, 1.0)],
            vocab_size,
        }
    }

    pub fn empty(vocab_size: usize) -> Self {
        Self {
            entries: Vec::new(),
            vocab_size,
        }
    }

    pub fn entries(&self) -> &[(TokenId, f64)] {
        &self.entries
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn prob(&self, id: TokenId) -> f64 {
        self.entries
            .binary_search_by_key(&id, |&(t, _)| t)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|&(_, p)| p).sum()
    }

    /// Entries ordered by descending probability, ties by ascending id.
    pub fn ranked(&self) -> Vec<(TokenId, f64)> {
        let mut v = self.entries.clone();
        v.sort_by(rank_order);
        v
    }

    pub fn argmax(&self) -> Option<(TokenId, f64)> {
        self.entries.iter().copied().min_by(rank_order)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.vocab_size];
        for &(id, p) in &self.entries {
            dense[id.index()] = p;
        }
        dense
    }

    /// Keeps only the entries whose id satisfies `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(TokenId) -> bool) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .copied()
                .filter(|&(id, _)| keep(id))
                .collect(),
            vocab_size: self.vocab_size,
        }
    }
}

/// Descending probability, then ascending token id.
pub fn rank_order(a: &(TokenId, f64), b: &(TokenId, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then(a.0.cmp(&b.0))
}
