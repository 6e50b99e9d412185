//! Ordering extracted keywords into chains.
//!
//! A chain `c₁ … c_m` scores
//! `π₀(c₁) · Π_{i≥2} P(c_i|X) · P(y₂=c_i | y₁=c_{i-1}, X)`,
//! where `P(c_i|X)` is the averaged word marginal. Chains are grown by a
//! beam-style expansion from every keyword.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{KeywordSet, MarkovEstimate};
use crate::lm::{safe_ln, SparseDist, TokenId, LOG_ZERO};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("chain token {0} is not in the support")]
    OutsideSupport(TokenId),
    #[error("chain is empty")]
    Empty,
}

/// Ordered keyword sequence with its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordChain {
    pub tokens: Vec<TokenId>,
    pub score: f64,
    pub log_score: f64,
}

impl KeywordChain {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn from_log(tokens: Vec<TokenId>, log_score: f64) -> Self {
        Self {
            tokens,
            score: score_of(log_score),
            log_score,
        }
    }
}

fn score_of(log_score: f64) -> f64 {
    if log_score <= LOG_ZERO {
        0.0
    } else {
        log_score.exp()
    }
}

/// Descending score, then lexicographic token ids.
pub fn chain_order(a: &KeywordChain, b: &KeywordChain) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.tokens.cmp(&b.tokens))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    /// Maximum chain length `L`.
    pub max_len: usize,
    /// Next-keyword candidates tried per chain.
    pub beam_k: usize,
    /// Chains whose probability would drop below this stop growing.
    pub threshold: f64,
    /// Cap on live partial chains per round; lowest scores are pruned.
    pub max_frontier: usize,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            max_len: 7,
            beam_k: 3,
            threshold: 1e-8,
            max_frontier: 10_000,
        }
    }
}

/// Log-space increment for appending `next` after `prev`.
fn step_log(est: &MarkovEstimate, marginal: &SparseDist, prev: TokenId, next: TokenId) -> f64 {
    let m = marginal.prob(next);
    let t = est.transition(prev, next);
    if m <= 0.0 || t <= 0.0 {
        return LOG_ZERO;
    }
    safe_ln(m) + safe_ln(t)
}

/// Log probability of a chain; [`LOG_ZERO`] when any factor is zero.
pub fn chain_log_probability(
    tokens: &[TokenId],
    est: &MarkovEstimate,
    marginal: &SparseDist,
) -> Result<f64, ChainError> {
    let (&first, rest) = tokens.split_first().ok_or(ChainError::Empty)?;
    if let Some(&bad) = tokens.iter().find(|&&t| est.index_of(t).is_none()) {
        return Err(ChainError::OutsideSupport(bad));
    }
    let mut log = safe_ln(est.initial(first));
    let mut prev = first;
    for &t in rest {
        if log <= LOG_ZERO {
            return Ok(LOG_ZERO);
        }
        let step = step_log(est, marginal, prev, t);
        if step <= LOG_ZERO {
            return Ok(LOG_ZERO);
        }
        log += step;
        prev = t;
    }
    Ok(log.max(LOG_ZERO))
}

/// Chain probability in linear space.
pub fn chain_probability(
    tokens: &[TokenId],
    est: &MarkovEstimate,
    marginal: &SparseDist,
) -> Result<f64, ChainError> {
    chain_log_probability(tokens, est, marginal).map(score_of)
}

/// Grows chains from every keyword. Each live chain tries its `beam_k`
/// most likely unused successors (by transition probability); a successor
/// is taken when the extended chain stays at or above `threshold`. A chain
/// that cannot grow, or has reached `max_len`, is emitted. Output is sorted
/// by [`chain_order`].
pub fn build_chains(
    keywords: &KeywordSet,
    est: &MarkovEstimate,
    marginal: &SparseDist,
    params: &ChainParams,
) -> Vec<KeywordChain> {
    let pool: Vec<TokenId> = keywords
        .ids()
        .filter(|&t| est.index_of(t).is_some())
        .collect();
    let mut frontier: Vec<KeywordChain> = pool
        .iter()
        .filter_map(|&t| {
            let log = safe_ln(est.initial(t));
            (log > LOG_ZERO).then(|| KeywordChain::from_log(vec![t], log))
        })
        .collect();
    let mut done = Vec::new();

    while !frontier.is_empty() {
        let mut next_round = Vec::new();
        for chain in frontier {
            if chain.len() >= params.max_len {
                done.push(chain);
                continue;
            }
            let last = *chain.tokens.last().expect("chains are non-empty");
            let mut successors: Vec<(TokenId, f64)> = pool
                .iter()
                .filter(|t| !chain.tokens.contains(t))
                .map(|&t| (t, est.transition(last, t)))
                .filter(|&(_, p)| p > 0.0)
                .collect();
            successors.sort_by(crate::lm::rank_order);
            successors.truncate(params.beam_k);

            let mut grew = false;
            for (t, _) in successors {
                let step = step_log(est, marginal, last, t);
                if step <= LOG_ZERO {
                    continue;
                }
                let log = chain.log_score + step;
                let score = score_of(log);
                if score <= 0.0 || score < params.threshold {
                    continue;
                }
                let mut tokens = chain.tokens.clone();
                tokens.push(t);
                next_round.push(KeywordChain::from_log(tokens, log));
                grew = true;
            }
            if !grew {
                done.push(chain);
            }
        }
        if next_round.len() > params.max_frontier {
            next_round.sort_by(chain_order);
            next_round.truncate(params.max_frontier);
        }
        frontier = next_round;
    }
    done.sort_by(chain_order);
    done
}

/// The `z` best chains.
pub fn pick_top_z(chains: &[KeywordChain], z: usize) -> Vec<KeywordChain> {
    let mut sorted = chains.to_vec();
    sorted.sort_by(chain_order);
    sorted.truncate(z);
    sorted
}
