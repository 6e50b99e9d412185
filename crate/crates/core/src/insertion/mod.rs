//! Insertion-based constrained generation.
//!
//! Generation starts from a keyword chain and refines it stage by stage:
//! every gap between adjacent tokens (plus both ends) may receive one new
//! token, then low-confidence non-keyword tokens are dropped again so the
//! next stage can re-predict them. The loop ends when a stage changes
//! nothing or the stage budget runs out.

mod bigram;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::KeywordChain;
use crate::lm::{safe_ln, SparseDist, TokenId, Vocabulary};

pub use bigram::{train_bigram_insertion, train_bigram_insertion_from_pairs, BigramInsertionModel};

#[derive(Debug, Error)]
pub enum InsertionError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("token id {0} is outside the vocabulary")]
    UnknownToken(TokenId),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model returned {got} gap distributions for {expected} gaps")]
    GapCount { expected: usize, got: usize },
    #[error("insertion model failed: {0}")]
    Model(String),
}

/// Prediction for one gap: probability of inserting nothing, and the
/// distribution over tokens to insert. Together they sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GapDist {
    pub no_insert: f64,
    pub insert: SparseDist,
}

impl GapDist {
    pub fn nothing(vocab_size: usize) -> Self {
        Self {
            no_insert: 1.0,
            insert: SparseDist::empty(vocab_size),
        }
    }

    /// The argmax token and its probability, or `None` when inserting
    /// nothing is at least as likely as the best token.
    pub fn choice(&self) -> Option<(TokenId, f64)> {
        self.insert.argmax().filter(|&(_, p)| p > self.no_insert)
    }
}

/// Predicts, for each of the `tokens.len() + 1` gaps of a sequence, what to
/// insert there.
pub trait InsertionModel: Send + Sync {
    fn predict_gaps(
        &self,
        context: &[TokenId],
        tokens: &[TokenId],
    ) -> Result<Vec<GapDist>, InsertionError>;
}

impl<M: InsertionModel + ?Sized> InsertionModel for &M {
    fn predict_gaps(
        &self,
        context: &[TokenId],
        tokens: &[TokenId],
    ) -> Result<Vec<GapDist>, InsertionError> {
        (**self).predict_gaps(context, tokens)
    }
}

impl<M: InsertionModel + ?Sized> InsertionModel for Box<M> {
    fn predict_gaps(
        &self,
        context: &[TokenId],
        tokens: &[TokenId],
    ) -> Result<Vec<GapDist>, InsertionError> {
        (**self).predict_gaps(context, tokens)
    }
}

impl<M: InsertionModel + ?Sized> InsertionModel for std::sync::Arc<M> {
    fn predict_gaps(
        &self,
        context: &[TokenId],
        tokens: &[TokenId],
    ) -> Result<Vec<GapDist>, InsertionError> {
        (**self).predict_gaps(context, tokens)
    }
}

/// A model that never inserts anything.
#[derive(Debug, Clone, Copy)]
pub struct NoInsertModel {
    pub vocab_size: usize,
}

impl InsertionModel for NoInsertModel {
    fn predict_gaps(
        &self,
        _: &[TokenId],
        tokens: &[TokenId],
    ) -> Result<Vec<GapDist>, InsertionError> {
        Ok(vec![GapDist::nothing(self.vocab_size); tokens.len() + 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypToken {
    pub id: TokenId,
    /// Model probability when the token was inserted; 1 for keywords.
    pub confidence: f64,
    /// Keyword-chain tokens are protected and never removed.
    pub protected: bool,
    /// Stage that inserted the token (0 for keywords).
    pub stage: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub tokens: Vec<HypToken>,
    pub stage_index: usize,
}

impl Hypothesis {
    /// Stage 0: the keyword chain itself.
    pub fn from_chain(chain: &[TokenId]) -> Self {
        Self {
            tokens: chain
                .iter()
                .map(|&id| HypToken {
                    id,
                    confidence: 1.0,
                    protected: true,
                    stage: 0,
                })
                .collect(),
            stage_index: 0,
        }
    }

    pub fn ids(&self) -> Vec<TokenId> {
        self.tokens.iter().map(|t| t.id).collect()
    }

    pub fn same_tokens(&self, other: &Hypothesis) -> bool {
        self.tokens.len() == other.tokens.len()
            && self
                .tokens
                .iter()
                .zip(&other.tokens)
                .all(|(a, b)| a.id == b.id)
    }

    /// Tokens joined by spaces, newly inserted ones annotated with their
    /// confidence as `tok(0.65)`.
    pub fn render(&self, vocab: &Vocabulary) -> String {
        self.tokens
            .iter()
            .map(|t| {
                let s = vocab.lookup(t.id).unwrap_or("<unk>");
                if !t.protected && t.stage == self.stage_index {
                    format!("{s}({:.2})", t.confidence)
                } else {
                    s.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// One refinement stage: insert the argmax token into every gap that wants
/// one, then drop unprotected tokens whose confidence is below `tau`.
pub fn stage_step<M: InsertionModel + ?Sized>(
    model: &M,
    context: &[TokenId],
    hyp: &Hypothesis,
    tau: f64,
) -> Result<Hypothesis, InsertionError> {
    if !(0.0..1.0).contains(&tau) {
        return Err(InsertionError::InvalidParameter(format!(
            "tau must be in [0,1), got {tau}"
        )));
    }
    let ids = hyp.ids();
    let gaps = model.predict_gaps(context, &ids)?;
    if gaps.len() != ids.len() + 1 {
        return Err(InsertionError::GapCount {
            expected: ids.len() + 1,
            got: gaps.len(),
        });
    }
    let stage = hyp.stage_index + 1;
    let mut tokens = Vec::with_capacity(ids.len() * 2 + 1);
    for (i, gap) in gaps.iter().enumerate() {
        if let Some((id, confidence)) = gap.choice() {
            tokens.push(HypToken {
                id,
                confidence,
                protected: false,
                stage,
            });
        }
        if let Some(&existing) = hyp.tokens.get(i) {
            tokens.push(existing);
        }
    }
    tokens.retain(|t| t.protected || t.confidence >= tau);
    Ok(Hypothesis {
        tokens,
        stage_index: stage,
    })
}

/// Stages `Y⁰ … Y^K` of one generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSequence {
    pub stages: Vec<Hypothesis>,
    pub converged: bool,
    /// Log probability of the seeding chain, `log p(Y⁰)`.
    pub chain_log_score: f64,
}

impl StageSequence {
    pub fn output(&self) -> &Hypothesis {
        self.stages
            .last()
            .expect("a stage sequence always holds Y⁰")
    }

    /// Number of refinement stages run (excludes `Y⁰`).
    pub fn steps(&self) -> usize {
        self.stages.len() - 1
    }

    /// Per-stage rendering for debugging and walkthroughs.
    pub fn trace_json(&self, vocab: &Vocabulary) -> serde_json::Value {
        serde_json::json!({
            "converged": self.converged,
            "chain_log_score": self.chain_log_score,
            "joint_log_prob": joint_stage_logprob(self),
            "stages": self.stages.iter().map(|h| h.render(vocab)).collect::<Vec<_>>(),
        })
    }
}

/// Refines `chain` until two consecutive stages hold the same tokens or
/// `max_stages` refinements have run. Comparison happens after low-confidence
/// tokens are removed.
pub fn generate_constrained<M: InsertionModel + ?Sized>(
    model: &M,
    context: &[TokenId],
    chain: &KeywordChain,
    tau: f64,
    max_stages: usize,
) -> Result<StageSequence, InsertionError> {
    if chain.is_empty() {
        return Err(InsertionError::InvalidParameter(
            "keyword chain is empty".into(),
        ));
    }
    if max_stages == 0 {
        return Err(InsertionError::InvalidParameter(
            "max_stages must be at least 1".into(),
        ));
    }
    let mut stages = vec![Hypothesis::from_chain(&chain.tokens)];
    let mut converged = false;
    for _ in 0..max_stages {
        let prev = stages.last().expect("non-empty");
        let next = stage_step(model, context, prev, tau)?;
        let done = next.same_tokens(prev);
        stages.push(next);
        if done {
            converged = true;
            break;
        }
    }
    Ok(StageSequence {
        stages,
        converged,
        chain_log_score: chain.log_score,
    })
}

/// `log p(Y⁰) + Σ log p(y)` over the inserted tokens that survive to the
/// final stage. Each surviving token was inserted exactly once.
pub fn joint_stage_logprob(seq: &StageSequence) -> f64 {
    seq.chain_log_score
        + seq
            .output()
            .tokens
            .iter()
            .filter(|t| !t.protected)
            .map(|t| safe_ln(t.confidence))
            .sum::<f64>()
}

/// True when `needle` appears in `haystack` in order (not necessarily
/// contiguously).
pub fn is_subsequence<T: PartialEq>(needle: &[T], haystack: &[T]) -> bool {
    let mut it = haystack.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}
