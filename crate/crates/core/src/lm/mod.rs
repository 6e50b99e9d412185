//! Vocabulary and distribution primitives, the language-model abstraction,
//! and the self-contained backends.
//!
//! Every backend answers one question: given a context and a (possibly
//! empty) prefix of the response, what is the distribution of the next
//! token? Keyword extraction only ever asks it with prefixes of length 0
//! and 1.

mod dist;
mod ngram;
mod oracle;
mod remote;
mod toy;
mod vocab;
mod wrappers;

use std::sync::Arc;

use thiserror::Error;

pub use dist::{rank_order, safe_ln, SparseDist, LOG_ZERO, MASS_SLACK};
pub use ngram::{train_ngram, NgramLm, NGRAM_HEADER};
pub use oracle::{exact_position_marginals, MAX_ENUMERATION};
pub use remote::{decode_remote_response, RemoteLm, RemoteRequest, RemoteResponse};
pub use toy::ToyMarkovLm;
pub use vocab::{whitespace_tokens, TokenId, Tokenizer, Vocabulary, WhitespaceTokenizer};
pub use wrappers::{CallStats, CountingLm, Tempered};

#[derive(Debug, Error)]
pub enum LmError {
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("token id {0} is outside the vocabulary")]
    UnknownTokenId(TokenId),
    #[error("duplicate vocabulary token {0:?}")]
    DuplicateToken(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("sequence is empty")]
    EmptySequence,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("enumerating {vocab}^{horizon} sequences exceeds the limit of {limit}")]
    EnumerationTooLarge {
        vocab: usize,
        horizon: usize,
        limit: u64,
    },
    #[error("model file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("remote backend: {0}")]
    Remote(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A base language model queried one decoding step at a time.
///
/// Implementations must be safe for concurrent read-only queries and must
/// return identical answers for identical inputs. The returned distribution
/// sums to 1 within 1e-6, except for backends that report a truncated
/// distribution, whose missing mass is treated as leak by callers.
pub trait LanguageModel: Send + Sync {
    fn vocab(&self) -> &Vocabulary;

    /// Distribution of the next response token after `context` and `prefix`.
    fn next_token_dist(
        &self,
        context: &[TokenId],
        prefix: &[TokenId],
    ) -> Result<SparseDist, LmError>;

    /// `Σ log P(seq_i | context, seq_<i)`. A zero-probability step makes the
    /// whole sum [`LOG_ZERO`].
    fn sequence_logprob(&self, context: &[TokenId], seq: &[TokenId]) -> Result<f64, LmError> {
        if seq.is_empty() {
            return Err(LmError::EmptySequence);
        }
        self.vocab().check_ids(seq)?;
        let mut total = 0.0;
        for i in 0..seq.len() {
            let dist = self.next_token_dist(context, &seq[..i])?;
            let lp = safe_ln(dist.prob(seq[i]));
            if lp <= LOG_ZERO {
                return Ok(LOG_ZERO);
            }
            total += lp;
        }
        Ok(total)
    }
}

impl<L: LanguageModel + ?Sized> LanguageModel for &L {
    fn vocab(&self) -> &Vocabulary {
        (**self).vocab()
    }
    fn next_token_dist(&self, c: &[TokenId], p: &[TokenId]) -> Result<SparseDist, LmError> {
        (**self).next_token_dist(c, p)
    }
    fn sequence_logprob(&self, c: &[TokenId], s: &[TokenId]) -> Result<f64, LmError> {
        (**self).sequence_logprob(c, s)
    }
}

impl<L: LanguageModel + ?Sized> LanguageModel for Arc<L> {
    fn vocab(&self) -> &Vocabulary {
        (**self).vocab()
    }
    fn next_token_dist(&self, c: &[TokenId], p: &[TokenId]) -> Result<SparseDist, LmError> {
        (**self).next_token_dist(c, p)
    }
    fn sequence_logprob(&self, c: &[TokenId], s: &[TokenId]) -> Result<f64, LmError> {
        (**self).sequence_logprob(c, s)
    }
}

impl<L: LanguageModel + ?Sized> LanguageModel for Box<L> {
    fn vocab(&self) -> &Vocabulary {
        (**self).vocab()
    }
    fn next_token_dist(&self, c: &[TokenId], p: &[TokenId]) -> Result<SparseDist, LmError> {
        (**self).next_token_dist(c, p)
    }
    fn sequence_logprob(&self, c: &[TokenId], s: &[TokenId]) -> Result<f64, LmError> {
        (**self).sequence_logprob(c, s)
    }
}
