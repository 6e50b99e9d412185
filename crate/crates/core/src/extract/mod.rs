//! Keyword extraction from the first two decoding steps.
//!
//! The first step gives `P(y₁|X)`; its top-p support `S` becomes the state
//! space of a Markov chain whose transition columns come from one extra
//! query `P(y₂|y₁=s,X)` per support token. Propagating the chain approximates
//! the per-position marginals, and their average ranks candidate keywords.

mod cover;
mod keywords;
mod markov;
mod support;

use thiserror::Error;

use crate::lm::LmError;

pub use cover::{cover_rate, CoverReport, DEFAULT_TOP_FRACTION};
pub use keywords::{
    is_punctuation, select_keywords, ContentWordExtractor, KeywordExtractor, KeywordSet,
    StopwordFilter, DEFAULT_STOPWORDS,
};
pub use markov::{build_markov, word_marginal, MarkovEstimate, MassLedger, MAX_STEPS};
pub use support::{reaches, top_p_support, Support, MASS_EPS};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("top-p threshold must be in (0,1], got {0}")]
    InvalidThreshold(f64),
    #[error("first-step distribution is empty")]
    EmptyDistribution,
    #[error("step count {0} is outside 1..={max}", max = MAX_STEPS)]
    InvalidSteps(usize),
    #[error("estimate has no propagated states")]
    StatesEmpty,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("backend failed{}: {source}", token.as_ref().map(|t| format!(" on support token {t:?}")).unwrap_or_default())]
    Backend {
        token: Option<String>,
        #[source]
        source: LmError,
    },
}
