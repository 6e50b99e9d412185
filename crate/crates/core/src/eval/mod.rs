//! Candidate ranking and evaluation: lexical ranker, P@1/10, text metrics,
//! perplexity, and G-Eval prompt rendering with an optional HTTP scorer.

mod geval;
mod metrics;
mod ranker;

use thiserror::Error;

use crate::lm::LmError;

pub use geval::{
    geval_score, parse_score, render_geval_prompt, Aspect, GevalClient, GevalConfig, ASPECTS,
    TOKEN_ENV,
};
pub use metrics::{
    bleu, compute_metrics, distinct2, lcs_len, perplexity, render_table, rouge_l, text_metrics,
    unigram_f1, MetricsReport, TextMetrics, MIN_TOKEN_PROB,
};
pub use ranker::{
    precision_at_1_of_10, rank_candidates, LexicalRanker, PrecisionItem, Ranked, Ranker, ScoreFn,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no candidates to rank")]
    NoCandidates,
    #[error("item {item} has {got} negatives, expected 9")]
    WrongCandidateCount { item: usize, got: usize },
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("{references} references but {hypotheses} hypotheses")]
    LengthMismatch {
        references: usize,
        hypotheses: usize,
    },
    #[error("no samples")]
    NoSamples,
    #[error("unknown aspect {0:?}")]
    UnknownAspect(String),
    #[error("G-Eval scoring is disabled")]
    Disabled,
    #[error("no score between 1 and 5 in completion {0:?}")]
    Unparseable(String),
    #[error("G-Eval request failed: {0}")]
    Network(String),
    #[error("language model failed: {0}")]
    Lm(#[from] LmError),
}
