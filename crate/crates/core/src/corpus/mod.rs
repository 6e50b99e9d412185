//! Training-data preparation for insertion models: token importance from
//! TF-IDF, part of speech and a keyword flag, and coarse-to-fine stage
//! decomposition of sentences.

mod importance;
mod stages;
mod tfidf;

use thiserror::Error;

pub use importance::{
    importance_scores, parse_tag, ImportanceProfile, KeywordMarker, LexiconTagger, NoKeywords,
    NullTagger, PosTag, PosTagger, PosWeights, TokenImportance, TopQuartileKeywords,
};
pub use stages::{
    decompose_corpus, parse_stage_pairs, stage_decompose, stage_pairs_to_jsonl, StagePair,
    StagePairRecord,
};
pub use tfidf::{build_tfidf, TfIdfTable, NORM_MAX, NORM_MIN};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("sentence is empty")]
    EmptySentence,
    #[error("stage count must be at least 1")]
    InvalidStages,
    #[error("profile covers {profile} tokens but the sentence has {sentence}")]
    ProfileMismatch { profile: usize, sentence: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
