//! End-to-end orchestration: configuration, model loading, the per-sample
//! pipeline, batch runs, the efficiency benchmark and the mask-predict
//! ablation.

mod ablation;
pub mod alloc;
mod bench;
mod config;
mod dataset;
mod run;

use thiserror::Error;

use crate::lm::LmError;

pub use ablation::{evaluate_ablation, AblationReport, MASK_OFF_LABEL, MASK_ON_LABEL};
pub use bench::{bench, render_bench, BenchAggregate, BenchReport, BenchRow};
pub use config::{BackendConfig, InsertionConfig, PipelineConfig, RankerConfig, StopwordConfig};
pub use dataset::{parse_dataset, Dataset, DatasetRow, RowError};
pub use run::{
    load_backend, load_insertion, read_corpus, run_pipeline, ChainRecord, Corpus, Counters,
    Extraction, GenerationRecord, PhaseTimings, Pipeline, PipelineResult, ScoredToken,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("backend: {0}")]
    Lm(#[source] LmError),
    /// The inner error is part of the message rather than a `source`, so
    /// error chains do not print it twice.
    #[error("{phase} phase: {inner}")]
    Phase {
        phase: &'static str,
        inner: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("no keyword chain could be built from {keywords} keywords")]
    NoChains { keywords: usize },
    #[error("dataset has no usable rows")]
    EmptyDataset,
}

impl PipelineError {
    pub fn phase(
        phase: &'static str,
        source: impl std::error::Error + Send + Sync + 'static,
    ) -> Self {
        PipelineError::Phase {
            phase,
            inner: Box::new(source),
        }
    }

    pub fn phase_name(&self) -> Option<&'static str> {
        match self {
            PipelineError::Phase { phase, .. } => Some(phase),
            _ => None,
        }
    }
}
