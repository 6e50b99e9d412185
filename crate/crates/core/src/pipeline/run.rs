use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BackendConfig, InsertionConfig, PipelineConfig, PipelineError};
use crate::chain::{build_chains, pick_top_z, KeywordChain};
use crate::corpus::parse_stage_pairs;
use crate::eval::{rank_candidates, LexicalRanker, Ranked, Ranker};
use crate::extract::{
    build_markov, select_keywords, word_marginal, KeywordSet, MarkovEstimate, StopwordFilter,
    DEFAULT_STOPWORDS,
};
use crate::insertion::{
    generate_constrained, joint_stage_logprob, train_bigram_insertion,
    train_bigram_insertion_from_pairs, InsertionModel, NoInsertModel, StageSequence,
};
use crate::lm::{
    train_ngram, whitespace_tokens, CallStats, CountingLm, LanguageModel, NgramLm, RemoteLm,
    SparseDist, Tempered, TokenId, Vocabulary,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredToken {
    pub token: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub tokens: Vec<String>,
    pub score: f64,
    pub log_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    /// Index into `chains`.
    pub chain: usize,
    pub text: String,
    pub tokens: Vec<String>,
    /// Every stage rendered, newly inserted tokens annotated as `tok(0.42)`.
    pub stages: Vec<String>,
    pub converged: bool,
    pub steps: usize,
    pub joint_log_prob: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub extract_ms: f64,
    pub chains_ms: f64,
    pub generate_ms: f64,
    pub rank_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    /// Always `1 + support_size`.
    pub base_model_calls: usize,
    /// Longest chain of dependent base-model steps.
    pub call_depth: usize,
    pub support_size: usize,
    pub chains_built: usize,
    /// Stage steps summed over all generations.
    pub insertion_stages: usize,
    pub ranked_candidates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<PhaseTimings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub context: Vec<String>,
    /// Context words missing from the backend vocabulary (dropped).
    pub unknown_context_tokens: Vec<String>,
    pub keywords: Vec<ScoredToken>,
    pub chains: Vec<ChainRecord>,
    pub generations: Vec<GenerationRecord>,
    /// Candidates best first; `index` points into `generations`.
    pub ranking: Vec<Ranked>,
    pub output: String,
    pub output_tokens: Vec<String>,
    pub counters: Counters,
}

impl PipelineResult {
    pub fn best(&self) -> &GenerationRecord {
        &self.generations[self.ranking[0].index]
    }
}

/// Output of the extraction phase.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub estimate: MarkovEstimate,
    pub marginal: SparseDist,
    pub keywords: KeywordSet,
    pub calls: CallStats,
}

/// Loaded models plus configuration; cheap to share across threads.
pub struct Pipeline {
    config: PipelineConfig,
    lm: Arc<dyn LanguageModel>,
    insertion: Arc<dyn InsertionModel>,
    ranker: Arc<dyn Ranker>,
    filter: StopwordFilter,
}

fn read(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Non-empty lines of a whitespace-tokenized corpus file.
pub fn read_corpus(path: &Path) -> Result<Vec<Vec<String>>, PipelineError> {
    Ok(read(path)?
        .lines()
        .map(whitespace_tokens)
        .filter(|s| !s.is_empty())
        .collect())
}

fn encode_strict(
    vocab: &Vocabulary,
    words: &[String],
    what: &str,
) -> Result<Vec<TokenId>, PipelineError> {
    vocab
        .encode(words)
        .map_err(|e| PipelineError::Config(format!("{what}: {e} (not in the backend vocabulary)")))
}

/// Whitespace-tokenized sentences.
pub type Corpus = Vec<Vec<String>>;

/// The backend, plus its training corpus when it was trained at startup.
pub fn load_backend(
    config: &BackendConfig,
) -> Result<(Arc<dyn LanguageModel>, Option<Corpus>), PipelineError> {
    Ok(match config {
        BackendConfig::Ngram { model } => {
            let lm = NgramLm::parse(&read(model)?).map_err(PipelineError::Lm)?;
            (Arc::new(lm), None)
        }
        BackendConfig::NgramCorpus {
            corpus,
            order,
            smoothing,
        } => {
            let sentences = read_corpus(corpus)?;
            let lm = train_ngram(&sentences, *order, *smoothing).map_err(PipelineError::Lm)?;
            (Arc::new(lm), Some(sentences))
        }
        BackendConfig::Remote { url, vocab, top_n } => {
            let v = RemoteLm::load_vocab(vocab).map_err(PipelineError::Lm)?;
            (Arc::new(RemoteLm::new(url.clone(), v, *top_n)), None)
        }
    })
}

pub fn load_insertion(
    config: &InsertionConfig,
    vocab: &Vocabulary,
    backend_corpus: Option<&[Vec<String>]>,
) -> Result<Arc<dyn InsertionModel>, PipelineError> {
    match config {
        InsertionConfig::None => Ok(Arc::new(NoInsertModel {
            vocab_size: vocab.len(),
        })),
        InsertionConfig::Bigram {
            corpus,
            pairs,
            smoothing,
        } => {
            let model = if let Some(path) = pairs {
                let records = parse_stage_pairs(&read(path)?)
                    .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
                let encoded = records
                    .iter()
                    .map(|r| {
                        Ok((
                            encode_strict(vocab, &r.coarse, "stage pair")?,
                            encode_strict(vocab, &r.fine, "stage pair")?,
                        ))
                    })
                    .collect::<Result<Vec<_>, PipelineError>>()?;
                train_bigram_insertion_from_pairs(&encoded, vocab.len(), *smoothing)
            } else {
                let sentences = match (corpus, backend_corpus) {
                    (Some(path), _) => read_corpus(path)?,
                    (None, Some(c)) => c.to_vec(),
                    (None, None) => {
                        return Err(PipelineError::Config(
                            "bigram insertion needs `corpus` or `pairs` unless the backend is trained from a corpus".into(),
                        ))
                    }
                };
                let encoded = sentences
                    .iter()
                    .map(|s| encode_strict(vocab, s, "insertion corpus"))
                    .collect::<Result<Vec<_>, _>>()?;
                train_bigram_insertion(&encoded, vocab.len(), *smoothing)
            };
            Ok(Arc::new(
                model.map_err(|e| PipelineError::Config(e.to_string()))?,
            ))
        }
    }
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF | 0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xAC00..=0xD7AF | 0xF900..=0xFAFF | 0x3000..=0x303F | 0xFF00..=0xFFEF)
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1000.0
}

impl Pipeline {
    pub fn new(
        config: PipelineConfig,
        lm: Arc<dyn LanguageModel>,
        insertion: Arc<dyn InsertionModel>,
        ranker: Arc<dyn Ranker>,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        let filter = match &config.stopwords.words {
            Some(words) => StopwordFilter::new(lm.vocab(), words, config.stopwords.punctuation),
            None => {
                StopwordFilter::new(lm.vocab(), DEFAULT_STOPWORDS, config.stopwords.punctuation)
            }
        };
        Ok(Self {
            config,
            lm,
            insertion,
            ranker,
            filter,
        })
    }

    /// Builds backend, insertion model and lexical ranker from the config.
    pub fn load(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let (lm, corpus) = load_backend(&config.backend)?;
        let insertion = load_insertion(&config.insertion, lm.vocab(), corpus.as_deref())?;
        let filter = match &config.stopwords.words {
            Some(words) => StopwordFilter::new(lm.vocab(), words, config.stopwords.punctuation),
            None => {
                StopwordFilter::new(lm.vocab(), DEFAULT_STOPWORDS, config.stopwords.punctuation)
            }
        };
        let ranker = LexicalRanker {
            filter,
            length_weight: config.ranker.length_weight,
            ideal_len: config.ranker.ideal_len,
        };
        Self::new(config, lm, insertion, Arc::new(ranker))
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn lm(&self) -> &Arc<dyn LanguageModel> {
        &self.lm
    }

    pub fn insertion(&self) -> &Arc<dyn InsertionModel> {
        &self.insertion
    }

    pub fn ranker(&self) -> &Arc<dyn Ranker> {
        &self.ranker
    }

    pub fn vocab(&self) -> &Vocabulary {
        self.lm.vocab()
    }

    /// Same models, different settings.
    pub fn with_config(&self, config: PipelineConfig) -> Result<Self, PipelineError> {
        Self::new(
            config,
            self.lm.clone(),
            self.insertion.clone(),
            self.ranker.clone(),
        )
    }

    /// Whitespace-tokenizes `text`; words outside the vocabulary are
    /// returned separately.
    pub fn encode_context(&self, text: &str) -> (Vec<TokenId>, Vec<String>) {
        let mut ids = Vec::new();
        let mut unknown = Vec::new();
        for w in whitespace_tokens(text) {
            match self.vocab().id_of(&w) {
                Some(id) => ids.push(id),
                None => unknown.push(w),
            }
        }
        (ids, unknown)
    }

    pub fn words(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .map(|&id| self.vocab().lookup(id).unwrap_or("<unk>").to_string())
            .collect()
    }

    pub fn detokenize(&self, words: &[String]) -> String {
        let sep = match &self.config.separator {
            Some(s) => s.as_str(),
            None if words.iter().any(|w| w.chars().any(is_cjk)) => "",
            None => " ",
        };
        words.join(sep)
    }

    pub fn run_text(&self, text: &str) -> Result<PipelineResult, PipelineError> {
        let (ids, unknown) = self.encode_context(text);
        let mut result = self.run(&ids)?;
        result.unknown_context_tokens = unknown;
        Ok(result)
    }

    /// Markov estimate, word marginal and filtered keywords for one context.
    pub fn extract(&self, context: &[TokenId]) -> Result<Extraction, PipelineError> {
        let cfg = &self.config;
        let tempered = Tempered::new(&*self.lm, cfg.temperature).map_err(PipelineError::Lm)?;
        let counted = CountingLm::new(tempered);
        let estimate = build_markov(&counted, context, cfg.p)
            .and_then(|e| e.propagate_with(cfg.steps(), cfg.renormalize))
            .map_err(|e| PipelineError::phase("extract", e))?;
        let calls = counted.stats();
        let marginal = word_marginal(&estimate).map_err(|e| PipelineError::phase("extract", e))?;
        let mut keywords = select_keywords(&self.filter.apply(&marginal), &estimate.support, cfg.k);
        if keywords.is_empty() {
            // Support made only of stopwords: better a function-word chain
            // than no output at all.
            keywords = select_keywords(&marginal, &estimate.support, cfg.k);
        }
        Ok(Extraction {
            estimate,
            marginal,
            keywords,
            calls,
        })
    }

    /// Every chain the beam search kept, best first.
    pub fn chains(&self, ext: &Extraction) -> Result<Vec<KeywordChain>, PipelineError> {
        let chains = build_chains(
            &ext.keywords,
            &ext.estimate,
            &ext.marginal,
            &self.config.chain_params(),
        );
        if chains.is_empty() {
            return Err(PipelineError::phase(
                "chains",
                PipelineError::NoChains {
                    keywords: ext.keywords.len(),
                },
            ));
        }
        Ok(chains)
    }

    pub fn generate(
        &self,
        context: &[TokenId],
        chain: &KeywordChain,
    ) -> Result<StageSequence, PipelineError> {
        generate_constrained(
            &*self.insertion,
            context,
            chain,
            self.config.tau,
            self.config.max_stages,
        )
        .map_err(|e| PipelineError::phase("generate", e))
    }

    pub fn keyword_records(&self, keywords: &KeywordSet) -> Vec<ScoredToken> {
        keywords
            .keywords
            .iter()
            .map(|&(id, prob)| ScoredToken {
                token: self.words(&[id]).remove(0),
                prob,
            })
            .collect()
    }

    pub fn generation_record(&self, chain: usize, seq: &StageSequence) -> GenerationRecord {
        let tokens = self.words(&seq.output().ids());
        GenerationRecord {
            chain,
            text: self.detokenize(&tokens),
            tokens,
            stages: seq.stages.iter().map(|h| h.render(self.vocab())).collect(),
            converged: seq.converged,
            steps: seq.steps(),
            joint_log_prob: joint_stage_logprob(seq),
        }
    }

    /// extract → chains → Z generations in parallel → ranking.
    pub fn run(&self, context: &[TokenId]) -> Result<PipelineResult, PipelineError> {
        let cfg = &self.config;
        let total = Instant::now();
        let mut timings = PhaseTimings::default();

        let start = Instant::now();
        let ext = self.extract(context)?;
        timings.extract_ms = ms(start);

        let start = Instant::now();
        let all_chains = self.chains(&ext)?;
        let chains = pick_top_z(&all_chains, cfg.z);
        timings.chains_ms = ms(start);

        let start = Instant::now();
        let runs: Vec<StageSequence> = chains
            .par_iter()
            .map(|c| self.generate(context, c))
            .collect::<Result<_, _>>()?;
        timings.generate_ms = ms(start);

        let start = Instant::now();
        let candidates: Vec<Vec<TokenId>> = runs.iter().map(|s| s.output().ids()).collect();
        let ranking = rank_candidates(&*self.ranker, context, &candidates)
            .map_err(|e| PipelineError::phase("rank", e))?;
        timings.rank_ms = ms(start);
        timings.total_ms = ms(total);

        let generations: Vec<GenerationRecord> = runs
            .iter()
            .enumerate()
            .map(|(i, seq)| self.generation_record(i, seq))
            .collect();
        let best = &generations[ranking[0].index];
        Ok(PipelineResult {
            context: self.words(context),
            unknown_context_tokens: Vec::new(),
            keywords: self.keyword_records(&ext.keywords),
            chains: chains.iter().map(|c| self.chain_record(c)).collect(),
            output: best.text.clone(),
            output_tokens: best.tokens.clone(),
            counters: Counters {
                base_model_calls: ext.calls.calls,
                call_depth: ext.calls.depth,
                support_size: ext.estimate.support.len(),
                chains_built: all_chains.len(),
                insertion_stages: runs.iter().map(StageSequence::steps).sum(),
                ranked_candidates: ranking.len(),
                timings: cfg.timings.then_some(timings),
            },
            generations,
            ranking,
        })
    }

    fn chain_record(&self, c: &KeywordChain) -> ChainRecord {
        ChainRecord {
            tokens: self.words(&c.tokens),
            score: c.score,
            log_score: c.log_score,
        }
    }

    /// Thread pool honoring `workers`.
    pub fn pool(&self) -> Result<rayon::ThreadPool, PipelineError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers)
            .build()
            .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))
    }

    /// Runs every context on the worker pool; results keep input order.
    pub fn run_batch(
        &self,
        contexts: &[String],
    ) -> Result<Vec<Result<PipelineResult, PipelineError>>, PipelineError> {
        let pool = self.pool()?;
        Ok(pool.install(|| contexts.par_iter().map(|c| self.run_text(c)).collect()))
    }
}

/// Loads the configured models and runs one context.
pub fn run_pipeline(
    config: &PipelineConfig,
    context: &[TokenId],
) -> Result<PipelineResult, PipelineError> {
    Pipeline::load(config.clone())?.run(context)
}
