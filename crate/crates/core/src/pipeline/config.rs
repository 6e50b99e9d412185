use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::chain::ChainParams;

/// Where the base language model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// A model file written by `train-lm`.
    Ngram { model: PathBuf },
    /// Train an n-gram model on a whitespace-tokenized corpus at startup.
    NgramCorpus {
        corpus: PathBuf,
        #[serde(default = "default_order")]
        order: usize,
        #[serde(default)]
        smoothing: f64,
    },
    /// HTTP service answering next-token queries.
    Remote {
        url: String,
        vocab: PathBuf,
        #[serde(default = "default_top_n")]
        top_n: usize,
    },
}

fn default_order() -> usize {
    2
}

fn default_top_n() -> usize {
    256
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::NgramCorpus {
            corpus: PathBuf::from("data/toy_corpus.txt"),
            order: 2,
            smoothing: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InsertionConfig {
    /// Bigram insertion model. Trained on `pairs` (stage-pair JSONL) when
    /// given, else on `corpus`, else on the backend's training corpus.
    Bigram {
        #[serde(default)]
        corpus: Option<PathBuf>,
        #[serde(default)]
        pairs: Option<PathBuf>,
        #[serde(default)]
        smoothing: f64,
    },
    /// Never inserts; the output is the keyword chain itself.
    None,
}

impl Default for InsertionConfig {
    fn default() -> Self {
        InsertionConfig::Bigram {
            corpus: None,
            pairs: None,
            smoothing: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StopwordConfig {
    /// `None` uses the built-in list.
    pub words: Option<Vec<String>>,
    pub punctuation: bool,
}

impl Default for StopwordConfig {
    fn default() -> Self {
        Self {
            words: None,
            punctuation: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankerConfig {
    pub length_weight: f64,
    pub ideal_len: usize,
}

impl Default for RankerConfig {
    fn default() -> Self {
        Self {
            length_weight: 0.2,
            ideal_len: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Top-p threshold for the first-step support.
    pub p: f64,
    /// Number of chains handed to the generator.
    #[serde(alias = "Z")]
    pub z: usize,
    /// Maximum chain length.
    #[serde(alias = "L")]
    pub l: usize,
    /// Propagation steps; `None` means `l`.
    #[serde(alias = "T")]
    pub t: Option<usize>,
    /// Keywords kept from the marginal.
    pub k: usize,
    pub beam_k: usize,
    pub chain_threshold: f64,
    /// Mask-predict threshold; 0 disables elimination.
    pub tau: f64,
    pub max_stages: usize,
    pub temperature: f64,
    /// Renormalize every propagated state to mass 1.
    pub renormalize: bool,
    pub backend: BackendConfig,
    pub insertion: InsertionConfig,
    pub stopwords: StopwordConfig,
    pub ranker: RankerConfig,
    /// Token separator for output text; `None` picks "" for CJK tokens and
    /// " " otherwise.
    pub separator: Option<String>,
    /// Worker threads for batch runs; 0 uses every core.
    pub workers: usize,
    /// Include wall-clock timings in results. Off by default so repeated
    /// runs produce identical bytes.
    pub timings: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            p: 0.9,
            z: 5,
            l: 7,
            t: None,
            k: 20,
            beam_k: 3,
            chain_threshold: 1e-8,
            tau: 0.2,
            max_stages: 8,
            temperature: 1.0,
            renormalize: false,
            backend: BackendConfig::default(),
            insertion: InsertionConfig::default(),
            stopwords: StopwordConfig::default(),
            ranker: RankerConfig::default(),
            separator: None,
            workers: 0,
            timings: false,
        }
    }
}

impl PipelineConfig {
    pub fn steps(&self) -> usize {
        self.t.unwrap_or(self.l)
    }

    pub fn chain_params(&self) -> ChainParams {
        ChainParams {
            max_len: self.l,
            beam_k: self.beam_k,
            threshold: self.chain_threshold,
            ..ChainParams::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        if !(self.p > 0.0 && self.p <= 1.0) {
            return bad(format!("p must be in (0,1], got {}", self.p));
        }
        if self.z == 0 {
            return bad("z must be at least 1".into());
        }
        if self.l == 0 {
            return bad("l must be at least 1".into());
        }
        if self.t == Some(0) || self.steps() > crate::extract::MAX_STEPS {
            return bad(format!("t must be in 1..={}", crate::extract::MAX_STEPS));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.beam_k == 0 {
            return bad("beam_k must be at least 1".into());
        }
        if !(self.chain_threshold >= 0.0 && self.chain_threshold <= 1.0) {
            return bad(format!(
                "chain_threshold must be in [0,1], got {}",
                self.chain_threshold
            ));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return bad(format!("tau must be in [0,1), got {}", self.tau));
        }
        if self.max_stages == 0 {
            return bad("max_stages must be at least 1".into());
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!(
                "temperature must be positive, got {}",
                self.temperature
            ));
        }
        if !(0.0..=1.0).contains(&self.ranker.length_weight) {
            return bad("ranker.length_weight must be in [0,1]".into());
        }
        Ok(())
    }

    /// Rebases every relative file path onto `base`, usually the directory
    /// holding the config file.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.backend {
            BackendConfig::Ngram { model } => fix(model),
            BackendConfig::NgramCorpus { corpus, .. } => fix(corpus),
            BackendConfig::Remote { vocab, .. } => fix(vocab),
        }
        if let InsertionConfig::Bigram { corpus, pairs, .. } = &mut self.insertion {
            corpus.iter_mut().chain(pairs.iter_mut()).for_each(fix);
        }
    }

    /// Applies a `key=value` override. Keys may be dotted paths into nested
    /// objects; values are parsed as JSON, falling back to a plain string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), PipelineError> {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| {
            PipelineError::Config(format!("override {assignment:?} is not key=value"))
        })?;
        let value: serde_json::Value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let mut tree = serde_json::to_value(&*self).expect("config serializes");
        let mut slot = &mut tree;
        for part in key.split('.') {
            let part = match part {
                "Z" | "L" | "T" => part.to_ascii_lowercase(),
                other => other.to_string(),
            };
            let obj = slot.as_object_mut().ok_or_else(|| {
                PipelineError::Config(format!("cannot set {key:?}: parent is not an object"))
            })?;
            slot = obj.entry(part).or_insert(serde_json::Value::Null);
        }
        *slot = value;
        let updated: Self = serde_json::from_value(tree)
            .map_err(|e| PipelineError::Config(format!("{key}: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = PipelineConfig::default();
        assert_eq!((c.p, c.z, c.l, c.k, c.beam_k), (0.9, 5, 7, 20, 3));
        assert_eq!(c.steps(), 7);
        assert_eq!(
            (c.chain_threshold, c.tau, c.max_stages, c.temperature),
            (1e-8, 0.2, 8, 1.0)
        );
        c.validate().unwrap();
    }

    #[test]
    fn json_with_aliases_and_unknown_keys() {
        let c = PipelineConfig::from_json(
            r#"{"Z": 2, "T": 3, "backend": {"kind": "ngram", "model": "m.txt"}}"#,
        )
        .unwrap();
        assert_eq!((c.z, c.steps()), (2, 3));
        assert!(PipelineConfig::from_json(r#"{"topp": 0.5}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"p": 1.5}"#).is_err());
        assert!(PipelineConfig::from_json(
            r#"{"backend": {"kind": "ngram", "model": "m", "x": 1}}"#
        )
        .is_err());
    }

    #[test]
    fn overrides() {
        let mut c = PipelineConfig::default();
        c.apply_override("tau=0").unwrap();
        c.apply_override("L=3").unwrap();
        c.apply_override("ranker.ideal_len=5").unwrap();
        c.apply_override("separator=_").unwrap();
        assert_eq!((c.tau, c.l, c.ranker.ideal_len), (0.0, 3, 5));
        assert_eq!(c.separator.as_deref(), Some("_"));
        assert!(c.apply_override("nope=1").is_err());
        assert!(c.apply_override("tau=2").is_err());
        assert!(c.apply_override("tau").is_err());
        assert_eq!(c.tau, 0.0);
    }
}
