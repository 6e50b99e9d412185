use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{LanguageModel, LmError, SparseDist, TokenId, Vocabulary};

/// Snapshot of the queries a [`CountingLm`] has seen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallStats {
    pub calls: usize,
    /// Longest dependency chain of decoding steps: a query with prefix
    /// length `n` can only run after `n` earlier steps.
    pub depth: usize,
}

/// Instrumented backend wrapper counting `next_token_dist` calls.
#[derive(Debug)]
pub struct CountingLm<L> {
    inner: L,
    calls: AtomicUsize,
    max_prefix: AtomicUsize,
}

impl<L: LanguageModel> CountingLm<L> {
    pub fn new(inner: L) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
            max_prefix: AtomicUsize::new(0),
        }
    }

    pub fn stats(&self) -> CallStats {
        let calls = self.calls.load(Ordering::SeqCst);
        CallStats {
            calls,
            depth: if calls == 0 {
                0
            } else {
                self.max_prefix.load(Ordering::SeqCst) + 1
            },
        }
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
        self.max_prefix.store(0, Ordering::SeqCst);
    }

    pub fn into_inner(self) -> L {
        self.inner
    }
}

impl<L: LanguageModel> LanguageModel for CountingLm<L> {
    fn vocab(&self) -> &Vocabulary {
        self.inner.vocab()
    }

    fn next_token_dist(
        &self,
        context: &[TokenId],
        prefix: &[TokenId],
    ) -> Result<SparseDist, LmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.max_prefix.fetch_max(prefix.len(), Ordering::SeqCst);
        self.inner.next_token_dist(context, prefix)
    }
}

/// Temperature-scaled view of a backend: `p_i^(1/T)` renormalized to the
/// mass the backend reported. `T = 1` is a pass-through.
#[derive(Debug)]
pub struct Tempered<L> {
    inner: L,
    temperature: f64,
}

impl<L: LanguageModel> Tempered<L> {
    pub fn new(inner: L, temperature: f64) -> Result<Self, LmError> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(LmError::InvalidParameter(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        Ok(Self { inner, temperature })
    }
}

impl<L: LanguageModel> LanguageModel for Tempered<L> {
    fn vocab(&self) -> &Vocabulary {
        self.inner.vocab()
    }

    fn next_token_dist(
        &self,
        context: &[TokenId],
        prefix: &[TokenId],
    ) -> Result<SparseDist, LmError> {
        let dist = self.inner.next_token_dist(context, prefix)?;
        if self.temperature == 1.0 || dist.is_empty() {
            return Ok(dist);
        }
        let mass = dist.total_mass().min(1.0);
        let inv = 1.0 / self.temperature;
        // Work in log space so small probabilities survive high 1/T.
        let logs: Vec<f64> = dist.entries().iter().map(|&(_, p)| p.ln() * inv).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = weights.iter().sum();
        let entries = dist
            .entries()
            .iter()
            .zip(weights)
            .map(|(&(id, _), w)| (id, (w / z * mass).min(1.0)))
            .collect();
        SparseDist::new(entries, dist.vocab_size())
    }
}
