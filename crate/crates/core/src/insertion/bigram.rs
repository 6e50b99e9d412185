use std::collections::HashMap;

use rayon::prelude::*;

use super::{GapDist, InsertionError, InsertionModel};
use crate::lm::{SparseDist, TokenId};

/// Insertion model built from bigram counts.
///
/// For a gap between `l` and `r` the candidate `w` scores `P(w|l)·P(r|w)`
/// and "insert nothing" scores `P(r|l)`; the scores are normalized together.
/// Gaps at the ends use sentence-start and sentence-end pseudo tokens.
/// Successor probabilities use add-k smoothing over the vocabulary plus the
/// end marker.
#[derive(Debug, Clone)]
pub struct BigramInsertionModel {
    vocab_size: usize,
    smoothing: f64,
    /// Indexed by internal id: real tokens, then start, then end.
    left_totals: Vec<u64>,
    successors: Vec<Vec<(u32, u64)>>,
    counts: HashMap<(u32, u32), u64>,
}

impl BigramInsertionModel {
    fn start(&self) -> u32 {
        self.vocab_size as u32
    }

    fn end(&self) -> u32 {
        self.vocab_size as u32 + 1
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn count(&self, left: u32, right: u32) -> u64 {
        self.counts.get(&(left, right)).copied().unwrap_or(0)
    }

    /// Smoothed `P(right | left)` on internal ids.
    fn prob(&self, left: u32, right: u32) -> f64 {
        let k = self.smoothing;
        let denom = self.left_totals[left as usize] as f64 + k * (self.vocab_size + 1) as f64;
        if denom == 0.0 {
            return 0.0;
        }
        (self.count(left, right) as f64 + k) / denom
    }

    /// Gap distribution between internal ids `l` and `r`.
    pub fn gap(&self, l: u32, r: u32) -> GapDist {
        let no_insert = self.prob(l, r);
        let score = |w: u32| self.prob(l, w) * self.prob(w, r);
        let mut raw: Vec<(TokenId, f64)> = if self.smoothing > 0.0 {
            (0..self.vocab_size as u32)
                .map(|w| (TokenId(w), score(w)))
                .collect()
        } else {
            self.successors[l as usize]
                .iter()
                .filter(|&&(w, _)| (w as usize) < self.vocab_size)
                .map(|&(w, _)| (TokenId(w), score(w)))
                .collect()
        };
        raw.retain(|&(_, s)| s > 0.0);
        let z = no_insert + raw.iter().map(|&(_, s)| s).sum::<f64>();
        if z <= 0.0 {
            return GapDist::nothing(self.vocab_size);
        }
        for e in &mut raw {
            e.1 /= z;
        }
        raw.sort_by_key(|&(id, _)| id);
        let insert =
            SparseDist::new(raw, self.vocab_size).expect("normalized scores form a distribution");
        GapDist {
            no_insert: no_insert / z,
            insert,
        }
    }

    fn add_sequence(&mut self, seq: &[TokenId]) {
        let mut prev = self.start();
        for id in seq.iter().map(|t| t.0).chain(std::iter::once(self.end())) {
            *self.counts.entry((prev, id)).or_insert(0) += 1;
            self.left_totals[prev as usize] += 1;
            prev = id;
        }
    }

    fn finish(mut self) -> Self {
        let mut successors = vec![Vec::new(); self.vocab_size + 2];
        for (&(l, r), &c) in &self.counts {
            successors[l as usize].push((r, c));
        }
        for s in &mut successors {
            s.sort_unstable();
        }
        self.successors = successors;
        self
    }

    fn empty(vocab_size: usize, smoothing: f64) -> Result<Self, InsertionError> {
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(InsertionError::InvalidParameter(format!(
                "smoothing must be finite and non-negative, got {smoothing}"
            )));
        }
        Ok(Self {
            vocab_size,
            smoothing,
            left_totals: vec![0; vocab_size + 2],
            successors: Vec::new(),
            counts: HashMap::new(),
        })
    }
}

impl InsertionModel for BigramInsertionModel {
    fn predict_gaps(
        &self,
        _context: &[TokenId],
        tokens: &[TokenId],
    ) -> Result<Vec<GapDist>, InsertionError> {
        if let Some(&bad) = tokens.iter().find(|t| t.index() >= self.vocab_size) {
            return Err(InsertionError::UnknownToken(bad));
        }
        let bounds: Vec<u32> = std::iter::once(self.start())
            .chain(tokens.iter().map(|t| t.0))
            .chain(std::iter::once(self.end()))
            .collect();
        Ok(bounds
            .par_windows(2)
            .map(|w| self.gap(w[0], w[1]))
            .collect())
    }
}

fn check_ids(seq: &[TokenId], vocab_size: usize) -> Result<(), InsertionError> {
    match seq.iter().find(|t| t.index() >= vocab_size) {
        Some(&bad) => Err(InsertionError::UnknownToken(bad)),
        None => Ok(()),
    }
}

/// Counts bigrams (with boundary markers) over every sentence.
pub fn train_bigram_insertion(
    corpus: &[Vec<TokenId>],
    vocab_size: usize,
    smoothing: f64,
) -> Result<BigramInsertionModel, InsertionError> {
    if corpus.is_empty() {
        return Err(InsertionError::EmptyCorpus);
    }
    let mut model = BigramInsertionModel::empty(vocab_size, smoothing)?;
    for seq in corpus {
        check_ids(seq, vocab_size)?;
        model.add_sequence(seq);
    }
    Ok(model.finish())
}

/// Trains on `(coarse, fine)` stage pairs by counting bigrams over every
/// fine side. The coarsest level contributes no adjacency of its own.
pub fn train_bigram_insertion_from_pairs(
    pairs: &[(Vec<TokenId>, Vec<TokenId>)],
    vocab_size: usize,
    smoothing: f64,
) -> Result<BigramInsertionModel, InsertionError> {
    let fine: Vec<Vec<TokenId>> = pairs.iter().map(|(_, f)| f.clone()).collect();
    train_bigram_insertion(&fine, vocab_size, smoothing)
}
