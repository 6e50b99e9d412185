use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{LanguageModel, LmError, SparseDist, TokenId, Vocabulary};

/// First line of every serialized n-gram model.
pub const NGRAM_HEADER: &str = "HOLO-NGRAM v1";

/// Count-based n-gram model with add-k smoothing.
///
/// The longest seen context window (up to `order - 1` tokens) decides the
/// conditional. Shorter windows are tried when a window was never observed,
/// ending at the unigram distribution. Each level is a proper distribution
/// on its own, so no renormalization is needed after backing off.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramLm {
    vocab: Vocabulary,
    order: usize,
    smoothing: f64,
    unigrams: Vec<u64>,
    unigram_total: u64,
    /// context window -> successor -> count
    grams: BTreeMap<Vec<TokenId>, BTreeMap<TokenId, u64>>,
    context_totals: BTreeMap<Vec<TokenId>, u64>,
}

/// Trains an n-gram model on tokenized sentences. Sentences are independent:
/// no n-gram spans a sentence boundary.
pub fn train_ngram<S: AsRef<str>>(
    corpus: &[Vec<S>],
    order: usize,
    smoothing: f64,
) -> Result<NgramLm, LmError> {
    check_params(order, smoothing)?;
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(LmError::EmptyCorpus);
    }
    let mut vocab = Vocabulary::new();
    let encoded: Vec<Vec<TokenId>> = corpus
        .iter()
        .map(|s| s.iter().map(|t| vocab.insert(t.as_ref())).collect())
        .collect();
    let mut unigrams = vec![0u64; vocab.len()];
    let mut grams: BTreeMap<Vec<TokenId>, BTreeMap<TokenId, u64>> = BTreeMap::new();
    for sentence in &encoded {
        for (i, &tok) in sentence.iter().enumerate() {
            unigrams[tok.index()] += 1;
            for len in 1..order {
                if len > i {
                    break;
                }
                let ctx = sentence[i - len..i].to_vec();
                *grams.entry(ctx).or_default().entry(tok).or_insert(0) += 1;
            }
        }
    }
    Ok(NgramLm::assemble(vocab, order, smoothing, unigrams, grams))
}

fn check_params(order: usize, smoothing: f64) -> Result<(), LmError> {
    if order < 2 {
        return Err(LmError::InvalidParameter(format!(
            "order must be >= 2, got {order}"
        )));
    }
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(LmError::InvalidParameter(format!(
            "smoothing must be a finite value >= 0, got {smoothing}"
        )));
    }
    Ok(())
}

impl NgramLm {
    fn assemble(
        vocab: Vocabulary,
        order: usize,
        smoothing: f64,
        unigrams: Vec<u64>,
        grams: BTreeMap<Vec<TokenId>, BTreeMap<TokenId, u64>>,
    ) -> Self {
        let unigram_total = unigrams.iter().sum();
        let context_totals = grams
            .iter()
            .map(|(ctx, succ)| (ctx.clone(), succ.values().sum()))
            .collect();
        Self {
            vocab,
            order,
            smoothing,
            unigrams,
            unigram_total,
            grams,
            context_totals,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn unigram_count(&self, id: TokenId) -> u64 {
        self.unigrams.get(id.index()).copied().unwrap_or(0)
    }

    /// Count of `context` followed by `next`.
    pub fn count(&self, context: &[TokenId], next: TokenId) -> u64 {
        self.grams
            .get(context)
            .and_then(|s| s.get(&next))
            .copied()
            .unwrap_or(0)
    }

    fn smoothed(
        &self,
        counts: Option<&BTreeMap<TokenId, u64>>,
        total: u64,
    ) -> Result<SparseDist, LmError> {
        let v = self.vocab.len();
        let k = self.smoothing;
        let denom = total as f64 + k * v as f64;
        if denom <= 0.0 {
            return Ok(SparseDist::empty(v));
        }
        if k == 0.0 {
            let entries = match counts {
                Some(c) => c.iter().map(|(&id, &n)| (id, n as f64 / denom)).collect(),
                None => self
                    .unigrams
                    .iter()
                    .enumerate()
                    .map(|(i, &n)| (TokenId(i as u32), n as f64 / denom))
                    .collect(),
            };
            return SparseDist::new(entries, v);
        }
        let entries = (0..v)
            .map(|i| {
                let id = TokenId(i as u32);
                let n = match counts {
                    Some(c) => c.get(&id).copied().unwrap_or(0),
                    None => self.unigrams[i],
                };
                (id, (n as f64 + k) / denom)
            })
            .collect();
        SparseDist::new(entries, v)
    }

    /// Serializes to the versioned text format. Loading the output yields
    /// an identical model, and re-saving it yields identical bytes.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{NGRAM_HEADER}");
        let _ = writeln!(out, "order\t{}", self.order);
        let _ = writeln!(out, "smoothing\t{:?}", self.smoothing);
        let _ = writeln!(out, "vocab\t{}", self.vocab.len());
        for t in self.vocab.tokens() {
            let _ = writeln!(out, "{t}");
        }
        let _ = writeln!(out, "unigrams\t{}", self.unigrams.len());
        for c in &self.unigrams {
            let _ = writeln!(out, "{c}");
        }
        let n: usize = self.grams.values().map(BTreeMap::len).sum();
        let _ = writeln!(out, "grams\t{n}");
        for (ctx, succ) in &self.grams {
            for (next, count) in succ {
                let ids: Vec<String> = ctx
                    .iter()
                    .chain(Some(next))
                    .map(|t| t.0.to_string())
                    .collect();
                let _ = writeln!(out, "{}\t{count}", ids.join(" "));
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LmError> {
        for t in self.vocab.tokens() {
            if t.is_empty() || t.contains(['\n', '\r']) {
                return Err(LmError::InvalidParameter(format!(
                    "token {t:?} cannot be serialized"
                )));
            }
        }
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LmError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses the text format produced by [`NgramLm::to_text`].
    pub fn parse(text: &str) -> Result<Self, LmError> {
        let mut lines = Lines::new(text);
        let header = lines.next_line()?;
        if header != NGRAM_HEADER {
            return Err(lines.error(format!("expected header {NGRAM_HEADER:?}")));
        }
        let order: usize = lines.keyed("order")?;
        let smoothing: f64 = lines.keyed("smoothing")?;
        check_params(order, smoothing).map_err(|e| lines.error(e.to_string()))?;

        let n_vocab: usize = lines.keyed("vocab")?;
        let mut vocab = Vocabulary::new();
        for _ in 0..n_vocab {
            let tok = lines.next_line()?;
            if tok.is_empty() || vocab.id_of(tok).is_some() {
                return Err(lines.error(format!("empty or duplicate token {tok:?}")));
            }
            vocab.insert(tok);
        }

        let n_uni: usize = lines.keyed("unigrams")?;
        if n_uni != n_vocab {
            return Err(lines.error(format!("{n_uni} unigram counts for {n_vocab} tokens")));
        }
        let mut unigrams = Vec::with_capacity(n_vocab);
        for _ in 0..n_uni {
            let line = lines.next_line()?;
            unigrams.push(
                line.parse::<u64>()
                    .map_err(|e| lines.error(e.to_string()))?,
            );
        }
        if unigrams
            .iter()
            .try_fold(0u64, |acc, &c| acc.checked_add(c))
            .is_none()
        {
            return Err(lines.error("unigram counts overflow".into()));
        }

        let n_grams: usize = lines.keyed("grams")?;
        let mut grams: BTreeMap<Vec<TokenId>, BTreeMap<TokenId, u64>> = BTreeMap::new();
        for _ in 0..n_grams {
            let line = lines.next_line()?;
            let (ids, count) = line
                .split_once('\t')
                .ok_or_else(|| lines.error("expected '<ids>\\t<count>'".into()))?;
            let count: u64 = count
                .parse()
                .map_err(|e: std::num::ParseIntError| lines.error(e.to_string()))?;
            if count == 0 {
                return Err(lines.error("zero count".into()));
            }
            let ids: Vec<TokenId> = ids
                .split(' ')
                .map(|s| s.parse::<u32>().map(TokenId))
                .collect::<Result<_, _>>()
                .map_err(|e| lines.error(e.to_string()))?;
            if ids.len() < 2 || ids.len() > order || ids.iter().any(|id| id.index() >= n_vocab) {
                return Err(lines.error("gram has bad length or token id".into()));
            }
            let (next, ctx) = ids.split_last().expect("length checked");
            let succ = grams.entry(ctx.to_vec()).or_default();
            if succ.insert(*next, count).is_some() {
                return Err(lines.error("duplicate gram".into()));
            }
            if succ
                .values()
                .try_fold(0u64, |acc, &c| acc.checked_add(c))
                .is_none()
            {
                return Err(lines.error("gram counts overflow".into()));
            }
        }
        if let Some(extra) = lines.rest() {
            return Err(lines.error(format!("trailing content {extra:?}")));
        }
        Ok(Self::assemble(vocab, order, smoothing, unigrams, grams))
    }
}

struct Lines<'a> {
    inner: std::str::Lines<'a>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines(),
            line: 0,
        }
    }

    fn next_line(&mut self) -> Result<&'a str, LmError> {
        self.line += 1;
        self.inner
            .next()
            .ok_or_else(|| self.error("unexpected end of file".into()))
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, LmError>
    where
        T::Err: std::fmt::Display,
    {
        let line = self.next_line()?;
        let value = line
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix('\t'))
            .ok_or_else(|| self.error(format!("expected '{key}\\t<value>'")))?;
        value.parse().map_err(|e: T::Err| self.error(e.to_string()))
    }

    fn rest(&mut self) -> Option<&'a str> {
        self.inner.find(|l| !l.is_empty())
    }

    fn error(&self, msg: String) -> LmError {
        LmError::Parse {
            line: self.line,
            msg,
        }
    }
}

impl LanguageModel for NgramLm {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_token_dist(
        &self,
        context: &[TokenId],
        prefix: &[TokenId],
    ) -> Result<SparseDist, LmError> {
        self.vocab.check_ids(context)?;
        self.vocab.check_ids(prefix)?;
        let history: Vec<TokenId> = context.iter().chain(prefix).copied().collect();
        let longest = (self.order - 1).min(history.len());
        for len in (1..=longest).rev() {
            let window = &history[history.len() - len..];
            if let Some(succ) = self.grams.get(window) {
                return self.smoothed(Some(succ), self.context_totals[window]);
            }
        }
        self.smoothed(None, self.unigram_total)
    }
}
