use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::lm::{LanguageModel, TokenId};

/// Per-token probability floor for perplexity, so a single unseen token
/// cannot make the value infinite.
pub const MIN_TOKEN_PROB: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextMetrics {
    pub f1: f64,
    pub rouge_l: f64,
    pub bleu2: f64,
    pub bleu4: f64,
    pub distinct2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sample_count: usize,
    pub f1: f64,
    pub rouge_l: f64,
    pub bleu2: f64,
    pub bleu4: f64,
    pub distinct2: f64,
    pub ppl: f64,
    /// Mean ranker score of the hypotheses given their contexts, if known.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rel: Option<f64>,
}

fn bag(tokens: &[TokenId]) -> HashMap<TokenId, usize> {
    let mut m = HashMap::new();
    for &t in tokens {
        *m.entry(t).or_insert(0) += 1;
    }
    m
}

fn clipped_overlap(hyp: &[TokenId], reference: &[TokenId]) -> usize {
    let r = bag(reference);
    bag(hyp)
        .into_iter()
        .map(|(t, c)| c.min(r.get(&t).copied().unwrap_or(0)))
        .sum()
}

fn check(references: &[Vec<TokenId>], hypotheses: &[Vec<TokenId>]) -> Result<(), EvalError> {
    if references.len() != hypotheses.len() {
        return Err(EvalError::LengthMismatch {
            references: references.len(),
            hypotheses: hypotheses.len(),
        });
    }
    if references.is_empty() {
        return Err(EvalError::NoSamples);
    }
    Ok(())
}

/// Corpus unigram F1 from pooled clipped overlap counts.
pub fn unigram_f1(references: &[Vec<TokenId>], hypotheses: &[Vec<TokenId>]) -> f64 {
    let overlap: usize = references
        .iter()
        .zip(hypotheses)
        .map(|(r, h)| clipped_overlap(h, r))
        .sum();
    let hyp_len: usize = hypotheses.iter().map(Vec::len).sum();
    let ref_len: usize = references.iter().map(Vec::len).sum();
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / hyp_len as f64;
    let r = overlap as f64 / ref_len as f64;
    2.0 * p * r / (p + r)
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// LCS F-measure in the `β → ∞` limit, i.e. pooled LCS recall
/// `Σ LCS / Σ |reference|`.
pub fn rouge_l(references: &[Vec<TokenId>], hypotheses: &[Vec<TokenId>]) -> f64 {
    let lcs: usize = references
        .iter()
        .zip(hypotheses)
        .map(|(r, h)| lcs_len(h, r))
        .sum();
    let ref_len: usize = references.iter().map(Vec::len).sum();
    if ref_len == 0 {
        return 0.0;
    }
    lcs as f64 / ref_len as f64
}

fn ngrams(tokens: &[TokenId], n: usize) -> HashMap<&[TokenId], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Corpus BLEU up to `max_n` with uniform weights and the standard brevity
/// penalty. Precisions for `n ≥ 2` use add-one smoothing; the unigram
/// precision is left unsmoothed, so no shared token means 0.
pub fn bleu(references: &[Vec<TokenId>], hypotheses: &[Vec<TokenId>], max_n: usize) -> f64 {
    let mut matches = vec![0usize; max_n + 1];
    let mut totals = vec![0usize; max_n + 1];
    for (r, h) in references.iter().zip(hypotheses) {
        for n in 1..=max_n {
            let rn = ngrams(r, n);
            for (g, c) in ngrams(h, n) {
                matches[n] += c.min(rn.get(g).copied().unwrap_or(0));
                totals[n] += c;
            }
        }
    }
    let hyp_len: usize = hypotheses.iter().map(Vec::len).sum();
    let ref_len: usize = references.iter().map(Vec::len).sum();
    if hyp_len == 0 || matches[1] == 0 {
        return 0.0;
    }
    let mut log_sum = (matches[1] as f64 / totals[1] as f64).ln();
    for n in 2..=max_n {
        log_sum += ((matches[n] + 1) as f64 / (totals[n] + 1) as f64).ln();
    }
    let bp = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    bp * (log_sum / max_n as f64).exp()
}

/// Distinct bigrams over all bigrams of all hypotheses.
pub fn distinct2(hypotheses: &[Vec<TokenId>]) -> f64 {
    let mut seen = HashSet::new();
    let mut total = 0usize;
    for h in hypotheses {
        for w in h.windows(2) {
            seen.insert(w);
            total += 1;
        }
    }
    if total == 0 {
        return 0.0;
    }
    seen.len() as f64 / total as f64
}

pub fn text_metrics(
    references: &[Vec<TokenId>],
    hypotheses: &[Vec<TokenId>],
) -> Result<TextMetrics, EvalError> {
    check(references, hypotheses)?;
    Ok(TextMetrics {
        f1: unigram_f1(references, hypotheses),
        rouge_l: rouge_l(references, hypotheses),
        bleu2: bleu(references, hypotheses, 2),
        bleu4: bleu(references, hypotheses, 4),
        distinct2: distinct2(hypotheses),
    })
}

/// `exp(-mean log p)` over every hypothesis token, each scored left to
/// right with an empty context. Probabilities are floored at
/// [`MIN_TOKEN_PROB`]. No tokens at all gives 1.
pub fn perplexity<L: LanguageModel + ?Sized>(
    lm: &L,
    hypotheses: &[Vec<TokenId>],
) -> Result<f64, EvalError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for h in hypotheses {
        for i in 0..h.len() {
            let p = lm.next_token_dist(&[], &h[..i])?.prob(h[i]);
            sum += p.max(MIN_TOKEN_PROB).ln();
            count += 1;
        }
    }
    if count == 0 {
        return Ok(1.0);
    }
    Ok((-sum / count as f64).exp().max(1.0))
}

pub fn compute_metrics<L: LanguageModel + ?Sized>(
    references: &[Vec<TokenId>],
    hypotheses: &[Vec<TokenId>],
    lm: &L,
) -> Result<MetricsReport, EvalError> {
    let t = text_metrics(references, hypotheses)?;
    Ok(MetricsReport {
        sample_count: references.len(),
        f1: t.f1,
        rouge_l: t.rouge_l,
        bleu2: t.bleu2,
        bleu4: t.bleu4,
        distinct2: t.distinct2,
        ppl: perplexity(lm, hypotheses)?,
        rel: None,
    })
}

/// Fixed-width table, one row per system. The five text metrics are shown
/// as percentages.
pub fn render_table(rows: &[(&str, &MetricsReport)]) -> String {
    let mut out = String::new();
    out.push_str("# PPL: perplexity under the backend language model, not GPT-2.\n");
    out.push_str("# Rel.: mean lexical ranker score, standing in for a learned relevance model.\n");
    let name_w = rows
        .iter()
        .map(|(n, _)| n.len())
        .max()
        .unwrap_or(0)
        .max("Method".len());
    let _ = writeln!(
        out,
        "{:<name_w$} {:>8} {:>8} {:>8} {:>8} {:>10} {:>9} {:>6}",
        "Method", "F1", "Rouge-L", "BLEU-2", "BLEU-4", "Distinct-2", "PPL", "Rel."
    );
    for (name, r) in rows {
        let rel = r.rel.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        let _ = writeln!(
            out,
            "{:<name_w$} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>10.2} {:>9.2} {:>6}",
            name,
            r.f1 * 100.0,
            r.rouge_l * 100.0,
            r.bleu2 * 100.0,
            r.bleu4 * 100.0,
            r.distinct2 * 100.0,
            r.ppl,
            rel
        );
    }
    out
}
