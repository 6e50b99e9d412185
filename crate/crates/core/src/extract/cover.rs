use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{ExtractError, KeywordExtractor};
use crate::lm::{LanguageModel, TokenId};

/// Default candidate fraction: the top 1% of the vocabulary.
pub const DEFAULT_TOP_FRACTION: f64 = 0.01;

/// Outcome of a cover-rate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub top_fraction: f64,
    /// `⌈top_fraction · |V|⌉`
    pub candidate_count: usize,
    pub samples: usize,
    /// Samples whose reference yielded no keywords.
    pub skipped_empty: usize,
    pub keywords_total: usize,
    pub keywords_covered: usize,
    pub cover_rate: f64,
}

/// Fraction of reference keywords that already rank among the top
/// `⌈top_fraction·|V|⌉` tokens of the first decoding step.
pub fn cover_rate<L: LanguageModel + ?Sized>(
    lm: &L,
    dataset: &[(Vec<TokenId>, Vec<TokenId>)],
    extractor: &dyn KeywordExtractor,
    top_fraction: f64,
) -> Result<CoverReport, ExtractError> {
    if dataset.is_empty() {
        return Err(ExtractError::EmptyDataset);
    }
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(ExtractError::InvalidParameter(format!(
            "top fraction must be in (0,1], got {top_fraction}"
        )));
    }
    let candidate_count = ((top_fraction * lm.vocab().len() as f64).ceil() as usize).max(1);
    let mut report = CoverReport {
        top_fraction,
        candidate_count,
        samples: dataset.len(),
        skipped_empty: 0,
        keywords_total: 0,
        keywords_covered: 0,
        cover_rate: 0.0,
    };
    for (context, reference) in dataset {
        let keywords = extractor.extract(reference);
        if keywords.is_empty() {
            report.skipped_empty += 1;
            continue;
        }
        let dist = lm
            .next_token_dist(context, &[])
            .map_err(|source| ExtractError::Backend {
                token: None,
                source,
            })?;
        let candidates: HashSet<TokenId> = dist
            .ranked()
            .into_iter()
            .take(candidate_count)
            .map(|(id, _)| id)
            .collect();
        report.keywords_total += keywords.len();
        report.keywords_covered += keywords.iter().filter(|k| candidates.contains(k)).count();
    }
    if report.keywords_total > 0 {
        report.cover_rate = report.keywords_covered as f64 / report.keywords_total as f64;
    }
    Ok(report)
}
