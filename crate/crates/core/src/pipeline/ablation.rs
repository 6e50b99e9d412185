use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, Pipeline, PipelineError, RowError};
use crate::eval::{compute_metrics, render_table, MetricsReport};
use crate::lm::{whitespace_tokens, TokenId};

pub const MASK_ON_LABEL: &str = "HOLO (mask-predict)";
pub const MASK_OFF_LABEL: &str = "HOLO (no mask-predict)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub tau: f64,
    pub mask_on: MetricsReport,
    pub mask_off: MetricsReport,
    pub outputs_on: Vec<String>,
    pub outputs_off: Vec<String>,
    pub skipped: Vec<RowError>,
}

impl AblationReport {
    pub fn table(&self) -> String {
        render_table(&[
            (MASK_ON_LABEL, &self.mask_on),
            (MASK_OFF_LABEL, &self.mask_off),
        ])
    }
}

struct Scored {
    report: MetricsReport,
    outputs: Vec<String>,
}

fn score(pipeline: &Pipeline, samples: &[(usize, &str, &str)]) -> Result<Scored, PipelineError> {
    let pool = pipeline.pool()?;
    let results: Vec<_> = pool.install(|| {
        samples
            .par_iter()
            .map(|(_, c, _)| pipeline.run_text(c))
            .collect()
    });
    let mut vocab = pipeline.vocab().clone();
    let mut refs = Vec::new();
    let mut hyps = Vec::new();
    let mut rel = 0.0;
    let mut outputs = Vec::new();
    for ((_, context, reference), result) in samples.iter().zip(results) {
        let result = result?;
        let hyp: Vec<TokenId> = result
            .output_tokens
            .iter()
            .map(|w| vocab.insert(w.as_str()))
            .collect();
        let (ctx, _) = pipeline.encode_context(context);
        rel += pipeline.ranker().score(&ctx, &hyp);
        refs.push(
            whitespace_tokens(reference)
                .iter()
                .map(|w| vocab.insert(w.as_str()))
                .collect(),
        );
        hyps.push(hyp);
        outputs.push(result.output);
    }
    let mut report = compute_metrics(&refs, &hyps, &**pipeline.lm())
        .map_err(|e| PipelineError::phase("eval", e))?;
    report.rel = Some(rel / samples.len() as f64);
    Ok(Scored { report, outputs })
}

/// Runs the dataset with the configured `tau` and with elimination turned
/// off (`tau = 0`), scoring both against the references. Rows without a
/// reference are skipped; any pipeline failure aborts.
pub fn evaluate_ablation(
    pipeline: &Pipeline,
    dataset: &Dataset,
) -> Result<AblationReport, PipelineError> {
    let mut skipped = dataset.malformed.clone();
    let mut samples = Vec::new();
    for (line, row) in &dataset.rows {
        match &row.reference {
            Some(r) => samples.push((*line, row.context.as_str(), r.as_str())),
            None => skipped.push(RowError {
                line: *line,
                error: "reference missing".into(),
            }),
        }
    }
    if samples.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    skipped.sort_by_key(|e| e.line);
    let tau = pipeline.config().tau;
    let on = score(pipeline, &samples)?;
    let mut off_config = pipeline.config().clone();
    off_config.tau = 0.0;
    let off = score(&pipeline.with_config(off_config)?, &samples)?;
    Ok(AblationReport {
        tau,
        mask_on: on.report,
        mask_off: off.report,
        outputs_on: on.outputs,
        outputs_off: off.outputs,
        skipped,
    })
}
