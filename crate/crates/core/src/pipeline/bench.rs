use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{alloc, Dataset, Pipeline, PipelineError, RowError};
use crate::lm::whitespace_tokens;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub line: usize,
    pub support_size: usize,
    pub base_model_calls: usize,
    pub call_depth: usize,
    /// Reference length `N`: an autoregressive decode of the reference takes
    /// `N` sequential calls.
    pub ar_calls: usize,
    /// `N / (1 + |S|)`
    pub call_ratio: f64,
    /// `N / call_depth`
    pub depth_speedup: f64,
    pub insertion_stages: usize,
    pub wall_ms: f64,
    pub peak_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchAggregate {
    pub samples: usize,
    pub base_model_calls: usize,
    pub ar_calls: usize,
    pub mean_base_model_calls: f64,
    pub mean_ar_calls: f64,
    /// Total AR calls over total base-model calls.
    pub call_ratio: f64,
    pub mean_call_depth: f64,
    /// Total AR calls over total call depth.
    pub depth_speedup: f64,
    pub insertion_stages: usize,
    pub wall_ms: f64,
    pub max_peak_bytes: usize,
}

impl BenchAggregate {
    pub fn from_rows(rows: &[BenchRow]) -> Self {
        let n = rows.len();
        let calls: usize = rows.iter().map(|r| r.base_model_calls).sum();
        let ar: usize = rows.iter().map(|r| r.ar_calls).sum();
        let depth: usize = rows.iter().map(|r| r.call_depth).sum();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Self {
            samples: n,
            base_model_calls: calls,
            ar_calls: ar,
            mean_base_model_calls: ratio(calls, n),
            mean_ar_calls: ratio(ar, n),
            call_ratio: ratio(ar, calls),
            mean_call_depth: ratio(depth, n),
            depth_speedup: ratio(ar, depth),
            insertion_stages: rows.iter().map(|r| r.insertion_stages).sum(),
            wall_ms: rows.iter().map(|r| r.wall_ms).sum(),
            max_peak_bytes: rows.iter().map(|r| r.peak_bytes).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    /// Timings and memory are zeroed so the report is reproducible.
    pub deterministic: bool,
    /// False when no tracking allocator is installed; peak bytes are then 0.
    pub memory_tracked: bool,
    pub rows: Vec<BenchRow>,
    pub aggregate: BenchAggregate,
    /// Unparseable lines and rows without a reference.
    pub malformed: Vec<RowError>,
    /// Rows the pipeline could not process.
    pub failed: Vec<RowError>,
}

/// Runs the samples one at a time so wall time and peak memory belong to a
/// single sample.
pub fn bench(
    pipeline: &Pipeline,
    dataset: &Dataset,
    deterministic: bool,
) -> Result<BenchReport, PipelineError> {
    if dataset.rows.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let mut rows = Vec::new();
    let mut malformed = dataset.malformed.clone();
    let mut failed = Vec::new();
    for (line, row) in &dataset.rows {
        let Some(reference) = &row.reference else {
            malformed.push(RowError {
                line: *line,
                error: "reference missing".into(),
            });
            continue;
        };
        let n = whitespace_tokens(reference).len();
        alloc::reset_peak();
        let before = alloc::current_bytes();
        let start = Instant::now();
        let result = match pipeline.run_text(&row.context) {
            Ok(r) => r,
            Err(e) => {
                failed.push(RowError {
                    line: *line,
                    error: e.to_string(),
                });
                continue;
            }
        };
        let wall_ms = start.elapsed().as_secs_f64() * 1000.0;
        let peak = alloc::peak_bytes().saturating_sub(before);
        let c = &result.counters;
        rows.push(BenchRow {
            line: *line,
            support_size: c.support_size,
            base_model_calls: c.base_model_calls,
            call_depth: c.call_depth,
            ar_calls: n,
            call_ratio: n as f64 / c.base_model_calls as f64,
            depth_speedup: if c.call_depth == 0 {
                0.0
            } else {
                n as f64 / c.call_depth as f64
            },
            insertion_stages: c.insertion_stages,
            wall_ms: if deterministic { 0.0 } else { wall_ms },
            peak_bytes: if deterministic { 0 } else { peak },
        });
    }
    malformed.sort_by_key(|e| e.line);
    Ok(BenchReport {
        deterministic,
        memory_tracked: alloc::is_tracking(),
        aggregate: BenchAggregate::from_rows(&rows),
        rows,
        malformed,
        failed,
    })
}

pub fn render_bench(report: &BenchReport) -> String {
    let a = &report.aggregate;
    let mut out = String::new();
    out.push_str(
        "# Base-model calls per sample versus an autoregressive decode of the reference.\n",
    );
    out.push_str("# Memory is the allocator high-water mark, not accelerator memory.\n");
    let _ = writeln!(
        out,
        "{:>6} {:>8} {:>7} {:>6} {:>6} {:>10} {:>10} {:>7} {:>10} {:>12}",
        "line",
        "support",
        "calls",
        "depth",
        "AR",
        "calls/AR",
        "speedup",
        "stages",
        "wall_ms",
        "peak_bytes"
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:>6} {:>8} {:>7} {:>6} {:>6} {:>10.3} {:>10.2} {:>7} {:>10.3} {:>12}",
            r.line,
            r.support_size,
            r.base_model_calls,
            r.call_depth,
            r.ar_calls,
            r.ar_calls as f64 / r.base_model_calls as f64,
            r.depth_speedup,
            r.insertion_stages,
            r.wall_ms,
            r.peak_bytes
        );
    }
    let _ = writeln!(
        out,
        "samples {}  calls {}  AR calls {}  AR/calls {:.3}  depth speedup {:.2}  wall_ms {:.3}  max peak {}  malformed {}  failed {}",
        a.samples,
        a.base_model_calls,
        a.ar_calls,
        a.call_ratio,
        a.depth_speedup,
        a.wall_ms,
        a.max_peak_bytes,
        report.malformed.len(),
        report.failed.len()
    );
    out
}
