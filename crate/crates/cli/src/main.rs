use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use holo_core::chain::{chain_log_probability, KeywordChain};
use holo_core::corpus::{
    decompose_corpus, stage_pairs_to_jsonl, LexiconTagger, NullTagger, PosTagger, PosWeights,
    TopQuartileKeywords,
};
use holo_core::eval::{render_geval_prompt, GevalClient, GevalConfig};
use holo_core::extract::{cover_rate, ContentWordExtractor, StopwordFilter, DEFAULT_TOP_FRACTION};
use holo_core::lm::{train_ngram, LanguageModel, TokenId, Vocabulary};
use holo_core::pipeline::alloc::PeakAlloc;
use holo_core::pipeline::{
    bench, evaluate_ablation, parse_dataset, read_corpus, render_bench, Dataset, Pipeline,
    PipelineConfig,
};

#[global_allocator]
static ALLOC: PeakAlloc = PeakAlloc;

#[derive(Parser)]
#[command(
    name = "holo",
    version,
    about = "Keyword-first constrained text generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an n-gram backend and optionally write insertion stage pairs
    TrainLm(TrainLmArgs),
    /// Markov keyword extraction for one context
    Extract(ContextArgs),
    /// Keyword chains for one context
    Chains(ContextArgs),
    /// Constrained generation from a given keyword chain
    Generate(GenerateArgs),
    /// Full pipeline on one context or a JSONL dataset
    Pipeline(PipelineArgs),
    /// Model-call and timing benchmark against autoregressive decoding
    Bench(ReportArgs),
    /// Mask-predict on/off evaluation
    Eval(ReportArgs),
    /// Share of reference keywords found in the first-step top fraction
    CoverRate(CoverArgs),
    /// Effective configuration and model summary
    Inspect(InspectArgs),
    /// Render (and optionally score) a G-Eval prompt
    GevalPrompt(GevalArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file; relative paths inside resolve against its directory
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set tau=0.3` or `--set backend.order=3`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct ContextArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    context: String,
}

#[derive(Args)]
struct TrainLmArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, default_value_t = 0.0)]
    smoothing: f64,
    #[arg(long)]
    output: PathBuf,
    /// Also decompose the corpus and write stage pairs as JSONL
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// `token<TAB>tag` lexicon for part-of-speech weights
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    stages: usize,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Space-separated keyword chain
    #[arg(long)]
    chain: String,
    /// Context used to score the chain; without it the chain scores 0
    #[arg(long)]
    context: Option<String>,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, conflicts_with = "input")]
    context: Option<String>,
    /// JSONL dataset, one `{"context": ...}` per line
    #[arg(long)]
    input: Option<PathBuf>,
    /// Write JSONL here instead of stdout
    #[arg(long, requires = "input")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    input: PathBuf,
    /// Human-readable table
    #[arg(long)]
    report: Option<PathBuf>,
    /// Zero timings and memory so the output is reproducible (bench only)
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct CoverArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOP_FRACTION)]
    top_fraction: f64,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Also dump the Markov estimate for this context
    #[arg(long)]
    context: Option<String>,
}

#[derive(Args)]
struct GevalArgs {
    #[arg(long, default_value = "informativeness")]
    aspect: String,
    #[arg(long)]
    history: String,
    #[arg(long)]
    response: String,
    /// Send the prompt to the scoring endpoint (needs HOLO_LLM_TOKEN)
    #[arg(long)]
    score: bool,
    /// Scoring endpoint URL
    #[arg(long)]
    url: Option<String>,
}

/// Usage problems exit 1; everything else is a data error and exits 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn load_config(args: &ConfigArgs) -> Result<PipelineConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut c = PipelineConfig::from_json(&text)?;
            c.resolve_paths(path.parent().unwrap_or(Path::new(".")));
            c
        }
        None => PipelineConfig::default(),
    };
    for o in &args.overrides {
        config.apply_override(o)?;
    }
    Ok(config)
}

fn load_pipeline(args: &ConfigArgs) -> Result<Pipeline> {
    Ok(Pipeline::load(load_config(args)?)?)
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_dataset(&text))
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_report(path: &Option<PathBuf>, text: &str) -> Result<()> {
    if let Some(p) = path {
        fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn encode_known(vocab: &Vocabulary, text: &str) -> Result<Vec<TokenId>> {
    let words = holo_core::lm::whitespace_tokens(text);
    Ok(vocab.encode(&words)?)
}

fn train_lm(a: TrainLmArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let lm = train_ngram(&corpus, a.order, a.smoothing)?;
    lm.save(&a.output)?;
    let mut summary = json!({
        "model": a.output,
        "order": lm.order(),
        "smoothing": lm.smoothing(),
        "vocab_size": lm.vocab().len(),
        "sentences": corpus.len(),
    });
    if let Some(path) = a.pairs {
        let vocab = lm.vocab();
        let encoded: Vec<Vec<TokenId>> = corpus
            .iter()
            .map(|s| vocab.encode(s))
            .collect::<Result<_, _>>()?;
        let tagger: Box<dyn PosTagger> = match &a.lexicon {
            Some(p) => {
                let text =
                    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Box::new(LexiconTagger::parse(&text)?.bind(vocab))
            }
            None => Box::new(NullTagger),
        };
        let pairs = decompose_corpus(
            &encoded,
            &*tagger,
            &TopQuartileKeywords,
            &PosWeights::default(),
            a.stages,
        )?;
        fs::write(&path, stage_pairs_to_jsonl(&pairs, vocab))
            .with_context(|| format!("writing {}", path.display()))?;
        summary["pairs"] = json!(path);
        summary["pair_count"] = json!(pairs.len());
    }
    print_json(&summary)
}

fn extract(a: ContextArgs) -> Result<()> {
    let p = load_pipeline(&a.config)?;
    let (ctx, unknown) = p.encode_context(&a.context);
    let ext = p.extract(&ctx)?;
    print_json(&json!({
        "context": p.words(&ctx),
        "unknown_context_tokens": unknown,
        "support": p.words(&ext.estimate.support.tokens),
        "support_mass": ext.estimate.support.cumulative_mass,
        "keywords": p.keyword_records(&ext.keywords),
        "base_model_calls": ext.calls.calls,
        "call_depth": ext.calls.depth,
        "ledger": ext.estimate.ledger,
    }))
}

fn chains(a: ContextArgs) -> Result<()> {
    let p = load_pipeline(&a.config)?;
    let (ctx, _) = p.encode_context(&a.context);
    let ext = p.extract(&ctx)?;
    let all = p.chains(&ext)?;
    let records: Vec<_> = all
        .iter()
        .map(|c| json!({"tokens": p.words(&c.tokens), "score": c.score, "log_score": c.log_score}))
        .collect();
    print_json(&json!({
        "keywords": p.keyword_records(&ext.keywords),
        "chains": records,
        "picked": all.len().min(p.config().z),
    }))
}

fn generate(a: GenerateArgs) -> Result<()> {
    let p = load_pipeline(&a.config)?;
    let tokens = encode_known(p.vocab(), &a.chain)?;
    if tokens.is_empty() {
        bail!(Usage("--chain must name at least one token".into()));
    }
    let (ctx, log_score) = match &a.context {
        Some(text) => {
            let (ctx, _) = p.encode_context(text);
            let ext = p.extract(&ctx)?;
            let log = chain_log_probability(&tokens, &ext.estimate, &ext.marginal)?;
            (ctx, log)
        }
        None => (Vec::new(), 0.0),
    };
    let chain = KeywordChain::from_log(tokens, log_score);
    let seq = p.generate(&ctx, &chain)?;
    print_json(&p.generation_record(0, &seq))
}

fn pipeline(a: PipelineArgs) -> Result<bool> {
    let p = load_pipeline(&a.config)?;
    if let Some(text) = a.context {
        print_json(&p.run_text(&text)?)?;
        return Ok(true);
    }
    let Some(input) = a.input else {
        bail!(Usage("pass --context or --input".into()));
    };
    let data = load_dataset(&input)?;
    let contexts: Vec<String> = data.rows.iter().map(|(_, r)| r.context.clone()).collect();
    let results = p.run_batch(&contexts)?;
    // Output keeps input order; bad lines get an error record in place.
    let mut lines: Vec<(usize, String)> = Vec::new();
    let mut ok = data.malformed.is_empty();
    for e in &data.malformed {
        lines.push((
            e.line,
            json!({"line": e.line, "error": e.error}).to_string(),
        ));
    }
    for ((line, _), r) in data.rows.iter().zip(results) {
        let text = match r {
            Ok(res) => serde_json::to_string(&res)?,
            Err(e) => {
                ok = false;
                json!({"line": line, "error": e.to_string()}).to_string()
            }
        };
        lines.push((*line, text));
    }
    lines.sort_by_key(|(l, _)| *l);
    let mut body = String::new();
    for (_, l) in lines {
        body.push_str(&l);
        body.push('\n');
    }
    match a.output {
        Some(path) => {
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?
        }
        None => io::stdout().lock().write_all(body.as_bytes())?,
    }
    Ok(ok)
}

fn bench_cmd(a: ReportArgs) -> Result<()> {
    let p = load_pipeline(&a.config)?;
    let report = bench(&p, &load_dataset(&a.input)?, a.deterministic)?;
    write_report(&a.report, &render_bench(&report))?;
    print_json(&report)
}

fn eval_cmd(a: ReportArgs) -> Result<()> {
    let p = load_pipeline(&a.config)?;
    let report = evaluate_ablation(&p, &load_dataset(&a.input)?)?;
    write_report(&a.report, &report.table())?;
    print_json(&report)
}

fn cover_cmd(a: CoverArgs) -> Result<()> {
    let p = load_pipeline(&a.config)?;
    let data = load_dataset(&a.input)?;
    let mut pairs = Vec::new();
    let mut dropped_reference_tokens = 0;
    for (_, row) in &data.rows {
        let Some(reference) = &row.reference else {
            continue;
        };
        let (ctx, _) = p.encode_context(&row.context);
        let (refs, unknown) = p.encode_context(reference);
        dropped_reference_tokens += unknown.len();
        pairs.push((ctx, refs));
    }
    let extractor = ContentWordExtractor {
        filter: StopwordFilter::with_defaults(p.vocab()),
    };
    let report = cover_rate(&**p.lm(), &pairs, &extractor, a.top_fraction)?;
    print_json(&json!({
        "report": report,
        "rows_without_reference": data.rows.len() - pairs.len(),
        "malformed": data.malformed,
        "dropped_reference_tokens": dropped_reference_tokens,
    }))
}

fn inspect(a: InspectArgs) -> Result<()> {
    let p = load_pipeline(&a.config)?;
    let mut out = json!({
        "config": p.config(),
        "vocab_size": p.vocab().len(),
    });
    if let Some(text) = a.context {
        let (ctx, _) = p.encode_context(&text);
        let ext = p.extract(&ctx)?;
        out["markov"] = ext.estimate.debug_json(p.vocab());
    }
    print_json(&out)
}

fn geval(a: GevalArgs) -> Result<()> {
    let prompt = render_geval_prompt(&a.aspect, &a.history, &a.response)
        .map_err(|e| anyhow!(Usage(e.to_string())))?;
    let mut out = json!({"aspect": a.aspect.to_lowercase(), "prompt": prompt});
    if a.score {
        let mut config = GevalConfig {
            enabled: true,
            ..GevalConfig::default()
        };
        if let Some(url) = a.url {
            config.url = url;
        }
        out["score"] = json!(GevalClient::new(config)?.score(&prompt)?);
    }
    print_json(&out)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::TrainLm(a) => train_lm(a)?,
        Command::Extract(a) => extract(a)?,
        Command::Chains(a) => chains(a)?,
        Command::Generate(a) => generate(a)?,
        Command::Pipeline(a) => return pipeline(a),
        Command::Bench(a) => bench_cmd(a)?,
        Command::Eval(a) => eval_cmd(a)?,
        Command::CoverRate(a) => cover_cmd(a)?,
        Command::Inspect(a) => inspect(a)?,
        Command::GevalPrompt(a) => geval(a)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
