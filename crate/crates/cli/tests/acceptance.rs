//! Acceptance harness: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). The process fails when any
//! criterion fails, except those listed in `KNOWN_FAILURES`, which are
//! reported as FAIL but analysed in the README.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use holo_core::chain::{build_chains, chain_order, ChainParams, KeywordChain};
use holo_core::corpus::{
    build_tfidf, decompose_corpus, importance_scores, stage_decompose, LexiconTagger, NullTagger,
    PosWeights, TopQuartileKeywords, NORM_MAX, NORM_MIN,
};
use holo_core::eval::LexicalRanker;
use holo_core::eval::{bleu, distinct2, rouge_l, text_metrics, unigram_f1};
use holo_core::extract::{
    build_markov, cover_rate, select_keywords, top_p_support, word_marginal, ContentWordExtractor,
    StopwordFilter, DEFAULT_TOP_FRACTION,
};
use holo_core::insertion::{
    generate_constrained, is_subsequence, train_bigram_insertion_from_pairs, GapDist,
    InsertionError, InsertionModel,
};
use holo_core::lm::{
    exact_position_marginals, train_ngram, CountingLm, LanguageModel, SparseDist, TokenId,
    ToyMarkovLm, Vocabulary,
};
use holo_core::pipeline::{load_backend, load_insertion, parse_dataset, Pipeline, PipelineConfig};

const KNOWN_FAILURES: &[&str] = &["C10"];

type Outcome = Result<String, String>;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn golden_config() -> PipelineConfig {
    let text = std::fs::read_to_string(data("golden_config.json")).unwrap();
    let mut c = PipelineConfig::from_json(&text).unwrap();
    c.resolve_paths(&data(""));
    c
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn vocab(n: usize) -> Vocabulary {
    Vocabulary::from_tokens((0..n).map(|i| format!("w{i}"))).unwrap()
}

fn random_dist(rng: &mut ChaCha8Rng, n: usize, zeros: bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            if zeros && rng.gen_bool(0.25) {
                0.0
            } else {
                rng.gen_range(0.01..1.0f64).powi(2)
            }
        })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[rng.gen_range(0..n)] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Strictly positive initial distribution, columns with occasional zeros.
fn random_toy(rng: &mut ChaCha8Rng, n: usize) -> ToyMarkovLm {
    let pi = random_dist(rng, n, false);
    let cols = (0..n).map(|_| random_dist(rng, n, true)).collect();
    ToyMarkovLm::from_dense(vocab(n), pi, cols).unwrap()
}

fn c1_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let n = rng.gen_range(2..=12);
        let horizon = rng.gen_range(1..=6);
        let lm = random_toy(&mut rng, n);
        let exact = exact_position_marginals(&lm, &[], horizon).map_err(|e| e.to_string())?;
        let est = build_markov(&lm, &[], 1.0)
            .and_then(|e| e.propagate(horizon))
            .map_err(|e| e.to_string())?;
        for (t, state) in est.states.iter().enumerate() {
            for id in lm.vocab().ids() {
                let got = est.index_of(id).map_or(0.0, |k| state[k]);
                let err = (got - exact[t].prob(id)).abs();
                worst = worst.max(err);
                ensure(err <= 1e-9, || {
                    format!("fixture {case}: step {t} token {id:?} off by {err:e}")
                })?;
            }
        }
        let marginal = word_marginal(&est).map_err(|e| e.to_string())?;
        for id in lm.vocab().ids() {
            let want = exact.iter().map(|d| d.prob(id)).sum::<f64>() / horizon as f64;
            let err = (marginal.prob(id) - want).abs();
            worst = worst.max(err);
            ensure(err <= 1e-9, || {
                format!("fixture {case}: marginal of {id:?} off by {err:e}")
            })?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "200 fixtures, max error {worst:.1e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn c2_truncation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut max_slack = f64::INFINITY;
    for case in 0..200 {
        let p = if case % 2 == 0 { 0.7 } else { 0.9 };
        let n = rng.gen_range(3..=12);
        let lm = random_toy(&mut rng, n);
        let exact = exact_position_marginals(&lm, &[], 2).map_err(|e| e.to_string())?;
        let est = build_markov(&lm, &[], p)
            .and_then(|e| e.propagate(2))
            .map_err(|e| e.to_string())?;
        let step2 = &est.states[1];
        let mut missing_in_support = 0.0;
        for (k, &id) in est.support.tokens.iter().enumerate() {
            let gap = exact[1].prob(id) - step2[k];
            ensure(gap >= -1e-12, || {
                format!("fixture {case}: {id:?} over-estimated by {:e}", -gap)
            })?;
            missing_in_support += gap;
        }
        // Mass the estimate carries, counting what it tracked as leaving S.
        let carried: f64 = step2.iter().sum::<f64>() + est.ledger.step_leak[1];
        let missing = 1.0 - carried;
        for m in [missing_in_support, missing] {
            ensure(m <= 1.0 - p + 1e-9, || {
                format!("fixture {case}: missing mass {m} exceeds {}", 1.0 - p)
            })?;
            max_slack = max_slack.min(1.0 - p - m);
        }
    }
    Ok(format!(
        "200 fixtures, smallest slack to the 1-p bound {max_slack:.2e}"
    ))
}

fn c3_top_p() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..1000 {
        let n = rng.gen_range(1..=40);
        let probs = random_dist(&mut rng, n, true);
        let p = if rng.gen_bool(0.1) {
            1.0
        } else {
            rng.gen_range(0.05..1.0)
        };
        let dist = SparseDist::from_dense(&probs).map_err(|e| e.to_string())?;
        let s = top_p_support(&dist, p).map_err(|e| e.to_string())?;
        let mass: f64 = s.tokens.iter().map(|t| probs[t.index()]).sum();
        ensure(mass + 1e-12 >= p, || {
            format!("case {case}: mass {mass} < p {p}")
        })?;
        if p < 1.0 {
            let smallest = s
                .tokens
                .iter()
                .map(|t| probs[t.index()])
                .fold(f64::INFINITY, f64::min);
            ensure(mass - smallest + 1e-12 < p, || {
                format!("case {case}: dropping the smallest member still reaches {p}")
            })?;
            // The support must be the most probable tokens.
            let outside_max = (0..n)
                .filter(|&i| !s.contains(TokenId(i as u32)))
                .map(|i| probs[i])
                .fold(0.0, f64::max);
            ensure(outside_max <= smallest, || {
                format!("case {case}: skipped a heavier token")
            })?;
        }
    }
    Ok("1000 distributions".into())
}

/// Best maximal chain by exhaustive search, same growth rules as the beam.
fn brute_force(
    pool: &[TokenId],
    lm: &ToyMarkovLm,
    marginal: &SparseDist,
    max_len: usize,
) -> Option<KeywordChain> {
    fn go(
        chain: &mut Vec<TokenId>,
        score: f64,
        pool: &[TokenId],
        lm: &ToyMarkovLm,
        marginal: &SparseDist,
        max_len: usize,
        best: &mut Option<KeywordChain>,
    ) {
        let mut grew = false;
        if chain.len() < max_len {
            let last = *chain.last().unwrap();
            for &t in pool {
                if chain.contains(&t) {
                    continue;
                }
                let next = score * marginal.prob(t) * lm.transition(last, t);
                if next > 0.0 {
                    grew = true;
                    chain.push(t);
                    go(chain, next, pool, lm, marginal, max_len, best);
                    chain.pop();
                }
            }
        }
        if !grew {
            let c = KeywordChain {
                tokens: chain.clone(),
                score,
                log_score: score.ln(),
            };
            if best.as_ref().is_none_or(|b| chain_order(&c, b).is_lt()) {
                *best = Some(c);
            }
        }
    }
    let mut best = None;
    for &t in pool {
        let s = lm.pi()[t.index()];
        if s > 0.0 {
            go(&mut vec![t], s, pool, lm, marginal, max_len, &mut best);
        }
    }
    best
}

fn c4_chains() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    for case in 0..200 {
        let n = rng.gen_range(2..=9);
        let lm = random_toy(&mut rng, n);
        let est = build_markov(&lm, &[], 1.0)
            .and_then(|e| e.propagate(rng.gen_range(1..=6)))
            .map_err(|e| e.to_string())?;
        let marginal = word_marginal(&est).map_err(|e| e.to_string())?;
        let k = rng.gen_range(1..=7);
        let keywords = select_keywords(&marginal, &est.support, k);
        let max_len = rng.gen_range(1..=7);
        let params = ChainParams {
            max_len,
            beam_k: keywords.len(),
            threshold: 0.0,
            ..ChainParams::default()
        };
        let chains = build_chains(&keywords, &est, &marginal, &params);
        for c in &chains {
            let mut want = lm.pi()[c.tokens[0].index()];
            for w in c.tokens.windows(2) {
                want *= marginal.prob(w[1]) * lm.transition(w[0], w[1]);
            }
            let rel = (c.score - want).abs() / want.abs().max(f64::MIN_POSITIVE);
            ensure(rel <= 1e-12, || {
                format!(
                    "fixture {case}: chain score {} vs {want} (rel {rel:e})",
                    c.score
                )
            })?;
            checked += 1;
        }
        let pool: Vec<TokenId> = keywords.ids().collect();
        let brute = brute_force(&pool, &lm, &marginal, max_len);
        match (chains.first(), brute) {
            (Some(b), Some(w)) => {
                let rel = (b.score - w.score).abs() / w.score;
                ensure(b.tokens == w.tokens || rel <= 1e-12, || {
                    format!(
                        "fixture {case}: beam best {:?} ({}) vs brute {:?} ({})",
                        b.tokens, b.score, w.tokens, w.score
                    )
                })?;
            }
            (None, None) => {}
            (a, b) => return Err(format!("fixture {case}: beam {a:?} vs brute {b:?}")),
        }
    }
    Ok(format!(
        "200 fixtures, {checked} chain scores recomputed, beam best = exhaustive best"
    ))
}

fn golden_pipeline_parts() -> (
    PipelineConfig,
    Arc<dyn LanguageModel>,
    Arc<dyn InsertionModel>,
) {
    let config = golden_config();
    let (lm, corpus) = load_backend(&config.backend).unwrap();
    let ins = load_insertion(&config.insertion, lm.vocab(), corpus.as_deref()).unwrap();
    (config, lm, ins)
}

fn c5_calls() -> Outcome {
    let start = Instant::now();
    let (config, lm, ins) = golden_pipeline_parts();
    let counted = Arc::new(CountingLm::new(lm.clone()));
    let ranker = Arc::new(LexicalRanker::with_filter(StopwordFilter::with_defaults(
        lm.vocab(),
    )));
    let pipeline =
        Pipeline::new(config.clone(), counted.clone(), ins, ranker).map_err(|e| e.to_string())?;
    let dataset = parse_dataset(&std::fs::read_to_string(data("golden_dataset.jsonl")).unwrap());
    ensure(
        dataset.rows.len() == 20 && dataset.malformed.is_empty(),
        || "golden dataset is not 20 rows".into(),
    )?;
    let (mut calls, mut ar) = (0, 0);
    for (line, row) in &dataset.rows {
        counted.reset();
        let result = pipeline
            .run_text(&row.context)
            .map_err(|e| format!("line {line}: {e}"))?;
        let stats = counted.stats();
        let (ctx, _) = pipeline.encode_context(&row.context);
        let first = lm.next_token_dist(&ctx, &[]).map_err(|e| e.to_string())?;
        let s = top_p_support(&first, config.p)
            .map_err(|e| e.to_string())?
            .len();
        ensure(stats.calls == 1 + s, || {
            format!("line {line}: {} calls for |S| = {s}", stats.calls)
        })?;
        ensure(stats.depth == 2, || {
            format!("line {line}: depth {}", stats.depth)
        })?;
        ensure(result.counters.base_model_calls == stats.calls, || {
            format!("line {line}: counter mismatch")
        })?;
        calls += stats.calls;
        ar += row
            .reference
            .as_deref()
            .unwrap_or("")
            .split_whitespace()
            .count();
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "20 samples, {calls} base-model calls (depth 2 each) vs {ar} AR calls, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

/// Deterministic pseudo-random insertion model.
struct Hashed {
    seed: u64,
    vocab: usize,
}

impl InsertionModel for Hashed {
    fn predict_gaps(
        &self,
        _: &[TokenId],
        tokens: &[TokenId],
    ) -> Result<Vec<GapDist>, InsertionError> {
        Ok((0..=tokens.len())
            .map(|g| {
                let mut h = DefaultHasher::new();
                (self.seed, tokens, g).hash(&mut h);
                let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
                if rng.gen_bool(0.4) {
                    return GapDist::nothing(self.vocab);
                }
                let mut probs = random_dist(&mut rng, self.vocab + 1, true);
                let no_insert = probs.pop().unwrap();
                let entries = probs
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| (TokenId(i as u32), p))
                    .collect();
                GapDist {
                    no_insert,
                    insert: SparseDist::new(entries, self.vocab).unwrap(),
                }
            })
            .collect())
    }
}

fn c6_insertion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut converged = 0;
    for case in 0..500 {
        let vocab = rng.gen_range(2..=30);
        let len = rng.gen_range(1..=6);
        let chain: Vec<TokenId> = (0..len)
            .map(|_| TokenId(rng.gen_range(0..vocab) as u32))
            .collect();
        let model = Hashed {
            seed: rng.gen(),
            vocab,
        };
        let max_stages = rng.gen_range(1..=10);
        let chain = KeywordChain::from_log(chain, -1.0);
        for tau in [0.0, rng.gen_range(0.0..0.9)] {
            let seq = generate_constrained(&model, &[], &chain, tau, max_stages)
                .map_err(|e| e.to_string())?;
            let out = seq.output().ids();
            ensure(is_subsequence(&chain.tokens, &out), || {
                format!("case {case}: chain lost at tau {tau}")
            })?;
            ensure(seq.steps() <= max_stages, || {
                format!("case {case}: {} stages", seq.steps())
            })?;
            if tau == 0.0 {
                for w in seq.stages.windows(2) {
                    ensure(is_subsequence(&w[0].ids(), &w[1].ids()), || {
                        format!(
                            "case {case}: stage {} not contained in its successor",
                            w[0].stage_index
                        )
                    })?;
                }
            }
            converged += seq.converged as usize;
        }
    }
    Ok(format!(
        "500 instances x 2 thresholds, {converged} converged within budget"
    ))
}

fn c7_ablation() -> Outcome {
    let dir = std::env::temp_dir().join(format!("holo-accept-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let report = dir.join("eval.txt");
    let out = Command::new(env!("CARGO_BIN_EXE_holo"))
        .args(["eval", "--config"])
        .arg(data("golden_config.json"))
        .arg("--input")
        .arg(data("golden_dataset.jsonl"))
        .arg("--report")
        .arg(&report)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        String::from_utf8_lossy(&out.stderr).into_owned()
    })?;
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    for side in ["mask_on", "mask_off"] {
        ensure(json[side]["sample_count"] == 20, || {
            format!("{side} report missing")
        })?;
    }
    let got = std::fs::read_to_string(&report).map_err(|e| e.to_string())?;
    let _ = std::fs::remove_dir_all(&dir);
    let golden_path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/eval_table.txt");
    let want = std::fs::read_to_string(golden_path).map_err(|e| e.to_string())?;
    ensure(got == want, || format!("table differs from golden:\n{got}"))?;
    let header = got.lines().find(|l| l.starts_with("Method")).unwrap_or("");
    let cols: Vec<&str> = header.split_whitespace().skip(1).collect();
    ensure(
        cols == [
            "F1",
            "Rouge-L",
            "BLEU-2",
            "BLEU-4",
            "Distinct-2",
            "PPL",
            "Rel.",
        ],
        || format!("columns {cols:?}"),
    )?;
    Ok("paired on/off reports, table byte-identical to golden".into())
}

fn c8_metrics() -> Outcome {
    let mut v = Vocabulary::new();
    let mut enc = |s: &str| -> Vec<TokenId> { s.split_whitespace().map(|w| v.insert(w)).collect() };
    // (refs, hyps, f1, rouge_l, bleu2, bleu4, distinct2)
    let e = |x: f64| x.exp();
    type Case = (Vec<Vec<TokenId>>, Vec<Vec<TokenId>>, [f64; 5]);
    let cases: Vec<Case> = vec![
        (
            vec![enc("the cat sat")],
            vec![enc("the cat")],
            [0.8, 2.0 / 3.0, e(-0.5), e(-0.5), 1.0],
        ),
        (
            vec![enc("a b c d")],
            vec![enc("a b c d")],
            [1.0, 1.0, 1.0, 1.0, 1.0],
        ),
        (
            vec![enc("a b")],
            vec![enc("c d")],
            [0.0, 0.0, 0.0, 0.0, 1.0],
        ),
        (
            vec![enc("the cat")],
            vec![enc("the the the")],
            [0.4, 0.5, 1.0 / 3.0, (1.0f64 / 18.0).powf(0.25), 0.5],
        ),
        (
            vec![enc("a b c"), enc("d e")],
            vec![enc("a c"), enc("d e f")],
            [0.8, 0.8, 0.4f64.sqrt(), 0.2f64.powf(0.25), 1.0],
        ),
    ];
    for (i, (r, h, want)) in cases.iter().enumerate() {
        let got = [
            unigram_f1(r, h),
            rouge_l(r, h),
            bleu(r, h, 2),
            bleu(r, h, 4),
            distinct2(h),
        ];
        for (name, (g, w)) in ["F1", "ROUGE-L", "BLEU-2", "BLEU-4", "Distinct-2"]
            .iter()
            .zip(got.iter().zip(want))
        {
            ensure((g - w).abs() <= 1e-9, || {
                format!("case {i} {name}: {g} vs {w}")
            })?;
        }
        let m = text_metrics(r, h).map_err(|e| e.to_string())?;
        ensure(m.f1 == got[0] && m.bleu4 == got[3], || {
            format!("case {i}: text_metrics disagrees")
        })?;
    }
    Ok("5 micro-cases within 1e-9, identical text scores 1.0".into())
}

fn c9_cover() -> Outcome {
    let n = 100;
    let target = 7;
    let peaked = |on_target: bool| {
        let mut pi = vec![1.0; n];
        if on_target {
            pi[target] = 50.0;
        } else {
            pi[target] = 0.0;
            pi[3] = 50.0;
        }
        let s: f64 = pi.iter().sum();
        let pi: Vec<f64> = pi.iter().map(|x| x / s).collect();
        let cols = vec![vec![1.0 / n as f64; n]; n];
        ToyMarkovLm::from_dense(vocab(n), pi, cols).unwrap()
    };
    let dataset: Vec<(Vec<TokenId>, Vec<TokenId>)> = (0..10)
        .map(|i| {
            (
                vec![TokenId(i)],
                vec![TokenId(target as u32), TokenId(target as u32)],
            )
        })
        .collect();
    let extractor = ContentWordExtractor {
        filter: StopwordFilter::none(),
    };
    let covered = cover_rate(&peaked(true), &dataset, &extractor, DEFAULT_TOP_FRACTION)
        .map_err(|e| e.to_string())?;
    let missed = cover_rate(&peaked(false), &dataset, &extractor, DEFAULT_TOP_FRACTION)
        .map_err(|e| e.to_string())?;
    ensure(covered.cover_rate == 1.0, || {
        format!("coverage LM gave {}", covered.cover_rate)
    })?;
    ensure(missed.cover_rate == 0.0, || {
        format!("adversarial LM gave {}", missed.cover_rate)
    })?;
    ensure(
        covered.top_fraction == 0.01 && covered.candidate_count == 1,
        || "top fraction not reported".into(),
    )?;
    Ok(format!(
        "1.0 / 0.0, top_fraction {} ({} candidate)",
        covered.top_fraction, covered.candidate_count
    ))
}

fn c10_stages() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let corpus: Vec<Vec<TokenId>> = (0..1000)
        .map(|_| {
            let len = rng.gen_range(1..=25);
            (0..len).map(|_| TokenId(rng.gen_range(0..60))).collect()
        })
        .collect();
    let table = build_tfidf(&corpus).map_err(|e| e.to_string())?;
    for (i, s) in corpus.iter().enumerate() {
        let profile = importance_scores(
            s,
            &table,
            &NullTagger,
            &TopQuartileKeywords,
            &PosWeights::default(),
        )
        .map_err(|e| e.to_string())?;
        for t in &profile.scores {
            ensure((NORM_MIN..=NORM_MAX).contains(&t.tfidf_norm), || {
                format!("sentence {i}: tfidf_norm {}", t.tfidf_norm)
            })?;
        }
        let pairs = stage_decompose(s, &profile, 8).map_err(|e| e.to_string())?;
        let mut expected_fine = s.clone();
        for p in &pairs {
            ensure(p.fine == expected_fine, || {
                format!("sentence {i}: levels are not nested")
            })?;
            ensure(is_subsequence(&p.coarse, &p.fine), || {
                format!("sentence {i}: coarse is not a subsequence")
            })?;
            ensure(p.coarse.len() == p.fine.len() - p.fine.len() / 2, || {
                format!("sentence {i}: wrong level size")
            })?;
            expected_fine = p.coarse.clone();
        }
    }

    // Regeneration on the toy corpus.
    let text = std::fs::read_to_string(data("toy_corpus.txt")).unwrap();
    let words: Vec<Vec<String>> = text
        .lines()
        .map(holo_core::lm::whitespace_tokens)
        .filter(|s| !s.is_empty())
        .collect();
    let lm = train_ngram(&words, 2, 0.0).map_err(|e| e.to_string())?;
    let v = lm.vocab();
    let sentences: Vec<Vec<TokenId>> = words.iter().map(|s| v.encode(s).unwrap()).collect();
    let lexicon = std::fs::read_to_string(data("toy_lexicon.tsv")).unwrap();
    let tagger = LexiconTagger::parse(&lexicon)
        .map_err(|e| e.to_string())?
        .bind(v);
    let stages = 1;
    let pairs = decompose_corpus(
        &sentences,
        &tagger,
        &TopQuartileKeywords,
        &PosWeights::default(),
        stages,
    )
    .map_err(|e| e.to_string())?;
    let encoded: Vec<_> = pairs
        .iter()
        .map(|p| (p.coarse.clone(), p.fine.clone()))
        .collect();
    let model =
        train_bigram_insertion_from_pairs(&encoded, v.len(), 0.0).map_err(|e| e.to_string())?;
    let (mut lcs, mut total, mut exact) = (0, 0, 0);
    for (i, chunk) in pairs.chunks(stages).enumerate() {
        let x0 = &chunk.last().unwrap().coarse;
        let original = &chunk[0].fine;
        let chain = KeywordChain::from_log(x0.clone(), 0.0);
        let seq = generate_constrained(&model, &[], &chain, 0.2, 8).map_err(|e| e.to_string())?;
        let out = seq.output().ids();
        ensure(is_subsequence(x0, &out), || {
            format!("sentence {i}: output dropped part of X0")
        })?;
        lcs += holo_core::eval::lcs_len(&out, original);
        total += original.len();
        exact += (&out == original) as usize;
    }
    let recall = lcs as f64 / total as f64;
    let summary = format!(
        "1000 random sentences nested, tfidf_norm in [1,1000]; regeneration recall {recall:.3} ({exact}/{} exact)",
        sentences.len()
    );
    ensure(recall >= 0.90, || format!("{summary}, below 0.90"))?;
    Ok(summary)
}

fn c11_determinism() -> Outcome {
    let dataset = parse_dataset(&std::fs::read_to_string(data("golden_dataset.jsonl")).unwrap());
    let contexts: Vec<String> = dataset
        .rows
        .iter()
        .map(|(_, r)| r.context.clone())
        .collect();
    let run = || -> Result<String, String> {
        let p = Pipeline::load(golden_config()).map_err(|e| e.to_string())?;
        let mut out = String::new();
        for r in p.run_batch(&contexts).map_err(|e| e.to_string())? {
            out.push_str(&serde_json::to_string(&r.map_err(|e| e.to_string())?).unwrap());
            out.push('\n');
        }
        Ok(out)
    };
    let (a, b) = (run()?, run()?);
    ensure(a == b, || "two runs differ".into())?;
    Ok(format!("{} bytes identical across two runs", a.len()))
}

fn main() {
    // `cargo test` passes filter and flag arguments; this harness runs
    // everything regardless.
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 11] = [
        ("C1", c1_oracle),
        ("C2", c2_truncation),
        ("C3", c3_top_p),
        ("C4", c4_chains),
        ("C5", c5_calls),
        ("C6", c6_insertion),
        ("C7", c7_ablation),
        ("C8", c8_metrics),
        ("C9", c9_cover),
        ("C10", c10_stages),
        ("C11", c11_determinism),
    ];
    let mut unexpected = Vec::new();
    for (name, check) in criteria {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => {
                println!("{name} PASS {detail}");
                if KNOWN_FAILURES.contains(&name) {
                    println!(
                        "{name} note: listed as a known failure but passed; update KNOWN_FAILURES"
                    );
                }
            }
            Err(detail) if KNOWN_FAILURES.contains(&name) => {
                println!("{name} FAIL (known, see README) {detail}")
            }
            Err(detail) => {
                println!("{name} FAIL {detail}");
                unexpected.push(name);
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
