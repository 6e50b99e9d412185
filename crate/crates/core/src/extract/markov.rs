use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{top_p_support, ExtractError, Support};
use crate::lm::{LanguageModel, SparseDist, TokenId, Vocabulary};

/// Largest number of propagation steps accepted.
pub const MAX_STEPS: usize = 4096;

/// Where probability mass went while propagating.
///
/// Without renormalization, for every step `t`:
/// `sum(states[t]) + Σ_{u<=t} step_leak[u] = 1 - initial_truncation`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MassLedger {
    /// First-step mass outside the support, `1 - Σ π₀`.
    pub initial_truncation: f64,
    /// `step_leak[t]`: mass that left the support between step `t-1` and
    /// `t`. Entry 0 is always 0.
    pub step_leak: Vec<f64>,
    pub renormalized: bool,
}

/// Markov approximation of a model's response distribution over a top-p
/// support `S`: initial state `π₀`, the support-restricted transition
/// matrix, and the propagated per-step states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovEstimate {
    pub support: Support,
    /// `pi0[k] = P(y₁ = s_k | X)`.
    pub pi0: Vec<f64>,
    /// `columns[k][j] = P(y₂ = s_j | y₁ = s_k, X)`.
    pub columns: Vec<Vec<f64>>,
    /// Mass of column `k` that falls outside `S`.
    pub column_leak: Vec<f64>,
    /// `π₀, Mπ₀, M²π₀, …`
    pub states: Vec<Vec<f64>>,
    pub ledger: MassLedger,
    /// Base-model queries spent building the estimate.
    pub lm_calls: usize,
    pub vocab_size: usize,
    #[serde(skip)]
    index: HashMap<TokenId, usize>,
}

impl MarkovEstimate {
    /// Assembles an estimate from explicit parameters. Leak is whatever each
    /// column is missing from 1.
    pub fn from_parts(
        support: Support,
        pi0: Vec<f64>,
        columns: Vec<Vec<f64>>,
        vocab_size: usize,
    ) -> Result<Self, ExtractError> {
        let n = support.len();
        let bad = |m: String| Err(ExtractError::InvalidParameter(m));
        if pi0.len() != n || columns.len() != n || columns.iter().any(|c| c.len() != n) {
            return bad(format!("shape mismatch for a support of {n} tokens"));
        }
        if pi0
            .iter()
            .chain(columns.iter().flatten())
            .any(|&x| !(0.0..=1.0).contains(&x))
        {
            return bad("probabilities must lie in [0,1]".into());
        }
        let mut column_leak = Vec::with_capacity(n);
        for (k, col) in columns.iter().enumerate() {
            let sum: f64 = col.iter().sum();
            if sum > 1.0 + 1e-6 {
                return bad(format!("column {k} sums to {sum}"));
            }
            column_leak.push((1.0 - sum).max(0.0));
        }
        let pi_mass: f64 = pi0.iter().sum();
        if pi_mass > 1.0 + 1e-6 {
            return bad(format!("initial state sums to {pi_mass}"));
        }
        let index = support
            .tokens
            .iter()
            .enumerate()
            .map(|(i, &t)| (t, i))
            .collect();
        Ok(Self {
            ledger: MassLedger {
                initial_truncation: (1.0 - pi_mass).max(0.0),
                step_leak: vec![0.0],
                renormalized: false,
            },
            states: vec![pi0.clone()],
            support,
            pi0,
            columns,
            column_leak,
            lm_calls: 0,
            vocab_size,
            index,
        })
    }

    pub fn index_of(&self, id: TokenId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn initial(&self, id: TokenId) -> f64 {
        self.index_of(id).map_or(0.0, |k| self.pi0[k])
    }

    /// `P(y₂ = to | y₁ = from, X)` restricted to the support.
    pub fn transition(&self, from: TokenId, to: TokenId) -> f64 {
        match (self.index_of(from), self.index_of(to)) {
            (Some(k), Some(j)) => self.columns[k][j],
            _ => 0.0,
        }
    }

    /// Fills `states` with `steps` vectors `π₀ … M^{steps-1}π₀`, without
    /// renormalization.
    pub fn propagate(self, steps: usize) -> Result<Self, ExtractError> {
        self.propagate_with(steps, false)
    }

    /// As [`MarkovEstimate::propagate`]; with `renormalize` every state is
    /// rescaled to unit mass, which gives up the under-approximation bound.
    pub fn propagate_with(mut self, steps: usize, renormalize: bool) -> Result<Self, ExtractError> {
        if steps == 0 || steps > MAX_STEPS {
            return Err(ExtractError::InvalidSteps(steps));
        }
        let n = self.support.len();
        let mut state = self.pi0.clone();
        if renormalize {
            normalize(&mut state);
        }
        let mut states = Vec::with_capacity(steps);
        let mut step_leak = vec![0.0];
        states.push(state.clone());
        for _ in 1..steps {
            let mut next = vec![0.0; n];
            let mut leak = 0.0;
            for (k, &mass) in state.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                for (j, &m) in self.columns[k].iter().enumerate() {
                    next[j] += m * mass;
                }
                leak += self.column_leak[k] * mass;
            }
            if next.iter().any(|x| !x.is_finite()) {
                return Err(ExtractError::InvalidParameter("non-finite state".into()));
            }
            if renormalize {
                normalize(&mut next);
            }
            step_leak.push(leak);
            states.push(next.clone());
            state = next;
        }
        self.states = states;
        self.ledger.step_leak = step_leak;
        self.ledger.renormalized = renormalize;
        Ok(self)
    }

    /// Step state `t` (0-based) as a distribution over the vocabulary.
    pub fn state_dist(&self, t: usize) -> Option<SparseDist> {
        let state = self.states.get(t)?;
        let entries = self
            .support
            .tokens
            .iter()
            .zip(state)
            .map(|(&id, &p)| (id, p.min(1.0)))
            .collect();
        SparseDist::new(entries, self.vocab_size).ok()
    }

    /// JSON dump of the estimate with token strings, for inspection.
    pub fn debug_json(&self, vocab: &Vocabulary) -> serde_json::Value {
        let name = |id: &TokenId| vocab.lookup(*id).unwrap_or("<unk>").to_string();
        serde_json::json!({
            "support": self.support.tokens.iter().map(name).collect::<Vec<_>>(),
            "support_ids": self.support.tokens,
            "cumulative_mass": self.support.cumulative_mass,
            "pi0": self.pi0,
            "columns": self.columns,
            "column_leak": self.column_leak,
            "states": self.states,
            "ledger": self.ledger,
            "lm_calls": self.lm_calls,
        })
    }
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

/// Queries the base model once for `P(y₁|X)` and once per support token for
/// `P(y₂|y₁=s,X)`, which makes exactly `1 + |S|` calls. The per-token
/// queries only depend on the first one and run in parallel.
pub fn build_markov<L: LanguageModel + ?Sized>(
    lm: &L,
    context: &[TokenId],
    p: f64,
) -> Result<MarkovEstimate, ExtractError> {
    let first = lm
        .next_token_dist(context, &[])
        .map_err(|source| ExtractError::Backend {
            token: None,
            source,
        })?;
    let support = top_p_support(&first, p)?;
    let pi0: Vec<f64> = support.tokens.iter().map(|&t| first.prob(t)).collect();

    let columns = support
        .tokens
        .par_iter()
        .map(|&s| {
            let dist =
                lm.next_token_dist(context, &[s])
                    .map_err(|source| ExtractError::Backend {
                        token: Some(lm.vocab().lookup(s).unwrap_or("<unk>").to_string()),
                        source,
                    })?;
            Ok(support
                .tokens
                .iter()
                .map(|&t| dist.prob(t))
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>, ExtractError>>()?;

    let mut est = MarkovEstimate::from_parts(support, pi0, columns, lm.vocab().len())?;
    est.lm_calls = 1 + est.support.len();
    Ok(est)
}

/// Per-token average of the propagated step states, over the support.
pub fn word_marginal(est: &MarkovEstimate) -> Result<SparseDist, ExtractError> {
    if est.states.is_empty() {
        return Err(ExtractError::StatesEmpty);
    }
    let steps = est.states.len() as f64;
    let entries = est
        .support
        .tokens
        .iter()
        .enumerate()
        .map(|(k, &id)| {
            let sum: f64 = est.states.iter().map(|s| s[k]).sum();
            (id, (sum / steps).min(1.0))
        })
        .collect();
    SparseDist::new(entries, est.vocab_size)
        .map_err(|e| ExtractError::InvalidParameter(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{exact_position_marginals, CountingLm, ToyMarkovLm};

    fn toy(pi: Vec<f64>, cols: Vec<Vec<f64>>) -> ToyMarkovLm {
        let toks: Vec<String> = (0..pi.len())
            .map(|i| ((b'a' + i as u8) as char).to_string())
            .collect();
        ToyMarkovLm::from_dense(Vocabulary::from_tokens(toks).unwrap(), pi, cols).unwrap()
    }

    fn two_state() -> ToyMarkovLm {
        toy(vec![0.7, 0.3], vec![vec![0.4, 0.6], vec![0.5, 0.5]])
    }

    fn support(ids: &[u32]) -> Support {
        Support {
            tokens: ids.iter().map(|&i| TokenId(i)).collect(),
            cumulative_mass: 1.0,
            reached: true,
        }
    }

    #[test]
    fn deterministic_transition_column() {
        // b must have first-step mass to be in S at all.
        let lm = toy(vec![0.5, 0.5], vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let est = build_markov(&lm, &[], 1.0).unwrap();
        assert_eq!(est.support.tokens, vec![TokenId(0), TokenId(1)]);
        assert_eq!(est.columns[0], vec![0.0, 1.0]);
        assert_eq!(est.transition(TokenId(0), TokenId(1)), 1.0);
    }

    #[test]
    fn call_count_is_one_plus_support() {
        let lm = CountingLm::new(toy(vec![0.6, 0.3, 0.1], vec![vec![1.0 / 3.0; 3]; 3]));
        let est = build_markov(&lm, &[], 0.9).unwrap();
        assert_eq!(est.support.len(), 2);
        assert_eq!(lm.stats().calls, 3);
        assert_eq!(lm.stats().depth, 2);
        assert_eq!(est.lm_calls, 3);
    }

    #[test]
    fn full_support_recovers_fixture_matrix() {
        let lm = two_state();
        let est = build_markov(&lm, &[], 1.0).unwrap();
        assert_eq!(est.support.tokens, vec![TokenId(0), TokenId(1)]);
        assert_eq!(est.columns, vec![vec![0.4, 0.6], vec![0.5, 0.5]]);
        assert_eq!(
            est.column_leak
                .iter()
                .map(|l| (l * 1e12).round())
                .collect::<Vec<_>>(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn cycle_propagation() {
        let est = MarkovEstimate::from_parts(
            support(&[0, 1]),
            vec![1.0, 0.0],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            2,
        )
        .unwrap()
        .propagate(3)
        .unwrap();
        assert_eq!(
            est.states,
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]
        );
    }

    #[test]
    fn uniform_is_stationary() {
        let est = MarkovEstimate::from_parts(
            support(&[0, 1, 2]),
            vec![1.0 / 3.0; 3],
            vec![vec![1.0 / 3.0; 3]; 3],
            3,
        )
        .unwrap()
        .propagate(5)
        .unwrap();
        for s in &est.states {
            for &x in s {
                assert!((x - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_state_second_step_matches_enumeration() {
        let lm = two_state();
        let est = build_markov(&lm, &[], 1.0).unwrap().propagate(2).unwrap();
        assert!((est.states[1][0] - 0.43).abs() < 1e-15);
        let exact = exact_position_marginals(&lm, &[], 2).unwrap();
        assert!((est.states[1][0] - exact[1].prob(TokenId(0))).abs() < 1e-15);
    }

    #[test]
    fn marginal_averages_states() {
        let lm = two_state();
        let est = build_markov(&lm, &[], 1.0).unwrap().propagate(2).unwrap();
        let m = word_marginal(&est).unwrap();
        assert!((m.prob(TokenId(0)) - 0.565).abs() < 1e-15);

        let est1 = build_markov(&lm, &[], 1.0).unwrap().propagate(1).unwrap();
        assert_eq!(word_marginal(&est1).unwrap().to_dense(), vec![0.7, 0.3]);
    }

    #[test]
    fn deterministic_marginal_is_half_half() {
        let est = MarkovEstimate::from_parts(
            support(&[0, 1]),
            vec![1.0, 0.0],
            vec![vec![0.0, 1.0], vec![0.0, 0.0]],
            2,
        )
        .unwrap()
        .propagate(2)
        .unwrap();
        assert_eq!(word_marginal(&est).unwrap().to_dense(), vec![0.5, 0.5]);
    }

    #[test]
    fn empty_states_error() {
        let mut est =
            MarkovEstimate::from_parts(support(&[0]), vec![1.0], vec![vec![1.0]], 1).unwrap();
        est.states.clear();
        assert!(matches!(
            word_marginal(&est),
            Err(ExtractError::StatesEmpty)
        ));
        assert!(est.clone().propagate(0).is_err());
    }

    #[test]
    fn ledger_balances_and_mass_never_grows() {
        // Support {a, b} of a 3-token model; c leaks.
        let lm = toy(
            vec![0.5, 0.4, 0.1],
            vec![
                vec![0.2, 0.5, 0.3],
                vec![0.6, 0.1, 0.3],
                vec![0.3, 0.3, 0.4],
            ],
        );
        let est = build_markov(&lm, &[], 0.9).unwrap().propagate(6).unwrap();
        assert_eq!(est.support.len(), 2);
        let mut leaked = 0.0;
        let mut prev = f64::INFINITY;
        for (t, s) in est.states.iter().enumerate() {
            let mass: f64 = s.iter().sum();
            leaked += est.ledger.step_leak[t];
            assert!(mass <= prev + 1e-15);
            assert!((mass + leaked + est.ledger.initial_truncation - 1.0).abs() < 1e-12);
            prev = mass;
        }
        for (k, col) in est.columns.iter().enumerate() {
            assert!((col.iter().sum::<f64>() + est.column_leak[k] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn renormalize_flag_keeps_unit_mass() {
        let lm = toy(vec![0.5, 0.4, 0.1], vec![vec![0.2, 0.5, 0.3]; 3]);
        let est = build_markov(&lm, &[], 0.9)
            .unwrap()
            .propagate_with(4, true)
            .unwrap();
        assert!(est.ledger.renormalized);
        for s in &est.states {
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_invariant_under_scaling() {
        let lm = toy(
            vec![0.5, 0.3, 0.2],
            vec![
                vec![0.1, 0.6, 0.3],
                vec![0.5, 0.2, 0.3],
                vec![0.3, 0.3, 0.4],
            ],
        );
        let est = build_markov(&lm, &[], 1.0).unwrap().propagate(4).unwrap();
        let before = word_marginal(&est).unwrap().argmax().unwrap().0;
        let mut scaled = est.clone();
        scaled.states.iter_mut().flatten().for_each(|x| *x *= 0.37);
        assert_eq!(word_marginal(&scaled).unwrap().argmax().unwrap().0, before);
    }

    #[test]
    fn backend_error_names_token() {
        struct Flaky(ToyMarkovLm);
        impl LanguageModel for Flaky {
            fn vocab(&self) -> &Vocabulary {
                self.0.vocab()
            }
            fn next_token_dist(
                &self,
                c: &[TokenId],
                p: &[TokenId],
            ) -> Result<SparseDist, crate::lm::LmError> {
                if p == [TokenId(1)] {
                    return Err(crate::lm::LmError::Remote("boom".into()));
                }
                self.0.next_token_dist(c, p)
            }
        }
        let err = build_markov(&Flaky(two_state()), &[], 1.0).unwrap_err();
        match err {
            ExtractError::Backend { token, .. } => assert_eq!(token.as_deref(), Some("b")),
            other => panic!("{other:?}"),
        }
    }
}
