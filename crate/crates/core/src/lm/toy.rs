use super::{LanguageModel, LmError, SparseDist, TokenId, Vocabulary};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Exact first-order Markov model. The context is ignored and the prefix
/// only matters through its last token, so the Markov estimate is exact for
/// it when the support covers every reachable token.
#[derive(Debug, Clone)]
pub struct ToyMarkovLm {
    vocab: Vocabulary,
    pi: Vec<f64>,
    /// `columns[k][j] = P(next = j | prev = k)`.
    columns: Vec<Vec<f64>>,
    context_tag: String,
}

impl ToyMarkovLm {
    /// `pi` is the initial distribution; `columns[k]` is the distribution of
    /// the token following token `k`.
    pub fn from_dense(
        vocab: Vocabulary,
        pi: Vec<f64>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self, LmError> {
        let n = vocab.len();
        if n == 0 {
            return Err(LmError::InvalidParameter("empty vocabulary".into()));
        }
        check_stochastic(&pi, n, "initial distribution")?;
        if columns.len() != n {
            return Err(LmError::InvalidParameter(format!(
                "expected {n} transition columns, got {}",
                columns.len()
            )));
        }
        for (k, col) in columns.iter().enumerate() {
            check_stochastic(col, n, &format!("transition column {k}"))?;
        }
        Ok(Self {
            vocab,
            pi,
            columns,
            context_tag: String::new(),
        })
    }

    pub fn with_context_tag(mut self, tag: impl Into<String>) -> Self {
        self.context_tag = tag.into();
        self
    }

    pub fn context_tag(&self) -> &str {
        &self.context_tag
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn column(&self, from: TokenId) -> &[f64] {
        &self.columns[from.index()]
    }

    /// `P(next = to | prev = from)`.
    pub fn transition(&self, from: TokenId, to: TokenId) -> f64 {
        self.columns[from.index()][to.index()]
    }
}

fn check_stochastic(v: &[f64], n: usize, what: &str) -> Result<(), LmError> {
    if v.len() != n {
        return Err(LmError::InvalidParameter(format!(
            "{what} has {} entries, vocabulary has {n}",
            v.len()
        )));
    }
    if v.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(LmError::InvalidDistribution(format!(
            "{what} has entries outside [0,1]"
        )));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(LmError::InvalidDistribution(format!(
            "{what} sums to {sum}"
        )));
    }
    Ok(())
}

impl LanguageModel for ToyMarkovLm {
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
        match prefix.last() {
            None => SparseDist::from_dense(&self.pi),
            Some(&last) => SparseDist::from_dense(&self.columns[last.index()]),
        }
    }
}
