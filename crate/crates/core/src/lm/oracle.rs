use super::{LanguageModel, LmError, SparseDist, TokenId, ToyMarkovLm};

/// Upper bound on `|V|^N` for [`exact_position_marginals`].
pub const MAX_ENUMERATION: u64 = 10_000_000;

/// Exact per-position marginals `P(y_i = · | X)` for `i = 1..=horizon`,
/// obtained by summing the joint probability of every length-`horizon`
/// sequence. Brute force on purpose: this is the ground truth the Markov
/// estimate is checked against.
pub fn exact_position_marginals(
    lm: &ToyMarkovLm,
    context: &[TokenId],
    horizon: usize,
) -> Result<Vec<SparseDist>, LmError> {
    let v = lm.pi().len();
    if horizon == 0 {
        return Ok(Vec::new());
    }
    let too_large = || LmError::EnumerationTooLarge {
        vocab: v,
        horizon,
        limit: MAX_ENUMERATION,
    };
    let count = u32::try_from(horizon)
        .ok()
        .and_then(|h| (v as u64).checked_pow(h))
        .ok_or_else(too_large)?;
    if count > MAX_ENUMERATION {
        return Err(too_large());
    }
    // Context is irrelevant to a first-order toy model but must still be valid.
    lm.vocab().check_ids(context)?;

    let mut marginals = vec![vec![0.0f64; v]; horizon];
    let mut seq = vec![0usize; horizon];
    loop {
        let mut joint = lm.pi()[seq[0]];
        for i in 1..horizon {
            joint *= lm.column(TokenId(seq[i - 1] as u32))[seq[i]];
        }
        if joint > 0.0 {
            for (pos, &tok) in seq.iter().enumerate() {
                marginals[pos][tok] += joint;
            }
        }
        // Odometer increment over V^N.
        let mut pos = horizon;
        loop {
            if pos == 0 {
                // Position 1 is the first-step distribution by definition;
                // summing it back out of the joint only adds rounding.
                marginals[0] = lm.pi().to_vec();
                return marginals
                    .iter()
                    .map(|m| {
                        let clamped: Vec<f64> = m.iter().map(|&p| p.min(1.0)).collect();
                        SparseDist::from_dense(&clamped)
                    })
                    .collect();
            }
            pos -= 1;
            seq[pos] += 1;
            if seq[pos] < v {
                break;
            }
            seq[pos] = 0;
        }
    }
}
