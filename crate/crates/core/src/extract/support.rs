use serde::{Deserialize, Serialize};

use super::ExtractError;
use crate::lm::{SparseDist, TokenId};

/// Slack when comparing accumulated mass against `p`. Summing floating
/// probabilities in a different order can land a hair under the threshold.
pub const MASS_EPS: f64 = 1e-12;

/// Whether `mass` meets the threshold `p` (within [`MASS_EPS`]).
pub fn reaches(mass: f64, p: f64) -> bool {
    mass + MASS_EPS >= p
}

/// Smallest high-probability token set whose first-step mass reaches `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support {
    /// Members in selection order: descending probability, ties by id.
    pub tokens: Vec<TokenId>,
    pub cumulative_mass: f64,
    /// False only when the distribution itself carries less than `p`
    /// (truncated backends); the support is then everything available.
    pub reached: bool,
}

impl Support {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, id: TokenId) -> bool {
        self.tokens.contains(&id)
    }

    pub fn position(&self, id: TokenId) -> Option<usize> {
        self.tokens.iter().position(|&t| t == id)
    }
}

/// Top-p (nucleus) support of `dist`. `p = 1` takes every nonzero token.
pub fn top_p_support(dist: &SparseDist, p: f64) -> Result<Support, ExtractError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(ExtractError::InvalidThreshold(p));
    }
    if dist.is_empty() {
        return Err(ExtractError::EmptyDistribution);
    }
    let ranked = dist.ranked();
    let mut tokens = Vec::new();
    let mut mass = 0.0;
    for (id, prob) in ranked {
        if p < 1.0 && reaches(mass, p) {
            break;
        }
        tokens.push(id);
        mass += prob;
    }
    Ok(Support {
        tokens,
        cumulative_mass: mass,
        reached: reaches(mass, p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(p: &[f64]) -> SparseDist {
        SparseDist::from_dense(p).unwrap()
    }

    #[test]
    fn exact_boundary() {
        let s = top_p_support(&dist(&[0.6, 0.3, 0.1]), 0.9).unwrap();
        assert_eq!(s.tokens, vec![TokenId(0), TokenId(1)]);
        assert!((s.cumulative_mass - 0.9).abs() < 1e-12);
        assert!(s.reached);
    }

    #[test]
    fn p_one_takes_all_nonzero() {
        let s = top_p_support(&dist(&[0.5, 0.0, 0.3, 0.2]), 1.0).unwrap();
        assert_eq!(s.tokens, vec![TokenId(0), TokenId(2), TokenId(3)]);
    }

    #[test]
    fn tie_prefers_lower_id() {
        let s = top_p_support(&dist(&[0.25, 0.5, 0.25]), 0.75).unwrap();
        assert_eq!(s.tokens, vec![TokenId(1), TokenId(0)]);
    }

    #[test]
    fn invalid_threshold() {
        for p in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(top_p_support(&dist(&[1.0]), p).is_err());
        }
        assert!(matches!(
            top_p_support(&SparseDist::empty(3), 0.5),
            Err(ExtractError::EmptyDistribution)
        ));
    }

    #[test]
    fn truncated_distribution_takes_everything() {
        let d = SparseDist::new(vec![(TokenId(0), 0.5), (TokenId(1), 0.2)], 4).unwrap();
        let s = top_p_support(&d, 0.9).unwrap();
        assert_eq!(s.len(), 2);
        assert!(!s.reached);
    }

    proptest! {
        #[test]
        fn support_is_minimal(weights in prop::collection::vec(0.0f64..1.0, 1..40), p in 0.01f64..1.0) {
            let total: f64 = weights.iter().sum();
            prop_assume!(total > 1e-6);
            let d = dist(&weights.iter().map(|w| w / total).collect::<Vec<_>>());
            prop_assume!(!d.is_empty());
            let s = top_p_support(&d, p).unwrap();
            prop_assert!(reaches(s.cumulative_mass, p));
            let without_last: f64 = s.tokens[..s.len() - 1].iter().map(|&t| d.prob(t)).sum();
            prop_assert!(!reaches(without_last, p));
        }
    }
}
