//! Swap-test baseline for equality. Each trial consumes fresh copies of both
//! states, which is why the sketch-based test exists.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::sketch::EqualityDecision;
use crate::statevector::{inner_product, PureState};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwapOutcome {
    pub decision: EqualityDecision,
    pub trials: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    pub threshold: f64,
    /// Always true: every trial destroys one copy of each state.
    pub consumes_fresh_copies: bool,
}

/// Acceptance probability `(1 + |⟨a|b⟩|²)/2`.
pub fn acceptance_probability(a: &PureState, b: &PureState) -> Result<f64> {
    Ok(((1.0 + inner_product(a, b)?.norm_sqr()) / 2.0).min(1.0))
}

/// Number of accepted swap tests out of `trials`.
pub fn swap_test_rate<R: Rng + ?Sized>(a: &PureState, b: &PureState, trials: u64, rng: &mut R) -> Result<u64> {
    let p = acceptance_probability(a, b)?;
    let dist = Binomial::new(trials, p).map_err(|e| Error::Internal(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// `(ε, β)` equality by repeated swap tests, thresholded at the midpoint of
/// the near/far acceptance probabilities `1 − ε²/2` and `1 − β²ε²/2`.
pub fn swap_test_equality<R: Rng + ?Sized>(
    a: &PureState,
    b: &PureState,
    eps: f64,
    beta: f64,
    delta: f64,
    rng: &mut R,
) -> Result<SwapOutcome> {
    if !(eps > 0.0) || !(beta > 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::arg("swap test needs eps > 0, beta > 1 and delta in (0, 1)"));
    }
    let p_near = 1.0 - eps * eps / 2.0;
    let p_far = 1.0 - beta * beta * eps * eps / 2.0;
    let gap = p_near - p_far;
    let trials = (2.0 * (2.0 / delta).ln() / (gap * gap)).ceil() as u64;
    let threshold = (p_near + p_far) / 2.0;
    let accepted = swap_test_rate(a, b, trials, rng)?;
    let rate = accepted as f64 / trials as f64;
    Ok(SwapOutcome {
        decision: if rate >= threshold { EqualityDecision::Equal } else { EqualityDecision::NotEqual },
        trials,
        accepted,
        acceptance_rate: rate,
        threshold,
        consumes_fresh_copies: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::planted_partner;
    use crate::rng::rng_from_seed;
    use crate::statevector::random_haar_state;

    #[test]
    fn identical_states_always_pass() {
        let mut rng = rng_from_seed(1);
        let a = random_haar_state(4, &mut rng).unwrap();
        let out = swap_test_equality(&a, &a, 0.1, 4.0, 0.01, &mut rng).unwrap();
        assert_eq!(out.decision, EqualityDecision::Equal);
        assert!(out.acceptance_rate > 0.999);
        assert!(out.consumes_fresh_copies);
    }

    #[test]
    fn orthogonal_states_accept_half() {
        let mut rng = rng_from_seed(2);
        let a = PureState::basis(3, 0).unwrap();
        let b = PureState::basis(3, 5).unwrap();
        let acc = swap_test_rate(&a, &b, 100_000, &mut rng).unwrap();
        assert!((acc as f64 / 1e5 - 0.5).abs() <= 0.01);
        let out = swap_test_equality(&a, &b, 0.1, 4.0, 0.01, &mut rng).unwrap();
        assert_eq!(out.decision, EqualityDecision::NotEqual);
    }

    #[test]
    fn pair_at_eps_is_equal() {
        let mut rng = rng_from_seed(3);
        let a = random_haar_state(4, &mut rng).unwrap();
        let b = planted_partner(&a, 0.2, &mut rng).unwrap();
        let delta = 0.05;
        let wrong = (0..200)
            .filter(|_| swap_test_equality(&a, &b, 0.2, 2.0, delta, &mut rng).unwrap().decision != EqualityDecision::Equal)
            .count();
        assert!(wrong as f64 <= 200.0 * delta, "{wrong}");
    }
}
