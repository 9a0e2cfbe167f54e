//! Fixtures shared by the benchmarks: mixture samples scored with the exact posteriors, so
//! building a fixture costs no model training.

use fairflip_core::synth::{sample, true_posteriors};
use fairflip_core::{bias_scores, estimate_priors, BiasScores, CriterionSpec, GaussianMixtureSpec, LabeledDataset};

pub struct Fixture {
    pub scores: BiasScores,
    pub val: LabeledDataset,
    pub criterion: CriterionSpec,
}

/// `n` validation points from the default mixture, scored for `criterion`.
pub fn fixture(criterion: CriterionSpec, n: usize, seed: u64) -> Fixture {
    let spec = GaussianMixtureSpec::default().with_total(n);
    let val = sample(&spec, seed).expect("default mixture is valid");
    let criterion = estimate_priors(&val, &criterion).expect("every group is non-empty");
    let x = val.features().expect("samples carry features");
    let probs = true_posteriors(&spec, x, &criterion).expect("two features");
    let scores = bias_scores(&probs, &criterion, fairflip_core::scores::DEFAULT_ETA_FLOOR)
        .expect("posteriors are probabilities");
    Fixture { scores, val, criterion }
}

pub fn dp(n: usize, seed: u64) -> Fixture {
    fixture(CriterionSpec::demographic_parity("a"), n, seed)
}

pub fn eo(n: usize, seed: u64) -> Fixture {
    fixture(CriterionSpec::equalized_odds("a"), n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_the_requested_shape() {
        let f = eo(400, 1);
        assert_eq!(f.scores.len(), 400);
        assert_eq!(f.scores.k(), 2);
        assert_eq!(dp(400, 1).scores.k(), 1);
    }
}
