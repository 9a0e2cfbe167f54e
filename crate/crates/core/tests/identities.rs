mod common;

use fairflip_core::metrics::{accuracy, apply_rule, composite, Membership};
use fairflip_core::{CriterionSpec, ModificationRule, Provenance, Side};
use proptest::prelude::*;
use rand::Rng;

/// `f̃_k,i` from indicator membership and empirical group frequencies.
fn empirical_f(m: &Membership, yhat: &[u8], k: usize, i: usize) -> f64 {
    let n = m.len() as f64;
    let (na, nb) = m.sizes()[k];
    let sign = 2.0 * f64::from(yhat[i]) - 1.0;
    match m.side(k, i) {
        Side::A => sign * n / na as f64,
        Side::B => -sign * n / nb as f64,
        Side::Neither => 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn accuracy_and_disparity_updates(seed in any::<u64>(), n in 4usize..120, k in 1usize..=2) {
        let mut rng = common::rng(seed);
        let inst = common::random_instance(&mut rng, n, k, None);
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
        let rule = ModificationRule::new(w, Provenance::default()).unwrap();
        let applied = apply_rule(&rule, &inst.scores).unwrap();
        let yhat = inst.scores.yhat();
        let labels = inst.val.labels();

        let before = composite(yhat, &inst.val, &inst.criterion).unwrap();
        let after = composite(&applied.predictions, &inst.val, &inst.criterion).unwrap();

        let nf = n as f64;
        let acc_delta: f64 = applied.flips.iter().enumerate()
            .filter(|(_, f)| **f)
            .map(|(i, _)| if yhat[i] == labels[i] { -1.0 } else { 1.0 })
            .sum::<f64>() / nf;
        prop_assert!((after.accuracy - (before.accuracy + acc_delta)).abs() <= 1e-12);

        let m = Membership::new(&inst.val, &inst.criterion).unwrap();
        for c in 0..k {
            let moved: f64 = applied.flips.iter().enumerate()
                .filter(|(_, f)| **f)
                .map(|(i, _)| empirical_f(&m, yhat, c, i))
                .sum::<f64>() / nf;
            prop_assert!((after.disparities[c] - (before.disparities[c] - moved)).abs() <= 1e-12);
        }
    }

    #[test]
    fn adding_a_component_never_lowers_cc(seed in any::<u64>(), n in 4usize..80) {
        let mut rng = common::rng(seed);
        let val = common::random_dataset(&mut rng, n);
        let preds: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let eo = CriterionSpec::equalized_odds("a");
        let y1 = CriterionSpec::custom(vec![eo.components[1].clone()]).unwrap();
        let small = composite(&preds, &val, &y1).unwrap();
        let big = composite(&preds, &val, &eo).unwrap();
        prop_assert!(big.cc >= small.cc);
        prop_assert_eq!(small.cc, small.disparities[0].abs());
    }
}

#[test]
fn composite_matches_hand_formulas() {
    let labels = vec![1, 1, 0, 0, 1, 0, 1, 0];
    let attr = vec![0, 0, 0, 0, 1, 1, 1, 1];
    let preds = vec![1, 0, 1, 0, 1, 1, 0, 0];
    let val = fairflip_core::LabeledDataset::new(labels.clone(), vec![("a".into(), attr.clone())]).unwrap();

    // DP: Pr(Ŷ=1|A=0) - Pr(Ŷ=1|A=1) = 2/4 - 2/4
    let dp = composite(&preds, &val, &CriterionSpec::demographic_parity("a")).unwrap();
    assert_eq!(dp.disparities, vec![0.0]);

    // EO: true-positive and false-positive rate gaps
    let rate = |y: u8, a: u8| {
        let idx: Vec<usize> = (0..8).filter(|&i| labels[i] == y && attr[i] == a).collect();
        idx.iter().filter(|&&i| preds[i] == 1).count() as f64 / idx.len() as f64
    };
    let eo = composite(&preds, &val, &CriterionSpec::equalized_odds("a")).unwrap();
    assert_eq!(eo.disparities, vec![rate(0, 0) - rate(0, 1), rate(1, 0) - rate(1, 1)]);
    assert_eq!(eo.accuracy, accuracy(&preds, &labels).unwrap());
}
