mod common;

use fairflip_core::probs::load_probs;
use fairflip_core::synth::{self, GaussianMixtureSpec};
use fairflip_core::{estimate_priors, load_labeled, BiasScores, CriterionSpec, ModificationRule, Provenance};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn files_reload_bit_exactly(seed in any::<u64>(), n in 4usize..60, k in 1usize..=2) {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = common::rng(seed);
        let inst = common::random_instance(&mut rng, n, k, None);

        let path = dir.path().join("val.csv");
        inst.val.write_csv(&path, "y").unwrap();
        prop_assert_eq!(load_labeled(&path, None).unwrap(), inst.val.clone());

        let path = dir.path().join("probs.csv");
        inst.probs.write_csv(&path).unwrap();
        prop_assert_eq!(load_probs(&path, &inst.criterion).unwrap(), inst.probs.clone());

        let path = dir.path().join("scores.csv");
        inst.scores.write_csv(&path).unwrap();
        prop_assert_eq!(BiasScores::read_csv(&path).unwrap(), inst.scores.clone());
    }

    #[test]
    fn rules_reload_bit_exactly(w in prop::collection::vec(-1e6f64..1e6, 1..4), delta in 0.0f64..1.0, seed in any::<u64>()) {
        let rule = ModificationRule::new(w, Provenance {
            algorithm: "directions".into(),
            delta: Some(delta),
            seed: Some(seed),
            feasible: true,
            val_accuracy: Some(0.8125),
            val_cc: Some(delta / 3.0),
            note: Some("random directions".into()),
        }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rule.txt");
        rule.write(&path).unwrap();
        prop_assert_eq!(ModificationRule::read(&path).unwrap(), rule);
    }

    #[test]
    fn priors_sum_to_at_most_one(seed in any::<u64>(), n in 4usize..80) {
        let mut rng = common::rng(seed);
        let val = common::random_dataset(&mut rng, n);
        for crit in [CriterionSpec::demographic_parity("a"), CriterionSpec::equal_opportunity("a"), CriterionSpec::equalized_odds("a")] {
            let dp = crit.components.len() == 1 && crit.components[0].group_a.label.is_none();
            for (pa, pb) in estimate_priors(&val, &crit).unwrap().priors().unwrap() {
                prop_assert!(pa + pb <= 1.0 + 1e-15);
                if dp {
                    prop_assert!((pa + pb - 1.0).abs() <= 1e-15);
                }
            }
        }
    }
}

#[test]
fn synthetic_sample_reloads_with_features() {
    let ds = synth::sample(&GaussianMixtureSpec::default(), 7).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    ds.write_csv(&path, "y").unwrap();
    let back = load_labeled(&path, None).unwrap();
    assert_eq!(back, ds);
    assert_eq!(back.features().unwrap().names(), &["x0".to_string(), "x1".to_string()]);
}
