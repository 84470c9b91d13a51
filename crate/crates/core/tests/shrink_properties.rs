mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqgen::corpus::bank;
use seqgen::replay::replay_test_case;
use seqgen::shrink::{shrink, ShrinkOptions, ShrinkTarget};
use seqgen::{generate, threshold_probability};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Every shrunk generated failure reproduces, is no longer than the
    /// original, and is 1-minimal.
    #[test]
    fn generated_failures_shrink_to_one_minimal(seed in any::<u64>()) {
        let mut reg = bank::registry();
        reg.change_creation_probability("Account", threshold_probability(2).unwrap()).unwrap();
        let (art, rep) = generate(&reg, "T", 30, 50, seed).unwrap();
        for (test, v) in art.tests.iter().zip(&rep.verdicts) {
            let Some(f) = v.failure() else { continue };
            let target = ShrinkTarget::from(f);
            let r = shrink(test, &target, &reg, ShrinkOptions::default()).unwrap();
            prop_assert!(!r.budget_exhausted);
            prop_assert!(r.minimal_len <= r.original_len);
            let minimal = r.to_test_case();
            prop_assert!(minimal.check_integrity().is_ok());
            let again = replay_test_case(&reg, &minimal);
            prop_assert_eq!(again.failure().map(|f| (f.kind, f.contract.clone())), Some((target.kind, target.contract.clone())));
            prop_assert!(common::is_one_minimal(&reg, &minimal, &target));
        }
    }

    #[test]
    fn embedded_pattern_shrinks_to_four(seed in any::<u64>()) {
        let reg = bank::registry();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let test = common::embed_set_min_cancel(&mut rng, 50);
        let f = replay_test_case(&reg, &test).failure().cloned().unwrap();
        let r = shrink(&test, &ShrinkTarget::from(&f), &reg, ShrinkOptions::default()).unwrap();
        prop_assert!(r.minimal_len <= 4);
    }
}

#[test]
fn value_phase_keeps_failure() {
    let reg = bank::registry();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let test = common::embed_set_min_cancel(&mut rng, 30);
    let f = replay_test_case(&reg, &test).failure().cloned().unwrap();
    let target = ShrinkTarget::from(&f);
    let opts = ShrinkOptions {
        shrink_values: true,
        ..Default::default()
    };
    let r = shrink(&test, &target, &reg, opts).unwrap();
    assert!(common::reproduces(&reg, r.steps.clone(), &target));
    assert!(r.minimal_len <= 4);
}
