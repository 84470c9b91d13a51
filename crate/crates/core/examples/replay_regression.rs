//! Store generated test cases, then replay them after the contracts change.
//!
//! Raising the lower bound on credited amounts makes stored cases that
//! credit 0 inconclusive instead of failing or passing.

use rand::Rng;
use seqgen::corpus::bank::{self, BankOptions};
use seqgen::{
    generate, read_artifact, replay, write_artifact, Outcome, ParameterGenerator, Value, ValueKind,
};

fn main() {
    let mut registry = bank::registry();
    // Small credits, so that credit(0) shows up in the stored cases.
    registry
        .register_parameter_generator(
            "Account",
            "credit",
            &[ValueKind::Int32],
            0,
            ParameterGenerator::new("small_credit", |_, rng| Value::Int(rng.gen_range(0..=3))),
        )
        .unwrap();
    let (artifact, generated) = generate(&registry, "TestBank", 200, 40, 7).unwrap();

    let dir = std::env::temp_dir().join("seqgen-replay-example");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("TestBank.json");
    write_artifact(&artifact, &path).unwrap();
    let stored = read_artifact(&path).unwrap();

    let same = replay(&stored, &registry);
    println!(
        "same contracts: {} errors, {} inconclusive (generation had {} errors)",
        same.report.errors(),
        same.report.inconclusive(),
        generated.errors()
    );

    let changed = bank::registry_with(&BankOptions {
        credit_min_amount: 1,
        ..Default::default()
    });
    let after = replay(&stored, &changed);
    if after.digest_drift() {
        println!(
            "registry digest changed: {} -> {}",
            after.artifact_digest, after.registry_digest
        );
    }
    println!(
        "credit amount >= 1: {} errors, {} inconclusive, {} pass",
        after.report.errors(),
        after.report.inconclusive(),
        after.report.passes()
    );
    for v in after
        .report
        .verdicts
        .iter()
        .filter(|v| v.is_inconclusive())
        .take(3)
    {
        if let Outcome::Inconclusive { step, reason } = &v.outcome {
            println!("  {} step {step}: {reason}", v.test_id);
        }
    }

    let fixed = replay(&stored, &bank::fixed_registry());
    println!(
        "fixed contracts: {} errors, {} inconclusive",
        fixed.report.errors(),
        fixed.report.inconclusive()
    );
}
