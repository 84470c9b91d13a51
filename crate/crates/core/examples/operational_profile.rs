//! Shape the call distribution with weights and a parameter generator.

use seqgen::corpus::{bank, counter};
use seqgen::{generate, Registry, ValueKind};

fn debit_counts(registry: &Registry) -> (u64, u64) {
    let (_, report) = generate(registry, "TestBank", 200, 50, 1).unwrap();
    let s = report.stats.get("Account.debit(int)");
    (s.selected, s.precondition_rejections)
}

/// Only debits, on accounts built by the constructor. A registry is frozen
/// once used, so each profile starts from a fresh one.
fn debits_only() -> Registry {
    let mut reg = bank::registry();
    reg.set_type_weight("History", 0.0).unwrap();
    reg.change_all_methods_weight("Account", 0.0).unwrap();
    reg.change_method_weight("Account", "debit", Some(&[ValueKind::Int32]), 1.0)
        .unwrap();
    reg
}

fn main() {
    let counter = counter::registry(10.0, 1.0);
    let (artifact, _) = generate(&counter, "TestCounter", 100, 50, 0).unwrap();
    let count = |op: &str| {
        artifact
            .tests
            .iter()
            .flat_map(|t| &t.steps)
            .filter(|s| s.operation == op)
            .count()
    };
    println!(
        "inc weighted 10, bump weighted 1: {} inc, {} bump",
        count("inc"),
        count("bump")
    );

    let (selected, rejected) = debit_counts(&debits_only());
    println!("uniform amounts: {rejected} of {selected} debits rejected by the precondition");

    // Amounts drawn from the range the precondition admits.
    let mut ranged = debits_only();
    bank::register_debit_range(&mut ranged).unwrap();
    let (selected, rejected) = debit_counts(&ranged);
    println!("ranged amounts: {rejected} of {selected} debits rejected by the precondition");
}
