//! Generate test cases for the bank corpus and print the report.
//!
//! `cargo run --example bank_generate -- [seed]`

use seqgen::corpus::bank::{self, classify_fault};
use seqgen::{generate, render_report, render_test_source, threshold_probability};

fn main() {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);

    let mut registry = bank::registry();
    // One account per test case puts every call on the same object.
    registry
        .change_creation_probability("Account", threshold_probability(1).unwrap())
        .unwrap();

    let (artifact, report) = generate(&registry, "TestBank", 100, 50, seed).unwrap();
    print!("{}", render_report(&report));

    let first = artifact
        .tests
        .iter()
        .zip(&report.verdicts)
        .find_map(|(t, v)| v.failure().map(|f| (t, f)));
    if let Some((test, failure)) = first {
        println!("\nfirst failure ({:?}):", classify_fault(test, failure));
        print!("{}", render_test_source(test));
    }
}
