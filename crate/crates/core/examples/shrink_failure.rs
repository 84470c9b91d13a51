//! Find a failing test case and reduce it to a minimal one.

use seqgen::corpus::bank;
use seqgen::{generate, render_test_source, shrink, ShrinkOptions, ShrinkTarget};

fn main() {
    let registry = bank::registry();
    let (artifact, report) = generate(&registry, "TestBank", 200, 60, 3).unwrap();

    // The longest failing case makes the reduction visible.
    let Some((test, failure)) = artifact
        .tests
        .iter()
        .zip(&report.verdicts)
        .filter_map(|(t, v)| v.failure().map(|f| (t, f)))
        .max_by_key(|(t, _)| t.steps.len())
    else {
        println!("no failures with this seed");
        return;
    };

    let target = ShrinkTarget::from(failure);
    let result = shrink(
        test,
        &target,
        &registry,
        ShrinkOptions {
            shrink_values: true,
            ..Default::default()
        },
    )
    .unwrap();

    println!(
        "{}: {} violation of {} reproduced in {} of {} steps ({} executions)",
        result.test_id,
        result.kind.as_str(),
        result.contract,
        result.minimal_len,
        result.original_len,
        result.iterations
    );
    print!("{}", render_test_source(&result.to_test_case()));
}
