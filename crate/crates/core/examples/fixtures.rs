//! A fixture that opens every test case with a shared account.
//!
//! Setup calls are recorded as the first steps of each test case and are
//! never removed by shrinking. Teardown runs after the last call.

use seqgen::corpus::bank;
use seqgen::{generate, render_test_source, Arg, Fixture};

fn main() {
    let mut registry = bank::registry();
    registry
        .set_fixture(
            Fixture::new("opened_account")
                .setup(|fx| {
                    let account = fx.construct("Account", &[Arg::Int(100), Arg::Int(0)])?;
                    fx.invoke(&account, "credit", &[Arg::Int(50)])?;
                    Ok(())
                })
                .teardown(|td| {
                    let open = td.objects_of("Account").len();
                    if open == 0 {
                        return Err("fixture account vanished".into());
                    }
                    Ok(())
                }),
        )
        .unwrap();

    let (artifact, report) = generate(&registry, "TestBank", 20, 10, 5).unwrap();
    println!(
        "{} tests, {} errors, {} harness errors",
        report.tests(),
        report.errors(),
        report
            .verdicts
            .iter()
            .filter(|v| v.harness_error.is_some())
            .count()
    );
    let test = &artifact.tests[0];
    println!("{} setup steps:", test.setup_steps);
    print!("{}", render_test_source(test));
}
