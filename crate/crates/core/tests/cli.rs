use std::path::Path;
use std::process::{Command, Output};

use seqgen::artifact::{read_artifact, write_artifact};
use seqgen::corpus::bank;

fn seqgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqgen"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_bank_finds_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bank.json");
    let o = seqgen(&[
        "generate",
        "--corpus",
        "bank",
        "--tests",
        "100",
        "--attempts",
        "50",
        "--seed",
        "7",
        "--out",
        p(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    assert!(text.contains("Number of tests: 100"));
    assert!(text.contains("Error detected in TestBank"));
    assert_eq!(read_artifact(&out).unwrap().tests.len(), 100);
    let report = std::fs::read_to_string(dir.path().join("bank.json.report.txt")).unwrap();
    assert_eq!(report, text);
}

#[test]
fn fixed_corpus_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fixed.json");
    let o = seqgen(&[
        "generate",
        "--corpus",
        "bank-fixed",
        "--seed",
        "7",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("Number of errors: 0"));
}

#[test]
fn invalid_configuration_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    for args in [
        vec!["generate", "--tests", "-1", "--out", p(&out)],
        vec!["generate", "--attempts", "0", "--out", p(&out)],
        vec!["generate", "--corpus", "nosuch", "--out", p(&out)],
        vec!["generate", "--weight", "Account.nosuch=1", "--out", p(&out)],
        vec!["generate", "--threshold", "Account=0", "--out", p(&out)],
        vec![
            "generate",
            "--weight",
            "Account.Account=0",
            "--weight",
            "History.History=0",
            "--out",
            p(&out),
        ],
        vec!["replay", "/nonexistent/file.json"],
        vec!["frobnicate"],
    ] {
        let o = seqgen(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("a.json");
    std::fs::write(
        &cfg,
        format!(
            "corpus = \"bank\"\ntests = 3\nattempts = 10\nseed = 1\nout = \"{}\"\n",
            p(&out)
        ),
    )
    .unwrap();
    let o = seqgen(&["generate", "--config", p(&cfg), "--tests", "4"]);
    assert!(o.status.code() == Some(0) || o.status.code() == Some(1));
    let art = read_artifact(&out).unwrap();
    assert_eq!(art.tests.len(), 4);
    assert_eq!(art.header.attempts_per_test, 10);

    std::fs::write(&cfg, "tests = 3\nbogus = 1\n").unwrap();
    assert_eq!(
        seqgen(&["generate", "--config", p(&cfg)]).status.code(),
        Some(2)
    );
}

#[test]
fn replay_matches_generation_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.json");
    let g = seqgen(&["generate", "--tests", "40", "--seed", "3", "--out", p(&out)]);
    let r = seqgen(&["replay", p(&out), "--corpus", "bank", "--parallel"]);
    assert_eq!(g.status.code(), r.status.code());
    assert_eq!(stdout(&g), stdout(&r));
}

#[test]
fn replay_warns_on_drift_and_staleness() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("faults.json");
    write_artifact(&bank::fault_listings(&bank::registry()), &out).unwrap();
    let o = seqgen(&["replay", p(&out), "--corpus", "bank-fixed"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(
        text.starts_with("WARNING: this artifact was generated against a different configuration.")
    );
    assert!(text.contains("Number of inconclusive tests: 3"));
    assert!(text.contains("3 of 3 test cases are inconclusive"));

    let o = seqgen(&["replay", p(&out), "--corpus", "bank"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!stdout(&o).contains("WARNING"));
}

#[test]
fn shrink_command() {
    let dir = tempfile::tempdir().unwrap();
    let art_path = dir.path().join("faults.json");
    let mut art = bank::fault_listings(&bank::registry());
    let mut padded = bank::set_min_cancel_listing();
    padded.id = "padded".into();
    padded.steps.insert(1, padded.steps[0].clone());
    padded.steps[1].bind = Some("ob9".into());
    art.tests.push(padded);
    write_artifact(&art, &art_path).unwrap();

    let min_path = dir.path().join("min.json");
    let o = seqgen(&["shrink", p(&art_path), "padded", "--out", p(&min_path)]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    assert!(text.contains("in 4 of 5 steps"), "{text}");
    assert!(text.contains("Account ob1 = new Account(-50, -100);"));
    assert!(text.contains("ob1.cancel();"));
    let min = read_artifact(&min_path).unwrap();
    assert_eq!(min.tests.len(), 1);
    assert_eq!(min.tests[0].steps.len(), 4);

    let o = seqgen(&[
        "shrink",
        p(&art_path),
        "padded",
        "--budget",
        "1",
        "--out",
        p(&min_path),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("in 5 of 5 steps (1 executions, budget exhausted)"));

    // A passing test case and an unknown id are refused.
    let pass_path = dir.path().join("pass.json");
    let (gen, rep) = seqgen::generate(&bank::fixed_registry(), "P", 3, 10, 0).unwrap();
    assert!(rep.verdicts.iter().all(|v| v.is_pass()));
    write_artifact(&gen, &pass_path).unwrap();
    assert_eq!(
        seqgen(&["shrink", p(&pass_path), "test1", "--corpus", "bank-fixed"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        seqgen(&["shrink", p(&art_path), "nosuch"]).status.code(),
        Some(2)
    );
}

#[test]
fn report_command_lists_sources() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("faults.json");
    write_artifact(&bank::fault_listings(&bank::registry()), &path).unwrap();
    let o = seqgen(&["report", p(&path), "--test", "credit_overflow"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "// credit_overflow\nAccount ob1 = new Account(250000000, 0);\nob1.credit(2000000000);\n"
    );
}
